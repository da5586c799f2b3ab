"""Command-line front end.

Exit codes: 0 success, 1 domain or configuration error, 2 I/O or parse error.
Paths of the form ``builtin:<name>`` refer to files shipped in the package's
``data`` directory, e.g. ``builtin:workloads/reference_38p7.json``.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .conv import ConvParams, load_kernel, run_conv_layer
from .energy import EnergyProfile, Workload, compare_workload
from .exceptions import ConfigError, SpikewattError
from .nature import REPORT_COLUMNS, load_grid_profiles, nature_report, parse_run_log
from .plasticity import train_pattern_detector
from .serialization import (
    ArtifactWriter,
    dump_json,
    load_json,
    load_pattern_config,
    load_spikes,
    rows_to_csv,
    rows_to_text,
    spikes_to_csv,
)
from .spikes import rate_encode

DEFAULT_SEED = 0
ENERGY_COLUMNS = ("workload", "macs", "events", "ann_joules", "snn_joules", "ratio")
REPORT_FIELDS = ("hit_rate", "false_alarm_rate", "synaptic_events", "output_spikes",
                 "steps", "train_hit_rate", "train_false_alarm_rate", "seed")
COUNT_FIELDS = ("synaptic_events", "output_spikes", "steps")


def resolve(path):
    path = str(path)
    if path.startswith("builtin:"):
        return Path(str(resources.files("spikewatt") / "data" / path[len("builtin:"):]))
    return Path(path)


def _ext(args):
    return "json" if args.format == "structured" else "csv"


def _record(args, row, columns):
    if args.format == "structured":
        return dump_json({k: row[k] for k in columns})
    return rows_to_csv([row], columns)


def cmd_train_stdp(args):
    config = load_pattern_config(resolve(args.config), seed=args.seed)
    weights, report = train_pattern_detector(config)
    out = Path(args.output_dir)
    row = {**report.as_dict(), "seed": config.seed}
    writer = ArtifactWriter()
    writer.stage(out / f"report.{_ext(args)}", _record(args, row, REPORT_FIELDS))
    writer.stage(out / "weights.csv", "weight\n" + "".join(f"{w!r}\n" for w in weights.tolist()))
    writer.stage(out / f"event_counts.{_ext(args)}", _record(args, row, COUNT_FIELDS))
    paths = writer.commit()
    print(f"hit_rate={report.hit_rate:.3f} false_alarm_rate={report.false_alarm_rate:.3f} "
          f"synaptic_events={report.synaptic_events} output_spikes={report.output_spikes}")
    return paths


def cmd_simulate_conv(args):
    kernel = load_kernel(resolve(args.kernel))
    if args.spikes:
        inputs = load_spikes(resolve(args.spikes))
    else:
        missing = [f"--{n}" for n in ("height", "width") if getattr(args, n) is None]
        if missing:
            raise ConfigError(f"either --spikes or {' and '.join(missing)} is required")
        values = np.full((args.height, args.width), args.rate)
        seed = DEFAULT_SEED if args.seed is None else args.seed
        inputs = rate_encode(values, args.steps, 1.0, seed)
    gamma = float("inf") if args.no_fire else args.gamma
    spikes, _, counts = run_conv_layer(inputs, kernel, ConvParams(gamma, args.fire_once))
    out = Path(args.output_dir)
    writer = ArtifactWriter()
    writer.stage(out / "conv_spikes.csv", spikes_to_csv(spikes))
    writer.stage(out / f"conv_counts.{_ext(args)}", _record(args, counts.as_dict(), COUNT_FIELDS))
    paths = writer.commit()
    print(f"input_spikes={inputs.count()} output_spikes={counts.output_spikes} "
          f"synaptic_events={counts.synaptic_events}")
    return paths


def cmd_compare_energy(args):
    workloads = Workload.load(resolve(args.workload))
    profile = EnergyProfile.load(resolve(args.profile))
    rows = [compare_workload(w, profile, seed=args.seed) for w in workloads]
    for row in rows:
        if row["ratio"] is None:
            row["ratio"] = "unbounded"
    output = Path(args.output) if args.output else Path(args.output_dir) / f"energy_comparison.{_ext(args)}"
    if args.format == "structured":
        text = dump_json({"profile": profile.as_dict(), "rows": rows})
    else:
        text = rows_to_csv(rows, ENERGY_COLUMNS)
    writer = ArtifactWriter()
    writer.stage(output, text)
    paths = writer.commit()
    sys.stdout.write(rows_to_text(rows, ENERGY_COLUMNS))
    return paths


def cmd_nature_report(args):
    log = parse_run_log(resolve(args.runlog))
    profiles = load_grid_profiles(resolve(args.grid_profiles))
    if args.region not in profiles:
        raise ConfigError(f"unknown region {args.region!r}; known regions: {sorted(profiles)}")
    overrides = load_json(resolve(args.overrides)) if args.overrides else None
    hardware = load_json(resolve(args.hardware)) if args.hardware else None
    if overrides is not None and not isinstance(overrides, dict):
        raise ConfigError("overrides file must be a table of key-value pairs")
    rows = nature_report(log, profiles[args.region], overrides, hardware)
    output = Path(args.output) if args.output else Path(args.output_dir) / f"nature_report.{_ext(args)}"
    if args.format == "structured":
        text = dump_json({"region": args.region, "unit": "kWh", "rows": rows})
    else:
        text = rows_to_csv(rows, REPORT_COLUMNS)
    writer = ArtifactWriter()
    writer.stage(output, text)
    paths = writer.commit()
    sys.stdout.write(rows_to_text(rows, REPORT_COLUMNS))
    return paths


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help=f"random seed (default: the config's seed, else {DEFAULT_SEED})")
    common.add_argument("--output-dir", default=".", help="directory for artifacts (default: .)")
    common.add_argument("--format", choices=("csv", "structured"), default="csv",
                        help="artifact format; structured writes JSON")

    parser = argparse.ArgumentParser(prog="spikewatt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-stdp", parents=[common], help="train an STDP pattern detector")
    p.add_argument("config", help="pattern experiment config (JSON)")
    p.set_defaults(func=cmd_train_stdp)

    p = sub.add_parser("simulate-conv", parents=[common], help="run a spiking convolution layer")
    p.add_argument("--kernel", required=True, help="kernel text file")
    p.add_argument("--spikes", help="input spike train (binary or CSV event file)")
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--rate", type=float, default=0.1, help="Bernoulli spike probability per step")
    p.add_argument("--gamma", type=float, default=1.0, help="firing threshold")
    p.add_argument("--fire-once", action="store_true", help="each site fires at most once")
    p.add_argument("--no-fire", action="store_true", help="disable firing (gamma = inf)")
    p.set_defaults(func=cmd_simulate_conv)

    p = sub.add_parser("compare-energy", parents=[common], help="dense MAC vs spiking event energy")
    p.add_argument("workload", help="workload spec (JSON object or list of objects)")
    p.add_argument("--profile", default="builtin:profiles/cmos45nm.json", help="energy profile (JSON)")
    p.add_argument("--output", help="output file (default: <output-dir>/energy_comparison.<ext>)")
    p.set_defaults(func=cmd_compare_energy)

    p = sub.add_parser("nature-report", parents=[common], help="NATURE score and CO2e from a run log")
    p.add_argument("runlog", help="run-log CSV")
    p.add_argument("--region", required=True, help="grid region id")
    p.add_argument("--grid-profiles", default="builtin:grid_profiles.json")
    p.add_argument("--overrides", help="JSON of values for quantities the log lacks")
    p.add_argument("--hardware", help="JSON of declared power draws (kW)")
    p.add_argument("--output", help="output file (default: <output-dir>/nature_report.<ext>)")
    p.set_defaults(func=cmd_nature_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except SpikewattError as exc:
        print(f"spikewatt: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"spikewatt: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
