"""Environmental-cost score of ML training runs and its CO2e conversion.

    NATURE = N_exp * [A + T * (U_datacenter + R_grid + E_hardware) * epochs]

Units: the three power terms are average draws in kW, ``T`` is wall-clock
seconds per epoch (converted to hours), ``A`` is a per-experiment overhead in
kWh. The score is therefore in kWh. The three draws are summed as written,
not composed multiplicatively.
"""

from __future__ import annotations

import csv
import io
import json
import math
from numbers import Real
from dataclasses import dataclass, fields
from typing import Optional

from .exceptions import ConfigError, DomainError, IncompleteInputError, ParseError

KG_TO_LB = 2.20462
SECONDS_PER_HOUR = 3600.0

# field name -> symbol used in messages and reports
SYMBOLS = {
    "n_exp": "N_exp",
    "a_overhead": "A",
    "t_seconds": "T",
    "u_datacenter": "U_datacenter",
    "r_grid": "R_grid",
    "e_hardware": "E_hardware",
    "epochs": "epochs",
}


@dataclass(frozen=True)
class NatureInputs:
    n_exp: int
    a_overhead: float
    t_seconds: float
    u_datacenter: float
    r_grid: float
    e_hardware: float
    epochs: int

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, Real) or isinstance(value, bool) or not math.isfinite(value):
                raise DomainError(f"{SYMBOLS[f.name]} must be a finite number, got {value!r}")
            if value < 0:
                raise DomainError(f"{SYMBOLS[f.name]} must be >= 0, got {value}")
        for name in ("n_exp", "epochs"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise DomainError(f"{SYMBOLS[name]} must be an integer >= 1, got {value}")


def nature_score(inputs: NatureInputs) -> float:
    """Total energy in kWh over all experiments."""
    power_kw = inputs.u_datacenter + inputs.r_grid + inputs.e_hardware
    hours = inputs.t_seconds / SECONDS_PER_HOUR
    return inputs.n_exp * (inputs.a_overhead + hours * power_kw * inputs.epochs)


@dataclass(frozen=True)
class GridProfile:
    region: str
    kg_co2e_per_kwh: float

    def __post_init__(self):
        if not (math.isfinite(self.kg_co2e_per_kwh) and self.kg_co2e_per_kwh >= 0):
            raise ConfigError(
                f"carbon intensity of region {self.region!r} must be >= 0, got {self.kg_co2e_per_kwh}"
            )


def load_grid_profiles(path) -> dict:
    """Read ``{"regions": {region_id: {"kg_co2e_per_kwh": x, ...}}}``."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg})", exc.lineno) from None
    regions = data.get("regions") if isinstance(data, dict) else None
    if not isinstance(regions, dict):
        raise ParseError(f"{path}: expected a top-level 'regions' table")
    profiles = {}
    for region, entry in regions.items():
        if not isinstance(entry, dict) or "kg_co2e_per_kwh" not in entry:
            raise ParseError(f"{path}: region {region!r} lacks 'kg_co2e_per_kwh'")
        profiles[region] = GridProfile(region, float(entry["kg_co2e_per_kwh"]))
    return profiles


def co2e_from_energy(kwh: float, grid: GridProfile) -> float:
    """Kilograms of CO2-equivalent for ``kwh`` drawn from ``grid``."""
    if not kwh >= 0:
        raise DomainError(f"energy must be >= 0 kWh, got {kwh}")
    return kwh * grid.kg_co2e_per_kwh


def kg_to_lb(kg: float) -> float:
    return kg * KG_TO_LB


# ---------------------------------------------------------------------------
# run logs

LOG_COLUMNS = (
    "experiment_id",
    "epochs",
    "seconds_per_epoch",
    "u_datacenter_kw",
    "r_grid_kw",
    "e_hardware_kw",
)
OPTIONAL_COLUMNS = ("n_exp", "a_overhead_kwh")
REQUIRED_COLUMNS = ("experiment_id", "epochs")

# log column -> NatureInputs field
COLUMN_FIELDS = {
    "epochs": "epochs",
    "seconds_per_epoch": "t_seconds",
    "u_datacenter_kw": "u_datacenter",
    "r_grid_kw": "r_grid",
    "e_hardware_kw": "e_hardware",
    "n_exp": "n_exp",
    "a_overhead_kwh": "a_overhead",
}


@dataclass(frozen=True)
class RunRecord:
    """One experiment row. ``None`` marks a quantity the log does not provide."""

    experiment_id: str
    epochs: int
    seconds_per_epoch: Optional[float] = None
    u_datacenter_kw: Optional[float] = None
    r_grid_kw: Optional[float] = None
    e_hardware_kw: Optional[float] = None
    n_exp: Optional[int] = None
    a_overhead_kwh: Optional[float] = None


@dataclass(frozen=True)
class RunLog:
    records: tuple

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def parse_run_log(source) -> RunLog:
    """Parse a run-log CSV from a path or a text stream.

    The header must contain ``experiment_id`` and ``epochs``; the other
    documented columns may be absent or left blank, which marks the value as
    missing. Line numbers in errors count the header as line 1.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, newline="") as fh:
            return _parse_rows(fh)
    return _parse_rows(source)


def _parse_rows(stream) -> RunLog:
    reader = csv.reader(stream)
    header = None
    for row in reader:
        if any(cell.strip() for cell in row):
            header = [cell.strip() for cell in row]
            break
    if header is None:
        raise ParseError("no records")
    header_line = reader.line_num
    known = set(LOG_COLUMNS) | set(OPTIONAL_COLUMNS)
    unknown = [c for c in header if c not in known]
    if unknown:
        raise ParseError(f"unknown column(s) {unknown}", header_line)
    if len(set(header)) != len(header):
        raise ParseError("duplicate column names", header_line)
    for col in REQUIRED_COLUMNS:
        if col not in header:
            raise ParseError(f"missing required column {col!r}", header_line)

    records, seen = [], set()
    for row in reader:
        line = reader.line_num
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line)
        cells = dict(zip(header, (c.strip() for c in row)))
        exp_id = cells["experiment_id"]
        if not exp_id:
            raise ParseError("empty experiment_id", line)
        if exp_id in seen:
            raise ParseError(f"duplicate experiment_id {exp_id!r}", line)
        seen.add(exp_id)
        values = {"experiment_id": exp_id}
        for col in header:
            if col == "experiment_id":
                continue
            values[col] = _parse_cell(col, cells[col], line)
        if values.get("epochs") is None:
            raise ParseError("epochs is required", line)
        if values["epochs"] < 1:
            raise DomainError(f"line {line}: epochs must be >= 1, got {values['epochs']}")
        if values.get("n_exp") is not None and values["n_exp"] < 1:
            raise DomainError(f"line {line}: n_exp must be >= 1, got {values['n_exp']}")
        records.append(RunRecord(**values))
    if not records:
        raise ParseError("no records")
    return RunLog(tuple(records))


def _parse_cell(column, text, line):
    if text == "":
        return None
    integer = column in ("epochs", "n_exp")
    try:
        value = int(text) if integer else float(text)
    except ValueError:
        kind = "an integer" if integer else "a number"
        raise ParseError(f"{column} must be {kind}, got {text!r}", line) from None
    if not math.isfinite(value):
        raise ParseError(f"{column} must be finite, got {text!r}", line)
    if value < 0:
        raise DomainError(f"line {line}: {column} must be >= 0, got {text}")
    return value


def write_run_log(log: RunLog, stream=None) -> str:
    """Serialise ``log`` in the run-log CSV schema; returns the text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    columns = LOG_COLUMNS + OPTIONAL_COLUMNS
    writer.writerow(columns)
    for rec in log:
        writer.writerow(["" if getattr(rec, c) is None else _fmt(getattr(rec, c)) for c in columns])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def _fmt(value):
    return repr(value) if isinstance(value, float) else str(value)


# ---------------------------------------------------------------------------
# assembling inputs


def build_nature_inputs(record: RunRecord, overrides=None, hardware=None):
    """Map a log record onto :class:`NatureInputs`.

    Each quantity comes from the log when present, then from ``hardware``
    (declared power draws), then from ``overrides``. Nothing is defaulted: a
    quantity found in none of them raises :class:`IncompleteInputError`
    naming its symbol. Both mappings are keyed by :class:`NatureInputs` field
    names.

    Returns ``(inputs, provenance)`` where ``provenance`` maps each field to
    ``"log"``, ``"hardware"`` or ``"override"``.
    """
    overrides = overrides or {}
    hardware = hardware or {}
    for source_name, mapping in (("override", overrides), ("hardware", hardware)):
        unknown = set(mapping) - set(SYMBOLS)
        if unknown:
            raise ConfigError(f"unknown {source_name} keys: {sorted(unknown)}")

    from_log = {field: getattr(record, col) for col, field in COLUMN_FIELDS.items()}
    values, provenance, missing = {}, {}, []
    for name in SYMBOLS:
        for source, mapping in (("log", from_log), ("hardware", hardware), ("override", overrides)):
            value = mapping.get(name)
            if value is not None:
                values[name] = value
                provenance[name] = source
                break
        else:
            missing.append(name)
    if missing:
        symbols = ", ".join(SYMBOLS[m] for m in missing)
        raise IncompleteInputError(
            f"experiment {record.experiment_id!r} is missing {symbols}; "
            "supply it in the run log or an override",
            missing=[SYMBOLS[m] for m in missing],
        )
    return NatureInputs(**values), provenance


def overrides_for(overrides_doc, experiment_id):
    """Merge global and per-experiment entries of an overrides document.

    The document is ``{field: value, ..., "experiments": {id: {field: value}}}``;
    per-experiment entries win.
    """
    if not overrides_doc:
        return {}
    merged = {k: v for k, v in overrides_doc.items() if k != "experiments"}
    merged.update((overrides_doc.get("experiments") or {}).get(experiment_id, {}))
    return merged


REPORT_COLUMNS = (
    "experiment_id",
    "n_exp",
    "a_overhead_kwh",
    "seconds_per_epoch",
    "u_datacenter_kw",
    "r_grid_kw",
    "e_hardware_kw",
    "epochs",
    "nature_kwh",
    "co2e_kg",
    "co2e_lb",
    "provenance",
)


def nature_report(log: RunLog, grid: GridProfile, overrides_doc=None, hardware=None):
    """Per-experiment rows plus a final ``TOTAL`` row summing energy and CO2e."""
    rows = []
    for rec in log:
        inputs, prov = build_nature_inputs(rec, overrides_for(overrides_doc, rec.experiment_id), hardware)
        kwh = nature_score(inputs)
        kg = co2e_from_energy(kwh, grid)
        rows.append({
            "experiment_id": rec.experiment_id,
            "n_exp": inputs.n_exp,
            "a_overhead_kwh": inputs.a_overhead,
            "seconds_per_epoch": inputs.t_seconds,
            "u_datacenter_kw": inputs.u_datacenter,
            "r_grid_kw": inputs.r_grid,
            "e_hardware_kw": inputs.e_hardware,
            "epochs": inputs.epochs,
            "nature_kwh": kwh,
            "co2e_kg": kg,
            "co2e_lb": kg_to_lb(kg),
            "provenance": ";".join(f"{SYMBOLS[k]}={v}" for k, v in prov.items()),
        })
    total_kwh = math.fsum(r["nature_kwh"] for r in rows)
    total_kg = co2e_from_energy(total_kwh, grid)
    rows.append({
        **{c: "" for c in REPORT_COLUMNS},
        "experiment_id": "TOTAL",
        "nature_kwh": total_kwh,
        "co2e_kg": total_kg,
        "co2e_lb": kg_to_lb(total_kg),
        "provenance": f"region={grid.region}",
    })
    return rows
