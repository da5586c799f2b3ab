"""Operation counting for dense vs spiking convolution and conversion to joules."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from numbers import Integral

import numpy as np

from .conv import coverage, output_shape
from .counts import EventCounts
from .exceptions import ConfigError, DomainError, ParseError
from .spikes import SpikeTrainGrid, rate_encode

__all__ = [
    "EventCounts",
    "EnergyProfile",
    "Workload",
    "count_macs_dense_conv",
    "count_synaptic_events",
    "estimate_energy",
    "efficiency_ratio",
    "compare_workload",
]

PICO = 1e-12


@dataclass(frozen=True)
class EnergyProfile:
    """Per-operation energy costs in joules.

    The defaults are the 45 nm CMOS figures commonly quoted in the SNN
    literature: 4.6 pJ per 32-bit float MAC and 0.9 pJ per accumulate.
    """

    joules_per_mac: float = 4.6 * PICO
    joules_per_synaptic_event: float = 0.9 * PICO
    static_joules_per_step: float = 0.0

    def __post_init__(self):
        if not self.joules_per_mac > 0:
            raise ConfigError(f"joules_per_mac > 0 required, got {self.joules_per_mac}")
        if not self.joules_per_synaptic_event > 0:
            raise ConfigError(
                f"joules_per_synaptic_event > 0 required, got {self.joules_per_synaptic_event}"
            )
        if not self.static_joules_per_step >= 0:
            raise ConfigError(f"static_joules_per_step >= 0 required, got {self.static_joules_per_step}")

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - {"name", "joules_per_mac", "joules_per_synaptic_event", "static_joules_per_step"}
        if unknown:
            raise ConfigError(f"unknown energy profile keys: {sorted(unknown)}")
        missing = {"joules_per_mac", "joules_per_synaptic_event"} - set(data)
        if missing:
            raise ConfigError(f"energy profile is missing {sorted(missing)}")
        return cls(
            float(data["joules_per_mac"]),
            float(data["joules_per_synaptic_event"]),
            float(data.get("static_joules_per_step", 0.0)),
        )

    @classmethod
    def load(cls, path):
        return cls.from_dict(_load_json(path))

    def as_dict(self):
        return asdict(self)


def count_macs_dense_conv(input_h, input_w, kernel_radius, steps) -> int:
    """MACs for a dense layer that evaluates every tap at every valid site every step."""
    for name, value in (("input_h", input_h), ("input_w", input_w), ("kernel_radius", kernel_radius), ("steps", steps)):
        if not isinstance(value, Integral) or value < 0:
            raise DomainError(f"{name} must be a nonnegative integer, got {value!r}")
    if kernel_radius < 1:
        raise DomainError(f"kernel_radius must be >= 1, got {kernel_radius}")
    if input_h <= 2 * kernel_radius or input_w <= 2 * kernel_radius:
        raise DomainError(
            f"input {input_h}x{input_w} is degenerate for kernel radius {kernel_radius}"
        )
    h_out, w_out = output_shape((input_h, input_w), kernel_radius)
    return int(h_out) * int(w_out) * (2 * kernel_radius + 1) ** 2 * int(steps)


def count_synaptic_events(inputs: SpikeTrainGrid, kernel_radius: int) -> int:
    """One event per (input spike, valid output site whose window contains it)."""
    if not isinstance(kernel_radius, Integral) or kernel_radius < 1:
        raise DomainError(f"kernel_radius must be an integer >= 1, got {kernel_radius!r}")
    h, w = inputs.shape
    output_shape((h, w), kernel_radius)
    per_site = np.outer(coverage(h, kernel_radius), coverage(w, kernel_radius))
    spikes_per_site = inputs.events.sum(axis=0, dtype=np.int64)
    return int((spikes_per_site * per_site).sum())


def estimate_energy(counts, profile: EnergyProfile, steps=0) -> float:
    """Joules for an :class:`EventCounts` (spiking) or an integer MAC count (dense).

    Static energy is ``static_joules_per_step`` times the step count; for a
    MAC count the steps come from the ``steps`` argument.
    """
    if isinstance(counts, EventCounts):
        dynamic = profile.joules_per_synaptic_event * counts.synaptic_events
        steps = counts.steps
    else:
        if not isinstance(counts, Integral) or counts < 0:
            raise DomainError(f"MAC count must be a nonnegative integer, got {counts!r}")
        dynamic = profile.joules_per_mac * counts
    if steps < 0:
        raise DomainError(f"steps must be >= 0, got {steps}")
    return dynamic + profile.static_joules_per_step * steps


def efficiency_ratio(ann_joules: float, snn_joules: float) -> float:
    """How many times less energy the spiking run needs: ``ann_joules / snn_joules``."""
    if not (ann_joules > 0 and snn_joules > 0):
        raise DomainError(
            f"efficiency_ratio needs positive energies, got ann={ann_joules}, snn={snn_joules}"
        )
    return ann_joules / snn_joules


@dataclass(frozen=True)
class Workload:
    """A rate-coded input driving one ``(2r+1)``-square spiking convolution."""

    name: str
    height: int
    width: int
    kernel_radius: int
    steps: int
    spike_rate: float
    seed: int = 0

    def __post_init__(self):
        for key in ("height", "width", "kernel_radius", "steps"):
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, Integral) or value < 1:
                raise ConfigError(f"workload {key} must be a positive integer, got {value!r}")
        if self.height <= 2 * self.kernel_radius or self.width <= 2 * self.kernel_radius:
            raise ConfigError(
                f"workload {self.height}x{self.width} is too small for kernel radius {self.kernel_radius}"
            )
        if not 0.0 <= self.spike_rate <= 1.0:
            raise ConfigError(f"spike_rate ∈ [0,1] required, got {self.spike_rate}")

    @classmethod
    def from_dict(cls, data, default_name="workload"):
        fields = {"name", "height", "width", "kernel_radius", "steps", "spike_rate", "seed"}
        unknown = set(data) - fields
        if unknown:
            raise ConfigError(f"unknown workload keys: {sorted(unknown)}")
        missing = fields - {"name", "seed"} - set(data)
        if missing:
            raise ConfigError(f"workload is missing {sorted(missing)}")
        return cls(
            name=str(data.get("name", default_name)),
            height=data["height"],
            width=data["width"],
            kernel_radius=data["kernel_radius"],
            steps=data["steps"],
            spike_rate=float(data["spike_rate"]),
            seed=int(data.get("seed", 0)),
        )

    @classmethod
    def load(cls, path):
        data = _load_json(path)
        items = data if isinstance(data, list) else [data]
        return [cls.from_dict(item) for item in items]

    def encode(self, seed=None) -> SpikeTrainGrid:
        values = np.full((self.height, self.width), self.spike_rate)
        return rate_encode(values, self.steps, max_rate=1.0, seed=self.seed if seed is None else seed)


def compare_workload(workload: Workload, profile: EnergyProfile, seed=None) -> dict:
    """Dense MAC energy vs spiking event energy for one workload.

    ``ratio`` is ``None`` when the spiking energy is zero (no spikes and no
    static power); the comparison is then unbounded.
    """
    macs = count_macs_dense_conv(workload.height, workload.width, workload.kernel_radius, workload.steps)
    grid = workload.encode(seed)
    events = count_synaptic_events(grid, workload.kernel_radius)
    ann = estimate_energy(macs, profile, steps=workload.steps)
    snn = estimate_energy(EventCounts(events, 0, workload.steps), profile)
    ratio = efficiency_ratio(ann, snn) if snn > 0 else None
    return {
        "workload": workload.name,
        "macs": macs,
        "events": events,
        "ann_joules": ann,
        "snn_joules": snn,
        "ratio": ratio,
    }


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg})", exc.lineno) from None
