from __future__ import annotations

from dataclasses import dataclass

from .exceptions import DomainError


@dataclass(frozen=True)
class EventCounts:
    """Operation tallies for one spiking run; additive over disjoint time spans."""

    synaptic_events: int = 0
    output_spikes: int = 0
    steps: int = 0

    def __post_init__(self):
        for name in ("synaptic_events", "output_spikes", "steps"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise DomainError(f"{name} must be a nonnegative integer, got {value!r}")
            object.__setattr__(self, name, int(value))

    def __add__(self, other):
        if not isinstance(other, EventCounts):
            return NotImplemented
        return EventCounts(
            self.synaptic_events + other.synaptic_events,
            self.output_spikes + other.output_spikes,
            self.steps + other.steps,
        )

    def as_dict(self):
        return {
            "synaptic_events": self.synaptic_events,
            "output_spikes": self.output_spikes,
            "steps": self.steps,
        }
