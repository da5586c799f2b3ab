"""Spike trains, rate encoding and single-neuron threshold dynamics.

Time is discrete. A :class:`SpikeTrainGrid` stores binary events as a
``(steps, height, width)`` array; a 1-D afferent population of ``N`` inputs
uses shape ``(N, 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .counts import EventCounts
from .exceptions import ConfigError, DomainError, ShapeError


class SpikeTrainGrid:
    """Binary spike events over ``steps`` discrete time steps on a 2-D site grid."""

    __slots__ = ("events",)

    def __init__(self, events):
        arr = np.asarray(events)
        if arr.ndim == 2:
            # (steps, N) population
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ShapeError(f"spike events must be 2-D or 3-D, got {arr.ndim}-D")
        if min(arr.shape) < 1:
            raise ShapeError(f"steps and shape dimensions must be >= 1, got {arr.shape}")
        if arr.dtype != np.uint8:
            if not np.all((arr == 0) | (arr == 1)):
                raise DomainError("spike events must be exactly 0 or 1")
            arr = arr.astype(np.uint8)
        elif arr.max() > 1:
            raise DomainError("spike events must be exactly 0 or 1")
        self.events = arr

    @classmethod
    def zeros(cls, steps, shape):
        return cls(np.zeros((steps, *shape), dtype=np.uint8))

    @property
    def steps(self) -> int:
        return self.events.shape[0]

    @property
    def shape(self) -> tuple:
        return self.events.shape[1:]

    @property
    def n_sites(self) -> int:
        return self.shape[0] * self.shape[1]

    def flat(self) -> np.ndarray:
        """Events as a ``(steps, n_sites)`` view in row-major site order."""
        return self.events.reshape(self.steps, -1)

    def count(self) -> int:
        return int(self.events.sum(dtype=np.int64))

    def __eq__(self, other):
        if not isinstance(other, SpikeTrainGrid):
            return NotImplemented
        return np.array_equal(self.events, other.events)

    def __repr__(self):
        return f"SpikeTrainGrid(shape={self.shape}, steps={self.steps}, spikes={self.count()})"


def as_synapse_vector(weights) -> np.ndarray:
    """Validate synaptic weights: a nonempty 1-D float vector with entries in [0, 1]."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise ShapeError(f"weights must be a nonempty 1-D vector, got shape {w.shape}")
    if not np.all((w >= 0.0) & (w <= 1.0)):
        raise DomainError("every synaptic weight must lie in [0, 1]")
    return w


@dataclass(frozen=True)
class NeuronParams:
    threshold: float = 1.0
    leak: float = 0.0
    refractory_steps: int = 0

    def __post_init__(self):
        if not self.threshold > 0:
            raise ConfigError(f"threshold > 0 required, got {self.threshold}")
        if not 0.0 <= self.leak <= 1.0:
            raise ConfigError(f"leak ∈ [0,1] required, got {self.leak}")
        if int(self.refractory_steps) != self.refractory_steps or self.refractory_steps < 0:
            raise ConfigError(f"refractory_steps >= 0 required, got {self.refractory_steps}")


@dataclass(frozen=True)
class NeuronState:
    potential: float = 0.0
    last_spike_step: Optional[int] = None
    refractory_remaining: int = 0


def rate_encode(values, steps, max_rate=1.0, seed=0) -> SpikeTrainGrid:
    """Bernoulli rate coding: site ``(u, v)`` spikes each step with probability ``value * max_rate``.

    A 1-D ``values`` vector is encoded as an ``(N, 1)`` population.
    """
    vals = np.asarray(values, dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    if vals.ndim != 2 or vals.size == 0:
        raise ShapeError(f"values must be a nonempty 1-D or 2-D grid, got shape {vals.shape}")
    if not np.all((vals >= 0.0) & (vals <= 1.0)):
        raise DomainError("rate_encode values must lie in [0, 1]")
    if not 0.0 <= max_rate <= 1.0:
        raise DomainError(f"max_rate must lie in [0, 1], got {max_rate}")
    if int(steps) != steps or steps < 1:
        raise DomainError(f"steps must be a positive integer, got {steps}")
    rng = np.random.default_rng(seed)
    draws = rng.random((int(steps), *vals.shape))
    return SpikeTrainGrid((draws < vals * max_rate).astype(np.uint8))


def postsynaptic_potential(weights, spikes_at_t) -> float:
    """Weighted sum of the inputs that spike at this step."""
    w = np.asarray(weights, dtype=float)
    s = np.asarray(spikes_at_t).reshape(-1)
    if w.shape != s.shape:
        raise ShapeError(f"weights have length {w.size} but spike vector has length {s.size}")
    return float(w[s.astype(bool)].sum())


def step_neuron(state: NeuronState, params: NeuronParams, input_potential: float, step: int):
    """Advance one neuron by one step. Returns ``(new_state, spiked)``.

    While refractory the input is ignored. A potential reaching the threshold
    (``>=``) emits a spike and resets the potential to zero.
    """
    if state.refractory_remaining > 0:
        return replace(
            state,
            potential=params.leak * state.potential,
            refractory_remaining=state.refractory_remaining - 1,
        ), False
    potential = params.leak * state.potential + input_potential
    if potential >= params.threshold:
        return NeuronState(0.0, step, int(params.refractory_steps)), True
    return replace(state, potential=potential), False


def run_population(inputs: SpikeTrainGrid, weights, params: NeuronParams, trace=False):
    """Drive one neuron from an afferent population over every step of ``inputs``.

    Returns ``(output, counts)`` where ``output`` is a ``(1, 1)`` spike train
    with the same step count. With ``trace=True`` a third element holds the
    pre-reset potential at each step.
    """
    w = as_synapse_vector(weights)
    flat = inputs.flat()
    if flat.shape[1] != w.size:
        raise ShapeError(f"inputs have {flat.shape[1]} sites but weights have length {w.size}")
    out = np.zeros((inputs.steps, 1, 1), dtype=np.uint8)
    potentials = np.zeros(inputs.steps)
    state = NeuronState()
    for t in range(inputs.steps):
        psp = postsynaptic_potential(w, flat[t])
        if state.refractory_remaining == 0:
            potentials[t] = params.leak * state.potential + psp
        else:
            potentials[t] = params.leak * state.potential
        state, spiked = step_neuron(state, params, psp, t)
        out[t, 0, 0] = spiked
    counts = EventCounts(
        synaptic_events=int(flat.sum(dtype=np.int64)),
        output_spikes=int(out.sum(dtype=np.int64)),
        steps=inputs.steps,
    )
    output = SpikeTrainGrid(out)
    if trace:
        return output, counts, potentials
    return output, counts


class RateEncoder(TransformerMixin, BaseEstimator):
    """Stateless transformer turning analog rows in [0, 1] into Bernoulli spike trains.

    ``transform`` maps an ``(n_samples, n_features)`` array to a
    ``(n_samples, steps, n_features)`` uint8 array. Each sample draws from its
    own stream seeded by ``(random_state, sample index)``.
    """

    def __init__(self, steps=100, max_rate=1.0, random_state=0):
        self.steps = steps
        self.max_rate = max_rate
        self.random_state = random_state

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ShapeError(f"expected a 2-D array, got {X.ndim}-D")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ShapeError(f"expected a 2-D array, got {X.ndim}-D")
        if hasattr(self, "n_features_in_") and X.shape[1] != self.n_features_in_:
            raise ShapeError(
                f"X has {X.shape[1]} features, but RateEncoder was fitted with {self.n_features_in_}"
            )
        out = np.empty((X.shape[0], self.steps, X.shape[1]), dtype=np.uint8)
        for i, row in enumerate(X):
            grid = rate_encode(row, self.steps, self.max_rate, seed=[self.random_state, i])
            out[i] = grid.flat()
        return out

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.requires_fit = False
        return tags
