"""Multiplicative soft-bound STDP and the fixed-pattern detection experiment.

The per-pair rule is ``dw = +a_plus * w * (1 - w)`` when the input spike
precedes or coincides with the output spike (``t_out - t_in >= 0``) and
``dw = -a_minus * w * (1 - w)`` otherwise. Updates are applied once per
output spike: a synapse whose latest input spike lies within ``window_steps``
before the output spike is potentiated, every other synapse is depressed.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .counts import EventCounts
from .exceptions import ConfigError, DomainError, ShapeError
from .spikes import (
    NeuronParams,
    NeuronState,
    SpikeTrainGrid,
    as_synapse_vector,
    run_population,
    step_neuron,
)

NEVER = np.iinfo(np.int64).min


@dataclass(frozen=True)
class StdpParams:
    a_plus: float = 0.03125
    a_minus: float = 0.75 * 0.03125
    window_steps: int = 20

    def __post_init__(self):
        if not 0.0 <= self.a_plus <= 1.0:
            raise ConfigError(f"a_plus ∈ [0,1] required, got {self.a_plus}")
        if not 0.0 <= self.a_minus <= 1.0:
            raise ConfigError(f"a_minus ∈ [0,1] required, got {self.a_minus}")
        if int(self.window_steps) != self.window_steps or self.window_steps < 1:
            raise ConfigError(f"window_steps >= 1 required, got {self.window_steps}")


def stdp_delta(w: float, dt: int, params: StdpParams) -> float:
    """Weight change for one (input, output) spike pair with ``dt = t_out - t_in``."""
    if not 0.0 <= w <= 1.0:
        raise DomainError(f"weight must lie in [0, 1], got {w}")
    if dt >= 0:
        return params.a_plus * w * (1.0 - w)
    return -params.a_minus * w * (1.0 - w)


def apply_stdp_on_output_spike(weights, last_input_spike_steps, t_out: int, params: StdpParams):
    """Return updated weights after an output spike at ``t_out``.

    ``last_input_spike_steps`` holds each synapse's most recent input spike
    step; ``None`` (or :data:`NEVER` in an integer array) means no spike yet.
    """
    w = as_synapse_vector(weights)
    last = np.array(
        [NEVER if s is None else s for s in last_input_spike_steps], dtype=np.int64
    )
    if last.shape != w.shape:
        raise ShapeError(f"{last.size} spike times for {w.size} synapses")
    if t_out < 0:
        raise DomainError(f"t_out must be >= 0, got {t_out}")
    return _stdp_update(w, last, t_out, params)


def _stdp_update(w, last, t_out, params):
    in_window = (last <= t_out) & (last >= t_out - params.window_steps)
    amp = np.where(in_window, params.a_plus, -params.a_minus)
    return w + amp * w * (1.0 - w)


class STDPPatternDetector(BaseEstimator):
    """Single threshold neuron whose afferent weights learn online by STDP.

    ``fit`` consumes one continuous spike stream of shape ``(steps, n_afferents)``
    and updates the weights at every output spike. ``predict`` runs the neuron
    with frozen weights and returns its output spike vector.
    """

    def __init__(
        self,
        threshold=15.0,
        leak=0.8,
        refractory_steps=0,
        a_plus=0.03125,
        a_minus=0.0234375,
        window_steps=20,
        init_low=0.3,
        init_high=0.7,
        random_state=0,
    ):
        self.threshold = threshold
        self.leak = leak
        self.refractory_steps = refractory_steps
        self.a_plus = a_plus
        self.a_minus = a_minus
        self.window_steps = window_steps
        self.init_low = init_low
        self.init_high = init_high
        self.random_state = random_state

    def _neuron_params(self):
        return NeuronParams(self.threshold, self.leak, self.refractory_steps)

    def _stdp_params(self):
        return StdpParams(self.a_plus, self.a_minus, self.window_steps)

    def fit(self, X, y=None, initial_weights=None):
        stream = _as_stream(X)
        neuron = self._neuron_params()
        stdp = self._stdp_params()
        n_steps, n_aff = stream.shape
        if initial_weights is None:
            rng = np.random.default_rng(self.random_state)
            w = rng.uniform(self.init_low, self.init_high, size=n_aff)
        else:
            w = as_synapse_vector(initial_weights).copy()
            if w.size != n_aff:
                raise ShapeError(f"{w.size} initial weights for {n_aff} afferents")
        w = as_synapse_vector(w)

        last = np.full(n_aff, NEVER, dtype=np.int64)
        out = np.zeros(n_steps, dtype=np.uint8)
        history = [w.copy()]
        state = NeuronState()
        for t in range(n_steps):
            active = stream[t].astype(bool)
            last[active] = t
            psp = float(w[active].sum())
            state, spiked = step_neuron(state, neuron, psp, t)
            if spiked:
                out[t] = 1
                w = _stdp_update(w, last, t, stdp)
                history.append(w.copy())

        self.weights_ = w
        self.weight_history_ = np.array(history)
        self.train_output_ = out
        self.counts_ = EventCounts(int(stream.sum(dtype=np.int64)), int(out.sum()), n_steps)
        self.n_features_in_ = n_aff
        return self

    def predict(self, X):
        check_is_fitted(self, "weights_")
        stream = _as_stream(X)
        if stream.shape[1] != self.n_features_in_:
            raise ShapeError(
                f"X has {stream.shape[1]} afferents, detector was fitted with {self.n_features_in_}"
            )
        output, counts = run_population(SpikeTrainGrid(stream), self.weights_, self._neuron_params())
        self.predict_counts_ = counts
        return output.flat()[:, 0]


def _as_stream(X):
    if isinstance(X, SpikeTrainGrid):
        return X.flat()
    arr = np.asarray(X)
    if arr.ndim != 2:
        raise ShapeError(f"spike stream must be (steps, n_afferents), got shape {arr.shape}")
    return SpikeTrainGrid(arr).flat()


@dataclass
class PatternExperimentConfig:
    """Everything needed to reproduce one pattern-detection run.

    When ``pattern`` is ``None`` a frozen pattern is drawn from ``seed``:
    a random ``pattern_fraction`` of the afferents each fire once at a random
    step within ``pattern_steps``. Between presentations all afferents emit
    Bernoulli noise at ``background_rate`` for ``background_steps`` steps;
    during a presentation the pattern afferents follow the pattern while the
    others keep their noise.
    """

    n_afferents: int = 100
    pattern_steps: int = 5
    pattern_fraction: float = 0.3
    background_rate: float = 0.02
    background_steps: int = 40
    presentations: int = 200
    eval_presentations: int = 50
    seed: int = 0
    neuron: NeuronParams = field(default_factory=lambda: NeuronParams(15.0, 0.8, 0))
    stdp: StdpParams = field(default_factory=StdpParams)
    pattern: Optional[SpikeTrainGrid] = None

    def __post_init__(self):
        _check_count("n_afferents", self.n_afferents, 1)
        _check_count("pattern_steps", self.pattern_steps, 1)
        _check_count("background_steps", self.background_steps, 1)
        _check_count("presentations", self.presentations, 1)
        _check_count("eval_presentations", self.eval_presentations, 0)
        if not 0.0 <= self.background_rate <= 1.0:
            raise ConfigError(f"background_rate ∈ [0,1] required, got {self.background_rate}")
        if not 0.0 < self.pattern_fraction <= 1.0:
            raise ConfigError(f"pattern_fraction ∈ (0,1] required, got {self.pattern_fraction}")
        if self.pattern is not None:
            if self.pattern.n_sites != self.n_afferents:
                raise ConfigError(
                    f"pattern has {self.pattern.n_sites} afferents, n_afferents is {self.n_afferents}"
                )
            self.pattern_steps = self.pattern.steps
        if self.pattern_steps > self.stdp.window_steps:
            raise ConfigError(
                f"pattern length ({self.pattern_steps}) must not exceed window_steps "
                f"({self.stdp.window_steps})"
            )

    def to_dict(self):
        d = {k: v for k, v in asdict(self).items() if k != "pattern"}
        d["neuron"] = asdict(self.neuron)
        d["stdp"] = asdict(self.stdp)
        return d


def _check_count(name, value, minimum):
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")


@dataclass(frozen=True)
class DetectionReport:
    hit_rate: float
    false_alarm_rate: float
    synaptic_events: int
    output_spikes: int
    steps: int
    train_hit_rate: float
    train_false_alarm_rate: float

    def as_dict(self):
        return asdict(self)


def make_pattern(n_afferents, steps, fraction, rng) -> SpikeTrainGrid:
    """Draw a frozen pattern: ``round(fraction * n)`` afferents each spike once."""
    n_active = max(1, int(round(fraction * n_afferents)))
    events = np.zeros((steps, n_afferents), dtype=np.uint8)
    chosen = rng.choice(n_afferents, size=n_active, replace=False)
    events[rng.integers(0, steps, size=n_active), chosen] = 1
    return SpikeTrainGrid(events)


def build_stream(config, pattern, presentations, rng):
    """Concatenate ``presentations`` (background, pattern) blocks.

    Returns the ``(steps, n_afferents)`` stream and the start step of every
    background and pattern segment.
    """
    n, bg, L = config.n_afferents, config.background_steps, pattern.steps
    block = bg + L
    stream = (rng.random((presentations * block, n)) < config.background_rate).astype(np.uint8)
    involved = pattern.flat().any(axis=0)
    bg_starts = np.arange(presentations) * block
    pat_starts = bg_starts + bg
    for start in pat_starts:
        stream[start:start + L, involved] = pattern.flat()[:, involved]
    return stream, bg_starts, pat_starts


def _segment_rates(out, bg_starts, pat_starts, bg_len, pat_len):
    if len(pat_starts) == 0:
        return 0.0, 0.0
    hits = [out[s:s + pat_len].any() for s in pat_starts]
    alarms = [out[s:s + bg_len].any() for s in bg_starts]
    return float(np.mean(hits)), float(np.mean(alarms))


def train_pattern_detector(config: PatternExperimentConfig):
    """Train on a noisy stream with embedded pattern presentations, then evaluate.

    Hit and false-alarm rates in the report come from a held-out evaluation
    stream of ``eval_presentations`` blocks with learning frozen; the rates
    observed during training are reported alongside. A hit is a presentation
    with at least one output spike during the pattern; a false alarm is a
    background window with at least one output spike. Event counts cover
    training and evaluation together.

    Returns ``(weights, report)``.
    """
    rng = np.random.default_rng(config.seed)
    pattern = config.pattern
    if pattern is None:
        pattern = make_pattern(config.n_afferents, config.pattern_steps, config.pattern_fraction, rng)
    init_seed = int(rng.integers(2**32))

    detector = STDPPatternDetector(
        threshold=config.neuron.threshold,
        leak=config.neuron.leak,
        refractory_steps=config.neuron.refractory_steps,
        a_plus=config.stdp.a_plus,
        a_minus=config.stdp.a_minus,
        window_steps=config.stdp.window_steps,
        random_state=init_seed,
    )
    bg_len, pat_len = config.background_steps, pattern.steps
    train, bg_starts, pat_starts = build_stream(config, pattern, config.presentations, rng)
    detector.fit(train)
    train_hit, train_fa = _segment_rates(detector.train_output_, bg_starts, pat_starts, bg_len, pat_len)
    counts = detector.counts_

    hit, fa = train_hit, train_fa
    if config.eval_presentations:
        test, bg_starts, pat_starts = build_stream(config, pattern, config.eval_presentations, rng)
        out = detector.predict(test)
        hit, fa = _segment_rates(out, bg_starts, pat_starts, bg_len, pat_len)
        counts = counts + detector.predict_counts_

    report = DetectionReport(
        hit_rate=hit,
        false_alarm_rate=fa,
        synaptic_events=counts.synaptic_events,
        output_spikes=counts.output_spikes,
        steps=counts.steps,
        train_hit_rate=train_hit,
        train_false_alarm_rate=train_fa,
    )
    return detector.weights_, report
