"""Single-map spiking convolution with accumulated membrane potential.

Output site ``(u, v)`` sees the input window centred on ``(u + r, v + r)``
("valid" borders, no padding), so an ``H x W`` input yields an
``(H - 2r) x (W - 2r)`` output. Row offset ``i`` and column offset ``j`` index
the kernel as ``taps[i + r, j + r]``; the kernel is correlated, not flipped.

Summation order is fixed: time outer, column offset ``j`` middle, row offset
``i`` inner, with each step's window sum formed before it is added to the
running potential. The stepwise and closed-form paths share that order and
agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .counts import EventCounts
from .exceptions import ConfigError, DomainError, ParseError, ShapeError
from .spikes import SpikeTrainGrid


def as_kernel(taps) -> np.ndarray:
    """Validate an odd square kernel of side ``2r + 1`` with ``r >= 1``."""
    k = np.asarray(taps, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape[0] % 2 == 0 or k.shape[0] < 3:
        raise ShapeError(f"kernel must be an odd square matrix of side >= 3, got shape {k.shape}")
    if not np.all(np.isfinite(k)):
        raise DomainError("kernel taps must be finite")
    return k


def kernel_radius(kernel) -> int:
    return (np.shape(kernel)[0] - 1) // 2


def load_kernel(path) -> np.ndarray:
    """Read a kernel from a text file: one row of whitespace-separated decimals per line.

    Blank lines and lines starting with ``#`` are ignored.
    """
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([float(x) for x in line.replace(",", " ").split()])
            except ValueError as exc:
                raise ParseError(f"non-numeric kernel entry ({exc})", lineno) from None
            if len(rows[-1]) != len(rows[0]):
                raise ParseError(f"expected {len(rows[0])} columns, got {len(rows[-1])}", lineno)
    if not rows:
        raise ParseError(f"{path}: empty kernel file")
    return as_kernel(rows)


def format_kernel(kernel) -> str:
    return "".join(" ".join(repr(float(x)) for x in row) + "\n" for row in as_kernel(kernel))


@dataclass(frozen=True)
class ConvParams:
    """Firing threshold ``gamma`` (``inf`` disables firing) and the post-fire policy."""

    gamma: float = 1.0
    fire_once: bool = False

    def __post_init__(self):
        if not self.gamma > 0:
            raise ConfigError(f"gamma > 0 required, got {self.gamma}")


@dataclass
class ConvLayerState:
    potentials: np.ndarray
    fired: np.ndarray

    @classmethod
    def zeros(cls, output_shape):
        return cls(np.zeros(output_shape), np.zeros(output_shape, dtype=np.uint8))

    @classmethod
    def for_input(cls, input_shape, kernel):
        return cls.zeros(output_shape(input_shape, kernel_radius(kernel)))


def output_shape(input_shape, radius):
    h, w = input_shape
    if h <= 2 * radius or w <= 2 * radius:
        raise ShapeError(f"input {h}x{w} is too small for a kernel of radius {radius}")
    return h - 2 * radius, w - 2 * radius


def coverage(length, radius) -> np.ndarray:
    """For each input coordinate along one axis, how many valid output positions see it."""
    n_out = length - 2 * radius
    idx = np.arange(length)
    lo = np.maximum(idx - 2 * radius, 0)
    hi = np.minimum(idx, n_out - 1)
    return np.maximum(hi - lo + 1, 0)


def conv_membrane_potential(inputs: SpikeTrainGrid, kernel, u: int, v: int, t: int) -> float:
    """Membrane potential of output site ``(u, v)`` accumulated over steps ``0..t``."""
    k = as_kernel(kernel)
    r = kernel_radius(k)
    h_out, w_out = output_shape(inputs.shape, r)
    if not (0 <= u < h_out and 0 <= v < w_out):
        raise DomainError(f"output site ({u}, {v}) outside the {h_out}x{w_out} valid grid")
    if not 0 <= t < inputs.steps:
        raise DomainError(f"step {t} outside 0..{inputs.steps - 1}")
    ev = inputs.events
    cu, cv = u + r, v + r
    total = 0.0
    for tau in range(t + 1):
        frame_sum = 0.0
        for j in range(-r, r + 1):
            for i in range(-r, r + 1):
                frame_sum += ev[tau, cu + i, cv + j] * k[i + r, j + r]
        total += frame_sum
    return total


def frame_drive(frame, kernel) -> np.ndarray:
    """Kernel-weighted window sum of one input frame at every valid output site."""
    k = np.asarray(kernel)
    r = kernel_radius(k)
    h_out, w_out = output_shape(frame.shape, r)
    drive = np.zeros((h_out, w_out))
    for j in range(-r, r + 1):
        for i in range(-r, r + 1):
            drive += frame[r + i:r + i + h_out, r + j:r + j + w_out] * k[i + r, j + r]
    return drive


def step_conv_layer(state: ConvLayerState, input_frame, kernel, params: ConvParams):
    """Advance the layer by one step.

    Returns ``(new_state, spike_map, counts)``. Sites reaching ``gamma`` spike
    and reset to 0; with ``fire_once`` a site that has fired stays silent and
    stops integrating.
    """
    k = as_kernel(kernel)
    r = kernel_radius(k)
    frame = np.asarray(input_frame)
    if frame.ndim != 2:
        raise ShapeError(f"input frame must be 2-D, got shape {frame.shape}")
    if output_shape(frame.shape, r) != state.potentials.shape:
        raise ShapeError(
            f"frame {frame.shape} with radius {r} does not match layer state {state.potentials.shape}"
        )
    potentials = state.potentials + frame_drive(frame, k)
    fired = state.fired.copy()
    if params.fire_once:
        potentials[fired.astype(bool)] = 0.0
    spikes = potentials >= params.gamma
    if params.fire_once:
        spikes &= ~fired.astype(bool)
    potentials[spikes] = 0.0
    fired[spikes] = 1
    events = int(
        (frame * coverage(frame.shape[0], r)[:, None] * coverage(frame.shape[1], r)[None, :]).sum(
            dtype=np.int64
        )
    )
    counts = EventCounts(events, int(spikes.sum()), 1)
    return ConvLayerState(potentials, fired), spikes.astype(np.uint8), counts


def run_conv_layer(inputs: SpikeTrainGrid, kernel, params: ConvParams):
    """Run every step of ``inputs`` through a fresh layer.

    Returns ``(output_spikes, final_state, counts)``.
    """
    k = as_kernel(kernel)
    state = ConvLayerState.for_input(inputs.shape, k)
    out = np.zeros((inputs.steps, *state.potentials.shape), dtype=np.uint8)
    total = EventCounts()
    for t in range(inputs.steps):
        state, out[t], delta = step_conv_layer(state, inputs.events[t], k, params)
        total = total + delta
    return SpikeTrainGrid(out), state, total


class SpikingConv2D(TransformerMixin, BaseEstimator):
    """Transformer wrapping :func:`run_conv_layer`.

    ``transform`` takes a ``(steps, H, W)`` spike array or a
    :class:`SpikeTrainGrid` and returns the ``(steps, H - 2r, W - 2r)`` output
    spike array. Operation counts and final potentials of the last call are
    kept in ``counts_`` and ``potentials_``.
    """

    def __init__(self, kernel=None, gamma=1.0, fire_once=False):
        self.kernel = kernel
        self.gamma = gamma
        self.fire_once = fire_once

    def fit(self, X=None, y=None):
        if self.kernel is None:
            raise ConfigError("SpikingConv2D needs a kernel")
        self.kernel_ = as_kernel(self.kernel)
        self.params_ = ConvParams(self.gamma, self.fire_once)
        return self

    def transform(self, X):
        check_is_fitted(self, "kernel_")
        grid = X if isinstance(X, SpikeTrainGrid) else SpikeTrainGrid(X)
        out, state, counts = run_conv_layer(grid, self.kernel_, self.params_)
        self.counts_ = counts
        self.potentials_ = state.potentials
        return out.events
