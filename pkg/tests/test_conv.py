import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_conv_potentials, receptive_field_count
from spikewatt import (
    ConvLayerState,
    ConvParams,
    DomainError,
    ShapeError,
    SpikeTrainGrid,
    SpikingConv2D,
    conv_membrane_potential,
    rate_encode,
    step_conv_layer,
)
from spikewatt.conv import as_kernel, coverage, format_kernel, load_kernel, run_conv_layer
from spikewatt.exceptions import ConfigError, ParseError

NO_FIRE = ConvParams(gamma=np.inf)


def random_instance(seed, h=8, w=8, steps=7, rate=0.3, radius=2):
    rng = np.random.default_rng(seed)
    grid = rate_encode(np.full((h, w), rate), steps, seed=seed)
    kernel = rng.normal(size=(2 * radius + 1, 2 * radius + 1))
    return grid, kernel


def run_no_fire(grid, kernel):
    state = ConvLayerState.for_input(grid.shape, kernel)
    history = []
    for t in range(grid.steps):
        state, spikes, _ = step_conv_layer(state, grid.events[t], kernel, NO_FIRE)
        assert spikes.sum() == 0
        history.append(state.potentials.copy())
    return history


class TestKernel:
    @pytest.mark.parametrize("shape", [(4, 4), (3, 5), (1, 1), (5,)])
    def test_shape(self, shape):
        with pytest.raises(ShapeError):
            as_kernel(np.zeros(shape))

    def test_finite(self):
        k = np.zeros((3, 3))
        k[1, 1] = np.nan
        with pytest.raises(DomainError):
            as_kernel(k)

    def test_text_round_trip(self, tmp_path):
        k = np.random.default_rng(1).normal(size=(5, 5))
        path = tmp_path / "k.txt"
        path.write_text("# comment\n\n" + format_kernel(k))
        assert load_kernel(path).tolist() == k.tolist()

    def test_ragged_file(self, tmp_path):
        path = tmp_path / "k.txt"
        path.write_text("1 2 3\n4 5\n7 8 9\n")
        with pytest.raises(ParseError, match="line 2"):
            load_kernel(path)

    def test_gamma_must_be_positive(self):
        with pytest.raises(ConfigError):
            ConvParams(gamma=0)


class TestConvMembranePotential:
    def test_zero_input(self):
        grid = SpikeTrainGrid.zeros(4, (7, 7))
        k = np.ones((5, 5))
        assert all(conv_membrane_potential(grid, k, u, v, t) == 0.0
                   for u in range(3) for v in range(3) for t in range(4))

    def test_single_event_centre_tap(self):
        ev = np.zeros((5, 9, 9), dtype=np.uint8)
        ev[0, 4, 4] = 1
        k = np.arange(25, dtype=float).reshape(5, 5)
        grid = SpikeTrainGrid(ev)
        # output (2, 2) is centred on input (4, 4)
        assert [conv_membrane_potential(grid, k, 2, 2, t) for t in range(5)] == [12.0] * 5

    def test_matches_brute_force(self):
        grid, k = random_instance(0, steps=7)
        oracle = brute_force_conv_potentials(grid.events.tolist(), k.tolist())
        for u in range(4):
            for v in range(4):
                assert conv_membrane_potential(grid, k, u, v, 6) == pytest.approx(oracle[6][u][v], abs=1e-9)

    def test_nondecreasing_for_nonnegative_kernel(self):
        grid, _ = random_instance(5, steps=10)
        k = np.abs(np.random.default_rng(5).normal(size=(5, 5)))
        values = [conv_membrane_potential(grid, k, 1, 2, t) for t in range(10)]
        assert values == sorted(values)

    @pytest.mark.parametrize("u, v, t", [(4, 0, 0), (0, -1, 0), (0, 0, 7), (0, 0, -1)])
    def test_bounds(self, u, v, t):
        grid, k = random_instance(1)
        with pytest.raises(DomainError):
            conv_membrane_potential(grid, k, u, v, t)


class TestStepConvLayer:
    def test_empty_frame(self):
        state = ConvLayerState(np.full((3, 3), 0.25), np.zeros((3, 3), dtype=np.uint8))
        new, spikes, counts = step_conv_layer(state, np.zeros((7, 7), dtype=np.uint8), np.ones((5, 5)), ConvParams(1.0))
        assert new.potentials.tolist() == state.potentials.tolist()
        assert spikes.sum() == 0 and counts.synaptic_events == 0

    def test_single_spike_fires_covering_sites(self):
        frame = np.zeros((9, 9), dtype=np.uint8)
        frame[3, 5] = 1
        state = ConvLayerState.for_input(frame.shape, np.ones((5, 5)))
        _, spikes, counts = step_conv_layer(state, frame, np.ones((5, 5)), ConvParams(0.5))
        expected = np.zeros((5, 5), dtype=np.uint8)
        for u in range(5):
            for v in range(5):
                expected[u, v] = u <= 3 <= u + 4 and v <= 5 <= v + 4
        assert spikes.tolist() == expected.tolist()
        assert counts.synaptic_events == expected.sum() == counts.output_spikes

    def test_stepwise_equals_closed_form_exactly(self):
        grid, k = random_instance(2, h=10, w=9, steps=6)
        history = run_no_fire(grid, k)
        for t in range(grid.steps):
            for u in range(6):
                for v in range(5):
                    assert history[t][u, v] == conv_membrane_potential(grid, k, u, v, t)

    def test_reset_and_refire(self):
        ev = np.ones((4, 5, 5), dtype=np.uint8)
        grid = SpikeTrainGrid(ev)
        k = np.full((5, 5), 0.1)
        out, state, counts = run_conv_layer(grid, k, ConvParams(gamma=2.5))
        # 2.5 per step; fires every step and resets
        assert out.flat()[:, 0].tolist() == [1, 1, 1, 1]
        out, _, _ = run_conv_layer(grid, k, ConvParams(gamma=2.5, fire_once=True))
        assert out.flat()[:, 0].tolist() == [1, 0, 0, 0]
        assert counts.synaptic_events == 4 * 25

    def test_fire_once_latches(self):
        grid, k = random_instance(8, rate=0.6)
        out, state, _ = run_conv_layer(grid, np.abs(k), ConvParams(gamma=1.0, fire_once=True))
        assert out.events.sum(axis=0).max() <= 1
        assert state.fired.tolist() == (out.events.sum(axis=0) > 0).astype(np.uint8).tolist()

    def test_shape_mismatch(self):
        state = ConvLayerState.zeros((3, 3))
        with pytest.raises(ShapeError):
            step_conv_layer(state, np.zeros((8, 8), dtype=np.uint8), np.ones((5, 5)), NO_FIRE)


class TestProperties:
    def test_linearity(self):
        grid, k = random_instance(3, steps=9)
        a = run_no_fire(grid, k)[-1]
        b = run_no_fire(grid, 2 * k)[-1]
        assert b.tolist() == (2 * a).tolist()

    def test_shift_equivariance(self):
        rng = np.random.default_rng(4)
        ev = np.zeros((5, 14, 14), dtype=np.uint8)
        ev[:, 4:9, 4:9] = rng.random((5, 5, 5)) < 0.4
        shifted = np.roll(ev, (2, 3), axis=(1, 2))
        k = rng.normal(size=(5, 5))
        a = run_no_fire(SpikeTrainGrid(ev), k)[-1]
        b = run_no_fire(SpikeTrainGrid(shifted), k)[-1]
        assert np.array_equal(np.roll(a, (2, 3), axis=(0, 1))[2:, 3:], b[2:, 3:])

    def test_event_count_identity(self):
        grid, k = random_instance(6, h=11, w=13, steps=5, rate=0.4)
        _, _, counts = run_conv_layer(grid, k, NO_FIRE)
        expected = sum(
            receptive_field_count(y, x, 11, 13, 2)
            for t, y, x in zip(*np.nonzero(grid.events))
        )
        assert counts.synaptic_events == expected

    def test_interior_spike_touches_25_sites(self):
        assert coverage(20, 2)[4:16].tolist() == [5] * 12

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31), h=st.integers(5, 12), w=st.integers(5, 12),
           steps=st.integers(1, 6), radius=st.integers(1, 2))
    def test_equivalence_property(self, seed, h, w, steps, radius):
        grid, k = random_instance(seed, h, w, steps, radius=radius)
        oracle = brute_force_conv_potentials(grid.events.tolist(), k.tolist())
        history = run_no_fire(grid, k)
        for t in range(steps):
            assert np.max(np.abs(history[t] - np.array(oracle[t]))) <= 1e-9


class TestSpikingConv2D:
    def test_transform(self):
        grid, k = random_instance(9, rate=0.5)
        layer = SpikingConv2D(kernel=k, gamma=0.8).fit()
        out = layer.transform(grid.events)
        expected, state, counts = run_conv_layer(grid, k, ConvParams(0.8))
        assert np.array_equal(out, expected.events)
        assert layer.counts_ == counts
        assert np.array_equal(layer.potentials_, state.potentials)

    def test_params(self):
        layer = SpikingConv2D(kernel=np.ones((3, 3)), gamma=2.0, fire_once=True)
        assert layer.get_params()["fire_once"] is True
        assert layer.set_params(gamma=3.0).gamma == 3.0

    def test_kernel_required(self):
        with pytest.raises(ConfigError):
            SpikingConv2D().fit()
