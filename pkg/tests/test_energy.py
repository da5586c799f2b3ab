import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import receptive_field_count
from spikewatt import (
    DomainError,
    EnergyProfile,
    EventCounts,
    SpikeTrainGrid,
    Workload,
    compare_workload,
    count_macs_dense_conv,
    count_synaptic_events,
    efficiency_ratio,
    estimate_energy,
    rate_encode,
)
from spikewatt.exceptions import ConfigError


class TestCountMacs:
    def test_single_site(self):
        assert count_macs_dense_conv(5, 5, 2, 1) == 25

    def test_zero_steps(self):
        assert count_macs_dense_conv(28, 28, 2, 0) == 0

    def test_mnist_sized(self):
        assert count_macs_dense_conv(28, 28, 2, 100) == 1_440_000

    @pytest.mark.parametrize("args", [(4, 10, 2, 1), (10, 4, 2, 1), (5, 5, 0, 1), (5, 5, 2, -1), (5.0, 5, 2, 1)])
    def test_degenerate(self, args):
        with pytest.raises(DomainError):
            count_macs_dense_conv(*args)


class TestCountSynapticEvents:
    def test_zero(self):
        assert count_synaptic_events(SpikeTrainGrid.zeros(3, (9, 9)), 2) == 0

    def test_interior_spike(self):
        ev = np.zeros((1, 9, 9), dtype=np.uint8)
        ev[0, 4, 4] = 1
        assert count_synaptic_events(SpikeTrainGrid(ev), 2) == 25

    def test_corner_spike(self):
        ev = np.zeros((1, 9, 9), dtype=np.uint8)
        ev[0, 0, 0] = 1
        assert count_synaptic_events(SpikeTrainGrid(ev), 2) == 1

    def test_enumeration_oracle(self):
        grid = rate_encode(np.full((10, 12), 0.3), 4, seed=2)
        expected = sum(receptive_field_count(y, x, 10, 12, 2) for _, y, x in zip(*np.nonzero(grid.events)))
        assert count_synaptic_events(grid, 2) == expected

    @given(h=st.integers(3, 20), w=st.integers(3, 20), r=st.integers(1, 3), steps=st.integers(0, 5))
    def test_dense_equals_macs(self, h, w, r, steps):
        if h <= 2 * r or w <= 2 * r:
            return
        dense = SpikeTrainGrid(np.ones((max(steps, 1), h, w), dtype=np.uint8))
        assert count_synaptic_events(dense, r) == count_macs_dense_conv(h, w, r, max(steps, 1))

    @given(seed=st.integers(0, 2**31), rate=st.floats(0, 1))
    def test_never_exceeds_dense(self, seed, rate):
        grid = rate_encode(np.full((9, 11), rate), 3, seed=seed)
        events = count_synaptic_events(grid, 2)
        macs = count_macs_dense_conv(9, 11, 2, 3)
        assert events <= macs
        assert (events == macs) == bool(grid.events.all())


class TestEstimateEnergy:
    def test_zero(self):
        assert estimate_energy(0, EnergyProfile()) == 0.0
        assert estimate_energy(EventCounts(), EnergyProfile()) == 0.0

    def test_mac_energy(self):
        assert estimate_energy(10**6, EnergyProfile()) == pytest.approx(4.6e-6, rel=1e-12)

    def test_event_energy(self):
        assert estimate_energy(EventCounts(10**6, 0, 0), EnergyProfile()) == pytest.approx(0.9e-6, rel=1e-12)

    def test_static(self):
        profile = EnergyProfile(1e-12, 1e-12, 2e-9)
        assert estimate_energy(EventCounts(0, 0, 10), profile) == pytest.approx(2e-8, rel=1e-12)
        assert estimate_energy(0, profile, steps=10) == pytest.approx(2e-8, rel=1e-12)

    def test_additive_over_time(self):
        profile = EnergyProfile(static_joules_per_step=1e-10)
        grid = rate_encode(np.full((12, 12), 0.2), 30, seed=1)
        whole = EventCounts(count_synaptic_events(grid, 2), 0, 30)
        parts = [
            EventCounts(count_synaptic_events(SpikeTrainGrid(grid.events[a:b]), 2), 0, b - a)
            for a, b in [(0, 7), (7, 19), (19, 30)]
        ]
        total = parts[0] + parts[1] + parts[2]
        assert total == whole
        split = sum(estimate_energy(p, profile) for p in parts)
        assert split == pytest.approx(estimate_energy(whole, profile), rel=1e-12)

    @pytest.mark.parametrize("kwargs", [
        {"joules_per_mac": 0}, {"joules_per_synaptic_event": -1e-12}, {"static_joules_per_step": -1.0},
    ])
    def test_profile_invariants(self, kwargs):
        with pytest.raises(ConfigError):
            EnergyProfile(**kwargs)

    def test_profile_file(self, tmp_path):
        path = tmp_path / "p.json"
        path.write_text(json.dumps({"joules_per_mac": 2e-12, "joules_per_synaptic_event": 1e-12}))
        assert EnergyProfile.load(path) == EnergyProfile(2e-12, 1e-12, 0.0)
        path.write_text(json.dumps({"joules_per_mac": 2e-12}))
        with pytest.raises(ConfigError, match="joules_per_synaptic_event"):
            EnergyProfile.load(path)


class TestEfficiencyRatio:
    def test_identity(self):
        assert efficiency_ratio(3.2, 3.2) == 1.0

    def test_reference_scenario_value(self):
        assert efficiency_ratio(38.7, 1.0) == 38.7

    @pytest.mark.parametrize("ann, snn", [(0, 1), (1, 0), (-1, 1)])
    def test_domain(self, ann, snn):
        with pytest.raises(DomainError):
            efficiency_ratio(ann, snn)

    @given(ann=st.floats(1e-6, 1e6), a=st.floats(1e-6, 1e6), b=st.floats(1e-6, 1e6))
    def test_monotone_in_snn_energy(self, ann, a, b):
        if a < b:
            assert efficiency_ratio(ann, a) >= efficiency_ratio(ann, b)


class TestCompareWorkload:
    def test_dense_equal_energy_is_one(self):
        w = Workload("dense", 16, 16, 2, 10, 1.0)
        row = compare_workload(w, EnergyProfile(1e-12, 1e-12))
        assert row["macs"] == row["events"]
        assert row["ratio"] == 1.0

    def test_silent_workload_unbounded(self):
        row = compare_workload(Workload("quiet", 16, 16, 2, 10, 0.0), EnergyProfile())
        assert row["events"] == 0 and row["snn_joules"] == 0.0 and row["ratio"] is None

    def test_silent_workload_static_only(self):
        profile = EnergyProfile(static_joules_per_step=1e-9)
        row = compare_workload(Workload("quiet", 16, 16, 2, 10, 0.0), profile)
        assert row["snn_joules"] == pytest.approx(1e-8)

    @pytest.mark.parametrize("p", [0.02, 0.1, 0.5])
    def test_sparsity_scaling(self, p):
        profile = EnergyProfile()
        ratios = [compare_workload(Workload("w", 64, 64, 2, 20, p, s), profile)["ratio"] for s in range(20)]
        assert np.mean(ratios) == pytest.approx((4.6 / 0.9) / p, rel=0.1)

    @pytest.mark.parametrize("data", [
        {"height": 4, "width": 10, "kernel_radius": 2, "steps": 1, "spike_rate": 0.1},
        {"height": 10, "width": 10, "kernel_radius": 2, "steps": 1, "spike_rate": 1.1},
        {"height": 10, "width": 10, "kernel_radius": 2, "steps": 0, "spike_rate": 0.1},
        {"height": 10, "width": 10, "kernel_radius": 2, "spike_rate": 0.1},
        {"height": 10, "width": 10, "kernel_radius": 2, "steps": 1, "spike_rate": 0.1, "colour": 1},
    ])
    def test_workload_validation(self, data):
        with pytest.raises(ConfigError):
            Workload.from_dict(data)
