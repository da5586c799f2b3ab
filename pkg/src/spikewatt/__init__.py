"""Deterministic spiking-network simulation with energy and carbon accounting."""

__version__ = "0.1.0"

from .conv import ConvLayerState, ConvParams, SpikingConv2D, conv_membrane_potential, step_conv_layer
from .counts import EventCounts
from .energy import (
    EnergyProfile,
    Workload,
    compare_workload,
    count_macs_dense_conv,
    count_synaptic_events,
    efficiency_ratio,
    estimate_energy,
)
from .exceptions import (
    ConfigError,
    DomainError,
    IncompleteInputError,
    ParseError,
    ShapeError,
    SpikewattError,
)
from .nature import (
    GridProfile,
    NatureInputs,
    RunLog,
    RunRecord,
    build_nature_inputs,
    co2e_from_energy,
    nature_score,
    parse_run_log,
)
from .plasticity import (
    DetectionReport,
    PatternExperimentConfig,
    STDPPatternDetector,
    StdpParams,
    apply_stdp_on_output_spike,
    stdp_delta,
    train_pattern_detector,
)
from .spikes import (
    NeuronParams,
    NeuronState,
    RateEncoder,
    SpikeTrainGrid,
    postsynaptic_potential,
    rate_encode,
    run_population,
    step_neuron,
)
