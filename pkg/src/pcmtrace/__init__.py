"""Behavioral simulator for PCM-drift eligibility traces and three-factor learning."""

__version__ = "0.1.0"

from .device import (
    NO_DECAY,
    DeviceNoise,
    DeviceParams,
    PcmDevice,
    PulseKind,
    PulseSpec,
    gradual_set,
    read_conductance,
    read_resistance,
    reset,
    tau_pcm,
)
from .errors import (
    ConfigError,
    ContractViolation,
    InsufficientDataError,
    PcmTraceError,
    ValidationError,
)
from .trace import (
    CAPACITY_UNBOUNDED,
    TagOutcome,
    TraceBlock,
    TraceParams,
    apply_tag,
    capacity,
    init_block,
    read_trace,
    reset_block,
    trace_step_reference,
)
from .learning import (
    SdspConfig,
    TagKind,
    Transfer,
    VprogConfig,
    apply_reward,
    evaluate_tag,
    vprog_transfer,
)
from .network import (
    Event,
    EventKind,
    IdealTrace,
    NetworkConfig,
    Neuron,
    Simulator,
    Synapse,
    compare_traces,
    integrate_pre_spike,
    run_simulation,
    step_ideal_trace,
)
from .calib import DriftSample, FitResult, export_model_card, fit_drift, read_model_card
from .report import CostReport, cost_report

__all__ = [name for name in dir() if not name.startswith("_")]
