"""hqlink: desk-scale simulator of a trapped-ion to solid-state-memory
quantum link.

Channel models for the ion node, frequency-conversion photon chain and AFC
memory; maximum-likelihood tomography with bootstrap errors; CHSH evaluation;
and deterministic rate/error budgets.
"""

from .budget import (
    EfficiencyStage,
    ErrorSource,
    RateChain,
    end_to_end_efficiency,
    rate,
    snr_and_noise_rate,
    total_infidelity,
)
from .config import ConfigError, ExperimentConfig
from .ion import (
    ExcitationFit,
    IonParams,
    SpamParams,
    decoherence_channel,
    emit_entangled_state,
    excitation_probability,
    ramsey_curve,
    simulate_spam_readout,
)
from .memory import (
    CombParams,
    PumpPlan,
    SpectralModel,
    StarkControl,
    afc_efficiency,
    bandwidth_match,
    effective_depth,
    plan_pump_regions,
    smafc_readout_time,
    spectral_density,
    stark_splitting,
    storage_channel,
)
from .photon import (
    JitterParams,
    NoiseParams,
    ProcessMatrix,
    dark_noise_admixture,
    jitter_dephasing_channel,
    jitter_total_rms,
    pbs_bitflip_channel,
    process_fidelity,
    process_matrix_channel,
    window_efficiency,
)
from .qstate import (
    DensityMatrix,
    Observable,
    PureState,
    QuantumChannel,
    apply_channel,
    bell_state,
    expectation,
    fidelity,
    partial_trace,
    tensor_product,
    trace_distance,
    werner,
)
from .scenarios import RunReport, analytic_fidelity, emit_report, run
from .tomography import (
    ChshSettings,
    CountRecord,
    MeasurementSetting,
    NonConvergenceError,
    bootstrap_uncertainty,
    chsh,
    mle_reconstruct,
    simulate_counts,
)

__version__ = "0.1.0"
