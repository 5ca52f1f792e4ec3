"""Spectral entanglement of cascade-emitted photon pairs and its cost in a DLCZ-type repeater."""

__version__ = "0.1.0"

from .errors import (
    CascadeLabError,
    ConfigError,
    ConsistencyError,
    ConvergenceError,
    InvalidParameterError,
    PreconditionError,
)
from .grids import FrequencyGrid, graded_grid, panel_grid, uniform_grid
from .spectral import (
    AdiabaticityWarning,
    CylinderGeometry,
    EnsembleParams,
    JointAmplitude,
    PumpParams,
    g2,
    geometric_factor,
    joint_amplitude,
    superradiant_rate,
    time_domain_amplitude,
)
from .schmidt import (
    SchmidtDecomposition,
    build_kernels,
    decompose,
    entropy,
    entropy_bits,
    mode_profile,
    schmidt_from_params,
)
from .protocol import (
    DetectorKind,
    DetectorModel,
    ProtocolMetrics,
    SwapConfig,
    TeleportInput,
    mode_overlap,
    pme_success,
    swap_metrics,
    teleport_success,
)
