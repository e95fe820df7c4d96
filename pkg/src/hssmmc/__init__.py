"""Harmonic state-space modeling toolkit for the three-phase modular
multilevel converter: frequency-domain steady-state operating points,
closed-loop small-signal dynamic models, and a nonlinear time-domain
reference simulator for validating both.
"""

from .errors import (
    DimensionMismatchError,
    HssError,
    InsufficientSamplesError,
    ModulationOutOfRangeError,
    NotSettledError,
    NumericalBlowupError,
    OrderMismatchError,
    ResidualImaginaryError,
    SchemaViolationError,
    SingularSystemError,
    StepTooLargeError,
    UnknownVariableError,
)
from .harmonic import (
    FrequencyMatrix,
    HarmonicBlockMatrix,
    HarmonicVector,
    ToeplitzOperator,
    analyze,
    convolve,
    frequency_matrix,
    synthesize,
    toeplitz,
)
from .plant import (
    PHASES,
    STATE_LABELS,
    InsertionIndexSet,
    MmcParameters,
    open_loop_insertion_indices,
    plant_rhs,
    time_domain_A,
    time_domain_B,
)
from .steady import (
    HssSteadyModel,
    OperatingPoint,
    assemble_steady,
    dc_input_vector,
    extract_spectrum,
    solve_steady_state,
)
from .smallsignal import (
    ControllerParams,
    EnvelopeResponse,
    FCoefficientSet,
    HssSmallSignalModel,
    assemble_smallsignal,
    compute_f_coefficients,
    eigenvalues,
    envelope_response,
    reconstruct_perturbation,
    references_from_operating_point,
)
from .simulate import (
    ComparisonReport,
    ReferenceStep,
    SimulationConfig,
    Trajectory,
    compare_spectra,
    settled_spectrum,
    simulate_closed_loop,
    simulate_open_loop,
    total_harmonic_distortion,
)
from .config import RunConfig, load_config, parse_config

__version__ = "0.1.0"
