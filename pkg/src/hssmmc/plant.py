"""Average-value model of the three-phase MMC: circuit parameters, open-loop
insertion indices, and the time-periodic state-space right-hand side shared
by the lifted models and the reference simulator.

State ordering (fixed, identical to the lifted block ordering):

    [i_ca, i_cb, i_cc,
     v_cua, v_cub, v_cuc,
     v_cla, v_clb, v_clc,
     i_ga, i_gb, i_gc]

where i_c are circulating currents, v_cu / v_cl the upper / lower arm sum
capacitor voltages, and i_g the ac phase currents.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModulationOutOfRangeError
from .harmonic import HarmonicVector

PHASES = ("a", "b", "c")

# Phase displacement of the fundamental for each leg, a leading.
PHASE_SHIFT = {"a": 0.0, "b": 2.0 * np.pi / 3.0, "c": -2.0 * np.pi / 3.0}

STATE_LABELS = (
    "i_ca", "i_cb", "i_cc",
    "v_cua", "v_cub", "v_cuc",
    "v_cla", "v_clb", "v_clc",
    "i_ga", "i_gb", "i_gc",
)

STATE_VARIABLES = ("i_c", "v_cu", "v_cl", "i_g")


_STATE_INDEX = {label: i for i, label in enumerate(STATE_LABELS)}


def state_position(variable: str, phase: str) -> int:
    """Index of (variable, phase) in the plant state vector, e.g. ('i_c','a') -> 0."""
    try:
        return _STATE_INDEX[f"{variable}{phase}"]
    except KeyError:
        raise KeyError(f"no state {variable!r} phase {phase!r}") from None


@dataclass(frozen=True)
class MmcParameters:
    """Electrical constants of one MMC installation.

    The equivalent arm capacitance is the series combination of the
    submodule capacitors, C_arm = C_sm / N.
    """

    R: float            # arm resistance, ohm
    L: float            # arm inductance, H
    C_sm: float         # submodule capacitance, F
    N: int              # submodules per arm
    V_dc: float         # dc-bus voltage, V
    omega1: float       # fundamental angular frequency, rad/s
    R_load: float       # ac-side load resistance, ohm
    L_load: float = 0.0  # ac-side load inductance, H

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError("arm inductance L must be > 0")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.C_sm <= 0:
            raise ValueError("C_sm must be > 0")
        for name in ("R", "V_dc", "omega1", "R_load", "L_load"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.omega1 <= 0:
            raise ValueError("omega1 must be > 0")

    @property
    def C_arm(self) -> float:
        return self.C_sm / self.N

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega1

    def load_impedance(self, k: int | np.ndarray) -> complex | np.ndarray:
        """AC-side load impedance at harmonic k of the fundamental."""
        return self.R_load + 1j * k * self.omega1 * self.L_load


@dataclass(frozen=True)
class InsertionIndexSet:
    """Upper and lower arm insertion indices for the three phases."""

    upper: dict[str, HarmonicVector]
    lower: dict[str, HarmonicVector]

    def __post_init__(self):
        for d in (self.upper, self.lower):
            if set(d) != set(PHASES):
                raise KeyError(f"insertion indices must cover phases {PHASES}")

    @property
    def order(self) -> int:
        return self.upper["a"].order

    @property
    def base_frequency(self) -> float:
        return self.upper["a"].base_frequency

    def evaluate(self, t):
        """Index values at time(s) t: arrays n_u (3,...) and n_l (3,...)."""
        from .harmonic import synthesize

        n_u = np.array([synthesize(self.upper[p], t) for p in PHASES])
        n_l = np.array([synthesize(self.lower[p], t) for p in PHASES])
        return n_u, n_l


def open_loop_insertion_indices(m: float, h: int, omega1: float) -> InsertionIndexSet:
    """Sinusoidal open-loop insertion indices for modulation index m.

    n_u = 1/2 - (m/2) cos(w1 t - phi), n_l = 1/2 + (m/2) cos(w1 t - phi)
    with phi = 0, +2pi/3, -2pi/3 for phases a, b, c.
    """
    if not 0.0 <= m <= 1.0:
        raise ModulationOutOfRangeError(f"modulation index {m} outside [0, 1]")
    upper = {}
    lower = {}
    for p in PHASES:
        phi = PHASE_SHIFT[p]
        upper[p] = HarmonicVector.cosine(0.5, -0.5 * m, phi, h, omega1)
        lower[p] = HarmonicVector.cosine(0.5, +0.5 * m, phi, h, omega1)
    return InsertionIndexSet(upper=upper, lower=lower)


def modulation_for_voltage(v_g_peak: float, v_dc: float) -> float:
    """No-load modulation index that targets a given ac phase-voltage peak."""
    return 2.0 * v_g_peak / v_dc


def plant_rhs(
    state: np.ndarray,
    n_u: np.ndarray,
    n_l: np.ndarray,
    v_dc: float,
    params: MmcParameters,
) -> np.ndarray:
    """Time derivative of the 12 plant states for given insertion indices.

    The ac load enters with its resistive part algebraic
    (v_g = R_load * i_g) and its inductive part folded into the phase
    current equation as an effective series inductance L + 2*L_load.
    """
    x = np.asarray(state, dtype=float)
    i_c = x[0:3]
    v_cu = x[3:6]
    v_cl = x[6:9]
    i_g = x[9:12]

    L = params.L
    C = params.C_arm
    R = params.R

    d = np.empty(12)
    d[0:3] = (-R * i_c - 0.5 * n_u * v_cu - 0.5 * n_l * v_cl + 0.5 * v_dc) / L
    d[3:6] = n_u * (i_c + 0.5 * i_g) / C
    d[6:9] = n_l * (i_c - 0.5 * i_g) / C
    d[9:12] = (-n_u * v_cu + n_l * v_cl - (R + 2.0 * params.R_load) * i_g) / (
        L + 2.0 * params.L_load
    )
    return d


def time_domain_A(n_u: np.ndarray, n_l: np.ndarray, params: MmcParameters) -> np.ndarray:
    """Instantaneous 12x12 state matrix for given index values.

    plant_rhs(x, ...) == time_domain_A(...) @ x + time_domain_B(params) * v_dc
    holds identically.
    """
    L = params.L
    C = params.C_arm
    R = params.R
    L_eff = L + 2.0 * params.L_load

    A = np.zeros((12, 12))
    for i in range(3):
        A[i, i] = -R / L
        A[i, 3 + i] = -n_u[i] / (2.0 * L)
        A[i, 6 + i] = -n_l[i] / (2.0 * L)

        A[3 + i, i] = n_u[i] / C
        A[3 + i, 9 + i] = n_u[i] / (2.0 * C)

        A[6 + i, i] = n_l[i] / C
        A[6 + i, 9 + i] = -n_l[i] / (2.0 * C)

        A[9 + i, 3 + i] = -n_u[i] / L_eff
        A[9 + i, 6 + i] = n_l[i] / L_eff
        A[9 + i, 9 + i] = -(R + 2.0 * params.R_load) / L_eff
    return A


def time_domain_B(params: MmcParameters) -> np.ndarray:
    """Input column multiplying the dc-bus voltage."""
    B = np.zeros(12)
    B[0:3] = 1.0 / (2.0 * params.L)
    return B
