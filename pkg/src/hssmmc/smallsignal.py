"""Closed-loop small-signal model of the MMC with proportional-resonant
ac-voltage control.

The control law realized here (and in the nonlinear reference simulator) is

    v_sx* = H_v(s) (v_gx* - v_gx) + k_f v_gx,
    n_ux  = 1/2 - v_sx*/V_dc,
    n_lx  = 1/2 + v_sx*/V_dc,

with H_v(s) = K_p + K_r s / (s^2 + w1^2) realized per phase by two states:

    dx1/dt = -w1^2 x2 + K_r e,   dx2/dt = x1,   y = x1.

Linearizing about a harmonic operating point gives periodic gain
coefficients (the F vectors below); lifting everything to truncation order
h yields an 18-block LTI model whose inputs are the dc-bus perturbation and
the three per-phase voltage-reference perturbations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatchError,
    ResidualImaginaryError,
    StepTooLargeError,
    UnknownVariableError,
)
from .harmonic import (
    HarmonicBlockMatrix,
    HarmonicVector,
    frequency_matrix,
    synthesize,
    toeplitz,
)
from .plant import PHASES, STATE_LABELS, MmcParameters
from .steady import OperatingPoint

PR_LABELS = ("pr_a1", "pr_a2", "pr_b1", "pr_b2", "pr_c1", "pr_c2")
SMALLSIG_STATE_LABELS = STATE_LABELS + PR_LABELS
SMALLSIG_INPUT_LABELS = ("v_dc", "v_ga_ref", "v_gb_ref", "v_gc_ref")

# Explicit-RK4 step acceptance bound: dt * max|eigenvalue| must stay below
# this for the envelope integration to be accepted.
ENVELOPE_STABILITY_LIMIT = 0.1


@dataclass(frozen=True)
class ControllerParams:
    """Proportional-resonant ac-voltage controller gains."""

    K_p: float          # proportional gain, dimensionless
    K_r: float          # resonant gain, 1/s
    k_f: float          # measured-voltage feedforward gain, dimensionless
    omega1: float       # resonant angular frequency, rad/s

    def __post_init__(self):
        if self.K_p < 0 or self.K_r < 0:
            raise ValueError("K_p and K_r must be >= 0")
        if self.omega1 <= 0:
            raise ValueError("omega1 must be > 0")


@dataclass(frozen=True)
class FCoefficientSet:
    """Periodic linearization gains built from operating-point spectra.

    Each entry is a per-phase HarmonicVector. Load-impedance factors are
    folded in with their resistive part; with a nonzero load inductance the
    per-harmonic reactive contribution is applied at assembly time instead.
    """

    c1: dict[str, HarmonicVector]
    c2: dict[str, HarmonicVector]
    c3: dict[str, HarmonicVector]
    vu1: dict[str, HarmonicVector]
    vu2: dict[str, HarmonicVector]
    vu3: dict[str, HarmonicVector]
    vl1: dict[str, HarmonicVector]
    vl2: dict[str, HarmonicVector]
    vl3: dict[str, HarmonicVector]
    i1: dict[str, HarmonicVector]
    i2: dict[str, HarmonicVector]
    i3: dict[str, HarmonicVector]


def _operating_combinations(op: OperatingPoint, phase: str):
    v_diff = op.v_cu[phase] - op.v_cl[phase]
    v_sum = op.v_cu[phase] + op.v_cl[phase]
    iu_eff = op.i_c[phase] + 0.5 * op.i_g[phase]
    il_eff = op.i_c[phase] - 0.5 * op.i_g[phase]
    return v_diff, v_sum, iu_eff, il_eff


def compute_f_coefficients(
    op: OperatingPoint, params: MmcParameters, ctrl: ControllerParams
) -> FCoefficientSet:
    """Linearization gain vectors at the given operating point.

    The lower-arm capacitor gain on the phase-current axis carries the
    minus sign of the underlying arm-current split (the lower arm sees
    i_c - i_g/2), so with all controller gains zero the set collapses to
    the open-loop capacitor couplings.
    """
    kd = ctrl.k_f - ctrl.K_p
    L = params.L
    C = params.C_arm
    R_L = params.R_load
    v_dc = params.V_dc
    h = op.h

    sets: dict[str, dict[str, HarmonicVector]] = {
        name: {} for name in ("c1", "c2", "c3", "vu1", "vu2", "vu3", "vl1", "vl2", "vl3", "i1", "i2", "i3")
    }
    for p in PHASES:
        v_diff, v_sum, iu_eff, il_eff = _operating_combinations(op, p)
        n_u0 = op.indices.upper[p]
        n_l0 = op.indices.lower[p]

        sets["c1"][p] = (kd * R_L / (2.0 * L * v_dc)) * v_diff
        sets["c2"][p] = (1.0 / (2.0 * L * v_dc)) * v_diff
        sets["c3"][p] = (ctrl.K_p / (2.0 * L * v_dc)) * v_diff

        sets["vu1"][p] = (1.0 / (2.0 * C)) * n_u0 - (kd * R_L / (C * v_dc)) * iu_eff
        sets["vu2"][p] = (-1.0 / (C * v_dc)) * iu_eff
        sets["vu3"][p] = (-ctrl.K_p / (C * v_dc)) * iu_eff

        sets["vl1"][p] = (-1.0 / (2.0 * C)) * n_l0 + (kd * R_L / (C * v_dc)) * il_eff
        sets["vl2"][p] = (1.0 / (C * v_dc)) * il_eff
        sets["vl3"][p] = (ctrl.K_p / (C * v_dc)) * il_eff

        sets["i1"][p] = HarmonicVector.constant(
            -(params.R + 2.0 * R_L) / L, h, op.omega1
        ) + (kd * R_L / (L * v_dc)) * v_sum
        sets["i2"][p] = (1.0 / (L * v_dc)) * v_sum
        sets["i3"][p] = (ctrl.K_p / (L * v_dc)) * v_sum

    return FCoefficientSet(**sets)


@dataclass(frozen=True)
class HssSmallSignalModel:
    """Lifted closed-loop small-signal model: d(dX)/dt = A dX + B dU."""

    h: int
    omega1: float
    A: HarmonicBlockMatrix
    B: HarmonicBlockMatrix
    params: MmcParameters
    ctrl: ControllerParams
    f_coeffs: FCoefficientSet

    @property
    def state_labels(self) -> tuple[str, ...]:
        return tuple(self.A.block_rows)

    @property
    def input_labels(self) -> tuple[str, ...]:
        return tuple(self.B.block_cols)


def assemble_smallsignal(
    op: OperatingPoint, params: MmcParameters, ctrl: ControllerParams, h: int
) -> HssSmallSignalModel:
    """Assemble the lifted closed-loop A and B about an operating point."""
    if ctrl.omega1 != params.omega1:
        raise DimensionMismatchError("controller and plant disagree on omega1")
    if h != op.h:
        raise DimensionMismatchError(
            f"operating point solved at order {op.h}, model requested {h}"
        )

    n = 2 * h + 1
    eye = np.eye(n)
    Q = frequency_matrix(h, params.omega1).matrix
    k = np.arange(-h, h + 1)
    Z_load = np.diag(params.load_impedance(k))

    L = params.L
    C = params.C_arm
    R = params.R
    v_dc = params.V_dc
    kd = ctrl.k_f - ctrl.K_p
    w1sq = params.omega1 ** 2

    fset = compute_f_coefficients(op, params, ctrl)

    A = HarmonicBlockMatrix(list(SMALLSIG_STATE_LABELS), list(SMALLSIG_STATE_LABELS), h)
    B = HarmonicBlockMatrix(list(SMALLSIG_STATE_LABELS), list(SMALLSIG_INPUT_LABELS), h)

    gam = lambda hv: toeplitz(hv).matrix  # noqa: E731

    for p in PHASES:
        v_diff, v_sum, iu_eff, il_eff = _operating_combinations(op, p)
        g_u = gam(op.indices.upper[p])
        g_l = gam(op.indices.lower[p])
        x1 = f"pr_{p}1"
        x2 = f"pr_{p}2"
        ref = f"v_g{p}_ref"

        # Circulating-current rows.
        A.set_block(f"i_c{p}", f"i_c{p}", -(R / L) * eye - Q)
        A.set_block(f"i_c{p}", f"v_cu{p}", -g_u / (2.0 * L))
        A.set_block(f"i_c{p}", f"v_cl{p}", -g_l / (2.0 * L))
        A.set_block(f"i_c{p}", f"i_g{p}", gam((kd / (2.0 * L * v_dc)) * v_diff) @ Z_load)
        A.set_block(f"i_c{p}", x1, gam(fset.c2[p]))

        # Upper-arm capacitor rows.
        A.set_block(f"v_cu{p}", f"i_c{p}", g_u / C)
        A.set_block(f"v_cu{p}", f"v_cu{p}", -Q)
        A.set_block(
            f"v_cu{p}", f"i_g{p}",
            g_u / (2.0 * C) - gam((kd / (C * v_dc)) * iu_eff) @ Z_load,
        )
        A.set_block(f"v_cu{p}", x1, gam(fset.vu2[p]))

        # Lower-arm capacitor rows.
        A.set_block(f"v_cl{p}", f"i_c{p}", g_l / C)
        A.set_block(f"v_cl{p}", f"v_cl{p}", -Q)
        A.set_block(
            f"v_cl{p}", f"i_g{p}",
            -g_l / (2.0 * C) + gam((kd / (C * v_dc)) * il_eff) @ Z_load,
        )
        A.set_block(f"v_cl{p}", x1, gam(fset.vl2[p]))

        # AC phase-current rows.
        A.set_block(f"i_g{p}", f"v_cu{p}", -g_u / L)
        A.set_block(f"i_g{p}", f"v_cl{p}", g_l / L)
        A.set_block(
            f"i_g{p}", f"i_g{p}",
            -(R * eye + 2.0 * Z_load) / L - Q
            + gam((kd / (L * v_dc)) * v_sum) @ Z_load,
        )
        A.set_block(f"i_g{p}", x1, gam(fset.i2[p]))

        # Resonant-controller rows.
        A.set_block(x1, f"i_g{p}", -ctrl.K_r * Z_load)
        A.set_block(x1, x1, -Q)
        A.set_block(x1, x2, -w1sq * eye)
        A.set_block(x2, x1, eye)
        A.set_block(x2, x2, -Q)

        # Input couplings.
        B.set_block(f"i_c{p}", "v_dc", eye / (2.0 * L))
        B.set_block(f"i_c{p}", ref, gam(fset.c3[p]))
        B.set_block(f"v_cu{p}", ref, gam(fset.vu3[p]))
        B.set_block(f"v_cl{p}", ref, gam(fset.vl3[p]))
        B.set_block(f"i_g{p}", ref, gam(fset.i3[p]))
        B.set_block(x1, ref, ctrl.K_r * eye)

    return HssSmallSignalModel(
        h=h, omega1=params.omega1, A=A, B=B, params=params, ctrl=ctrl, f_coeffs=fset
    )


def eigenvalues(model: HssSmallSignalModel) -> np.ndarray:
    """Spectrum of the lifted closed-loop A, sorted by real part descending."""
    eig = scipy.linalg.eigvals(model.A.dense)
    order = np.lexsort((eig.imag, -eig.real))
    return eig[order]


def load_voltage_spectrum(op: OperatingPoint, params: MmcParameters, phase: str) -> HarmonicVector:
    """Spectrum of the ac terminal voltage v_g = Z_load(k) * i_g per harmonic."""
    i_g = op.i_g[phase]
    k = i_g.harmonic_indices
    return HarmonicVector(op.h, op.omega1, params.load_impedance(k) * i_g.coeffs)


def references_from_operating_point(op: OperatingPoint, params: MmcParameters) -> dict[str, complex]:
    """Per-phase fundamental reference phasors matching the operating point.

    Returned phasors V satisfy v*(t) = Re(V exp(j w1 t)); choosing them as
    the operating point's own fundamental terminal voltage makes the
    closed loop settle onto (essentially) the same periodic orbit.
    """
    refs = {}
    for p in PHASES:
        v_g = load_voltage_spectrum(op, params, p)
        refs[p] = 2.0 * v_g[1]
    return refs


def reference_spectrum(phasor: complex, h: int, omega1: float) -> HarmonicVector:
    """Fundamental-only harmonic vector of Re(phasor * exp(j w1 t))."""
    return HarmonicVector.from_dict(
        {+1: 0.5 * phasor, -1: 0.5 * np.conj(phasor)}, h, omega1
    )


def operating_controller_states(
    op: OperatingPoint,
    params: MmcParameters,
    ctrl: ControllerParams,
    refs: dict[str, complex],
) -> dict[str, tuple[HarmonicVector, HarmonicVector]]:
    """Periodic resonant-controller states consistent with the operating point.

    The first state is fixed by requiring the controller output to
    reproduce the operating-point insertion indices; the second follows
    from its integrator relation (dc slot from the first state's own
    equation). Used to place linearization checks on the closed-loop
    trajectory.
    """
    out = {}
    for p in PHASES:
        v_g = load_voltage_spectrum(op, params, p)
        v_ref = reference_spectrum(refs[p], op.h, op.omega1)
        err = v_ref - v_g
        # Modulation voltage that generates the operating-point indices.
        v_mod = (HarmonicVector.constant(0.5, op.h, op.omega1) - op.indices.upper[p]) * params.V_dc
        x1 = v_mod - ctrl.K_p * err - ctrl.k_f * v_g
        k = x1.harmonic_indices
        with np.errstate(divide="ignore", invalid="ignore"):
            c2 = np.where(k != 0, x1.coeffs / (1j * k * op.omega1), 0.0)
        c2[op.h] = ctrl.K_r * err[0] / ctrl.omega1 ** 2
        x2 = HarmonicVector(op.h, op.omega1, c2)
        out[p] = (x1, x2)
    return out


def time_domain_linearized_A(
    op: OperatingPoint,
    params: MmcParameters,
    ctrl: ControllerParams,
    t: float,
) -> np.ndarray:
    """Instantaneous 18x18 closed-loop Jacobian at time t on the operating orbit.

    Entries are the synthesized linearization-gain waveforms, so this matrix
    is exactly what the lifted blocks represent in the time domain (the
    frequency-translation diagonals excluded). Requires a purely resistive
    ac load.
    """
    if params.L_load != 0.0:
        raise ValueError("time-domain Jacobian is defined for a resistive ac load")

    fset = compute_f_coefficients(op, params, ctrl)
    L = params.L
    C = params.C_arm
    R = params.R

    A = np.zeros((18, 18))
    for i, p in enumerate(PHASES):
        n_u = synthesize(op.indices.upper[p], t)
        n_l = synthesize(op.indices.lower[p], t)
        j1 = 12 + 2 * i      # first controller state of this phase
        j2 = 13 + 2 * i

        A[i, i] = -R / L
        A[i, 3 + i] = -n_u / (2.0 * L)
        A[i, 6 + i] = -n_l / (2.0 * L)
        A[i, 9 + i] = synthesize(fset.c1[p], t)
        A[i, j1] = synthesize(fset.c2[p], t)

        A[3 + i, i] = n_u / C
        A[3 + i, 9 + i] = synthesize(fset.vu1[p], t)
        A[3 + i, j1] = synthesize(fset.vu2[p], t)

        A[6 + i, i] = n_l / C
        A[6 + i, 9 + i] = synthesize(fset.vl1[p], t)
        A[6 + i, j1] = synthesize(fset.vl2[p], t)

        A[9 + i, 3 + i] = -n_u / L
        A[9 + i, 6 + i] = n_l / L
        A[9 + i, 9 + i] = synthesize(fset.i1[p], t)
        A[9 + i, j1] = synthesize(fset.i2[p], t)

        A[j1, 9 + i] = -ctrl.K_r * params.R_load
        A[j1, j2] = -ctrl.omega1 ** 2
        A[j2, j1] = 1.0
    return A


@dataclass(frozen=True)
class EnvelopeResponse:
    """Harmonic-coefficient envelopes of the small-signal states over time."""

    t: np.ndarray
    states: np.ndarray              # (n_times, n_blocks*(2h+1)) complex
    h: int
    omega1: float
    labels: tuple[str, ...]

    def block(self, label: str) -> np.ndarray:
        try:
            i = self.labels.index(label)
        except ValueError:
            raise UnknownVariableError(f"no state block {label!r}") from None
        n = 2 * self.h + 1
        return self.states[:, i * n : (i + 1) * n]

    def final_state(self) -> np.ndarray:
        return self.states[-1].copy()


def _input_function(delta_u, dim: int, dt: float):
    """Normalize a piecewise-constant event list or callable into f(t)."""
    if callable(delta_u):
        return delta_u
    events = sorted(delta_u, key=lambda e: e[0])
    times = np.array([e[0] for e in events])
    vals = [np.asarray(e[1], dtype=complex) for e in events]
    for v in vals:
        if v.shape != (dim,):
            raise DimensionMismatchError(f"input vector must have shape ({dim},)")
    zero = np.zeros(dim, dtype=complex)
    eps = 0.25 * dt

    def u_of_t(t: float) -> np.ndarray:
        i = np.searchsorted(times, t + eps) - 1
        return vals[i] if i >= 0 else zero

    return u_of_t


def envelope_response(
    model: HssSmallSignalModel,
    delta_u,
    t_end: float,
    dt: float,
    t_start: float = 0.0,
    x0: np.ndarray | None = None,
    store_every: int = 1,
) -> EnvelopeResponse:
    """Integrate the lifted small-signal model with fixed-step RK4.

    ``delta_u`` is either a callable t -> lifted input vector or a list of
    (time, vector) pairs defining a piecewise-constant input (zero before
    the first event). Event times are taken as right-continuous switch
    points on the integration grid.
    """
    A = model.A.dense
    Bd = model.B.dense
    dim = A.shape[0]

    lam_max = float(np.max(np.abs(scipy.linalg.eigvals(A))))
    if dt * lam_max >= ENVELOPE_STABILITY_LIMIT:
        raise StepTooLargeError(
            f"dt*max|eig| = {dt * lam_max:.3f} exceeds {ENVELOPE_STABILITY_LIMIT}"
        )

    u_of_t = _input_function(delta_u, Bd.shape[1], dt)
    n_steps = int(round((t_end - t_start) / dt))
    if n_steps < 1:
        raise ValueError("t_end must lie at least one step after t_start")

    x = np.zeros(dim, dtype=complex) if x0 is None else np.asarray(x0, dtype=complex).copy()
    n_store = n_steps // store_every + 1
    out = np.empty((n_store, dim), dtype=complex)
    t_out = np.empty(n_store)
    out[0] = x
    t_out[0] = t_start
    j = 1

    half = 0.5 * dt
    for n in range(n_steps):
        t = t_start + n * dt
        bu0 = Bd @ u_of_t(t)
        bu1 = Bd @ u_of_t(t + half)
        bu2 = Bd @ u_of_t(t + dt)
        k1 = A @ x + bu0
        k2 = A @ (x + half * k1) + bu1
        k3 = A @ (x + half * k2) + bu1
        k4 = A @ (x + dt * k3) + bu2
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (n + 1) % store_every == 0:
            out[j] = x
            t_out[j] = t_start + (n + 1) * dt
            j += 1

    return EnvelopeResponse(
        t=t_out[:j],
        states=out[:j],
        h=model.h,
        omega1=model.omega1,
        labels=tuple(model.state_labels),
    )


def lifted_reference_step(
    model: HssSmallSignalModel, phase: str, delta_phasor: complex
) -> np.ndarray:
    """Lifted input vector for a reference-amplitude step on one phase.

    A fundamental-frequency step lives in the k = +/-1 slots of that
    phase's reference block, as a conjugate pair of half the phasor.
    """
    if phase not in PHASES:
        raise UnknownVariableError(f"unknown phase {phase!r}")
    n = 2 * model.h + 1
    u = np.zeros(len(SMALLSIG_INPUT_LABELS) * n, dtype=complex)
    col = SMALLSIG_INPUT_LABELS.index(f"v_g{phase}_ref")
    u[col * n + model.h + 1] = 0.5 * delta_phasor
    u[col * n + model.h - 1] = 0.5 * np.conj(delta_phasor)
    return u


def settled_envelope_state(model: HssSmallSignalModel, delta_u_final: np.ndarray) -> np.ndarray:
    """Algebraic settled state -A^-1 B dU of the small-signal model."""
    return scipy.linalg.solve(model.A.dense, -(model.B.dense @ delta_u_final))


def reconstruct_perturbation(
    env: EnvelopeResponse, variable: str, phase: str, rtol: float = 1e-6
) -> np.ndarray:
    """Real time series of one state's perturbation from its envelopes.

    The imaginary residual of the reconstruction is checked against
    ``rtol`` times the series scale; a violation signals envelopes that do
    not describe a real signal.
    """
    if variable in ("pr1", "pr2"):
        label = f"pr_{phase}{variable[-1]}"
    else:
        label = f"{variable}{phase}"
    if label not in env.labels:
        raise UnknownVariableError(f"no state {variable!r} phase {phase!r}")

    coeffs = env.block(label)
    k = np.arange(-env.h, env.h + 1)
    phases_mat = np.exp(1j * np.outer(env.t, k) * env.omega1)
    series = np.sum(coeffs * phases_mat, axis=1)

    scale = float(np.max(np.abs(series)))
    if scale > 0.0:
        max_imag = float(np.max(np.abs(series.imag)))
        if max_imag > rtol * scale:
            raise ResidualImaginaryError(
                f"imaginary residual {max_imag:.3e} exceeds {rtol:.1e} * {scale:.3e}"
            )
    return series.real
