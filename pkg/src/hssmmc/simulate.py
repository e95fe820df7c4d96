"""Nonlinear time-domain reference simulator of the average-value MMC.

Fixed-step RK4, deterministic and bit-reproducible for identical inputs.
Open-loop runs drive the plant with sinusoidal insertion indices;
closed-loop runs add the per-phase proportional-resonant ac-voltage
controller. Settled trajectories feed the spectral extraction used to
cross-check the lifted models.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ModulationOutOfRangeError,
    NotSettledError,
    NumericalBlowupError,
    OrderMismatchError,
)
from .harmonic import HarmonicVector, analyze
from .plant import PHASES, PHASE_SHIFT, MmcParameters
from .smallsignal import ControllerParams

# A simulated state magnitude beyond this multiple of the dc-bus voltage
# (or of unity for an unenergized bus) aborts the run.
BLOWUP_FACTOR = 1e9

# Last-two-period RMS change below this fraction of the signal RMS counts
# as settled.
SETTLE_RTOL = 1e-3


@dataclass(frozen=True)
class ReferenceStep:
    """Reference-amplitude step event: add ``delta`` (complex phasor volts)
    to one phase's fundamental reference at ``time`` seconds."""

    time: float
    phase: str
    delta: complex

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ValueError(f"unknown phase {self.phase!r}")


@dataclass(frozen=True)
class SimulationConfig:
    """Fixed-step integration settings."""

    dt: float
    t_end: float
    settle_periods: int = 40
    events: tuple[ReferenceStep, ...] = ()

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.t_end <= 0:
            raise ValueError("t_end must be > 0")
        times = [e.time for e in self.events]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("event times must be strictly increasing")

    def validate_against(self, params: MmcParameters):
        if self.t_end <= self.settle_periods * params.period:
            raise ValueError("t_end must exceed settle_periods fundamental periods")

    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class Trajectory:
    """Uniform-grid solution series of one simulation run."""

    t: np.ndarray                       # (n,)
    states: np.ndarray                  # (n, 12) plant states
    controller: np.ndarray | None       # (n, 6) PR states, closed loop only
    n_upper: np.ndarray                 # (n, 3) insertion indices
    n_lower: np.ndarray                 # (n, 3)
    dt: float = field(init=False)

    def __post_init__(self):
        n = self.t.size
        for name in ("states", "n_upper", "n_lower"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"{name} length does not match time grid")
        if self.controller is not None and self.controller.shape[0] != n:
            raise ValueError("controller length does not match time grid")
        self.dt = float(self.t[1] - self.t[0]) if n > 1 else 0.0

    def series(self, variable: str, phase: str) -> np.ndarray:
        from .plant import state_position

        return self.states[:, state_position(variable, phase)]


def _check_blowup(x: np.ndarray, scale: float):
    if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > BLOWUP_FACTOR * scale:
        raise NumericalBlowupError(
            f"state magnitude {np.max(np.abs(x)):.3e} left the plausible range"
        )


def _rk4(rhs, x0: np.ndarray, t0: float, n_steps: int, dt: float, scale: float) -> np.ndarray:
    """Fixed-step RK4; returns all n_steps+1 states including the initial one."""
    x = np.asarray(x0, dtype=float).copy()
    out = np.empty((n_steps + 1, x.size))
    out[0] = x
    half = 0.5 * dt
    sixth = dt / 6.0
    for n in range(n_steps):
        t = t0 + n * dt
        k1 = rhs(t, x)
        k2 = rhs(t + half, x + half * k1)
        k3 = rhs(t + half, x + half * k2)
        k4 = rhs(t + dt, x + dt * k3)
        x = x + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[n + 1] = x
        if n % 2000 == 0:
            _check_blowup(x, scale)
    _check_blowup(x, scale)
    return out


def default_initial_state(params: MmcParameters) -> np.ndarray:
    """Capacitor sums at the dc-bus voltage, all currents zero."""
    x0 = np.zeros(12)
    x0[3:9] = params.V_dc
    return x0


def simulate_open_loop(
    params: MmcParameters,
    m: float,
    cfg: SimulationConfig,
    x0: np.ndarray | None = None,
) -> Trajectory:
    """Integrate the open-loop plant with sinusoidal insertion indices."""
    if not 0.0 <= m <= 1.0:
        raise ModulationOutOfRangeError(f"modulation index {m} outside [0, 1]")
    cfg.validate_against(params)

    w1 = params.omega1
    phi = np.array([PHASE_SHIFT[p] for p in PHASES])
    L = params.L
    L_eff = params.L + 2.0 * params.L_load
    C = params.C_arm
    R = params.R
    R_ac = params.R + 2.0 * params.R_load
    v_dc = params.V_dc

    def rhs(t, x):
        n_u = 0.5 - 0.5 * m * np.cos(w1 * t - phi)
        n_l = 1.0 - n_u
        d = np.empty(12)
        i_c = x[0:3]
        v_cu = x[3:6]
        v_cl = x[6:9]
        i_g = x[9:12]
        d[0:3] = (-R * i_c - 0.5 * n_u * v_cu - 0.5 * n_l * v_cl + 0.5 * v_dc) / L
        d[3:6] = n_u * (i_c + 0.5 * i_g) / C
        d[6:9] = n_l * (i_c - 0.5 * i_g) / C
        d[9:12] = (-n_u * v_cu + n_l * v_cl - R_ac * i_g) / L_eff
        return d

    x_init = default_initial_state(params) if x0 is None else np.asarray(x0, dtype=float)
    states = _rk4(rhs, x_init, 0.0, cfg.n_steps(), cfg.dt, max(v_dc, 1.0))

    t = np.arange(states.shape[0]) * cfg.dt
    n_u = 0.5 - 0.5 * m * np.cos(np.subtract.outer(w1 * t, phi))
    n_l = 1.0 - n_u
    return Trajectory(t=t, states=states, controller=None, n_upper=n_u, n_lower=n_l)


def _closed_loop_rhs(params: MmcParameters, ctrl: ControllerParams, amps_of_t):
    """Right-hand side of the 18-state closed-loop model.

    With an inductive load part the terminal voltage depends on di_g/dt,
    which itself depends on the insertion indices; the resulting linear
    relation is solved in closed form so no inner iteration is needed.
    """
    w1 = params.omega1
    w1sq = ctrl.omega1 ** 2
    L = params.L
    L_L = params.L_load
    C = params.C_arm
    R = params.R
    R_L = params.R_load
    v_dc = params.V_dc
    K_p = ctrl.K_p
    K_r = ctrl.K_r
    kd = ctrl.k_f - ctrl.K_p

    def rhs(t, x):
        amps = amps_of_t(t)
        v_star = amps.real * np.cos(w1 * t) - amps.imag * np.sin(w1 * t)
        i_c = x[0:3]
        v_cu = x[3:6]
        v_cl = x[6:9]
        i_g = x[9:12]
        x1 = x[12:18:2]
        x2 = x[13:18:2]

        sigma = (v_cu + v_cl) / v_dc
        delta = v_cu - v_cl
        numer = -0.5 * delta + sigma * (K_p * v_star + x1) + (sigma * kd * R_L - R - 2.0 * R_L) * i_g
        denom = L + 2.0 * L_L - sigma * kd * L_L
        di_g = numer / denom

        v_g = R_L * i_g + L_L * di_g
        v_mod = K_p * (v_star - v_g) + x1 + ctrl.k_f * v_g
        n_u = 0.5 - v_mod / v_dc
        n_l = 0.5 + v_mod / v_dc

        d = np.empty(18)
        d[0:3] = (-R * i_c - 0.5 * n_u * v_cu - 0.5 * n_l * v_cl + 0.5 * v_dc) / L
        d[3:6] = n_u * (i_c + 0.5 * i_g) / C
        d[6:9] = n_l * (i_c - 0.5 * i_g) / C
        d[9:12] = di_g
        d[12:18:2] = -w1sq * x2 + K_r * (v_star - v_g)
        d[13:18:2] = x1
        return d

    return rhs


def _amplitude_schedule(refs: dict[str, complex], events, dt: float):
    """Right-continuous per-phase reference phasors as a function of time.

    Event times are snapped to the nearest integration grid point.
    """
    base = np.array([refs[p] for p in PHASES], dtype=complex)
    if not events:
        return lambda t: base, []

    snapped = []
    amps_list = [base]
    current = base
    for ev in events:
        current = current.copy()
        current[PHASES.index(ev.phase)] += ev.delta
        snapped.append(round(ev.time / dt) * dt)
        amps_list.append(current)
    times = np.array(snapped)
    eps = 0.25 * dt

    def amps_of_t(t: float) -> np.ndarray:
        i = np.searchsorted(times, t + eps)
        return amps_list[i]

    return amps_of_t, list(zip(times, amps_list[1:]))


def closed_loop_initial_state(params: MmcParameters) -> np.ndarray:
    """Default cold start: capacitors at V_dc, currents and controller zero."""
    x0 = np.zeros(18)
    x0[3:9] = params.V_dc
    return x0


def simulate_closed_loop(
    params: MmcParameters,
    ctrl: ControllerParams,
    refs: dict[str, complex],
    cfg: SimulationConfig,
    x0: np.ndarray | None = None,
    t_start: float = 0.0,
) -> Trajectory:
    """Integrate the closed-loop model with per-phase reference phasors.

    ``refs[p]`` is the complex fundamental phasor of phase p's voltage
    reference, v*(t) = Re(refs[p] * exp(j w1 t)). Events listed in the
    configuration add phasor steps at (grid-snapped) times.
    """
    cfg.validate_against(params)
    amps_of_t, _ = _amplitude_schedule(refs, cfg.events, cfg.dt)
    rhs = _closed_loop_rhs(params, ctrl, amps_of_t)

    x_init = closed_loop_initial_state(params) if x0 is None else np.asarray(x0, dtype=float)
    n_steps = int(round((cfg.t_end - t_start) / cfg.dt))
    states = _rk4(rhs, x_init, t_start, n_steps, cfg.dt, max(params.V_dc, 1.0))

    t = t_start + np.arange(states.shape[0]) * cfg.dt
    n_u, n_l = _reconstruct_indices(params, ctrl, amps_of_t, t, states)
    return Trajectory(
        t=t,
        states=states[:, 0:12],
        controller=states[:, 12:18],
        n_upper=n_u,
        n_lower=n_l,
    )


def _reconstruct_indices(params, ctrl, amps_of_t, t, states):
    """Vectorized recomputation of the insertion indices along a run."""
    amps = np.array([amps_of_t(ti) for ti in t])
    v_star = amps.real * np.cos(params.omega1 * t)[:, None] - amps.imag * np.sin(
        params.omega1 * t
    )[:, None]
    v_cu = states[:, 3:6]
    v_cl = states[:, 6:9]
    i_g = states[:, 9:12]
    x1 = states[:, 12:18:2]
    kd = ctrl.k_f - ctrl.K_p

    sigma = (v_cu + v_cl) / params.V_dc
    delta = v_cu - v_cl
    numer = (
        -0.5 * delta
        + sigma * (ctrl.K_p * v_star + x1)
        + (sigma * kd * params.R_load - params.R - 2.0 * params.R_load) * i_g
    )
    denom = params.L + 2.0 * params.L_load - sigma * kd * params.L_load
    di_g = numer / denom
    v_g = params.R_load * i_g + params.L_load * di_g
    v_mod = ctrl.K_p * (v_star - v_g) + x1 + ctrl.k_f * v_g
    n_u = 0.5 - v_mod / params.V_dc
    return n_u, 1.0 - n_u


def steps_per_period(traj: Trajectory, omega1: float) -> int:
    """Integration steps per fundamental period; requires an exact fit."""
    period = 2.0 * np.pi / omega1
    spp = int(round(period / traj.dt))
    if abs(spp * traj.dt - period) > 1e-9 * period:
        raise ValueError(
            f"dt {traj.dt!r} does not divide the fundamental period {period!r}"
        )
    return spp


def settling_profile(traj: Trajectory, omega1: float, n_periods: int = 5) -> np.ndarray:
    """Per-period relative RMS change of each state over the final periods.

    Returns an array of shape (n_periods, n_states): entry (i, j) compares
    period -(i+1) against period -(i+2), most recent first.
    """
    spp = steps_per_period(traj, omega1)
    x = traj.states
    if x.shape[0] < (n_periods + 1) * spp + 1:
        raise NotSettledError("trajectory too short for the requested settling profile")
    out = np.empty((n_periods, x.shape[1]))
    for i in range(n_periods):
        last = x[x.shape[0] - 1 - (i + 1) * spp : x.shape[0] - 1 - i * spp]
        prev = x[x.shape[0] - 1 - (i + 2) * spp : x.shape[0] - 1 - (i + 1) * spp]
        diff = np.sqrt(np.mean((last - prev) ** 2, axis=0))
        scale = np.sqrt(np.mean(last**2, axis=0))
        scale = np.where(scale > 0, scale, 1.0)
        out[i] = diff / scale
    return out


def is_settled(traj: Trajectory, omega1: float, rtol: float = SETTLE_RTOL) -> bool:
    """Last-two-period RMS change below rtol for every state."""
    return bool(np.all(settling_profile(traj, omega1, n_periods=1)[0] <= rtol))


def settled_spectrum(
    traj: Trajectory,
    variable: str,
    phase: str,
    h: int,
    omega1: float,
    rtol: float = SETTLE_RTOL,
) -> HarmonicVector:
    """Fourier coefficients of one state over the final fundamental period."""
    if not is_settled(traj, omega1, rtol):
        worst = float(np.max(settling_profile(traj, omega1, n_periods=1)[0]))
        raise NotSettledError(
            f"last-two-period RMS change {worst:.3e} exceeds {rtol:.1e}"
        )
    spp = steps_per_period(traj, omega1)
    series = traj.series(variable, phase)
    samples = series[-spp - 1 : -1]
    t0 = float(traj.t[-spp - 1])
    return analyze(samples, h, omega1, t0=t0)


@dataclass(frozen=True)
class ComparisonReport:
    """Per-harmonic comparison of two spectra of equal order."""

    h: int
    a_mag: np.ndarray
    b_mag: np.ndarray
    abs_error: np.ndarray
    rel_error: np.ndarray
    floor: float
    dominant: np.ndarray            # bool mask over k = -h..h

    @property
    def harmonic_indices(self) -> np.ndarray:
        return np.arange(-self.h, self.h + 1)

    def max_rel_error_dominant(self) -> float:
        if not np.any(self.dominant):
            return 0.0
        return float(np.max(self.rel_error[self.dominant]))

    def max_rel_error(self) -> float:
        return float(np.max(self.rel_error))


def compare_spectra(
    a: HarmonicVector,
    b: HarmonicVector,
    floor: float | None = None,
    dominant_fraction: float = 0.01,
) -> ComparisonReport:
    """Symmetric spectral comparison with a floored relative error.

    Relative error is |a_k - b_k| / max(|a_k|, |b_k|, floor); the default
    floor is 1e-6 of the largest component so negligible harmonics cannot
    produce meaningless percentages. Components within ``dominant_fraction``
    of the largest one form the dominant set.
    """
    if a.order != b.order:
        raise OrderMismatchError(f"orders differ: {a.order} vs {b.order}")
    a_mag = np.abs(a.coeffs)
    b_mag = np.abs(b.coeffs)
    peak = max(float(a_mag.max()), float(b_mag.max()))
    if floor is None:
        floor = 1e-6 * peak if peak > 0 else 1e-30
    abs_err = np.abs(a.coeffs - b.coeffs)
    denom = np.maximum(np.maximum(a_mag, b_mag), floor)
    rel_err = abs_err / denom
    dominant = np.maximum(a_mag, b_mag) >= dominant_fraction * peak if peak > 0 else np.zeros_like(a_mag, bool)
    return ComparisonReport(
        h=a.order,
        a_mag=a_mag,
        b_mag=b_mag,
        abs_error=abs_err,
        rel_error=rel_err,
        floor=float(floor),
        dominant=dominant,
    )


def total_harmonic_distortion(hv: HarmonicVector, k_max: int | None = None) -> float:
    """RMS of harmonics 2..k_max relative to the fundamental."""
    if hv.order < 1:
        raise OrderMismatchError("need at least the fundamental to compute distortion")
    k_max = hv.order if k_max is None else min(k_max, hv.order)
    fund = abs(hv[1])
    if fund == 0.0:
        return np.inf
    num = np.sqrt(sum(abs(hv[k]) ** 2 for k in range(2, k_max + 1)))
    return float(num / fund)


def power_balance(traj: Trajectory, params: MmcParameters) -> dict[str, float]:
    """One-period average dc input power, load dissipation, and arm losses."""
    spp = steps_per_period(traj, params.omega1)
    s = slice(-spp - 1, -1)
    i_c = traj.states[s, 0:3]
    i_g = traj.states[s, 9:12]
    i_u = i_c + 0.5 * i_g
    i_l = i_c - 0.5 * i_g
    p_in = params.V_dc * float(np.mean(np.sum(i_c, axis=1)))
    p_load = float(np.mean(np.sum(params.R_load * i_g**2, axis=1)))
    p_arm = float(np.mean(np.sum(params.R * (i_u**2 + i_l**2), axis=1)))
    return {"dc_input": p_in, "load": p_load, "arm_loss": p_arm}
