"""Scenario orchestration: steady and small-signal solves, reference
simulations, verification pipelines, and parameter sweeps.

Each ``run_*`` function executes one CLI scenario, writes its CSV set and
report into the output directory, and returns the process exit code
(0 thresholds met, 1 threshold failure; configuration and numerical errors
propagate as exceptions and are mapped by the CLI).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig, apply_sweep_value
from .errors import SchemaViolationError
from .harmonic import HarmonicVector, synthesize
from .plant import PHASES, STATE_LABELS, STATE_VARIABLES, open_loop_insertion_indices
from .reports import (
    write_csv,
    write_eigenvalue_csv,
    write_report,
    write_spectrum_csv,
    write_trajectory_csv,
    write_waveform_csv,
)
from .simulate import (
    SimulationConfig,
    Trajectory,
    compare_spectra,
    is_settled,
    power_balance,
    settled_spectrum,
    simulate_closed_loop,
    simulate_open_loop,
    steps_per_period,
    total_harmonic_distortion,
)
from .smallsignal import (
    HssSmallSignalModel,
    assemble_smallsignal,
    eigenvalues,
    envelope_response,
    lifted_reference_step,
    reconstruct_perturbation,
    references_from_operating_point,
)
from .steady import OperatingPoint, assemble_steady, dc_input_vector, solve_steady_state

# Verification gates.
DOMINANT_FRACTION = 0.002      # component counts as dominant above this share of the family peak
DOMINANT_REL_TOL = 0.02        # lifted vs simulated dominant components
WAVEFORM_NRMSE_TOL = 0.03      # reconstructed one-period waveforms
SMALLSIG_NRMSE_TOL = 0.10      # perturbation reconstruction vs nonlinear
ENERGY_BALANCE_TOL = 0.01      # dc input vs dissipation
ODD_HARMONIC_RATIO = 10.0      # circulating dc/2nd over odd components
HIGH_HARMONIC_FRACTION = 0.2   # capacitor 4th-and-above vs 3rd
AC_CURRENT_THD_MAX = 0.01

# Analysis order used for the spectral-content claims.
CLAIMS_ORDER = 8


def nrmse(reference: np.ndarray, value: np.ndarray) -> float:
    """RMS error normalized by the reference signal's RMS."""
    ref = np.asarray(reference, dtype=float)
    val = np.asarray(value, dtype=float)
    denom = float(np.sqrt(np.mean(ref**2)))
    if denom == 0.0:
        return 0.0 if np.allclose(val, 0.0) else np.inf
    return float(np.sqrt(np.mean((val - ref) ** 2)) / denom)


def solve_operating_point(cfg: RunConfig) -> OperatingPoint:
    indices = open_loop_insertion_indices(cfg.m, cfg.h, cfg.params.omega1)
    model = assemble_steady(cfg.params, indices, cfg.h)
    u = dc_input_vector(cfg.params.V_dc, cfg.h)
    return solve_steady_state(model, u)


# ----------------------------------------------------------------- steady


def run_steady(cfg: RunConfig, out: Path, timestamp: bool) -> int:
    op = solve_operating_point(cfg)
    for var in STATE_VARIABLES:
        for p in PHASES:
            write_spectrum_csv(out / f"spectrum_hss_{var}_{p}.csv", op.spectrum(var, p), timestamp)
    checks = [
        ("condition", op.condition < 1e12, f"estimate {op.condition:.3e}"),
        ("residual", True, f"{op.residual:.3e}"),
    ]
    write_report(out / "report.txt", f"steady solve (m={cfg.m}, h={cfg.h})", checks, timestamp)
    return 0


# --------------------------------------------------------------- smallsig


def _require_controller(cfg: RunConfig):
    if cfg.ctrl is None:
        raise SchemaViolationError("[controller]: section required for this scenario")


def build_smallsignal_model(cfg: RunConfig) -> tuple[OperatingPoint, HssSmallSignalModel, dict[str, complex]]:
    _require_controller(cfg)
    op = solve_operating_point(cfg)
    refs = references_from_operating_point(op, cfg.params)
    model = assemble_smallsignal(op, cfg.params, cfg.ctrl, cfg.h)
    return op, model, refs


def run_smallsig(cfg: RunConfig, out: Path, timestamp: bool) -> int:
    _, model, _ = build_smallsignal_model(cfg)
    eig = eigenvalues(model)
    write_eigenvalue_csv(out / "eigenvalues.csv", eig, timestamp)
    stable = float(eig[0].real) < 0.0
    checks = [("stability", stable, f"max real part {eig[0].real:.4g} 1/s")]
    ok = write_report(out / "report.txt", f"small-signal model (h={cfg.h})", checks, timestamp)
    return 0 if ok else 1


# --------------------------------------------------------------- simulate


def run_simulate_open(cfg: RunConfig, out: Path, timestamp: bool) -> int:
    traj = simulate_open_loop(cfg.params, cfg.m, cfg.sim)
    write_trajectory_csv(out / "trajectory.csv", traj, STATE_LABELS, timestamp)
    settled = is_settled(traj, cfg.params.omega1)
    if settled:
        for var in STATE_VARIABLES:
            for p in PHASES:
                hv = settled_spectrum(traj, var, p, cfg.h, cfg.params.omega1)
                write_spectrum_csv(out / f"spectrum_sim_{var}_{p}.csv", hv, timestamp)
    checks = [("settled", settled, f"{cfg.sim.settle_periods} settle periods requested")]
    write_report(out / "report.txt", f"open-loop simulation (m={cfg.m})", checks, timestamp)
    return 0


def run_simulate_closed(cfg: RunConfig, out: Path, timestamp: bool) -> int:
    _require_controller(cfg)
    op = solve_operating_point(cfg)
    refs = references_from_operating_point(op, cfg.params)
    events = ()
    if cfg.step is not None:
        from .simulate import ReferenceStep

        delta = cfg.step.amplitude * np.exp(1j * np.angle(refs[cfg.step.phase]))
        events = (ReferenceStep(time=cfg.step.time, phase=cfg.step.phase, delta=delta),)
    sim_cfg = SimulationConfig(
        dt=cfg.sim.dt,
        t_end=cfg.sim.t_end,
        settle_periods=cfg.sim.settle_periods,
        events=events,
    )
    traj = simulate_closed_loop(cfg.params, cfg.ctrl, refs, sim_cfg)
    write_trajectory_csv(out / "trajectory.csv", traj, STATE_LABELS, timestamp)
    checks = [("completed", True, f"{traj.t.size - 1} steps")]
    write_report(out / "report.txt", "closed-loop simulation", checks, timestamp)
    return 0


# ----------------------------------------------------------- verify-steady


def run_verify_steady(cfg: RunConfig, out: Path, timestamp: bool) -> int:
    op = solve_operating_point(cfg)
    traj = simulate_open_loop(cfg.params, cfg.m, cfg.sim)
    w1 = cfg.params.omega1
    spp = steps_per_period(traj, w1)
    t_grid = traj.t[-spp - 1 : -1]

    checks = []

    # Dominant-component agreement and one-period waveform match.
    for var in STATE_VARIABLES:
        for p in PHASES:
            hss_hv = op.spectrum(var, p)
            sim_hv = settled_spectrum(traj, var, p, cfg.h, w1)
            write_spectrum_csv(out / f"spectrum_hss_{var}_{p}.csv", hss_hv, timestamp)
            write_spectrum_csv(out / f"spectrum_sim_{var}_{p}.csv", sim_hv, timestamp)

            report = compare_spectra(hss_hv, sim_hv, dominant_fraction=DOMINANT_FRACTION)
            mask = report.dominant & (np.abs(report.harmonic_indices) <= 3)
            worst = float(np.max(report.rel_error[mask])) if np.any(mask) else 0.0
            checks.append(
                (
                    f"dominant {var} {p}",
                    worst <= DOMINANT_REL_TOL,
                    f"max rel err {worst:.4%} (tol {DOMINANT_REL_TOL:.0%})",
                )
            )

            wave_hss = synthesize(hss_hv, t_grid)
            wave_sim = traj.series(var, p)[-spp - 1 : -1]
            err = nrmse(wave_sim, wave_hss)
            write_waveform_csv(out / f"waveform_{var}_{p}.csv", t_grid, wave_hss, wave_sim, timestamp)
            checks.append(
                (
                    f"waveform {var} {p}",
                    err <= WAVEFORM_NRMSE_TOL,
                    f"NRMSE {err:.4%} (tol {WAVEFORM_NRMSE_TOL:.0%})",
                )
            )

    checks.extend(spectral_content_checks(traj, cfg))

    balance = power_balance(traj, cfg.params)
    mismatch = abs(balance["dc_input"] - balance["load"] - balance["arm_loss"])
    rel = mismatch / abs(balance["dc_input"]) if balance["dc_input"] else 0.0
    checks.append(
        ("energy balance", rel <= ENERGY_BALANCE_TOL, f"mismatch {rel:.4%} of dc input")
    )

    ok = write_report(
        out / "report.txt", f"steady-state verification (m={cfg.m}, h={cfg.h})", checks, timestamp
    )
    return 0 if ok else 1


def spectral_content_checks(traj: Trajectory, cfg: RunConfig) -> list[tuple[str, bool, str]]:
    """Structural claims about the settled spectra of a healthy operating point:
    circulating currents carry dc plus even harmonics, capacitor voltages are
    dominated by their first three harmonics, ac currents are near-sinusoidal.
    """
    w1 = cfg.params.omega1
    checks = []
    for p in PHASES:
        ic = settled_spectrum(traj, "i_c", p, CLAIMS_ORDER, w1)
        even = min(abs(ic[0]), abs(ic[2]))
        odd = max(abs(ic[1]), abs(ic[3]))
        checks.append(
            (
                f"circulating dc/2nd dominance {p}",
                even >= ODD_HARMONIC_RATIO * odd,
                f"min(dc,2nd)={even:.4g} A vs {ODD_HARMONIC_RATIO}x max(1st,3rd)={ODD_HARMONIC_RATIO * odd:.4g} A",
            )
        )
    for var in ("v_cu", "v_cl"):
        for p in PHASES:
            vc = settled_spectrum(traj, var, p, CLAIMS_ORDER, w1)
            floor = 1e-6 * max(abs(vc[k]) for k in range(0, CLAIMS_ORDER + 1))
            low_ok = all(abs(vc[k]) > floor for k in (0, 1, 2, 3))
            high = max(abs(vc[k]) for k in range(4, CLAIMS_ORDER + 1))
            high_ok = high < HIGH_HARMONIC_FRACTION * abs(vc[3])
            checks.append(
                (
                    f"capacitor harmonic content {var} {p}",
                    low_ok and high_ok,
                    f"4th+ max {high:.4g} V vs {HIGH_HARMONIC_FRACTION:.0%} of 3rd {abs(vc[3]):.4g} V",
                )
            )
    for p in PHASES:
        ig = settled_spectrum(traj, "i_g", p, max(CLAIMS_ORDER, 10), w1)
        thd = total_harmonic_distortion(ig, k_max=10)
        checks.append(
            (
                f"ac current distortion {p}",
                thd < AC_CURRENT_THD_MAX,
                f"THD {thd:.4%} (max {AC_CURRENT_THD_MAX:.0%})",
            )
        )
    return checks


# --------------------------------------------------------- verify-smallsig


@dataclass
class SmallsigComparison:
    """Perturbation trajectories of one step amplitude over the window."""

    amplitude: float
    t: np.ndarray
    nonlinear: dict[str, np.ndarray]      # keyed 'i_c', 'i_g' (phase of the step)
    reconstructed: dict[str, np.ndarray]
    nrmse: dict[str, float]
    peak_error: dict[str, float]
    pre_step_peak: dict[str, float]
    post_step_peak: dict[str, float]


class SmallsigContext:
    """Shared state for small-signal verification runs.

    Builds the operating point, the lifted model, and the common pre-step
    nonlinear segment once; individual step amplitudes reuse them.
    """

    def __init__(self, cfg: RunConfig):
        _require_controller(cfg)
        if cfg.step is None:
            raise SchemaViolationError("[step]: section required for this scenario")
        self.cfg = cfg
        self.params = cfg.params
        self.op = solve_operating_point(cfg)
        self.refs = references_from_operating_point(self.op, cfg.params)
        self.model = assemble_smallsignal(self.op, cfg.params, cfg.ctrl, cfg.h)
        self.eig = eigenvalues(self.model)

        # The timeline derives from the step configuration alone: a common
        # pre-step segment, then baseline and stepped continuations covering
        # the comparison window.
        dt = cfg.sim.dt
        self.dt = dt
        self.spp = int(round(cfg.params.period / dt))
        self.step_index = int(round(cfg.step.time / dt))
        self.t_step = self.step_index * dt
        self.window_steps = cfg.step.window_periods * self.spp

        pre_cfg = SimulationConfig(
            dt=dt, t_end=self.t_step, settle_periods=min(cfg.sim.settle_periods, 2)
        )
        self.common = simulate_closed_loop(cfg.params, cfg.ctrl, self.refs, pre_cfg)
        self._x_step = np.hstack([self.common.states[-1], self.common.controller[-1]])

        run_cfg = SimulationConfig(
            dt=dt, t_end=self.t_step + self.window_steps * dt, settle_periods=2
        )
        self.baseline = simulate_closed_loop(
            cfg.params, cfg.ctrl, self.refs, run_cfg, x0=self._x_step, t_start=self.t_step
        )

    def compare(self, amplitude: float) -> SmallsigComparison:
        cfg = self.cfg
        phase = cfg.step.phase
        direction = np.exp(1j * np.angle(self.refs[phase]))
        delta = amplitude * direction

        refs_stepped = dict(self.refs)
        refs_stepped[phase] = refs_stepped[phase] + delta
        run_cfg = SimulationConfig(
            dt=self.dt, t_end=self.t_step + self.window_steps * self.dt, settle_periods=2
        )
        stepped = simulate_closed_loop(
            cfg.params, cfg.ctrl, refs_stepped, run_cfg, x0=self._x_step, t_start=self.t_step
        )

        u_vec = lifted_reference_step(self.model, phase, delta)
        env = envelope_response(
            self.model,
            [(self.t_step, u_vec)],
            t_end=self.t_step + self.window_steps * self.dt,
            dt=self.dt,
            t_start=self.t_step,
        )

        t = env.t
        nonlinear = {}
        reconstructed = {}
        nrmse_map = {}
        peak_error = {}
        pre_peak = {}
        post_peak = {}
        for var in ("i_c", "i_g"):
            d_nl = stepped.series(var, phase) - self.baseline.series(var, phase)
            d_hss = reconstruct_perturbation(env, var, phase)
            nonlinear[var] = d_nl
            reconstructed[var] = d_hss
            nrmse_map[var] = nrmse(d_nl, d_hss)
            peak_error[var] = float(np.max(np.abs(d_hss - d_nl)))
            pre_peak[var] = float(np.max(np.abs(self.common.series(var, phase)[-self.spp - 1 :])))
            post_peak[var] = float(np.max(np.abs(stepped.series(var, phase)[-self.spp - 1 :])))

        return SmallsigComparison(
            amplitude=amplitude,
            t=t,
            nonlinear=nonlinear,
            reconstructed=reconstructed,
            nrmse=nrmse_map,
            peak_error=peak_error,
            pre_step_peak=pre_peak,
            post_step_peak=post_peak,
        )


def run_verify_smallsig(cfg: RunConfig, out: Path, timestamp: bool) -> int:
    ctx = SmallsigContext(cfg)
    write_eigenvalue_csv(out / "eigenvalues.csv", ctx.eig, timestamp)

    checks = [
        ("stability", float(ctx.eig[0].real) < 0.0, f"max real part {ctx.eig[0].real:.4g} 1/s")
    ]
    if not checks[0][1]:
        write_report(out / "report.txt", "small-signal verification", checks, timestamp)
        return 1

    comp = ctx.compare(cfg.step.amplitude)
    for var in ("i_c", "i_g"):
        write_waveform_csv(
            out / f"perturbation_{var}_{cfg.step.phase}.csv",
            comp.t,
            comp.reconstructed[var],
            comp.nonlinear[var],
            timestamp,
        )
        checks.append(
            (
                f"perturbation NRMSE {var} {cfg.step.phase}",
                comp.nrmse[var] <= SMALLSIG_NRMSE_TOL,
                f"{comp.nrmse[var]:.4%} (tol {SMALLSIG_NRMSE_TOL:.0%})",
            )
        )
        checks.append(
            (
                f"post-step amplitude {var} {cfg.step.phase}",
                comp.post_step_peak[var] > comp.pre_step_peak[var],
                f"{comp.pre_step_peak[var]:.6g} A -> {comp.post_step_peak[var]:.6g} A",
            )
        )

    _write_envelope_csv(out / f"envelope_i_c_{cfg.step.phase}.csv", ctx, cfg, timestamp)

    ok = write_report(
        out / "report.txt",
        f"small-signal verification (step {cfg.step.amplitude:.4g} V on phase {cfg.step.phase})",
        checks,
        timestamp,
    )
    return 0 if ok else 1


def _write_envelope_csv(path: Path, ctx: SmallsigContext, cfg: RunConfig, timestamp: bool):
    phase = cfg.step.phase
    direction = np.exp(1j * np.angle(ctx.refs[phase]))
    u_vec = lifted_reference_step(ctx.model, phase, cfg.step.amplitude * direction)
    thin = max(1, ctx.spp // 8)
    env = envelope_response(
        ctx.model,
        [(ctx.t_step, u_vec)],
        t_end=ctx.t_step + ctx.window_steps * ctx.dt,
        dt=ctx.dt,
        t_start=ctx.t_step,
        store_every=thin,
    )
    block = env.block(f"i_c{phase}")
    h = env.h
    columns = ["t"]
    for k in range(-h, h + 1):
        columns += [f"re_k{k}", f"im_k{k}"]
    rows = []
    for i in range(env.t.size):
        row = [env.t[i]]
        for k in range(2 * h + 1):
            row += [block[i, k].real, block[i, k].imag]
        rows.append(row)
    write_csv(path, columns, rows, timestamp)


# ------------------------------------------------------------------ sweep


STEADY_SWEEP_COLUMNS = (
    "value", "i_ca_k0", "i_ca_k2", "v_cua_k1", "v_cua_k2", "v_cua_k3", "i_ga_k1", "error",
)
SMALLSIG_SWEEP_COLUMNS = ("value", "max_eig_real", "error")


def _mag(hv: HarmonicVector, k: int) -> float:
    return abs(hv[k]) if abs(k) <= hv.order else 0.0


def steady_sweep_row(cfg: RunConfig) -> list[float]:
    op = solve_operating_point(cfg)
    ic = op.spectrum("i_c", "a")
    vc = op.spectrum("v_cu", "a")
    ig = op.spectrum("i_g", "a")
    return [_mag(ic, 0), _mag(ic, 2), _mag(vc, 1), _mag(vc, 2), _mag(vc, 3), _mag(ig, 1)]


def run_sweep(cfg: RunConfig, out: Path, timestamp: bool) -> int:
    if cfg.sweep is None:
        raise SchemaViolationError("[sweep]: section required for the sweep scenario")
    sweep = cfg.sweep
    columns = STEADY_SWEEP_COLUMNS if sweep.scenario == "steady" else SMALLSIG_SWEEP_COLUMNS

    rows = []
    failures = 0
    for value in sweep.values:
        try:
            point = apply_sweep_value(cfg, sweep.key, value)
            if sweep.scenario == "steady":
                metrics = steady_sweep_row(point)
            else:
                _, model, _ = build_smallsignal_model(point)
                metrics = [float(eigenvalues(model)[0].real)]
            rows.append([value, *metrics, ""])
        except Exception as exc:  # recorded per value, sweep continues
            failures += 1
            pad = len(columns) - 2
            rows.append([value, *([""] * pad), str(exc).replace(",", ";")])

    path = out / "sweep.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_sweep_csv(path, columns, rows, timestamp)
    checks = [
        ("sweep points", failures == 0, f"{len(sweep.values) - failures}/{len(sweep.values)} succeeded")
    ]
    ok = write_report(out / "report.txt", f"sweep over {sweep.key}", checks, timestamp)
    return 0 if ok else 1


def _write_sweep_csv(path: Path, columns, rows, timestamp: bool):
    from .reports import _fmt
    import datetime

    lines = []
    if timestamp:
        now = datetime.datetime.now(datetime.timezone.utc).isoformat()
        lines.append(f"# generated {now}")
    lines.append(",".join(columns))
    for row in rows:
        parts = []
        for v in row:
            parts.append(v if isinstance(v, str) else _fmt(v))
        lines.append(",".join(parts))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


SCENARIO_RUNNERS = {
    "steady": run_steady,
    "smallsig": run_smallsig,
    "simulate-open": run_simulate_open,
    "simulate-closed": run_simulate_closed,
    "verify-steady": run_verify_steady,
    "verify-smallsig": run_verify_smallsig,
    "sweep": run_sweep,
}
