"""Run configuration: INI-style ``key = value`` sections, strictly validated.

Sections and keys
-----------------
[params]      R, L, C_sm, N, V_dc, omega1, R_load, L_load (optional, default 0)
[run]         m, h, scenario (optional), output_dir (optional)
[controller]  K_p, K_r, k_f           (required for closed-loop scenarios)
[sim]         dt | steps_per_period   (exactly one)
              t_end | total_periods   (exactly one)
              settle_periods          (optional, default 40)
[step]        time | period           (exactly one)
              phase, amplitude, window_periods (optional, default 10)
[sweep]       key, values, scenario   (scenario: steady or smallsig)

Unknown sections or keys are rejected. Two presets ship with the package:
``sec3-simulation`` (50 MW / 320 kV transmission-scale case) and
``table1-prototype`` (30 kW laboratory-scale case).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import SchemaViolationError
from .plant import PHASES, MmcParameters
from .simulate import SimulationConfig
from .smallsignal import ControllerParams

SCENARIOS = (
    "steady",
    "smallsig",
    "simulate-open",
    "simulate-closed",
    "verify-steady",
    "verify-smallsig",
    "sweep",
)

_SCHEMA = {
    "params": {"R", "L", "C_sm", "N", "V_dc", "omega1", "R_load", "L_load"},
    "run": {"m", "h", "scenario", "output_dir"},
    "controller": {"K_p", "K_r", "k_f"},
    "sim": {"dt", "steps_per_period", "t_end", "total_periods", "settle_periods"},
    "step": {"time", "period", "phase", "amplitude", "window_periods"},
    "sweep": {"key", "values", "scenario"},
}

_REQUIRED = {
    "params": {"R", "L", "C_sm", "N", "V_dc", "omega1", "R_load"},
    "run": {"m", "h"},
    "controller": {"K_p", "K_r", "k_f"},
    "step": {"phase", "amplitude"},
    "sweep": {"key", "values"},
}


@dataclass(frozen=True)
class StepConfig:
    """One fundamental-amplitude reference step for closed-loop scenarios."""

    time: float                 # seconds; already resolved from time/period
    phase: str
    amplitude: float            # volts added along the existing reference phasor
    window_periods: int = 10


@dataclass(frozen=True)
class SweepConfig:
    key: str
    values: tuple[float, ...]
    scenario: str = "steady"


@dataclass(frozen=True)
class RunConfig:
    """Fully validated inputs for one scenario run."""

    params: MmcParameters
    m: float
    h: int
    sim: SimulationConfig
    ctrl: ControllerParams | None = None
    step: StepConfig | None = None
    sweep: SweepConfig | None = None
    scenario: str | None = None
    output_dir: str | None = None


def _fail(section: str, key: str | None, message: str) -> SchemaViolationError:
    where = f"[{section}]" + (f" {key}" if key else "")
    return SchemaViolationError(f"{where}: {message}")


class _Section:
    def __init__(self, name: str, items: dict[str, str]):
        self.name = name
        self.items = items

    def get_float(self, key: str) -> float:
        try:
            return float(self.items[key])
        except ValueError:
            raise _fail(self.name, key, f"not a number: {self.items[key]!r}") from None

    def get_int(self, key: str) -> int:
        raw = self.items[key]
        try:
            value = float(raw)
        except ValueError:
            raise _fail(self.name, key, f"not an integer: {raw!r}") from None
        if value != int(value):
            raise _fail(self.name, key, f"not an integer: {raw!r}")
        return int(value)

    def get_str(self, key: str) -> str:
        return self.items[key].strip()

    def __contains__(self, key: str) -> bool:
        return key in self.items


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document.

    Raises SchemaViolationError with section/key diagnostics for unknown
    keys, missing required keys, malformed values, or invariant failures.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise SchemaViolationError(f"malformed configuration: {exc}") from None

    sections: dict[str, _Section] = {}
    for name in parser.sections():
        if name not in _SCHEMA:
            raise SchemaViolationError(f"unknown section [{name}]")
        items = dict(parser.items(name))
        unknown = set(items) - _SCHEMA[name]
        if unknown:
            raise _fail(name, sorted(unknown)[0], "unknown key")
        missing = _REQUIRED.get(name, set()) - set(items)
        if missing:
            raise _fail(name, sorted(missing)[0], "required key missing")
        sections[name] = _Section(name, items)

    for required_section in ("params", "run"):
        if required_section not in sections:
            raise SchemaViolationError(f"required section [{required_section}] missing")

    p = sections["params"]
    try:
        params = MmcParameters(
            R=p.get_float("R"),
            L=p.get_float("L"),
            C_sm=p.get_float("C_sm"),
            N=p.get_int("N"),
            V_dc=p.get_float("V_dc"),
            omega1=p.get_float("omega1"),
            R_load=p.get_float("R_load"),
            L_load=p.get_float("L_load") if "L_load" in p else 0.0,
        )
    except ValueError as exc:
        raise SchemaViolationError(f"[params]: {exc}") from None

    r = sections["run"]
    m = r.get_float("m")
    if not 0.0 <= m <= 1.0:
        raise _fail("run", "m", f"modulation index {m} outside [0, 1]")
    h = r.get_int("h")
    if h < 0:
        raise _fail("run", "h", "h must be >= 0")

    scenario = None
    if "scenario" in r:
        scenario = r.get_str("scenario")
        if scenario not in SCENARIOS:
            raise _fail("run", "scenario", f"unknown scenario {scenario!r}")
    output_dir = r.get_str("output_dir") if "output_dir" in r else None

    ctrl = None
    if "controller" in sections:
        c = sections["controller"]
        try:
            ctrl = ControllerParams(
                K_p=c.get_float("K_p"),
                K_r=c.get_float("K_r"),
                k_f=c.get_float("k_f"),
                omega1=params.omega1,
            )
        except ValueError as exc:
            raise SchemaViolationError(f"[controller]: {exc}") from None

    sim = _parse_sim(sections.get("sim"), params)
    step = _parse_step(sections.get("step"), params)
    sweep = _parse_sweep(sections.get("sweep"))

    return RunConfig(
        params=params,
        m=m,
        h=h,
        sim=sim,
        ctrl=ctrl,
        step=step,
        sweep=sweep,
        scenario=scenario,
        output_dir=output_dir,
    )


def _parse_sim(s: _Section | None, params: MmcParameters) -> SimulationConfig:
    period = params.period
    if s is None:
        return SimulationConfig(dt=period / 2000.0, t_end=42.0 * period, settle_periods=40)

    if ("dt" in s) == ("steps_per_period" in s):
        raise _fail("sim", None, "exactly one of dt / steps_per_period is required")
    if "dt" in s:
        dt = s.get_float("dt")
    else:
        spp = s.get_int("steps_per_period")
        if spp < 4:
            raise _fail("sim", "steps_per_period", "must be >= 4")
        dt = period / spp

    if ("t_end" in s) == ("total_periods" in s):
        raise _fail("sim", None, "exactly one of t_end / total_periods is required")
    t_end = s.get_float("t_end") if "t_end" in s else s.get_int("total_periods") * period

    settle = s.get_int("settle_periods") if "settle_periods" in s else 40
    if settle < 2:
        raise _fail("sim", "settle_periods", "must be >= 2")

    try:
        cfg = SimulationConfig(dt=dt, t_end=t_end, settle_periods=settle)
        cfg.validate_against(params)
    except ValueError as exc:
        raise SchemaViolationError(f"[sim]: {exc}") from None
    return cfg


def _parse_step(s: _Section | None, params: MmcParameters) -> StepConfig | None:
    if s is None:
        return None
    if ("time" in s) == ("period" in s):
        raise _fail("step", None, "exactly one of time / period is required")
    time = s.get_float("time") if "time" in s else s.get_int("period") * params.period
    phase = s.get_str("phase")
    if phase not in PHASES:
        raise _fail("step", "phase", f"phase must be one of {PHASES}")
    window = s.get_int("window_periods") if "window_periods" in s else 10
    if window < 1:
        raise _fail("step", "window_periods", "must be >= 1")
    return StepConfig(
        time=time, phase=phase, amplitude=s.get_float("amplitude"), window_periods=window
    )


def _parse_sweep(s: _Section | None) -> SweepConfig | None:
    if s is None:
        return None
    key = s.get_str("key")
    if key not in SWEEPABLE_KEYS:
        raise _fail("sweep", "key", f"key must be one of {sorted(SWEEPABLE_KEYS)}")
    raw = s.get_str("values")
    values = []
    if raw:
        for tok in raw.split(","):
            tok = tok.strip()
            if not tok:
                continue
            try:
                values.append(float(tok))
            except ValueError:
                raise _fail("sweep", "values", f"not a number: {tok!r}") from None
    scenario = s.get_str("scenario") if "scenario" in s else "steady"
    if scenario not in ("steady", "smallsig"):
        raise _fail("sweep", "scenario", "sweep scenario must be steady or smallsig")
    return SweepConfig(key=key, values=tuple(values), scenario=scenario)


SWEEPABLE_KEYS = {
    "m", "h",
    "R", "L", "C_sm", "N", "V_dc", "omega1", "R_load", "L_load",
    "K_p", "K_r", "k_f",
}


def apply_sweep_value(cfg: RunConfig, key: str, value: float) -> RunConfig:
    """New RunConfig with one numeric field replaced."""
    from dataclasses import replace

    if key == "m":
        if not 0.0 <= value <= 1.0:
            raise SchemaViolationError(f"swept m {value} outside [0, 1]")
        return replace(cfg, m=float(value))
    if key == "h":
        if value != int(value) or value < 0:
            raise SchemaViolationError(f"swept h {value} is not a valid order")
        return replace(cfg, h=int(value))
    if key in ("R", "L", "C_sm", "N", "V_dc", "omega1", "R_load", "L_load"):
        if key == "N":
            if value != int(value):
                raise SchemaViolationError(f"swept N {value} is not an integer")
            kwargs = {key: int(value)}
        else:
            kwargs = {key: float(value)}
        try:
            return replace(cfg, params=_replace_params(cfg.params, **kwargs))
        except ValueError as exc:
            raise SchemaViolationError(str(exc)) from None
    if key in ("K_p", "K_r", "k_f"):
        if cfg.ctrl is None:
            raise SchemaViolationError("cannot sweep controller gains without [controller]")
        try:
            return replace(cfg, ctrl=_replace_ctrl(cfg.ctrl, **{key: float(value)}))
        except ValueError as exc:
            raise SchemaViolationError(str(exc)) from None
    raise SchemaViolationError(f"unsweepable key {key!r}")


def _replace_params(params: MmcParameters, **kwargs) -> MmcParameters:
    from dataclasses import replace

    return replace(params, **kwargs)


def _replace_ctrl(ctrl: ControllerParams, **kwargs) -> ControllerParams:
    from dataclasses import replace

    return replace(ctrl, **kwargs)


def preset_names() -> tuple[str, ...]:
    files = resources.files("hssmmc").joinpath("presets")
    return tuple(sorted(p.name[: -len(".ini")] for p in files.iterdir() if p.name.endswith(".ini")))


def load_config(source: str) -> RunConfig:
    """Load a configuration from a file path or a bundled preset name."""
    path = Path(source)
    if path.is_file():
        return parse_config(path.read_text(encoding="utf-8"))
    candidate = resources.files("hssmmc").joinpath("presets").joinpath(f"{source}.ini")
    if candidate.is_file():
        return parse_config(candidate.read_text(encoding="utf-8"))
    raise SchemaViolationError(
        f"configuration {source!r} is neither a file nor a bundled preset "
        f"(presets: {', '.join(preset_names())})"
    )
