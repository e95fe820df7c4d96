"""CSV and report emission.

All files are UTF-8 with LF line endings and '.' decimal separators.
Column sets and their ordering are fixed; when enabled, a single comment
line with the generation timestamp precedes the header.
"""

from __future__ import annotations

import datetime
from pathlib import Path

import numpy as np

from .harmonic import HarmonicVector
from .simulate import Trajectory

SPECTRUM_COLUMNS = ("k", "real", "imag", "magnitude", "phase_deg")
WAVEFORM_COLUMNS = ("t", "value_hss", "value_sim", "abs_error")


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")


def write_csv(path: Path, columns, rows, timestamp: bool) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    if timestamp:
        now = datetime.datetime.now(datetime.timezone.utc).isoformat()
        lines.append(f"# generated {now}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_spectrum_csv(path: Path, hv: HarmonicVector, timestamp: bool) -> None:
    rows = []
    for k in range(-hv.order, hv.order + 1):
        c = hv[k]
        rows.append((k, c.real, c.imag, abs(c), float(np.degrees(np.angle(c)))))
    write_csv(path, SPECTRUM_COLUMNS, rows, timestamp)


def write_waveform_csv(path: Path, t, value_hss, value_sim, timestamp: bool) -> None:
    rows = zip(t, value_hss, value_sim, np.abs(np.asarray(value_hss) - np.asarray(value_sim)))
    write_csv(path, WAVEFORM_COLUMNS, rows, timestamp)


def write_trajectory_csv(path: Path, traj: Trajectory, labels, timestamp: bool) -> None:
    columns = ["time", *labels]
    data = traj.states
    if traj.controller is not None:
        columns += ["pr_a1", "pr_a2", "pr_b1", "pr_b2", "pr_c1", "pr_c2"]
        data = np.hstack([traj.states, traj.controller])
    rows = ((traj.t[i], *data[i]) for i in range(traj.t.size))
    write_csv(path, columns, rows, timestamp)


def write_eigenvalue_csv(path: Path, eig: np.ndarray, timestamp: bool) -> None:
    rows = ((i, lam.real, lam.imag) for i, lam in enumerate(eig))
    write_csv(path, ("index", "real", "imag"), rows, timestamp)


def write_report(path: Path, title: str, checks, timestamp: bool) -> bool:
    """Write the pass/fail report; returns True when every check passed.

    ``checks`` is a sequence of (name, passed, detail) triples.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    if timestamp:
        now = datetime.datetime.now(datetime.timezone.utc).isoformat()
        lines.append(f"# generated {now}")
    lines.append(title)
    all_pass = True
    for name, passed, detail in checks:
        all_pass &= bool(passed)
        lines.append(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    lines.append(f"result: {'PASS' if all_pass else 'FAIL'}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return all_pass
