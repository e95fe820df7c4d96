"""Shared fixtures. The transmission-scale preset drives the expensive
session-scoped artifacts (settled open-loop run, small-signal context) so
the verification tests share one simulation each."""

import numpy as np
import pytest

from hssmmc import MmcParameters
from hssmmc.config import load_config
from hssmmc.pipelines import SmallsigContext, solve_operating_point
from hssmmc.simulate import simulate_open_loop


@pytest.fixture(scope="session")
def sec3_cfg():
    return load_config("sec3-simulation")


@pytest.fixture(scope="session")
def sec3_params(sec3_cfg):
    return sec3_cfg.params


@pytest.fixture(scope="session")
def sec3_op(sec3_cfg):
    return solve_operating_point(sec3_cfg)


@pytest.fixture(scope="session")
def sec3_traj(sec3_cfg):
    return simulate_open_loop(sec3_cfg.params, sec3_cfg.m, sec3_cfg.sim)


@pytest.fixture(scope="session")
def smallsig_ctx(sec3_cfg):
    return SmallsigContext(sec3_cfg)


@pytest.fixture(scope="session")
def smallsig_comparisons(smallsig_ctx):
    return {amp: smallsig_ctx.compare(amp) for amp in (10e3, 5e3)}


@pytest.fixture(scope="session")
def fast_params():
    """Small, strongly damped system for cheap simulation tests."""
    return MmcParameters(
        R=5.0, L=0.05, C_sm=2e-3, N=10, V_dc=1000.0, omega1=314.0, R_load=10.0
    )


def random_real_vector(rng, h, omega1, scale=1.0):
    """Random conjugate-symmetric harmonic coefficient array."""
    from hssmmc import HarmonicVector

    c = rng.normal(size=2 * h + 1) + 1j * rng.normal(size=2 * h + 1)
    c = 0.5 * (c + np.conj(c[::-1])) * scale
    return HarmonicVector(h, omega1, c)
