"""Lifted steady-state model assembly and operating-point solve."""

import numpy as np
import pytest

from hssmmc import (
    MmcParameters,
    SingularSystemError,
    UnknownVariableError,
    assemble_steady,
    dc_input_vector,
    extract_spectrum,
    frequency_matrix,
    open_loop_insertion_indices,
    solve_steady_state,
    synthesize,
    time_domain_A,
    toeplitz,
)
from hssmmc.plant import PHASES, plant_rhs

W1 = 314.0


def sec3_like():
    return MmcParameters(
        R=1.0, L=0.36, C_sm=140e-6, N=20, V_dc=320e3, omega1=W1, R_load=551.12
    )


def solve(params, m, h):
    idx = open_loop_insertion_indices(m, h, params.omega1)
    model = assemble_steady(params, idx, h)
    return model, solve_steady_state(model, dc_input_vector(params.V_dc, h))


class TestAssembly:
    def test_dimensions(self):
        p = sec3_like()
        model = assemble_steady(p, open_loop_insertion_indices(0.5, 3, W1), 3)
        assert model.A.shape == (12 * 7, 12 * 7)
        assert model.B.shape == (12 * 7, 7)

    def test_dc_only_reduces_to_instantaneous_matrix(self):
        p = sec3_like()
        model = assemble_steady(p, open_loop_insertion_indices(0.0, 0, W1), 0)
        expected = time_domain_A(np.full(3, 0.5), np.full(3, 0.5), p)
        assert np.allclose(model.A.dense, expected, atol=1e-15)
        assert np.max(np.abs(model.A.dense.imag)) == 0.0

    def test_capacitor_diagonals_are_pure_frequency_blocks(self):
        p = sec3_like()
        model = assemble_steady(p, open_loop_insertion_indices(0.6, 3, W1), 3)
        Q = frequency_matrix(3, W1).matrix
        for lbl in ("v_cua", "v_cub", "v_clc"):
            assert np.array_equal(model.A.get_block(lbl, lbl), -Q)

    def test_circulating_capacitor_coupling(self):
        p = sec3_like()
        idx = open_loop_insertion_indices(0.8, 3, W1)
        model = assemble_steady(p, idx, 3)
        expected = -toeplitz(idx.upper["a"]).matrix / (2 * p.L)
        assert np.allclose(model.A.get_block("i_ca", "v_cua"), expected, atol=1e-15)

    def test_input_blocks(self):
        p = sec3_like()
        model = assemble_steady(p, open_loop_insertion_indices(0.8, 3, W1), 3)
        eye = np.eye(7)
        for lbl in ("i_ca", "i_cb", "i_cc"):
            assert np.allclose(model.B.get_block(lbl, "v_dc"), eye / (2 * p.L))
        for lbl in ("v_cua", "v_clb", "i_gc"):
            assert np.count_nonzero(model.B.get_block(lbl, "v_dc")) == 0

    def test_per_harmonic_load_impedance(self):
        p = MmcParameters(
            R=1.0, L=0.1, C_sm=1e-3, N=10, V_dc=1e3, omega1=W1, R_load=5.0, L_load=0.02
        )
        model = assemble_steady(p, open_loop_insertion_indices(0.5, 2, W1), 2)
        blk = model.A.get_block("i_ga", "i_ga")
        k = np.arange(-2, 3)
        expected_diag = -(p.R + 2 * (p.R_load + 1j * k * W1 * p.L_load)) / p.L - 1j * k * W1
        assert np.allclose(np.diag(blk), expected_diag, atol=1e-12)


class TestDcInput:
    def test_values(self):
        u = dc_input_vector(320e3, 3)
        assert u[3] == 320e3
        assert np.count_nonzero(u) == 1

    def test_zero(self):
        assert np.count_nonzero(dc_input_vector(0.0, 3)) == 0

    def test_scalar_order(self):
        assert dc_input_vector(5.0, 0).shape == (1,)


class TestSolve:
    def test_zero_modulation_equilibrium(self):
        p = sec3_like()
        _, op = solve(p, 0.0, 3)
        for ph in PHASES:
            assert np.max(np.abs(op.i_c[ph].coeffs)) <= 1e-12 * p.V_dc
            assert np.max(np.abs(op.i_g[ph].coeffs)) <= 1e-12 * p.V_dc
            assert op.v_cu[ph][0] == pytest.approx(p.V_dc, rel=1e-12)
            ac = np.delete(op.v_cu[ph].coeffs, 3)
            assert np.max(np.abs(ac)) <= 1e-9

    def test_residual_and_symmetry(self, sec3_op):
        assert sec3_op.residual <= 1e-9 * 320e3
        for var in ("i_c", "v_cu", "v_cl", "i_g"):
            for ph in PHASES:
                assert sec3_op.spectrum(var, ph).conjugate_symmetry_defect() <= 1e-9

    def test_dominant_structure(self, sec3_op):
        ic = sec3_op.spectrum("i_c", "a")
        assert abs(ic[0]) > 10 and abs(ic[2]) > 1
        assert abs(ic[1]) < 1e-9 * abs(ic[0])
        vc = sec3_op.spectrum("v_cu", "b")
        for k in (0, 1, 2, 3):
            assert abs(vc[k]) > 0
        ig = sec3_op.spectrum("i_g", "a")
        assert abs(ig[1]) > 10

    def test_phase_rotation(self, sec3_op):
        k = np.arange(-3, 4)
        shift = np.exp(-1j * k * 2 * np.pi / 3)
        for var in ("i_c", "v_cu", "v_cl", "i_g"):
            a = sec3_op.spectrum(var, "a").coeffs
            b = sec3_op.spectrum(var, "b").coeffs
            scale = np.max(np.abs(a)) or 1.0
            assert np.max(np.abs(b - a * shift)) <= 1e-6 * scale

    @pytest.mark.filterwarnings("ignore::scipy.linalg.LinAlgWarning")
    def test_singular_system_detected(self):
        p = sec3_like()
        model = assemble_steady(p, open_loop_insertion_indices(0.5, 2, W1), 2)
        for row in model.A.block_rows:
            for col in model.A.block_cols:
                model.A.set_block(row, col, np.zeros((5, 5)))
        with pytest.raises(SingularSystemError):
            solve_steady_state(model, dc_input_vector(p.V_dc, 2))

    def test_reconstruction_satisfies_ode(self):
        # The synthesized periodic solution, differentiated spectrally, must
        # match the plant equations along the orbit (truncation-limited).
        p = sec3_like()
        _, op = solve(p, 0.5, 5)
        idx = op.indices
        T = p.period
        ts = np.linspace(0.0, T, 400, endpoint=False)
        labels = [(var, ph) for var in ("i_c", "v_cu", "v_cl", "i_g") for ph in PHASES]
        deriv = np.array(
            [synthesize(op.spectrum(var, ph).derivative(), ts) for var, ph in labels]
        )
        states = np.array([synthesize(op.spectrum(var, ph), ts) for var, ph in labels])
        n_u = np.array([synthesize(idx.upper[ph], ts) for ph in PHASES])
        n_l = np.array([synthesize(idx.lower[ph], ts) for ph in PHASES])
        residual = np.empty_like(deriv)
        for i, t in enumerate(ts):
            rhs = plant_rhs(states[:, i], n_u[:, i], n_l[:, i], p.V_dc, p)
            residual[:, i] = deriv[:, i] - rhs
        for row, (var, ph) in enumerate(labels):
            rms_residual = np.sqrt(np.mean(residual[row] ** 2))
            rms_deriv = np.sqrt(np.mean(deriv[row] ** 2))
            assert rms_residual < 0.01 * rms_deriv


class TestExtractSpectrum:
    def test_accessor(self, sec3_op):
        hv = extract_spectrum(sec3_op, "v_cu", "b")
        assert hv is sec3_op.v_cu["b"]

    def test_zero_modulation_values(self):
        p = sec3_like()
        _, op = solve(p, 0.0, 3)
        assert np.max(np.abs(extract_spectrum(op, "i_c", "a").coeffs)) < 1e-9
        assert extract_spectrum(op, "v_cu", "a")[0] == pytest.approx(p.V_dc)

    def test_unknown_variable(self, sec3_op):
        with pytest.raises(UnknownVariableError):
            extract_spectrum(sec3_op, "i_x", "a")
        with pytest.raises(UnknownVariableError):
            extract_spectrum(sec3_op, "i_c", "d")
