import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavehom.bloch import (
    BlochSolver,
    DegenerateGroundState,
    ModeTruncationWarning,
    bloch_duhamel,
    coefficient_modes,
    taylor_residual,
)
from wavehom.cell import CellGrid, constant_field
from wavehom.effective import Impulse, duhamel


def test_coefficient_modes_of_sine(grid, field):
    c = coefficient_modes(field.sample(grid), 3)
    # 2 + sin(2 pi y) = 2 + (e^{2 pi i y} - e^{-2 pi i y}) / 2i
    expect = np.zeros(7, complex)
    expect[3] = 2
    expect[4] = 1 / 2j
    expect[2] = -1 / 2j
    assert np.abs(c - expect).max() < 1e-15
    with pytest.raises(ValueError):
        coefficient_modes(np.ones(8), 4)


def test_homogeneous_medium():
    s = BlochSolver(constant_field(2.0), 8, CellGrid(64))
    for xi in (0.0, 0.3, -1.1):
        g = s.ground_state(xi)
        assert g.eigenvalue == pytest.approx(2 * xi**2, abs=1e-13)
        assert abs(g.mean - 1) < 1e-13
    assert np.allclose(np.diag(s.assemble(0.5).matrix), 2 * (2 * np.pi * s.ks + 0.5) ** 2)


def test_matrix_is_hermitian_and_matches_quadratic_form(bloch, rng):
    xi = 0.37
    M = bloch.assemble(xi).matrix
    assert np.abs(M - M.conj().T).max() <= 1e-15 * np.abs(M).max()
    c = np.zeros(bloch.ks.size, complex)
    mid = bloch.K
    c[mid - 3: mid + 4] = rng.normal(size=7) + 1j * rng.normal(size=7)
    w = bloch.cell_values(c)
    Dw = bloch.cell_derivative(c) + 1j * xi * w
    quad = np.mean(bloch.a * np.abs(Dw) ** 2)
    assert (c.conj() @ M @ c).real == pytest.approx(quad, rel=1e-12)


@pytest.mark.parametrize("xi", [0.01, 0.1, 0.5, -0.7, 3.0])
def test_eigenvalues_match_dense_solver(bloch, xi):
    nu, V = bloch.modes(xi, 4)
    M = bloch.assemble(xi).matrix
    dense = np.linalg.eigvalsh(M)[:4]
    assert np.allclose(nu, dense, rtol=1e-8, atol=1e-9)
    # eigenvector residual, relative to the top of the band
    r = M @ V - V * nu
    assert np.abs(r).max() <= 1e-9 * np.abs(M).max()


def test_zero_fiber(bloch):
    nu, V = bloch.modes(0.0, 3)
    assert nu[0] == 0
    assert np.abs(bloch.cell_values(V[:, 0]) - 1).max() < 1e-14
    assert nu[1] > 30


def test_truncation_converged(field, grid):
    lo = BlochSolver(field, 32, grid).ground_state(0.2)
    hi = BlochSolver(field, 64, grid).ground_state(0.2)
    assert abs(lo.eigenvalue - hi.eigenvalue) < 1e-15
    assert lo.gap > 30


@settings(max_examples=20, deadline=None)
@given(xi=st.floats(-np.pi, np.pi))
def test_ground_state_properties(bloch, xi):
    g = bloch.ground_state(xi)
    assert g.eigenvalue >= 0
    # ground-state energy sits between the arithmetic-free bounds lam xi^2 and abar-ish upper xi^2 sup a
    assert g.eigenvalue <= 3 * xi**2 + 1e-12
    assert g.eigenvalue >= np.sqrt(3) * xi**2 * 0.5
    assert g.mean.real >= 0 and abs(g.mean.imag) < 1e-12


def test_degenerate_ground_state(bloch):
    with pytest.raises(DegenerateGroundState):
        bloch.ground_state(0.1, gap_min=1e9)


def test_taylor_slopes(bloch, spectral):
    s2, _, _ = taylor_residual(bloch, spectral.b, 2)
    s4, _, _ = taylor_residual(bloch, spectral.b, 4)
    assert abs(s2 - 4) <= 0.3
    assert abs(s4 - 6) <= 0.3


def test_duhamel_homogeneous_closed_form():
    grid = CellGrid(64)
    s = BlochSolver(constant_field(1.0), 8, grid)
    f = Impulse.band_limited(L=2, R=4.0, seed=1)
    ref = bloch_duhamel(s, 1 / 4, f, 2.0, M_modes=4)
    I, _ = duhamel(np.abs(f.xis), 2.0, f.f1)[0]
    assert np.abs(ref.W - (I * f.f2hat)[:, None]).max() < 1e-13
    assert np.abs(ref.Wy).max() < 1e-11


def test_mode_count_converged(bloch, small_impulse):
    a = bloch_duhamel(bloch, 1 / 8, small_impulse, 2.0, M_modes=8)
    b = bloch_duhamel(bloch, 1 / 8, small_impulse, 2.0, M_modes=16)
    assert np.abs(a.W - b.W).max() < 1e-10


def test_truncation_warning(bloch, small_impulse):
    with pytest.warns(ModeTruncationWarning):
        bloch_duhamel(bloch, 1 / 8, small_impulse, 0.5, M_modes=2, tail_tol=0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        bloch_duhamel(bloch, 1 / 8, small_impulse, 0.5, M_modes=12)
