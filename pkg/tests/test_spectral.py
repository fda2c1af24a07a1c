import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavehom.cell import CellGrid, constant_field, reciprocal_sine_field
from wavehom.spectral_hierarchy import (
    SpectralCorrectors,
    build_spectral,
    dual_path_gap,
    gamma_taylor,
    lambda_taylor,
    psi_xi,
)

# frozen after agreement of the real recursion, the complex xi route and the
# revamped hyperbolic route (test field a = 2 + sin 2 pi y, N = 512)
B3 = 6.416770725850613e-03
B5 = -6.115314912678969e-04


def test_abar_is_harmonic_mean(spectral):
    assert abs(spectral.b[1] - np.sqrt(3)) < 1e-12


def test_reciprocal_field_has_unit_abar():
    c = build_spectral(reciprocal_sine_field(), 3, CellGrid(256))
    assert abs(c.b[1] - 1) < 1e-12


def test_homogeneous_medium_has_no_correctors():
    c = build_spectral(constant_field(1.7), 5, CellGrid(128))
    assert np.allclose(c.b, [0, 1.7, 0, 0, 0, 0], atol=1e-14)
    for n in range(1, 6):
        assert np.abs(c.psi[n]).max() < 1e-14
    assert all(np.abs(z).max() < 1e-14 for z in c.zeta.values())


def test_even_coefficients_vanish(spectral):
    for n in (2, 4, 6):
        assert abs(spectral.b[n]) / spectral.b[1] < 1e-12


def test_frozen_odd_coefficients(spectral):
    assert spectral.b[3] == pytest.approx(B3, rel=1e-10)
    assert spectral.b[5] == pytest.approx(B5, rel=1e-9)


def test_b3_from_complex_route(spectral):
    xi = 0.7
    _, lam = psi_xi(spectral.grid, spectral.a, 4, xi)
    # lambda_4 = -b3 (i xi)^4
    assert (-lam[4] / (1j * xi) ** 4).real == pytest.approx(B3, rel=1e-10)


@settings(max_examples=6, deadline=None)
@given(xi=st.floats(0.1, 2.0), sign=st.sampled_from([-1, 1]))
def test_dual_path_agreement(spectral_small, xi, sign):
    gaps = dual_path_gap(spectral_small, sign * xi)
    assert max(gaps.values()) <= 1e-9


def test_corrector_means(spectral):
    for n in range(1, spectral.ell + 1):
        assert abs(np.mean(spectral.psi[n])) < 1e-15


def test_flux_corrector_oracle(spectral):
    # sigma_n equals the centred flux a (psi_{n+1}' + psi_n) - b_{n+1}
    g, a = spectral.grid, spectral.a
    for n in range(0, spectral.ell):
        flux = a * (g.grad(spectral.psi[n + 1]) + spectral.psi[n]) - spectral.b[n + 1]
        assert np.abs(spectral.sigma[n] - flux).max() < 1e-10
    assert np.abs(spectral.sigma[0]).max() < 1e-14
    assert np.abs(spectral.sigma[1]).max() < 1e-12


def test_rho_solves_poisson(spectral):
    g = spectral.grid
    for n, r in spectral.rho.items():
        assert g.l2(-g.grad(r) - spectral.psi[n - 1] + np.mean(spectral.psi[n - 1])) < 1e-10


def test_zeta_mean_is_orthogonality_constant(spectral):
    for (n, m), z in spectral.zeta.items():
        c = -sum((-1) ** k * np.mean(spectral.psi[k] * spectral.zeta[(n - k, m)]) for k in range(1, n + 1))
        assert abs(np.mean(z) - c) < 1e-14


def test_tau_includes_negative_slot(spectral):
    assert (-1, 1) in spectral.tau
    assert (-1, 2) in spectral.tau


@settings(max_examples=50, deadline=None)
@given(eta=st.floats(-50, 50), ell=st.integers(1, 7))
def test_gamma_bounded_by_one(spectral, eta, ell):
    assert 0 < spectral.gamma(eta, ell) <= 1 + 1e-14


def test_gamma_taylor(spectral):
    g = gamma_taylor(spectral.psi, 4, 6)
    assert g[0] == 1
    assert np.all(g[1::2] == 0)
    eta = 1e-2
    series = np.polynomial.polynomial.polyval(eta, g)
    assert abs(series - spectral.gamma(eta, 4)) < 1e-13


def test_lambda_taylor_low_order(spectral):
    xi = np.array([0.1, -0.3])
    assert np.allclose(lambda_taylor(spectral.b, xi, 2), spectral.b[1] * xi**2)
    assert np.allclose(lambda_taylor(spectral.b, xi, 4), spectral.b[1] * xi**2 - spectral.b[3] * xi**4)


def test_fredholm_log(spectral):
    assert len(spectral.fredholm) > 10
    assert spectral.max_fredholm() <= 1e-9


def test_roundtrip(tmp_path, spectral):
    p = tmp_path / "c.npz"
    spectral.save(p)
    c = SpectralCorrectors.load(p)
    assert np.array_equal(c.b, spectral.b)
    assert set(c.zeta) == set(spectral.zeta) and set(c.tau) == set(spectral.tau)
    assert np.array_equal(c.tau[(-1, 1)], spectral.tau[(-1, 1)])


def test_coarse_grid_rejected(field):
    with pytest.raises(ValueError):
        build_spectral(field, 2, CellGrid(64))
