import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from wavehom.effective import (
    Bump,
    EffectiveSymbolSpec,
    IllPosedSymbol,
    Impulse,
    InsufficientTimeDerivatives,
    QuadratureFailure,
    Variant,
    beta_bsq,
    chi,
    duhamel,
    geometric_rhs,
    kappa_bsq,
    kappa_reg,
    mu_base,
    mu_bsq,
    solve_effective,
    solve_modes,
    variant_compare,
)


def test_bump_support_and_smoothness():
    f = Bump()
    assert f(np.array([-0.1, 0.0, 1.0, 1.3])).tolist() == [0, 0, 0, 0]
    assert f(np.array([0.5]))[0] == pytest.approx(np.exp(-1))
    with pytest.raises(InsufficientTimeDerivatives):
        f(np.array([0.5]), 25)


@pytest.mark.parametrize("order", [1, 2, 5])
def test_bump_derivatives_against_differences(order):
    f = Bump(t0=0.3, width=1.5)
    t = np.linspace(0.45, 1.65, 7)
    h = 1e-3
    g = lambda s: f(s, order - 1)
    fd = (-g(t + 2 * h) + 8 * g(t + h) - 8 * g(t - h) + g(t - 2 * h)) / (12 * h)
    assert np.abs(fd - f(t, order)).max() <= 1e-6 * max(1.0, np.abs(f(t, order)).max())


def test_impulse_is_real_and_band_limited(impulse):
    assert np.all(np.abs(impulse.xis) < impulse.R)
    assert np.allclose(impulse.f2hat, np.conj(impulse.f2hat[::-1]))
    x = np.linspace(-8, 8, 64, endpoint=False)
    vals = np.exp(1j * np.outer(x, impulse.xis)) @ impulse.f2hat
    assert np.abs(vals.imag).max() < 1e-13
    # Parseval on the torus
    xs = np.linspace(-8, 8, 4096, endpoint=False)
    assert impulse.norm_f2() == pytest.approx(np.sqrt(np.sum(impulse.f2(xs) ** 2) * 16 / 4096), rel=1e-12)


def test_duhamel_matches_ode_solver():
    f1 = Bump()
    mu = 4.0
    sol = solve_ivp(lambda t, y: [y[1], -mu * y[0] + f1(np.array([t]))[0]], (0, 2.5), [0, 0],
                    method="DOP853", rtol=1e-13, atol=1e-15, dense_output=True)
    I, dI = duhamel([2.0], 2.5, f1)[0]
    assert I[0] == pytest.approx(sol.y[0, -1], abs=1e-12)
    assert dI[0] == pytest.approx(sol.y[1, -1], abs=1e-12)


def test_duhamel_zero_frequency_and_before_start():
    f1 = Bump()
    I, dI = duhamel([0.0], 3.0, f1)[0]
    # u'' = f1 gives u(3) = int (3 - s) f1(s) ds
    assert I[0] == pytest.approx(2.5 * f1.l1(), rel=1e-10)
    assert dI[0] == pytest.approx(f1.l1(), rel=1e-10)
    I, dI = duhamel([1.0], -0.5, f1)[0]
    assert I[0] == 0 and dI[0] == 0


def test_duhamel_failure_reported():
    with pytest.raises(QuadratureFailure):
        duhamel([3.0], 1.0, Bump(), tol=0.0, max_doublings=1)


def test_base_symbol(spectral):
    xi = np.array([0.5, -1.0, 2.0])
    assert np.allclose(mu_base(spectral.b, 1, 0.1, xi), spectral.b[1] * xi**2)
    eta = 0.1 * xi
    expect = xi**2 * (spectral.b[1] - spectral.b[3] * eta**2 + spectral.b[5] * eta**4)
    assert np.allclose(mu_base(spectral.b, 5, 0.1, xi), expect, rtol=1e-14)


def test_kappa_reg_closed_form(spectral, field):
    b, lam = spectral.b, field.lam
    c = b[1] - lam / 2
    expect = np.sqrt(4 * b[3] ** 3 / (27 * c))
    assert kappa_reg(b, 3, lam) == pytest.approx(expect, rel=1e-8)
    assert kappa_reg(b, 2, lam) == 0
    assert kappa_reg(np.array([0, 1.0, 0, 0]), 3, 1.0) == 0


@settings(max_examples=30, deadline=None)
@given(eta=st.floats(1e-3, 1e3), sign=st.sampled_from([-1.0, 1.0]))
def test_regularized_symbol_is_coercive(spectral, field, eta, sign):
    b, lam = spectral.b, field.lam
    eta = sign * eta
    for ell in (3, 5, 7):
        k = kappa_reg(b, ell, lam)
        xi = np.array([eta / 0.1])
        val = mu_base(b, ell, 0.1, xi) + k * abs(eta) ** ell * xi**2
        assert val[0] / xi[0] ** 2 >= lam / 2 * (1 - 1e-6)


def test_kappa_bsq(spectral):
    kap = kappa_bsq(spectral.b, 5)
    assert kap[1] == 1 and kap[2] == 0 and kap[4] == 0
    assert kap[3] == pytest.approx(spectral.b[3] / spectral.b[1], rel=1e-14)
    assert kappa_bsq(np.array([0, 2.0, 0, 0]), 3)[3] == 0


@settings(max_examples=30, deadline=None)
@given(xi=st.floats(-1e4, 1e4).filter(lambda v: abs(v) > 1e-6))
def test_bsq_symbol_bounds(spectral, xi):
    kap = kappa_bsq(spectral.b, 5)
    x = np.array([xi])
    mu = mu_bsq(spectral.b, kap, 5, 0.05, x)[0]
    assert mu >= spectral.b[1] * xi**2 / beta_bsq(kap, 5, 0.05, x)[0] * (1 - 1e-12)


def test_chi():
    e = np.array([0.0, 0.3, 0.5, 0.75, 1.0, 2.0])
    v = chi(e)
    assert v[:3].tolist() == [1, 1, 1] and v[4:].tolist() == [0, 0]
    assert 0 < v[3] < 1
    assert np.array_equal(chi(-e), v)


def test_homogeneous_solution_closed_form():
    f = Impulse.single_mode(1.5, amp=0.7)
    b = np.array([0.0, 2.0, 0.0, 0.0])
    sol = solve_effective(EffectiveSymbolSpec(3, 0.1, b, 1.0), f, [1.7, 3.0])
    I, _ = duhamel([np.sqrt(2.0) * 1.5], 3.0, f.f1)[0]
    assert sol.u[1, 0] == pytest.approx(0.7 * I[0], abs=1e-14)


def test_zero_impulse():
    f = Impulse.band_limited().scaled(0.0)
    sol = solve_effective(EffectiveSymbolSpec(1, 0.1, np.array([0, 1.0]), 1.0), f, [2.0])
    assert np.all(sol.u == 0)


def test_time_derivatives_by_reduction(spectral, impulse):
    spec = EffectiveSymbolSpec(3, 1 / 8, spectral.b, 1.0)
    h = 1e-3
    t = 0.6  # inside the impulse so the source terms matter
    sol = solve_effective(spec, impulse, [t - h, t, t + h], tol=1e-13)
    fd2 = (sol.u[2] - 2 * sol.u[1] + sol.u[0]) / h**2
    assert np.abs(sol.dt(2)[1] - fd2).max() < 1e-5 * np.abs(fd2).max()
    fd3 = (sol.du[2] - 2 * sol.du[1] + sol.du[0]) / h**2
    assert np.abs(sol.dt(3)[1] - fd3).max() < 1e-5 * np.abs(fd3).max()


def test_energy_conserved_after_impulse(spectral, impulse):
    spec = EffectiveSymbolSpec(3, 1 / 8, spectral.b, 1.0)
    sol = solve_effective(spec, impulse, [1.5, 4.0, 9.0])
    e = np.sum(np.abs(sol.du) ** 2 + sol.mu * np.abs(sol.u) ** 2, axis=1)
    assert np.ptp(e) <= 1e-10 * e[0]


def test_ill_posed_symbol(spectral, impulse):
    # abar - b3 (eps xi)^2 turns negative once eps xi exceeds about 16
    with pytest.raises(IllPosedSymbol):
        solve_effective(EffectiveSymbolSpec(3, 8.0, spectral.b, 1.0), impulse, [1.0])
    # the regularized variant is the remedy
    solve_effective(EffectiveSymbolSpec(3, 8.0, spectral.b, 1.0, Variant.REGULARIZED), impulse, [1.0])


def test_geometric_rhs(hyperbolic, impulse):
    from wavehom.hyperbolic_hierarchy import revamp_c

    c = revamp_c(hyperbolic.abar, 5)
    assert set(geometric_rhs(impulse, c, 2, 0.1)) == {0}
    src = geometric_rhs(impulse, c, 3, 0.1)
    expect = impulse.f2hat * (1 + c[1][0] * 0.01 * (1j * impulse.xis) ** 2)
    assert np.allclose(src[0], expect, rtol=1e-14)


def test_filtered_is_identity_on_low_band(spectral, impulse):
    # chi(eps^{1/2} xi) = 1 while eps^{1/2} R <= 1/2
    out = variant_compare(spectral.b, 1.0, 3, 1 / 64, impulse, [2.0])
    assert out[("base", "filter")][0] == 0


def test_variants_agree_for_homogeneous_medium(impulse):
    out = variant_compare(np.array([0, 1.0, 0, 0]), 1.0, 3, 1 / 8, impulse, [2.0])
    # only the filter acts here, since eps^{1/2} R > 1/2
    for pair, v in out.items():
        if "filter" not in pair:
            assert v[0] < 1e-12


def test_solve_modes_linear(impulse):
    mu = impulse.xis**2
    a = solve_modes(impulse.xis, mu, {0: impulse.f2hat}, impulse.f1, [2.0])
    b = solve_modes(impulse.xis, mu, {0: 3 * impulse.f2hat}, impulse.f1, [2.0])
    assert np.allclose(3 * a.u, b.u, rtol=1e-14, atol=0)


def test_filter_cures_ill_posedness(spectral, impulse):
    # at eps = 8 the filter removes every mode where the truncated symbol is negative
    sol = solve_effective(EffectiveSymbolSpec(3, 8.0, spectral.b, 1.0, Variant.FILTERED), impulse, [2.0])
    assert np.all(np.isfinite(sol.u))
    assert np.all(sol.u[0][sol.mu <= 0] == 0)
