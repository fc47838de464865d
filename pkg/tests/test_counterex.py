import math

import numpy as np
import pytest
from scipy import integrate

from boselt import counterex as cx, scatter
from boselt.errors import ConfigurationError, DomainError


def test_trial_normalisation_and_kinetic():
    for kind in ("gaussian_product", "bump_product"):
        t = cx.TrialState(kind, 0.8, 5.0)
        upper = 12.0 if kind == "gaussian_product" else 0.8
        mass = integrate.quad(lambda r: t.phi2(r) * 4 * math.pi * r * r, 0, upper)[0]
        assert mass == pytest.approx(1.0, rel=1e-10)
        # kinetic energy from |grad sqrt(phi2)|^2 by quadrature
        h = 1e-6
        dphi = lambda r: (math.sqrt(t.phi2(r + h)) - math.sqrt(t.phi2(max(r - h, 0)))) / (r + h - max(r - h, 0))  # noqa: E731
        T = 5.0 * integrate.quad(lambda r: dphi(r) ** 2 * 4 * math.pi * r * r, 0, upper, limit=200)[0]
        assert t.kinetic() == pytest.approx(T, rel=1e-6)
    assert cx.TrialState("bump_product", 2.0, 1.0).kinetic() == pytest.approx(11 / 4, rel=1e-12)


def test_density_power_gaussian():
    t = cx.TrialState("gaussian_product", 1.3, 7.0)
    ref = integrate.quad(lambda r: (7.0 * t.phi2(r)) ** (5 / 3) * 4 * math.pi * r * r, 0, 30)[0]
    assert t.density_power(5 / 3) == pytest.approx(ref, rel=1e-10)


def test_gaussian_moment_monte_carlo():
    t = cx.TrialState("gaussian_product", 1.0, 2.0)
    mean, err = cx.monte_carlo_moment(t, 1.0, samples=400_000, seed=4)
    assert abs(mean - t.inverse_power_moment(1.0)) < 4 * err
    assert cx.monte_carlo_moment(t, 1.0, samples=1000, seed=9) == cx.monte_carlo_moment(t, 1.0, samples=1000, seed=9)


def test_bump_moment_monte_carlo():
    t = cx.TrialState("bump_product", 1.0, 2.0, core=0.1)
    rng = np.random.default_rng(8)
    # rejection-sample the bump: density proportional to (1 - r^2)^4 on the unit ball
    def sample(n):
        out = []
        while sum(len(o) for o in out) < n:
            x = rng.uniform(-1, 1, (4 * n, 3))
            r2 = np.sum(x * x, axis=1)
            keep = (r2 < 1) & (rng.random(4 * n) < (1 - np.minimum(r2, 1)) ** 4)
            out.append(x[keep])
        return np.concatenate(out)[:n]
    n = 400_000
    sep = np.linalg.norm(sample(n) - sample(n), axis=1)
    vals = np.where(sep >= 0.1, sep ** -4.0, 0.0)
    mean, err = vals.mean(), vals.std(ddof=1) / math.sqrt(n)
    assert abs(t.inverse_power_moment(4.0) - mean) < 4 * err


def test_trial_errors():
    with pytest.raises(ConfigurationError):
        cx.TrialState("gaussian_product", 1.0, 1.0).inverse_power_moment(3.0)
    with pytest.raises(ConfigurationError):
        cx.TrialState("bump_product", 1.0, 1.0).inverse_power_moment(4.0)
    with pytest.raises(ConfigurationError):
        cx.TrialState("box", 1.0, 1.0)
    with pytest.raises(DomainError):
        cx.TrialState("gaussian_product", -1.0, 1.0)


def test_homogeneous_sweep_exponents():
    g = cx.TrialState("gaussian_product", 1.0, 50.0)
    L = np.geomspace(1e-2, 1e2, 9)
    for beta in (0.5, 1.0, 1.5, 2.5):
        s = cx.scaling_ratio_homogeneous(beta, 2.0, g, L)
        assert s.extra["excess_slope"] == pytest.approx(2 - beta, rel=1e-9)
        assert np.all(s.ratio > s.extra["kinetic_floor"])
    flat = cx.scaling_ratio_homogeneous(2.0, 2.0, g, L)
    assert np.ptp(flat.ratio) == 0.0 and flat.slope == 0.0
    with pytest.raises(DomainError):
        cx.scaling_ratio_homogeneous(1.0, 1.0, g, [0.0, 1.0])


def test_sweep_rows_and_direction():
    s = cx.scaling_ratio_homogeneous(1.0, 1.0, cx.TrialState("gaussian_product", 1.0, 10.0), [1, 2, 4])
    assert len(s.rows()) == 3
    assert s.strictly_decreasing_along(-1) and not s.strictly_decreasing_along(1)


def test_local_norm_closed_forms():
    W = scatter.homogeneous(3, 2.0, 1.0)
    ref = integrate.quad(lambda r: (2.0 / r) ** 1.5 * 4 * math.pi * r * r, 0, 0.7)[0] ** (2 / 3)
    assert cx.local_norm(W, 0.7) == pytest.approx(ref, rel=1e-10)
    reg = scatter.regularized(3, 3.0, 2.0, 0.5)
    assert cx.local_norm(reg, 2.0) == pytest.approx((4 * math.pi / 3 * 0.125) ** (2 / 3) * 12.0)
    with pytest.raises(ConfigurationError):
        cx.local_norm(scatter.homogeneous(3, 1.0, 2.5), 1.0)
    with pytest.raises(ConfigurationError):
        cx.local_norm(scatter.hard_core(3, 1.0), 1.0)


def test_scattering_length_or_inf():
    assert cx.scattering_length_or_inf(scatter.homogeneous(3, 0.0, 1.0)) == math.inf
    assert cx.scattering_length_or_inf(scatter.homogeneous(3, 1.0, 2.0)) == math.inf
    assert cx.scattering_length_or_inf(scatter.regularized(3, 2.0, 6.0, 1.0)) == pytest.approx(1 - math.tanh(1))


def test_locally_integrable_ratio_tends_to_half():
    W = scatter.homogeneous(3, 1.0, 1.0)
    s = cx.locally_integrable_ratio(W, np.geomspace(1e2, 1e10, 9))
    assert s.ratio[-1] == pytest.approx(0.5, rel=1e-2)
    assert s.strictly_decreasing_along()
    # the chosen scale saturates the norm budget
    for N, L in zip(s.values, s.extra["L"]):
        if L < 1:
            assert cx.local_norm(W, 2 * L) == pytest.approx(0.5 * s.extra["c6"] * N ** (-1 / 3), rel=1e-10)


def test_locally_integrable_with_finite_scattering_length():
    W = scatter.regularized(3, 1.0, 4.0, 0.5)
    s = cx.locally_integrable_ratio(W, np.geomspace(1.0, 1e8, 6))
    assert math.isfinite(s.extra["a"])
    assert np.all(s.ratio > 0)


def test_skew_range_reproduces_a_W():
    for a, W0 in [(0.1, 1.0), (0.5, 1e-4), (0.9, 50.0)]:
        R = cx.solve_skew_range(a, W0, 1.0)
        assert scatter.scatt_len_skew(a, R, W0).a == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ConfigurationError):
        cx.solve_skew_range(1.5, 1.0, 1.0)


def test_skew_budget_values():
    s = cx.skew_budget(1.0, [(0.2, 1e-2), (0.2, 1e-4)], N=10.0, volume=1e4)
    rho = 1e-3
    dens = 1e4 * min(rho * rho, rho ** (5 / 3))
    assert s.ratio[0] == pytest.approx((8 * math.pi * 0.2 * 100 / 1e4 + 100 * 1e-2) / dens)
    assert s.strictly_decreasing_along()
