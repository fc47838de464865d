import math

import numpy as np
import pytest

from boselt import bounds, functional, scatter
from boselt.errors import ConfigurationError, DomainError


def test_gamma_of_volume():
    inv = bounds.inverse_square_bound(3, 2.5)
    assert bounds.gamma_of_volume(inv, 1e-3) == bounds.gamma_of_volume(inv, 1e3) == 2.5
    assert bounds.gamma_of_volume(bounds.lieb_liniger_bound(0.3), 4.0) == pytest.approx(1.2)
    assert bounds.gamma_of_volume(bounds.hard_sphere_bound(1.4), 8.0) == pytest.approx(0.7)
    np.testing.assert_allclose(bounds.gamma_of_volume(bounds.lieb_liniger_bound(1.0), [1, 2]), [1, 2])
    with pytest.raises(DomainError):
        bounds.gamma_of_volume(inv, 0.0)


def test_family_values():
    hs = bounds.hard_sphere_bound(1.0)
    assert hs(math.sqrt(3) / 2) == pytest.approx(1.0)
    assert hs(10.0) == pytest.approx(math.pi**2)
    hd = bounds.hard_disk_bound(1.0)
    assert hd(math.sqrt(2)) == 1.0 and hd(50.0) == 1.0
    assert hd(math.sqrt(2) * math.exp(-2)) == pytest.approx(0.5, rel=1e-15)
    assert hd(0.0) == 0.0
    h2 = bounds.hom_2d_scatt_bound(2.0, 4.0)
    xi = h2.params["Xi"]
    assert h2(math.sqrt(2) * xi) == pytest.approx(1 / bounds.ZETA_2D)


def test_cap():
    hs = bounds.hard_sphere_bound(1.0)
    assert bounds.cap(hs, math.inf)(2.0) == hs(2.0)
    assert bounds.cap(bounds.cap(hs, 3.0), 5.0).K == 3.0
    assert bounds.cap(hs, 1.0).derivative(5.0) == 0.0
    with pytest.raises(DomainError):
        bounds.cap(hs, 0.0)


def test_make_bound_dispatch():
    assert bounds.make_bound(scatter.lieb_liniger(1.0)).family == "ll"
    assert bounds.make_bound(scatter.homogeneous(3, 1.0, 5.0)).family == "hom-3d-scatt"
    assert bounds.make_bound(scatter.homogeneous(3, 1.0, 2.5)).family == "hom-elementary"
    assert bounds.make_bound(scatter.homogeneous(2, 1.0, 3.0)).family == "hom-2d-scatt"
    assert bounds.make_bound(scatter.hard_core(2, 1.0)).K == 1.0
    assert bounds.make_bound(scatter.hard_core(3, 1.0)).K == pytest.approx(math.pi**2)
    assert bounds.make_bound(scatter.hard_core(2, 1.0), "hard-disk", c=3.0).params["c"] == 3.0
    with pytest.raises(ConfigurationError):
        bounds.make_bound(scatter.hard_core(3, 1.0), "hard-disk")
    with pytest.raises(ConfigurationError):
        bounds.make_bound(scatter.regularized(3, 1.0, 1.0, 1.0))
    with pytest.raises(ConfigurationError):
        bounds.make_bound(scatter.lieb_liniger(1.0), "nonsense")


ALL = [
    bounds.lieb_liniger_bound(2.0),
    bounds.inverse_square_bound(2, 1.0),
    bounds.hom_elementary_bound(3, 1.0, 2.5),
    bounds.hard_sphere_bound(1.0),
    bounds.hom_3d_scatt_bound(2.0, 6.0),
    bounds.hard_disk_bound(1.0),
    bounds.hom_2d_scatt_bound(1.0, 3.0),
]


@pytest.mark.parametrize("bound", ALL, ids=lambda b: b.family)
def test_concave_monotone(bound):
    grid = np.concatenate([[0.0], np.geomspace(1e-8, 100, 400)])
    rep = bounds.check_concave_monotone(bound, grid)
    assert rep.passed, rep
    assert bounds.check_concave_monotone(bound, np.linspace(0, 100, 1001)).passed


def test_hard_disk_small_c_loses_concavity():
    # f = c/(c + L), L = -ln(gamma/sqrt2): f'' changes sign where c + L = 2
    weak = bounds.hard_disk_bound(1.0, c=0.5)
    onset = math.sqrt(2) * math.exp(-1.5)
    rep = bounds.check_concave_monotone(weak, np.linspace(1e-4, 1.4, 14001))
    assert not rep.passed and rep.kind == "concave"
    assert onset < rep.violation[0] < rep.violation[2] < math.sqrt(2)
    assert bounds.check_concave_monotone(weak, np.linspace(1e-3, onset - 1e-3, 12)).passed
    assert not bounds.check_concave_monotone(weak, np.linspace(onset + 1e-2, 1.41, 12)).passed
    assert bounds.check_concave_monotone(bounds.hard_disk_bound(1.0, c=2.0), np.linspace(1e-4, 1.4, 14001)).passed


def test_reports_first_monotonicity_violation():
    bad = bounds.ExclusionBound("t", 1, 1.0, 1.0, lambda g: np.sin(np.asarray(g)), lambda g: np.cos(g))
    rep = bounds.check_concave_monotone(bad, np.linspace(0, 3, 31))
    assert not rep.monotone and rep.violation[0] == pytest.approx(1.6)


def test_hard_disk_surrogate_dominance():
    g = np.geomspace(1e-12, math.sqrt(2) * (1 - 1e-12), 2000)
    L = -np.log(g / math.sqrt(2))
    assert np.all(bounds.hard_disk_bound(1.0)(g) <= 2.0 / L)


@pytest.mark.parametrize("bound", ALL, ids=lambda b: b.family)
def test_scaling_inequalities(bound):
    rng = np.random.default_rng(3)
    for _ in range(300):
        gamma = 10 ** rng.uniform(-6, 3)
        eta = 10 ** rng.uniform(-3, 3)
        assert bounds.scaling_inequalities_hold(bound, gamma, eta)


def _random_density(d, rng):
    n = {1: 64, 2: 16, 3: 8}[d]
    vals = rng.lognormal(0.0, 1.5, (n,) * d) * rng.uniform(0.01, 100)
    vals[rng.random(vals.shape) < 0.1] = 0.0
    return functional.DensityGrid(vals, rng.uniform(0.05, 1.0))


@pytest.mark.parametrize("bound", ALL, ids=lambda b: b.family)
def test_integral_bound_chain(bound):
    rng = np.random.default_rng(11)
    for _ in range(30):
        dens = _random_density(bound.d, rng)
        rep = functional.integral_bound_check(dens, dens.full_cube(), bound)
        assert rep.passed, rep
        assert rep.slack >= -1e-12 * max(1.0, rep.rhs)
