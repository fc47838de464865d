import math

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse import linalg as spla

from boselt import consts, functional, oracle, scatter
from boselt.errors import ConfigurationError, DomainError, PreconditionError
from boselt.specfun import ll_energy


def test_q1_matrices_by_hand():
    # argument is the element count
    K, M, D = oracle.q1_matrices(2)
    h = 0.5
    np.testing.assert_allclose(K.toarray(), np.array([[1, -1, 0], [-1, 2, -1], [0, -1, 1]]) / h)
    np.testing.assert_allclose(M.toarray(), np.array([[2, 1, 0], [1, 4, 1], [0, 1, 2]]) * h / 6)
    # constants are in the kernel of the stiffness matrix and M integrates 1 to |Q|
    K, M, _ = oracle.q1_matrices(16)
    assert np.abs(K @ np.ones(17)).max() < 1e-12
    assert np.ones(17) @ M @ np.ones(17) == pytest.approx(1.0)


def test_zero_coupling_has_zero_energy():
    prob = oracle.ll_problem(0.0, 33)
    assert abs(oracle.e2_numeric(prob)) < 1e-10


@pytest.mark.parametrize("gamma", [0.5, 4.0])
def test_strip_scheme_converges_to_closed_form(gamma):
    rep = oracle.e2_refinement(oracle.ll_problem(gamma, 64, scheme="strip"), [64, 128, 256])
    assert rep.order == 2.0
    assert rep.extrapolated == pytest.approx(float(ll_energy(gamma)), rel=1e-6)


def test_galerkin_is_monotone_upper_bound():
    rep = oracle.e2_refinement(oracle.ll_problem(2.0, 17), [17, 33, 65, 129])
    assert rep.monotone_decreasing
    assert all(v >= float(ll_energy(2.0)) for v in rep.values)


def test_sparse_solver_matches_shift_invert():
    # 60^2 unknowns goes through the iterative path
    A, B = oracle.assemble(oracle.ll_problem(1.0, 60))
    lam, x, info = oracle.lowest_eigenpair(A, B, seed=1)
    ref = spla.eigsh(A.tocsc(), k=1, M=B.tocsc(), sigma=-1e-3, which="LM")[0][0]
    assert lam == pytest.approx(ref, rel=1e-9)
    res = np.linalg.norm(A @ x - lam * (B @ x)) / np.linalg.norm(A @ x)
    assert res < 1e-6


def test_solution_is_reproducible():
    prob = oracle.ll_problem(1.0, 60)
    assert oracle.e2_numeric(prob, seed=3) == oracle.e2_numeric(prob, seed=3)


def test_dense_and_sparse_paths_agree():
    A, B = oracle.assemble(oracle.ll_problem(3.0, 30))
    dense = oracle.lowest_eigenpair(A, B)[0]
    big = sp.block_diag([A, A + 10 * B]).tocsr()
    bigB = sp.block_diag([B, B]).tocsr()
    assert oracle.lowest_eigenpair(big, bigB)[0] == pytest.approx(dense, rel=1e-8)


def test_two_dimensional_strip_variational_bound():
    # e2 lies between 0 and the mean of the potential (constant trial state)
    pot = scatter.regularized(2, 5.0, 2.0, 0.3)
    prob = oracle.GridEigenProblem(2, 2, 8, pot, 1.0, "strip")
    e = oracle.e2_numeric(prob)
    c = (np.arange(8) + 0.5) / 8
    X = np.stack(np.meshgrid(c, c, c, c, indexing="ij"), -1).reshape(-1, 4)
    mean = pot.value(np.hypot(X[:, 0] - X[:, 2], X[:, 1] - X[:, 3])).mean()
    assert 0 < e < mean


def test_e2_concave_in_coupling():
    lam = np.linspace(0.0, 6.0, 13)
    base = oracle.ll_problem(1.0, 33)
    vals = np.array([oracle.e2_numeric(base.scaled(x)) for x in lam])
    assert np.all(np.diff(vals) > 0)
    assert np.all(np.diff(vals, 2) <= 1e-10)


def test_three_body_small_grid():
    rep = oracle.e3_check(oracle.ll_problem(2.0, 16, n_particles=3))
    assert rep.passed and rep.energy3 > rep.bound > 0


def test_problem_validation():
    with pytest.raises(ConfigurationError):
        oracle.GridEigenProblem(2, 2, 8, scatter.lieb_liniger(1.0))
    with pytest.raises(ConfigurationError):
        oracle.GridEigenProblem(1, 4, 8, scatter.lieb_liniger(1.0))
    with pytest.raises(ConfigurationError):
        oracle.GridEigenProblem(2, 2, 8, scatter.hard_core(2, 0.1), scheme="strip")
    with pytest.raises(ConfigurationError):
        oracle.GridEigenProblem(2, 3, 200, scatter.regularized(2, 1.0, 1.0, 1.0), scheme="strip")
    with pytest.raises(DomainError):
        oracle.GridEigenProblem(1, 2, 1, scatter.lieb_liniger(1.0))


def test_dyson_3d_exact_value():
    r = np.r_[0.0, np.geomspace(1.0, 5.0, 3000)]
    psi = np.r_[0.0, 1 - 1 / r[1:]]
    rep = oracle.dyson_check_3d(oracle.RadialProfile(r, psi), 1.0, oracle.StepFunction([0, 200], [1.0]))
    assert rep.lhs == pytest.approx(4 * math.pi * (1 - 1 / 5), rel=1e-6)
    assert rep.passed


@pytest.mark.parametrize("ratio", [1e-2, 1e-3, 1e-4])
def test_dyson_3d_tight_for_scattering_profile(ratio):
    a, R = ratio, 1.0
    r = np.r_[0.0, np.geomspace(a, R, 4000)]
    psi = np.r_[0.0, 1 - a / r[1:]]
    rep = oracle.dyson_check_3d(oracle.RadialProfile(r, psi), a, oracle.StepFunction([0.0, R**3], [1.0]))
    assert rep.passed
    assert 1 - 5 * ratio < rep.rhs / rep.lhs <= 1.0


def test_dyson_2d_tight_for_log_profile():
    a, R = 1e-3, 1.0
    r = np.r_[0.0, np.geomspace(a, R, 4000)]
    psi = np.r_[0.0, np.log(r[1:] / a)]
    U = oracle.StepFunction([0.999, 1.0], [1.0])
    U = oracle.StepFunction(U.edges, U.values / oracle.log_moment(U, a))
    rep = oracle.dyson_check_2d(oracle.RadialProfile(r, psi), a, U)
    assert rep.side_integral == pytest.approx(1.0)
    assert rep.passed and rep.rhs / rep.lhs > 0.998


def test_dyson_reports_slack():
    rng = np.random.default_rng(5)
    for _ in range(50):
        prof, G = oracle.random_dyson_3d_case(rng, a=0.5)
        rep = oracle.dyson_check_3d(prof, 0.5, G)
        assert rep.slack == pytest.approx(rep.lhs - rep.rhs, abs=1e-14 * max(1, rep.lhs))
        assert rep.passed and rep.slack > 0
        # demanding more than the available room flips the verdict
        assert not oracle.dyson_check_3d(prof, 0.5, G, tol=-2 * rep.slack / max(1.0, rep.lhs)).passed


def test_dyson_preconditions():
    prof = oracle.RadialProfile([0.0, 0.5, 2.0], [0.0, 0.1, 1.0])
    with pytest.raises(PreconditionError):
        oracle.dyson_check_3d(prof, 1.0, oracle.StepFunction([0, 1], [1.0]))
    ok = oracle.RadialProfile([0.0, 1.0, 2.0], [0.0, 0.0, 1.0])
    with pytest.raises(PreconditionError):
        oracle.dyson_check_2d(ok, 1.0, oracle.StepFunction([1.0, 2.0], [10.0]))
    with pytest.raises(PreconditionError):
        oracle.dyson_check_2d(ok, 1.0, oracle.StepFunction([0.5, 2.0], [0.1]))
    with pytest.raises(DomainError):
        oracle.StepFunction([0, 1], [-1.0])


def test_hard_disk_weight_moment():
    U = oracle.hard_disk_weight(1.0, 4.0)
    assert oracle.log_moment(U, 1.0) == pytest.approx(0.579, abs=1e-3)
    for vol in np.geomspace(1.0, 1e6, 10):
        assert oracle.log_moment(oracle.hard_disk_weight(1.0, vol), 1.0) <= 1.0
    G = oracle.dyson_indicator_G(2.0)
    assert G.integral() == pytest.approx(3**1.5 * 2.0)


def test_log_moment_by_quadrature():
    from scipy.integrate import quad

    U = oracle.StepFunction([1.5, 2.0, 4.0], [0.3, 0.7])
    ref = sum(quad(lambda r: v * math.log(r / 1.2) * r, lo, hi)[0] for lo, hi, v in [(1.5, 2.0, 0.3), (2.0, 4.0, 0.7)])
    assert oracle.log_moment(U, 1.2) == pytest.approx(ref, rel=1e-12)


def test_sqrt_density_kinetic_gaussian():
    # int |grad sqrt(rho)|^2 for a Gaussian of variance s^2 is N d / (4 s^2)
    n, L, s, N = 200, 12.0, 1.0, 3.0
    h = L / n
    x = (np.arange(n) + 0.5) * h - L / 2
    X, Y = np.meshgrid(x, x, indexing="ij")
    rho = N * np.exp(-(X**2 + Y**2) / (2 * s * s)) / (2 * math.pi * s * s)
    assert oracle.sqrt_density_kinetic(rho, h) == pytest.approx(N * 2 / 4, rel=1e-3)


@pytest.mark.parametrize("d,alpha", [(1, 1), (2, 1), (3, 2), (3, 3), (2, 3), (1, 4)])
def test_uncertainty_holds_on_random_densities(d, alpha):
    rng = np.random.default_rng(d * 10 + alpha)
    uc = consts.uncertainty_constants(d, alpha)
    n = {1: 64, 2: 24, 3: 10}[d]
    for _ in range(20):
        vals = rng.lognormal(0, 1, (n,) * d) * rng.uniform(0.01, 50)
        rep = oracle.uncertainty_check(functional.DensityGrid(vals, rng.uniform(0.05, 2.0)), uc)
        assert rep.passed, rep
    with pytest.raises(ConfigurationError):
        oracle.uncertainty_check(functional.DensityGrid(np.ones((4,) * (1 + d % 3))), uc)
