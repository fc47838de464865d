"""Numerical verifiers: few-particle Neumann eigenproblems, Dyson-type radial
inequalities and the local uncertainty principle on sampled densities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .errors import ConfigurationError, DomainError, NumericalError, PreconditionError
from .scatter import PotentialSpec

MAX_UNKNOWNS = 2**22
_DENSE_LIMIT = 1500


# ---------------------------------------------------------------------------
# eigenproblems


@dataclass(frozen=True)
class GridEigenProblem:
    """n identical bosons in the cube [0, box_side]^d with Neumann walls.

    scheme 'galerkin': continuous Q1 finite elements, points_per_axis - 1
    elements per axis (d = 1, delta interaction only); eigenvalues are upper
    bounds that decrease monotonically under uniform refinement.
    scheme 'strip': cell-centred finite differences with points_per_axis
    cells per axis; a delta interaction becomes a one-cell strip of height
    4 eta / h on the diagonal, other potentials are sampled at cell-centre
    separations with singular cores clipped at `cutoff` (default h/2).
    """

    d: int
    n_particles: int
    points_per_axis: int
    potential: PotentialSpec
    box_side: float = 1.0
    scheme: str = "galerkin"
    cutoff: float | None = None
    coupling_scale: float = 1.0

    def __post_init__(self):
        if self.scheme not in ("galerkin", "strip"):
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")
        if self.n_particles not in (2, 3):
            raise ConfigurationError("n_particles must be 2 or 3")
        if self.d not in (1, 2):
            raise ConfigurationError("eigenproblems are available for d = 1 and d = 2 only")
        if self.points_per_axis < 2:
            raise DomainError("need at least two points per axis")
        if self.unknowns > MAX_UNKNOWNS:
            raise ConfigurationError(f"{self.unknowns} unknowns exceeds the limit {MAX_UNKNOWNS}")
        if self.scheme == "galerkin" and (self.d != 1 or self.potential.kind != "delta"):
            raise ConfigurationError("the galerkin scheme handles the 1D delta interaction only")
        if self.potential.kind in ("hard-core", "skew"):
            raise ConfigurationError("hard cores are not representable on these grids")
        if not self.box_side > 0:
            raise DomainError("box_side must be positive")

    @property
    def unknowns(self) -> int:
        return self.points_per_axis ** (self.d * self.n_particles)

    def with_points(self, n: int) -> "GridEigenProblem":
        return GridEigenProblem(self.d, self.n_particles, n, self.potential, self.box_side,
                                self.scheme, self.cutoff, self.coupling_scale)

    def scaled(self, lam: float) -> "GridEigenProblem":
        return GridEigenProblem(self.d, self.n_particles, self.points_per_axis, self.potential,
                                self.box_side, self.scheme, self.cutoff, self.coupling_scale * lam)

    @property
    def unit_eta(self) -> float:
        """Delta coupling after rescaling the cube to unit side."""
        return self.coupling_scale * self.potential.eta * self.box_side

    def unit_potential(self, r):
        """l^2 W(l r) on the unit cube, times the coupling scale."""
        ell = self.box_side
        return self.coupling_scale * ell**2 * self.potential.value(ell * np.asarray(r, dtype=float))


@dataclass
class EigenResult:
    value: float
    unknowns: int
    residual: float
    iterations: int | None = None
    method: str = ""


def q1_matrices(n: int):
    """Stiffness, mass and diagonal-coupling matrices for Q1 elements on [0, 1].

    coupling[(i,j),(k,l)] = int N_i N_j N_k N_l dx, the form of the delta
    interaction psi(x, x) phi(x, x) in the tensor basis (index i*(n+1)+j).
    """
    h = 1.0 / n
    N = n + 1
    main = np.r_[1.0, 2.0 * np.ones(n - 1), 1.0]
    stiff = sp.diags([-np.ones(n), main, -np.ones(n)], [-1, 0, 1]) / h
    mass = sp.diags([np.ones(n) / 6, main / 3, np.ones(n) / 6], [-1, 0, 1]) * h
    gx, gw = np.polynomial.legendre.leggauss(3)
    gx = 0.5 * (gx + 1.0)
    gw = 0.5 * gw
    phi = np.array([1.0 - gx, gx])
    elem = np.arange(n)
    rows, cols, vals = [], [], []
    for a in range(2):
        for b in range(2):
            for c in range(2):
                for e in range(2):
                    v = h * np.sum(gw * phi[a] * phi[b] * phi[c] * phi[e])
                    rows.append((elem + a) * N + elem + b)
                    cols.append((elem + c) * N + elem + e)
                    vals.append(np.full(n, v))
    coupling = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(N * N, N * N)).tocsr()
    return stiff.tocsr(), mass.tocsr(), coupling


def neumann_laplacian(n: int):
    """Cell-centred 1D Neumann Laplacian on [0, 1] with n cells; rows sum to zero."""
    h = 1.0 / n
    main = np.r_[1.0, 2.0 * np.ones(n - 2), 1.0] if n > 1 else np.zeros(1)
    return (sp.diags([-np.ones(n - 1), main, -np.ones(n - 1)], [-1, 0, 1]) / h**2).tocsr()


def _kron_all(mats):
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return out


def _sum_axes(op, ident, axes):
    total = None
    for k in range(axes):
        term = _kron_all([op if j == k else ident for j in range(axes)])
        total = term if total is None else total + term
    return total


def _swap_last_two(N):
    idx = np.arange(N**3).reshape(N, N, N).transpose(0, 2, 1).ravel()
    return sp.csr_matrix((np.ones(N**3), (np.arange(N**3), idx)), shape=(N**3, N**3))


def assemble(problem: GridEigenProblem):
    """(A, B) with A the Hamiltonian form and B the mass (None for FD)."""
    n = problem.points_per_axis
    npart = problem.n_particles
    if problem.scheme == "galerkin":
        ne = n - 1
        K, M, D = q1_matrices(ne)
        eta = problem.unit_eta
        N = ne + 1
        if npart == 2:
            A = sp.kron(K, M) + sp.kron(M, K) + 4.0 * eta * D
            B = sp.kron(M, M)
        else:
            A = _kron_all([K, M, M]) + _kron_all([M, K, M]) + _kron_all([M, M, K])
            V12 = sp.kron(D, M)
            V23 = sp.kron(M, D)
            P = _swap_last_two(N)
            V13 = P @ V12 @ P.T
            A = A + 4.0 * eta * (V12 + V23 + V13)
            B = _kron_all([M, M, M])
        return A.tocsr(), B.tocsr()

    # finite differences
    d = problem.d
    h = 1.0 / n
    L = neumann_laplacian(n)
    I = sp.identity(n, format="csr")
    axes = d * npart
    A = _sum_axes(L, I, axes)
    centres = (np.arange(n) + 0.5) * h
    grids = np.meshgrid(*([centres] * axes), indexing="ij")
    pos = [np.stack(grids[p * d:(p + 1) * d]) for p in range(npart)]
    diag = np.zeros([n] * axes)
    pairs = [(0, 1)] if npart == 2 else [(0, 1), (1, 2), (0, 2)]
    for p, q in pairs:
        if problem.potential.kind == "delta":
            if d != 1:
                raise ConfigurationError("delta interaction is one-dimensional")
            same = np.isclose(pos[p][0], pos[q][0])
            diag += np.where(same, 4.0 * problem.unit_eta / h, 0.0)
        else:
            r = np.sqrt(np.sum((pos[p] - pos[q]) ** 2, axis=0))
            rc = 0.5 * h if problem.cutoff is None else problem.cutoff / problem.box_side
            diag += problem.unit_potential(np.maximum(r, rc))
    A = A + sp.diags(diag.ravel())
    return A.tocsr(), None


def _relative_residual(A, B, lam, x) -> float:
    Bx = x if B is None else B @ x
    scale = max(abs(lam), 1.0) * np.linalg.norm(Bx)
    return float(np.linalg.norm(A @ x - lam * Bx) / scale)


def lowest_eigenpair(A, B=None, seed: int = 0, tol: float = 1e-9, maxiter: int = 2000):
    """Smallest eigenpair of A x = lam B x (A symmetric PSD, B SPD or identity).

    Dense LAPACK below 1500 unknowns, otherwise LOBPCG preconditioned by
    smoothed-aggregation AMG on A + B, from a seeded positive start block.
    """
    N = A.shape[0]
    if N <= _DENSE_LIMIT:
        Ad = A.toarray()
        Bd = None if B is None else B.toarray()
        w, v = scipy.linalg.eigh(Ad, Bd, subset_by_index=[0, 0])
        x = v[:, 0]
        method, iters = "dense", None
        lam = float(w[0])
    else:
        import pyamg

        Bop = B if B is not None else sp.identity(N, format="csr")
        # local weighting avoids pyamg's randomised spectral-radius estimate
        ml = pyamg.smoothed_aggregation_solver((A + Bop).tocsr(), smooth=("jacobi", {"weighting": "local"}))
        X = np.random.default_rng(seed).random((N, 2)) + 1.0
        X[:, 1] -= 1.0
        M = ml.aspreconditioner()
        iters, inner_tol = 0, tol
        # lobpcg measures residuals in its own scaling; restart from the
        # current block with a tighter tolerance until ours is met
        for _ in range(4):
            w, v, hist = sla.lobpcg(A, X, B=B, M=M, largest=False, tol=inner_tol,
                                    maxiter=maxiter, retResidualNormsHistory=True)
            iters += len(hist)
            k = int(np.argmin(w))
            lam, x = float(w[k]), v[:, k]
            if _relative_residual(A, B, lam, x) < max(100 * tol, 1e-7):
                break
            X, inner_tol = v, inner_tol * 1e-2
        method = "lobpcg-amg"
    res = _relative_residual(A, B, lam, x)
    if not res < max(100 * tol, 1e-7):
        raise NumericalError("eigensolver did not converge", residual=res, iterations=iters, unknowns=N)
    return lam, x, EigenResult(lam, N, res, iters, method)


def solve(problem: GridEigenProblem, seed: int = 0) -> EigenResult:
    A, B = assemble(problem)
    lam, _, res = lowest_eigenpair(A, B, seed=seed)
    return res


def e2_numeric(problem: GridEigenProblem, seed: int = 0) -> float:
    """|Q|^{2/d} E_0: the scale-normalised two-particle Neumann energy."""
    if problem.n_particles != 2:
        raise ConfigurationError("e2_numeric needs n_particles = 2")
    return solve(problem, seed).value


def richardson(values, order: float) -> float:
    """Extrapolate the last two values of a sequence on grids refined by 2."""
    f = 2.0**order
    return (f * values[-1] - values[-2]) / (f - 1.0)


@dataclass
class RefinementReport:
    points: list
    values: list
    extrapolated: float
    order: float
    monotone_decreasing: bool


def e2_refinement(problem: GridEigenProblem, levels, seed: int = 0) -> RefinementReport:
    """e2 on a sequence of grids plus the Richardson limit (order 1 for
    galerkin, whose error is O(h) because of the derivative kink on the
    diagonal; order 2 for the strip scheme)."""
    vals = [e2_numeric(problem.with_points(n), seed) for n in levels]
    order = 1.0 if problem.scheme == "galerkin" else 2.0
    mono = all(b <= a + 1e-8 for a, b in zip(vals, vals[1:]))
    ext = richardson(vals, order) if len(vals) >= 2 else vals[-1]
    return RefinementReport(list(levels), vals, ext, order, mono)


def ll_problem(gamma: float, points: int, scheme: str = "galerkin", n_particles: int = 2) -> GridEigenProblem:
    """Lieb-Liniger problem on the unit interval with eta = gamma."""
    from .scatter import lieb_liniger

    return GridEigenProblem(1, n_particles, points, lieb_liniger(gamma), 1.0, scheme)


@dataclass
class ThreeBodyReport:
    energy3: float
    bound: float
    slack: float
    relative_slack: float
    discretization: float
    passed: bool
    points: int


def e3_check(problem: GridEigenProblem, coarse_points: int | None = None, seed: int = 0) -> ThreeBodyReport:
    """Three-particle energy against (3/2) e2 with the coupling doubled.

    Both sides are computed on the same grid.  `discretization` is the
    relative change of the three-particle energy from the coarse grid
    (default: half the elements) to the given one.
    """
    if problem.n_particles != 3 or problem.d != 1:
        raise ConfigurationError("e3_check needs n_particles = 3 and d = 1")
    E3 = solve(problem, seed).value
    two = GridEigenProblem(1, 2, problem.points_per_axis, problem.potential, problem.box_side,
                           problem.scheme, problem.cutoff, 2.0 * problem.coupling_scale)
    rhs = 1.5 * e2_numeric(two, seed)
    if coarse_points is None:
        coarse_points = (problem.points_per_axis - 1) // 2 + 1
    E3c = solve(problem.with_points(coarse_points), seed).value
    disc = abs(E3c - E3) / max(abs(E3), 1e-300) if E3 != 0 else abs(E3c)
    slack = E3 - rhs
    rel = slack / max(abs(rhs), 1e-300) if rhs != 0 else 0.0
    return ThreeBodyReport(E3, rhs, slack, rel, disc, slack >= -1e-9 * max(1.0, abs(rhs)),
                           problem.points_per_axis)


# ---------------------------------------------------------------------------
# radial inequalities


@dataclass
class RadialProfile:
    """Piecewise-linear radial function through (r[i], psi[i])."""

    r: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.psi = np.asarray(self.psi, dtype=float)
        if self.r.ndim != 1 or self.r.shape != self.psi.shape or len(self.r) < 2:
            raise DomainError("profile needs matching 1D arrays with at least two nodes")
        if self.r[0] < 0 or np.any(np.diff(self.r) <= 0):
            raise DomainError("profile radii must be nonnegative and strictly increasing")

    @property
    def r_out(self) -> float:
        return float(self.r[-1])

    def __call__(self, x):
        return np.interp(x, self.r, self.psi)

    def vanishes_below(self, a: float, tol: float = 0.0) -> bool:
        inside = self.r <= a
        if np.any(np.abs(self.psi[inside]) > tol):
            return False
        return abs(float(self(a))) <= tol


@dataclass
class StepFunction:
    """Piecewise-constant nonnegative function: values[k] on [edges[k], edges[k+1])."""

    edges: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if len(self.edges) != len(self.values) + 1 or np.any(np.diff(self.edges) <= 0):
            raise DomainError("step function needs increasing edges and len(values) = len(edges) - 1")
        if np.any(self.values < 0):
            raise DomainError("weight must be nonnegative")

    def integral(self) -> float:
        return float(np.sum(self.values * np.diff(self.edges)))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(self.edges, x, side="right") - 1
        inside = (k >= 0) & (k < len(self.values))
        return np.where(inside, self.values[np.clip(k, 0, len(self.values) - 1)], 0.0)


@dataclass
class DysonReport:
    lhs: float
    rhs: float
    slack: float
    passed: bool
    side_integral: float | None = None
    extra: dict = field(default_factory=dict)


_GX, _GW = np.polynomial.legendre.leggauss(3)


def _radial_forms(profile: RadialProfile, weight_edges_r, weight_values, dim: int):
    """Exact int psi'^2 r^{dim-1} dr and int w psi^2 r^{dim-1} dr over [r0, r_out]."""
    br = np.union1d(profile.r, weight_edges_r[(weight_edges_r > profile.r[0]) & (weight_edges_r < profile.r_out)])
    lo, hi = br[:-1], br[1:]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    slope = np.diff(profile(br)) / (hi - lo)
    grad = np.sum(slope**2 * (hi**dim - lo**dim) / dim)
    k = np.searchsorted(weight_edges_r, mid, side="right") - 1
    inside = (k >= 0) & (k < len(weight_values))
    w = np.where(inside, weight_values[np.clip(k, 0, len(weight_values) - 1)], 0.0)
    pts = mid[:, None] + half[:, None] * _GX[None, :]
    quad = np.sum(_GW[None, :] * profile(pts) ** 2 * pts ** (dim - 1), axis=1) * half
    pot = np.sum(w * quad)
    return float(grad), float(pot)


def dyson_check_3d(profile: RadialProfile, a: float, G: StepFunction, tol: float = 1e-9) -> DysonReport:
    """4 pi int psi'^2 r^2 >= (3a/I) 4 pi int G(r^3) psi^2 r^2 on the ball of radius r_out."""
    if not a > 0:
        raise DomainError("a must be positive")
    if not profile.vanishes_below(a):
        raise PreconditionError("profile must vanish on [0, a]")
    I = G.integral()
    if not I > 0:
        raise PreconditionError("G must have positive finite integral")
    grad, pot = _radial_forms(profile, np.cbrt(G.edges), G.values, 3)
    lhs = 4 * math.pi * grad
    rhs = 3 * a / I * 4 * math.pi * pot
    slack = lhs - rhs
    return DysonReport(lhs, rhs, slack, slack >= -tol * max(1.0, lhs), extra={"I": I})


def log_moment(U: StepFunction, a: float) -> float:
    """int U(r) ln(r/a) r dr in closed form; U must vanish below a."""
    F = lambda r: 0.5 * r * r * np.log(r / a) - 0.25 * r * r  # noqa: E731
    e = U.edges
    return float(np.sum(U.values * (F(e[1:]) - F(e[:-1]))))


def dyson_check_2d(profile: RadialProfile, a: float, U: StepFunction, tol: float = 1e-9) -> DysonReport:
    """2 pi int psi'^2 r >= 2 pi int U psi^2 r, given int U ln(r/a) r dr <= 1."""
    if not a > 0:
        raise DomainError("a must be positive")
    if U.edges[0] < a - 1e-15 * a and np.any(U.values[U.edges[1:] > U.edges[0]] > 0):
        if np.any(U.values[U.edges[:-1] < a] > 0):
            raise PreconditionError("U must vanish below the core radius a")
    side = log_moment(U, a)
    if side > 1.0 + 1e-12:
        raise PreconditionError(f"side condition violated: int U ln(r/a) r dr = {side} > 1")
    if not profile.vanishes_below(a):
        raise PreconditionError("profile must vanish on [0, a]")
    grad, pot = _radial_forms(profile, U.edges, U.values, 2)
    lhs = 2 * math.pi * grad
    rhs = 2 * math.pi * pot
    slack = lhs - rhs
    return DysonReport(lhs, rhs, slack, slack >= -tol * max(1.0, lhs), side)


# ---------------------------------------------------------------------------
# local uncertainty


@dataclass
class UncertaintyReport:
    kinetic: float
    rhs: float
    slack: float
    passed: bool
    mass: float


def sqrt_density_kinetic(values: np.ndarray, spacing: float) -> float:
    """int |grad sqrt(rho)|^2 with forward differences between neighbouring cells."""
    f = np.sqrt(np.asarray(values, dtype=float))
    cell = spacing ** f.ndim
    total = 0.0
    for ax in range(f.ndim):
        df = np.diff(f, axis=ax) / spacing
        total += float(np.sum(df * df)) * cell
    return total


def uncertainty_check(density, uc, tol: float = 1e-12) -> UncertaintyReport:
    """Local uncertainty inequality for a product state with the given density.

    For rho = N |phi|^2 the kinetic energy N int |grad phi|^2 equals
    int |grad sqrt(rho)|^2; both sides are evaluated on the grid cube Q.
    """
    vals = np.asarray(density.values, dtype=float)
    d = vals.ndim
    if d != uc.d:
        raise ConfigurationError("density dimension does not match the constants")
    if len(set(vals.shape)) != 1:
        raise DomainError("density must live on a cube")
    h = density.spacing
    cell = h**d
    vol = (vals.shape[0] * h) ** d
    M = float(np.sum(vals)) * cell
    T = sqrt_density_kinetic(vals, h)
    alpha = float(uc.alpha)
    S1, S2 = float(uc.S1), float(uc.S2)
    if M <= 0:
        return UncertaintyReport(T, 0.0, T, True, M)
    if alpha <= 2:
        main = S1 * float(np.sum(vals ** (1 + 2 / d))) * cell / M ** (2 / d)
    else:
        moment = float(np.sum(vals ** (1 + alpha / d))) * cell
        main = S1 * moment ** (2 / alpha) / M ** (2 / alpha + 2 / d - 1)
    rhs = main - S2 * M / vol ** (2 / d)
    slack = T - rhs
    return UncertaintyReport(T, rhs, slack, slack >= -tol * max(1.0, abs(T), abs(rhs)), M)


# ---------------------------------------------------------------------------
# random admissible inputs for the radial inequalities


def random_profile(rng, a: float, r_out: float, nodes: int = 40, monotone: bool | None = None) -> RadialProfile:
    """Piecewise-linear profile vanishing on [0, a]; monotone increasing or
    arbitrary nonnegative (chosen by coin flip when monotone is None)."""
    if not 0 < a < r_out:
        raise DomainError("need 0 < a < r_out")
    inner = a + (r_out - a) * np.sort(rng.random(nodes))
    inner = inner[(inner > a) & (np.r_[np.diff(inner), 1.0] > 1e-12 * r_out)]
    r = np.r_[0.0, a, inner, r_out] if inner.size == 0 or inner[-1] < r_out else np.r_[0.0, a, inner]
    r = np.unique(r)
    if monotone is None:
        monotone = bool(rng.random() < 0.5)
    vals = rng.random(len(r) - 2) * rng.exponential()
    psi = np.r_[0.0, 0.0, np.cumsum(vals) if monotone else vals]
    return RadialProfile(r, psi)


def _shaped_profile(rng, a, r_out, shape, nodes=60):
    """Noisy power of a near-extremal shape on a geometric grid."""
    r = np.r_[0.0, np.geomspace(a, r_out, nodes)]
    p = 0.5 + rng.random()
    psi = np.r_[0.0, shape(r[1:]) ** p * (1 + 0.05 * rng.standard_normal(nodes))]
    psi[1] = 0.0
    return RadialProfile(r, np.maximum(psi, 0.0))


def random_step(rng, lo: float, hi: float, pieces: int = 8) -> StepFunction:
    edges = np.unique(np.r_[lo, lo + (hi - lo) * np.sort(rng.random(pieces - 1)), hi])
    return StepFunction(edges, rng.random(len(edges) - 1) * rng.exponential())


def random_dyson_3d_case(rng, a: float = 1.0, r_out: float | None = None):
    """(profile, G) with G a nonnegative step function of t = r^3."""
    r_out = r_out or a * (1.5 + 10 * rng.random())
    if rng.random() < 0.5:
        prof = random_profile(rng, a, r_out)
    else:
        prof = _shaped_profile(rng, a, r_out, lambda r: 1.0 - a / r)
    t_hi = r_out**3 * (0.2 + 2 * rng.random())
    return prof, random_step(rng, 0.0, t_hi)


def random_dyson_2d_case(rng, a: float = 1.0, r_out: float | None = None):
    """(profile, U) with U supported in [a, r_out] and int U ln(r/a) r dr in (0.05, 1]."""
    r_out = r_out or a * (1.5 + 10 * rng.random())
    if rng.random() < 0.5:
        prof = random_profile(rng, a, r_out)
    else:
        prof = _shaped_profile(rng, a, r_out, lambda r: np.log(r / a))
    U = random_step(rng, a, a + (r_out - a) * (0.3 + 0.7 * rng.random()))
    m = log_moment(U, a)
    target = 1.0 if rng.random() < 0.5 else 0.05 + 0.95 * rng.random()
    return prof, StepFunction(U.edges, U.values * (target / m))


def hard_disk_weight(a: float, cube_volume: float) -> StepFunction:
    """chi_[a, sqrt2 |Q|^{1/2}] / (|Q| ln(sqrt2 |Q|^{1/2} / a)); its log moment is at most 1."""
    top = math.sqrt(2.0 * cube_volume)
    if not top > a:
        raise DomainError("need sqrt(2|Q|) > a")
    return StepFunction([a, top], [1.0 / (cube_volume * math.log(top / a))])


def dyson_indicator_G(cube_volume: float) -> StepFunction:
    """G = indicator of t <= 3^{3/2} |Q|."""
    return StepFunction([0.0, 3**1.5 * cube_volume], [1.0])
