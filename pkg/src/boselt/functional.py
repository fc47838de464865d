"""Density functionals built from an exclusion bound, the A/B cube tree and
the minimisation of the functional in an external potential."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .bounds import ExclusionBound
from .errors import (ConfigurationError, DegenerateConcentration, DomainError, NumericalError,
                     ParseError, PreconditionError)

RHO_FLOOR = 1e-300


# ---------------------------------------------------------------------------
# grids


@dataclass
class DensityGrid:
    """Cell-centred density on a uniform grid; cell (i, j, ...) covers
    origin + spacing * [i, i+1) x [j, j+1) x ..."""

    values: np.ndarray
    spacing: float = 1.0
    origin: tuple = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim not in (1, 2, 3):
            raise DomainError("density grids are 1, 2 or 3 dimensional")
        if not (self.spacing > 0 and math.isfinite(self.spacing)):
            raise DomainError("spacing must be positive")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise DomainError("density values must be finite and nonnegative")
        if self.origin is None:
            self.origin = (0.0,) * self.values.ndim
        self.origin = tuple(float(o) for o in self.origin)
        if len(self.origin) != self.values.ndim:
            raise DomainError("origin has the wrong dimension")

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def shape(self):
        return self.values.shape

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.d

    @property
    def mass(self) -> float:
        return math.fsum(self.values.ravel()) * self.cell_volume

    @property
    def volume(self) -> float:
        return float(np.prod(self.shape)) * self.cell_volume

    def centres(self):
        axes = [self.origin[k] + (np.arange(n) + 0.5) * self.spacing for k, n in enumerate(self.shape)]
        return np.meshgrid(*axes, indexing="ij")

    def block(self, cube: "Cube") -> np.ndarray:
        return self.values[cube.slices]

    def cube_mass(self, cube: "Cube") -> float:
        return math.fsum(self.block(cube).ravel()) * self.cell_volume

    def mean_density(self, cube: "Cube") -> float:
        """rho tilde: average density on the cube."""
        return self.cube_mass(cube) / (cube.size**self.d * self.cell_volume)

    def full_cube(self) -> "Cube":
        if len(set(self.shape)) != 1:
            raise DomainError("grid is not a cube; pass an explicit root cube")
        return Cube((0,) * self.d, self.shape[0])


@dataclass(frozen=True)
class Cube:
    """Axis-aligned cube of grid cells: lower corner index and side in cells."""

    lo: tuple
    size: int

    @property
    def slices(self):
        return tuple(slice(i, i + self.size) for i in self.lo)

    def children(self):
        if self.size % 2:
            raise DegenerateConcentration(f"cube of side {self.size} cells cannot be halved")
        h = self.size // 2
        d = len(self.lo)
        out = []
        for k in range(2**d):
            off = tuple(((k >> (d - 1 - ax)) & 1) * h for ax in range(d))
            out.append(Cube(tuple(i + o for i, o in zip(self.lo, off)), h))
        return out

    def volume(self, spacing: float) -> float:
        return (self.size * spacing) ** len(self.lo)

    def inside(self, shape) -> bool:
        return all(i >= 0 and i + self.size <= n for i, n in zip(self.lo, shape))


# ---------------------------------------------------------------------------
# rho-grid v1 text format


def parse_rho_grid(text: str) -> DensityGrid:
    """Header `d n1 [n2 [n3]] o1 [o2 [o3]] spacing`, then values in row-major
    order.  Blank lines and '#' comments are skipped."""
    vals, spacing, origin = parse_grid_values(text)
    return DensityGrid(vals, spacing, origin)


def parse_grid_values(text: str, allow_negative: bool = False):
    """(values, spacing, origin) from rho-grid v1 text; potentials may be negative."""
    tokens = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0]
        pos = 0
        for part in body.split():
            col = body.index(part, pos)
            pos = col + len(part)
            tokens.append((part, lineno, col + 1))
    if not tokens:
        raise ParseError("empty density file", 1, 1)

    def num(k, kind=float):
        tok, ln, col = tokens[k]
        try:
            v = float(tok) if kind is float else int(tok)
        except ValueError:
            raise ParseError(f"expected {'number' if kind is float else 'integer'}, got {tok!r}", ln, col) from None
        if kind is float and not math.isfinite(v):
            raise ParseError(f"non-finite value {tok!r}", ln, col)
        return v

    d = num(0, int)
    if d not in (1, 2, 3):
        raise ParseError(f"dimension must be 1, 2 or 3, got {d}", tokens[0][1], tokens[0][2])
    nhead = 2 + 2 * d
    if len(tokens) < nhead:
        last = tokens[-1]
        raise ParseError(f"header needs {nhead} fields, found {len(tokens)}", last[1], last[2] + len(last[0]))
    dims = [num(1 + k, int) for k in range(d)]
    for k, n in enumerate(dims):
        if n <= 0:
            raise ParseError("grid sizes must be positive", tokens[1 + k][1], tokens[1 + k][2])
    origin = [num(1 + d + k) for k in range(d)]
    spacing = num(1 + 2 * d)
    if not spacing > 0:
        raise ParseError("spacing must be positive", tokens[1 + 2 * d][1], tokens[1 + 2 * d][2])
    count = int(np.prod(dims))
    body = tokens[nhead:]
    if len(body) != count:
        ref = body[count] if len(body) > count else (tokens[-1][0], tokens[-1][1], tokens[-1][2] + len(tokens[-1][0]))
        raise ParseError(f"expected {count} values, found {len(body)}", ref[1], ref[2])
    vals = np.empty(count)
    for k in range(count):
        v = num(nhead + k)
        if v < 0 and not allow_negative:
            raise ParseError(f"negative density {body[k][0]}", body[k][1], body[k][2])
        vals[k] = v
    return vals.reshape(dims), spacing, tuple(origin)


def read_rho_grid(path) -> DensityGrid:
    with open(path, encoding="utf-8") as fh:
        return parse_rho_grid(fh.read())


def format_rho_grid(grid: DensityGrid, per_line: int | None = None) -> str:
    head = [str(grid.d), *map(str, grid.shape), *map(repr, grid.origin), repr(float(grid.spacing))]
    out = io.StringIO()
    out.write(" ".join(head) + "\n")
    flat = grid.values.ravel()
    per_line = per_line or grid.shape[-1]
    for k in range(0, len(flat), per_line):
        out.write(" ".join(repr(float(v)) for v in flat[k:k + per_line]) + "\n")
    return out.getvalue()


def write_rho_grid(grid: DensityGrid, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_rho_grid(grid))


# ---------------------------------------------------------------------------
# functional


def integrand(rho, bound: ExclusionBound):
    """e_K(gamma(2/rho)) rho^{1+2/d}, extended by 0 at rho = 0."""
    rho = np.asarray(rho, dtype=float)
    d = bound.d
    pos = rho >= RHO_FLOOR
    r = np.where(pos, rho, 1.0)
    g = bound.tau * (2.0 / r) ** ((2.0 - bound.alpha) / d)
    out = np.where(pos, np.asarray(bound(g), dtype=float) * r ** (1 + 2.0 / d), 0.0)
    return float(out) if out.ndim == 0 else out


def integrand_derivative(rho, bound: ExclusionBound):
    """d/drho of the integrand: rho^{2/d} (p e - q gamma e'), p = 1+2/d, q = (2-alpha)/d."""
    rho = np.asarray(rho, dtype=float)
    d = bound.d
    p, q = 1 + 2.0 / d, (2.0 - bound.alpha) / d
    pos = rho >= RHO_FLOOR
    r = np.where(pos, rho, 1.0)
    g = bound.tau * (2.0 / r) ** q
    e = np.asarray(bound(g), dtype=float)
    de = np.asarray(bound.derivative(g), dtype=float)
    with np.errstate(invalid="ignore"):
        gde = np.where(g > 0, g * de, 0.0)
    out = np.where(pos, r ** (2.0 / d) * (p * e - q * gde), 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass
class FunctionalResult:
    energy: float
    cells: np.ndarray
    leaf_terms: list | None = None


def _check_dim(density, bound):
    if density.d != bound.d:
        raise ConfigurationError(f"density is {density.d}D but the bound is {bound.d}D")


def lt_functional(density: DensityGrid, bound: ExclusionBound, C: float) -> FunctionalResult:
    """C int e_K(gamma(2/rho)) rho^{1+2/d} by the midpoint rule."""
    _check_dim(density, bound)
    cells = C * integrand(density.values, bound) * density.cell_volume
    return FunctionalResult(math.fsum(np.ravel(cells)), np.asarray(cells))


def local_exclusion_value(density: DensityGrid, cube: Cube, bound: ExclusionBound) -> float:
    """(1/2) e_K(gamma(|Q|)) |Q|^{-2/d} (int_Q rho - 1)_+."""
    _check_dim(density, bound)
    if not cube.inside(density.shape):
        raise DomainError("cube leaves the grid")
    vol = cube.volume(density.spacing)
    m = density.cube_mass(cube)
    if m <= 1:
        return 0.0
    e = float(bound(bound.gamma_of_volume(vol)))
    return 0.5 * e * vol ** (-2.0 / density.d) * (m - 1.0)


@dataclass
class IntegralBoundReport:
    lhs: float
    rhs: float
    slack: float
    passed: bool
    mean: float


def integral_bound_check(density: DensityGrid, cube: Cube, bound: ExclusionBound,
                         tol: float = 1e-12) -> IntegralBoundReport:
    """Compare int_Q f(gamma(2/rho)) rho^{1+2/d} with its bound through the
    local mean rho~: f(gamma(2/rho~)) (|Q| rho~^{1+2/d} + int_Q rho^{1+2/d})
    for alpha <= 2, and with rho~^{(2-alpha)/d} int_Q rho^{1+alpha/d} as the
    second term for alpha >= 2.  f is the capped exclusion function."""
    _check_dim(density, bound)
    d, alpha = density.d, bound.alpha
    block = density.block(cube)
    cv = density.cell_volume
    vol = cube.volume(density.spacing)
    lhs = math.fsum(np.ravel(integrand(block, bound))) * cv
    mean = density.mean_density(cube)
    if mean <= 0:
        return IntegralBoundReport(lhs, 0.0, -lhs, lhs <= 0, 0.0)
    f = float(bound(bound.tau * (2.0 / mean) ** ((2 - alpha) / d)))
    first = vol * mean ** (1 + 2.0 / d)
    if alpha <= 2:
        second = math.fsum(np.ravel(block ** (1 + 2.0 / d))) * cv
    else:
        second = mean ** ((2 - alpha) / d) * math.fsum(np.ravel(block ** (1 + alpha / d))) * cv
    rhs = f * (first + second)
    slack = rhs - lhs
    return IntegralBoundReport(lhs, rhs, slack, slack >= -tol * max(1.0, abs(rhs)), mean)


# ---------------------------------------------------------------------------
# A/B cube tree


@dataclass
class TreeNode:
    cube: Cube
    mass: float
    label: str  # 'A', 'B' or 'split'
    depth: int
    children: list = field(default_factory=list)

    def leaves(self):
        if not self.children:
            yield self
            return
        for c in self.children:
            yield from c.leaves()


@dataclass
class CubeTree:
    root: TreeNode
    d: int
    spacing: float

    def leaves(self):
        return list(self.root.leaves())

    def b_leaves(self):
        return [n for n in self.leaves() if n.label == "B"]

    def a_leaves(self):
        return [n for n in self.leaves() if n.label == "A"]

    def nodes(self):
        stack = [self.root]
        while stack:
            n = stack.pop()
            yield n
            stack.extend(n.children)

    def problems(self, mass_rtol: float = 1e-10) -> list:
        """Invariant violations (empty when the tree is sound)."""
        out = []
        top = 2.0 ** (self.d + 1)
        for n in self.nodes():
            if n.label == "B" and not (2 <= n.mass < top):
                out.append(f"B leaf {n.cube} has mass {n.mass}")
            elif n.label == "A" and not n.mass < 2:
                out.append(f"A leaf {n.cube} has mass {n.mass}")
            elif n.label == "split":
                if not (n.mass >= top or (n is self.root and n.mass >= 2)):
                    out.append(f"split node {n.cube} has mass {n.mass}")
                if len(n.children) != 2**self.d:
                    out.append(f"split node {n.cube} has {len(n.children)} children")
                if not any(c.mass >= 2 for c in n.children):
                    out.append(f"split node {n.cube} has no child of mass >= 2")
                child_mass = math.fsum(c.mass for c in n.children)
                if abs(child_mass - n.mass) > mass_rtol * max(n.mass, 1.0):
                    out.append(f"mass not conserved at {n.cube}")
        # exact partition: every root cell covered once
        cover = np.zeros((self.root.cube.size,) * self.d, dtype=np.int64)
        lo = np.array(self.root.cube.lo)
        for leaf in self.leaves():
            sl = tuple(slice(i - o, i - o + leaf.cube.size) for i, o in zip(leaf.cube.lo, lo))
            cover[sl] += 1
        if np.any(cover != 1):
            out.append("leaves do not partition the root")
        leaf_mass = math.fsum(n.mass for n in self.leaves())
        if abs(leaf_mass - self.root.mass) > mass_rtol * self.root.mass:
            out.append(f"leaf mass {leaf_mass} != root mass {self.root.mass}")
        return out


def tree_decompose(density: DensityGrid, root: Cube | None = None) -> CubeTree:
    """Split every cube of mass >= 2^{d+1} into its 2^d halves; leaves with
    mass < 2 are labelled A, those in [2, 2^{d+1}) B."""
    d = density.d
    root = root or density.full_cube()
    if not root.inside(density.shape):
        raise DomainError("root cube leaves the grid")
    top = 2.0 ** (d + 1)
    m0 = density.cube_mass(root)
    if m0 < 2:
        raise PreconditionError(f"root mass {m0} < 2; the tree needs at least two particles")

    def build(c: Cube, m: float, depth: int) -> TreeNode:
        if m < top:
            return TreeNode(c, m, "A" if m < 2 else "B", depth)
        if c.size == 1:
            raise DegenerateConcentration(f"mass {m} >= {top} in the single grid cell {c.lo}")
        node = TreeNode(c, m, "split", depth)
        for ch in c.children():
            node.children.append(build(ch, density.cube_mass(ch), depth + 1))
        return node

    return CubeTree(build(root, m0, 0), d, density.spacing)


def tree_exclusion_terms(density: DensityGrid, tree: CubeTree, bound: ExclusionBound) -> list:
    return [local_exclusion_value(density, leaf.cube, bound) for leaf in tree.b_leaves()]


# ---------------------------------------------------------------------------
# minimisation with an external potential


@dataclass
class MinimizationResult:
    density: DensityGrid
    energy: float
    mu: float
    iterations: int
    mass: float
    convex: bool
    primal_energy: float
    duality_gap: float
    split_cells: int = 0
    diagnostics: dict = field(default_factory=dict)


def _is_convex(bound, rho_max, C):
    r = np.logspace(math.log10(rho_max) - 30, math.log10(rho_max), 2000)
    fp = integrand_derivative(r, bound)
    return bool(np.all(np.diff(fp) >= -1e-10 * np.maximum(np.abs(fp[1:]), 1e-300)))


def _convex_solver(bound, C, rho_max):
    lo_log = math.log(RHO_FLOOR) + 5
    hi_log = math.log(rho_max)
    # C f' tabulated on a log grid brackets each cell before bisection
    table_x = np.linspace(lo_log, hi_log, 8193)
    table_f = np.maximum.accumulate(C * integrand_derivative(np.exp(table_x), bound))
    fp_floor, fp_max = table_f[0], table_f[-1]

    def density_at(t):
        """argmin_rho C f(rho) - t rho, elementwise in t."""
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(table_f, t), 1, len(table_x) - 1)
        lo, hi = table_x[k - 1], table_x[k]
        for _ in range(48):
            mid = 0.5 * (lo + hi)
            up = C * integrand_derivative(np.exp(mid), bound) < t
            lo = np.where(up, mid, lo)
            hi = np.where(up, hi, mid)
        rho = np.exp(0.5 * (lo + hi))
        rho = np.where(t <= fp_floor, 0.0, rho)
        return np.where(t >= fp_max, rho_max, rho)
    return density_at, fp_floor


def _lower_hull(x, y):
    """Indices of the lower convex hull of points sorted by x."""
    hull = []
    for k, (px, py) in enumerate(zip(x, y)):
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            if (y[j] - y[i]) * (px - x[i]) >= (py - y[i]) * (x[j] - x[i]):
                hull.pop()
            else:
                break
        hull.append(k)
    return np.array(hull)


def _envelope_samples(bound, rho_max, points):
    r = np.r_[0.0, np.logspace(math.log10(rho_max) - 12, math.log10(rho_max), points)]
    f = integrand(r, bound)
    return r, f, _lower_hull(r, f)


def convex_envelope(bound, rho_max, points: int = 4000):
    """Vertices of the lower convex hull of the integrand on [0, rho_max]."""
    r, f, idx = _envelope_samples(bound, rho_max, points)
    return np.column_stack([r[idx], f[idx]])


def _envelope_solver(bound, C, rho_max, points=4000):
    """argmin_rho C f**(rho) - t rho for the convex envelope f** of f.

    Hull edges joining neighbouring samples follow f itself; around a vertex
    flanked by two such edges the optimum solves C f'(rho) = t exactly.
    Elsewhere the optimum is a hull vertex.
    """
    r, f, idx = _envelope_samples(bound, rho_max, points)
    xs, ys = r[idx], f[idx]
    slopes = C * np.diff(ys) / np.diff(xs)
    tight = np.diff(idx) == 1
    inner = np.zeros(len(xs), dtype=bool)
    inner[1:-1] = tight[:-1] & tight[1:] & (xs[:-2] > 0)

    def density_at(t):
        t = np.asarray(t, dtype=float)
        k = np.minimum(np.searchsorted(slopes, t, side="left"), len(xs) - 1)
        rho = xs[k].copy()
        m = inner[k]
        if np.any(m):
            km, tm = k[m], t[m]
            lo, hi = np.log(xs[km - 1]), np.log(xs[km + 1])
            for _ in range(48):
                mid = 0.5 * (lo + hi)
                up = C * integrand_derivative(np.exp(mid), bound) < tm
                lo = np.where(up, mid, lo)
                hi = np.where(up, hi, mid)
            rho[m] = np.exp(0.5 * (lo + hi))
        return rho

    def value(rho):
        return np.minimum(integrand(rho, bound), np.interp(rho, xs, ys))

    return density_at, value, slopes[0]


def minimize_with_external(V, N: float, bound: ExclusionBound, C: float, spacing: float = 1.0,
                           origin=None, tol: float = 1e-8, max_iter: int = 200) -> MinimizationResult:
    """Minimise sum_cells [C f(rho) + V rho] h^d over rho >= 0 with mass N.

    Each cell solves a 1D problem in rho for the multiplier mu, and mu is
    found by a safeguarded bracketing root search on mass(mu) - N.  When
    f is not convex the convex envelope of f is used; the returned `energy`
    is then the relaxed minimum (a lower bound for the true minimum),
    `primal_energy` the true functional at the returned density, and cells
    sitting on a mass jump are split proportionally.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim != bound.d:
        raise ConfigurationError(f"potential grid is {V.ndim}D but the bound is {bound.d}D")
    if not np.all(np.isfinite(V)):
        raise DomainError("V must be finite on the grid")
    if not N > 0:
        raise DomainError("N must be positive")
    if not C > 0:
        raise DomainError("C must be positive")
    cv = spacing**bound.d
    rho_max = 10.0 * N / cv
    convex = _is_convex(bound, rho_max, C)
    iters = [0]

    if convex:
        density_at, fp0 = _convex_solver(bound, C, rho_max)
        env = None
    else:
        density_at, env, fp0 = _envelope_solver(bound, C, rho_max)

    def mass(mu):
        iters[0] += 1
        return float(np.sum(density_at(mu - V))) * cv

    mu_lo = float(np.min(V)) + fp0
    if mass(mu_lo) > N:
        raise NumericalError("mass at the lower multiplier already exceeds N", mu=mu_lo)
    step = max(1.0, abs(mu_lo))
    mu_hi = mu_lo + step
    while mass(mu_hi) < N:
        step *= 2
        mu_hi = mu_lo + step
        if iters[0] > max_iter:
            raise NumericalError("could not bracket the multiplier", mu_lo=mu_lo, mu_hi=mu_hi)
    if convex:
        mu = brentq(lambda m: mass(m) - N, mu_lo, mu_hi, xtol=1e-15 * max(1.0, abs(mu_hi)),
                    rtol=1e-15, maxiter=max_iter)
        rho = density_at(mu - V)
        m = float(np.sum(rho)) * cv
        if abs(m - N) > tol * N:
            raise NumericalError("multiplier search did not reach the mass", mu=mu, mass=m, N=N,
                                 bracket=(mu_lo, mu_hi))
        rho *= N / m
        split = 0
    else:
        a, b = mu_lo, mu_hi
        for _ in range(max_iter):
            mid = 0.5 * (a + b)
            if mid in (a, b):
                break
            if mass(mid) < N:
                a = mid
            else:
                b = mid
        lo_rho, hi_rho = density_at(a - V), density_at(b - V)
        m_lo, m_hi = float(np.sum(lo_rho)) * cv, float(np.sum(hi_rho)) * cv
        theta = 0.0 if m_hi == m_lo else (N - m_lo) / (m_hi - m_lo)
        rho = lo_rho + theta * (hi_rho - lo_rho)
        split = int(np.count_nonzero(hi_rho != lo_rho))
        mu = 0.5 * (a + b)
        if abs(float(np.sum(rho)) * cv - N) > tol * N:
            raise NumericalError("mass jump could not be resolved", bracket=(a, b), mass_lo=m_lo, mass_hi=m_hi)

    grid = DensityGrid(rho, spacing, origin)
    f_true = integrand(rho, bound)
    primal = math.fsum(np.ravel(C * f_true + V * rho)) * cv
    if env is None:
        energy = primal
    else:
        energy = math.fsum(np.ravel(C * env(rho) + V * rho)) * cv
    return MinimizationResult(grid, energy, float(mu), iters[0], grid.mass, convex, primal,
                              primal - energy, split, {"rho_max": rho_max})


def stationarity_residual(result: MinimizationResult, V, bound: ExclusionBound, C: float) -> float:
    """max |C f'(rho) + V - mu| over cells with rho > 0, relative to max(1, |mu|)."""
    rho = result.density.values
    pos = rho > 0
    if not np.any(pos):
        return 0.0
    g = C * integrand_derivative(rho[pos], bound) + np.asarray(V)[pos] - result.mu
    return float(np.max(np.abs(g)) / max(1.0, abs(result.mu)))
