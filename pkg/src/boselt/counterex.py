"""Scaling experiments showing when a density bound with a fixed constant
cannot hold: homogeneous potentials (beta != 2), locally integrable
potentials and skew hard-core potentials, all for 3D product states."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import scatter
from .errors import ConfigurationError, DomainError
from .scatter import PotentialSpec

_GX, _GW = np.polynomial.legendre.leggauss(200)
TRIAL_NOTE = ("trial: product state N copies of one normalised orbital; it replaces "
              "a dilute hard-sphere ground state, so only the scaling in L is meaningful")


def _gauss(a, b, f):
    x = 0.5 * (b - a) * _GX + 0.5 * (a + b)
    return 0.5 * (b - a) * float(np.sum(_GW * f(x)))


@dataclass(frozen=True)
class TrialState:
    """Product trial state in 3D.

    gaussian_product: |phi|^2 is the centred Gaussian with variance width^2
    per axis.  bump_product: phi = c (1 - |x|^2/width^2)^2 on the ball of
    radius width; its pair expectations exclude separations below `core`.
    """

    kind: str
    width: float
    N: float
    core: float = 0.0
    d: int = 3

    def __post_init__(self):
        if self.kind not in ("gaussian_product", "bump_product"):
            raise ConfigurationError(f"unknown trial kind {self.kind!r}")
        if self.d != 3:
            raise ConfigurationError("trial states are three-dimensional")
        if not (self.width > 0 and self.N > 0 and self.core >= 0):
            raise DomainError("need width > 0, N > 0 and core >= 0")

    # one-body orbital, radial ------------------------------------------------
    def phi2(self, r):
        r = np.asarray(r, dtype=float)
        s = self.width
        if self.kind == "gaussian_product":
            return (2 * math.pi * s * s) ** -1.5 * np.exp(-0.5 * r * r / (s * s))
        c2 = 10395.0 / (1536.0 * math.pi * s**3)  # normalises (1 - r^2)^4 on the ball
        return np.where(r < s, c2 * (1 - (r / s) ** 2) ** 4, 0.0)

    def kinetic(self) -> float:
        """N int |grad phi|^2."""
        s = self.width
        if self.kind == "gaussian_product":
            return self.N * 3.0 / (4.0 * s * s)
        c2 = 10395.0 / (1536.0 * math.pi * s**3)
        # phi' = -4 c r (1 - r^2/s^2) / s^2
        val = _gauss(0, s, lambda r: 16 * c2 * r**2 * (1 - (r / s) ** 2) ** 2 / s**4 * 4 * math.pi * r * r)
        return self.N * val

    def density_power(self, p: float) -> float:
        """int rho^p with rho = N |phi|^2."""
        s = self.width
        if self.kind == "gaussian_product":
            # int (2 pi s^2)^{-3p/2} e^{-p r^2/(2 s^2)} = (2 pi s^2)^{3(1-p)/2} p^{-3/2}
            return self.N**p * (2 * math.pi * s * s) ** (1.5 * (1 - p)) * p**-1.5
        return self.N**p * _gauss(0, s, lambda r: self.phi2(r) ** p * 4 * math.pi * r * r)

    def inverse_power_moment(self, beta: float) -> float:
        """E |X - Y|^{-beta} for X, Y independent with law |phi|^2 (separations < core excluded)."""
        if self.kind == "gaussian_product":
            if self.core > 0:
                raise ConfigurationError("core exclusion is only implemented for the bump trial")
            if beta >= 3:
                raise ConfigurationError(
                    f"<|x-y|^-{beta}> diverges for a Gaussian product; use the bump trial with a core")
            s2 = 2 * self.width**2
            return (2 * s2) ** (-beta / 2) * math.gamma((3 - beta) / 2) / math.gamma(1.5)
        if beta >= 3 and self.core <= 0:
            raise ConfigurationError(f"beta = {beta} needs a positive core radius for the bump trial")
        return _bump_pair_moment(self, beta)

    def pair_energy(self, W0: float, beta: float) -> float:
        """<W> = N(N-1)/2 W0 E|X-Y|^{-beta}."""
        return 0.5 * self.N * (self.N - 1) * W0 * self.inverse_power_moment(beta)


def _bump_pair_moment(trial: TrialState, beta: float) -> float:
    """int_core^{2s} g(r) r^{-beta} 4 pi r^2 dr with g the autocorrelation of |phi|^2."""
    s = trial.width

    def g(r):
        # g(r) = int f(x) f(x + z) dx, |z| = r: radial x = t, cosine mu
        out = np.empty_like(r)
        for k, rr in enumerate(r):
            def inner(t):
                mu = _GX[None, :]
                arg = np.sqrt(np.maximum(t[:, None] ** 2 + rr * rr + 2 * t[:, None] * rr * mu, 0.0))
                return 2 * math.pi * trial.phi2(t) * t * t * np.sum(_GW[None, :] * trial.phi2(arg), axis=1)
            out[k] = _gauss(0, s, inner)
        return out

    lo = max(trial.core, 1e-12 * s)
    if lo >= 2 * s:
        return 0.0
    # substitute r = lo * (2s/lo)^u to resolve the r^{-beta} weight near the core
    ratio = 2 * s / lo
    gx, gw = np.polynomial.legendre.leggauss(96)
    u = 0.5 * (gx + 1)
    r = lo * ratio**u
    jac = r * math.log(ratio) * 0.5
    return float(np.sum(gw * g(r) * r ** (-beta) * 4 * math.pi * r * r * jac))


def monte_carlo_moment(trial: TrialState, beta: float, samples: int = 1_000_000, seed: int = 0):
    """(mean, standard error) of |X - Y|^{-beta} from seeded Gaussian samples."""
    if trial.kind != "gaussian_product":
        raise ConfigurationError("Monte Carlo cross-check is implemented for Gaussian trials")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((samples, 3)) * (math.sqrt(2.0) * trial.width)
    vals = np.linalg.norm(z, axis=1) ** (-beta)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))


@dataclass
class Sweep:
    parameter: str
    values: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    ratio: np.ndarray
    slope: float
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def strictly_decreasing_along(self, direction: int = 1) -> bool:
        r = self.ratio if direction > 0 else self.ratio[::-1]
        return bool(np.all(np.diff(r) < 0))

    def rows(self):
        return [(float(p), float(a), float(b), float(c))
                for p, a, b, c in zip(self.values, self.lhs, self.rhs, self.ratio)]


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(lx, ly, 1)[0])


def scaling_ratio_homogeneous(beta: float, W0: float, trial: TrialState, L_sweep) -> Sweep:
    """[<T> + L^{2-beta} <W_beta>] / int rho^{5/3} along the sweep.

    The kinetic part is L-independent; `slope` is the log-log slope of the
    ratio and `extra['excess_slope']` that of ratio minus its kinetic part,
    which equals 2 - beta.
    """
    if not beta > 0:
        raise DomainError("beta must be positive")
    if not W0 > 0:
        raise DomainError("W0 must be positive")
    L = np.asarray(L_sweep, dtype=float)
    if np.any(L <= 0):
        raise DomainError("L must be positive")
    T = trial.kinetic()
    W = trial.pair_energy(W0, beta)
    D = trial.density_power(5.0 / 3.0)
    lhs = T + L ** (2.0 - beta) * W
    rhs = np.full_like(L, D)
    ratio = lhs / rhs
    slope = loglog_slope(L, ratio) if len(L) > 1 and beta != 2 else 0.0
    excess = loglog_slope(L, ratio - T / D) if len(L) > 1 and W > 0 else 0.0
    return Sweep("L", L, lhs, rhs, ratio, slope, [TRIAL_NOTE],
                 {"kinetic": T, "interaction": W, "rho53": D, "kinetic_floor": T / D,
                  "excess_slope": excess, "predicted_exponent": 2.0 - beta})


# ---------------------------------------------------------------------------
# locally integrable potentials


def local_norm(W: PotentialSpec, radius: float, p: float = 1.5) -> float:
    """||W||_{L^p(B(0, radius))} in 3D."""
    if W.d != 3:
        raise ConfigurationError("local norms are computed in 3D")
    if W.kind in ("hard-core", "skew", "delta"):
        raise ConfigurationError(f"{W.kind} potential is not locally integrable")
    if W.W0 == 0:
        return 0.0
    if W.kind in ("homogeneous", "inverse-square"):
        beta = 2.0 if W.kind == "inverse-square" else W.beta
        e = 3.0 - p * beta
        if e <= 0:
            raise ConfigurationError(f"|x|^-{beta} is not in L^{p} near the origin")
        return (4 * math.pi * W.W0**p * radius**e / e) ** (1 / p)
    if W.kind == "regularized":
        r = min(radius, W.R)
        return (4 * math.pi / 3 * r**3) ** (1 / p) * W.W0 * W.R ** (-W.beta)
    raise ConfigurationError(f"no local norm for {W.kind}")


def scattering_length_or_inf(W: PotentialSpec) -> float:
    """Scattering length, with +inf for W = 0 and for slowly decaying tails."""
    if W.W0 == 0:
        return math.inf
    if W.kind == "homogeneous" and W.beta <= 3:
        return math.inf
    if W.kind == "inverse-square":
        return math.inf
    return scatter.scattering_length(W).a


def locally_integrable_ratio(W: PotentialSpec, N_sweep, C: float = 1.0, c3: float | None = None,
                             c4: float = 1.0, c5: float = 1.0, c6: float | None = None) -> Sweep:
    """LHS / RHS of  c3 N + c4 c5 N^2 ||W||_{3/2, B(2L)}  <  C int min{a N^2/L |phi|^4, N^{5/3} |phi|^{10/3}}
    with phi the unit bump and L(N) the largest scale with ||W||_{3/2, B(2L)} <= c6 N^{-1/3} / 2.

    Defaults: c3 is the bump's kinetic integral; c6 = C int |phi|^{10/3} / (c4 c5), so the ratio
    tends to 1/2 as N grows.
    """
    bump = TrialState("bump_product", 1.0, 1.0)
    phi4 = lambda r: bump.phi2(r) ** 2  # noqa: E731
    phi103 = lambda r: bump.phi2(r) ** (5.0 / 3.0)  # noqa: E731
    I103 = _gauss(0, 1, lambda r: phi103(r) * 4 * math.pi * r * r)
    if c3 is None:
        c3 = bump.kinetic()
    if c6 is None:
        c6 = C * I103 / (c4 * c5)
    a = scattering_length_or_inf(W)
    Ns = np.asarray(N_sweep, dtype=float)
    if np.any(Ns < 1):
        raise DomainError("N must be >= 1")
    Ls, lhs, rhs = [], [], []
    for N in Ns:
        target = 0.5 * c6 * N ** (-1.0 / 3.0)
        if local_norm(W, 2.0) <= target:
            L = 1.0
        else:
            L = brentq(lambda x: local_norm(W, 2 * x) - target, 1e-300, 1.0, xtol=1e-300, rtol=1e-14)
        norm = local_norm(W, 2 * L)
        if not math.isfinite(norm):
            raise ConfigurationError("local norm diverges")
        left = c3 * N + c4 * c5 * N * N * norm
        if math.isinf(a):
            right = C * N ** (5.0 / 3.0) * I103
        else:
            right = C * _gauss(0, 1, lambda r: np.minimum(a * N * N / L * phi4(r),
                                                           N ** (5.0 / 3.0) * phi103(r)) * 4 * math.pi * r * r)
        Ls.append(L)
        lhs.append(left)
        rhs.append(right)
    lhs, rhs = np.array(lhs), np.array(rhs)
    ratio = lhs / rhs
    slope = loglog_slope(Ns, ratio) if len(Ns) > 1 else 0.0
    return Sweep("N", Ns, lhs, rhs, ratio, slope, [TRIAL_NOTE],
                 {"L": np.array(Ls), "a": a, "c3": c3, "c6": c6, "int_phi_10_3": I103})


# ---------------------------------------------------------------------------
# skew potentials


def solve_skew_range(a: float, W0: float, a_W: float) -> float:
    """R with scatt_len_skew(a, R, W0) = a_W."""
    if not 0 < a < a_W:
        raise ConfigurationError(f"need 0 < a < a_W (a={a}, a_W={a_W})")
    if not W0 > 0:
        raise DomainError("W0 must be positive")
    f = lambda R: scatter.scatt_len_skew(a, R, W0).a - a_W  # noqa: E731
    k = math.sqrt(0.5 * W0)
    # a_W(R) grows at least like the small-x cubic and at most like R
    hi = a + max(a_W - a, (3 * (a_W - a) / (k * k)) ** (1 / 3)) * 2 + 1e-12
    while f(hi) < 0:
        hi = a + 2 * (hi - a)
    lo = a * (1 + 1e-15) + 1e-300
    R = brentq(f, lo, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps, maxiter=500)
    got = scatter.scatt_len_skew(a, R, W0).a
    if abs(got - a_W) > 1e-10 * a_W:
        raise ConfigurationError(f"could not reproduce a_W = {a_W} (got {got})")
    return R


def skew_budget(a_W: float, tuples, N: float = 100.0, volume: float | None = None) -> Sweep:
    """[8 pi a N^2/|Q0| + N^2 W0] / (|Q0| min{a_W rho^2, rho^{5/3}}) for the
    uniform density rho = N/|Q0|, for each (a, W0) with R solved from a_W.

    Default |Q0| makes the gas dilute on the a_W scale: rho a_W^3 = 1e-3.
    """
    if not a_W > 0:
        raise DomainError("a_W must be positive")
    if volume is None:
        volume = N * a_W**3 / 1e-3
    rho = N / volume
    dens = volume * min(a_W * rho * rho, rho ** (5.0 / 3.0))
    W0s, Rs, lhs = [], [], []
    for a, W0 in tuples:
        R = solve_skew_range(a, W0, a_W)
        W0s.append(W0)
        Rs.append(R)
        lhs.append(8 * math.pi * a * N * N / volume + N * N * W0)
    W0s = np.array(W0s, dtype=float)
    lhs = np.array(lhs)
    rhs = np.full_like(lhs, dens)
    ratio = lhs / rhs
    slope = loglog_slope(W0s, ratio) if len(W0s) > 1 else 0.0
    return Sweep("W0", W0s, lhs, rhs, ratio, slope, ["uniform surrogate density on Q0"],
                 {"R": np.array(Rs), "a": np.array([t[0] for t in tuples], dtype=float), "volume": volume})
