"""Zero-energy scattering lengths for radial repulsive pair potentials.

Closed forms for the homogeneous, truncated-homogeneous, hard-core and
hard-core-plus-shell potentials, and an ODE integrator used to cross-check
them.  Lengths are in the same units as the potential's radius parameters;
potential strengths follow the convention that the relative-motion operator
is -Delta + W/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigurationError, DomainError, OracleFailure
from .specfun import bessel_i_ratio, gamma_fn

EULER_GAMMA = 0.57721566490153286


@dataclass(frozen=True)
class PotentialSpec:
    """Radial pair potential.

    kind is one of: 'homogeneous' (W0 r^-beta), 'regularized'
    (W0 R^-beta on r < R, zero outside), 'hard-core' (radius a),
    'skew' (hard core a plus constant W0 on a < r < R), 'delta'
    (1D, coupling 4*eta), 'inverse-square' (W0 r^-2).
    """

    kind: str
    d: int
    W0: float = 0.0
    beta: float | None = None
    R: float | None = None
    a: float | None = None
    eta: float | None = None

    def __post_init__(self):
        kinds = ("homogeneous", "regularized", "hard-core", "skew", "delta", "inverse-square")
        if self.kind not in kinds:
            raise ConfigurationError(f"unknown potential kind {self.kind!r}")
        if self.d not in (1, 2, 3):
            raise DomainError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.W0 < 0:
            raise DomainError("only repulsive potentials (W0 >= 0) are supported")

    def value(self, r):
        """W(r) on an array of radii; hard cores give +inf."""
        r = np.asarray(r, dtype=float)
        k = self.kind
        if k == "homogeneous":
            with np.errstate(divide="ignore"):
                return self.W0 * r ** (-self.beta)
        if k == "inverse-square":
            with np.errstate(divide="ignore"):
                return self.W0 * r ** (-2.0)
        if k == "regularized":
            return np.where(r < self.R, self.W0 * self.R ** (-self.beta), 0.0)
        if k == "hard-core":
            return np.where(r < self.a, np.inf, 0.0)
        if k == "skew":
            return np.where(r < self.a, np.inf, np.where(r < self.R, self.W0, 0.0))
        raise ConfigurationError("a delta interaction has no pointwise profile")


def homogeneous(d, W0, beta):
    return PotentialSpec("homogeneous", d, W0=W0, beta=beta)


def regularized(d, W0, beta, R):
    return PotentialSpec("regularized", d, W0=W0, beta=beta, R=R)


def hard_core(d, a):
    return PotentialSpec("hard-core", d, a=a)


def skew(a, W0, R):
    return PotentialSpec("skew", 3, W0=W0, R=R, a=a)


def lieb_liniger(eta):
    return PotentialSpec("delta", 1, eta=eta)


def inverse_square(d, W0):
    return PotentialSpec("inverse-square", d, W0=W0, beta=2.0)


@dataclass
class ScatteringResult:
    a: float
    method: str
    diagnostics: dict = field(default_factory=dict)


def _require(cond, msg):
    if not cond:
        raise DomainError(msg)


def hom_3d_prefactor(beta):
    """Lambda_beta with a = Lambda_beta (W0/2)^{1/(beta-2)} in three dimensions.

    With nu = 1/(beta-2) the regular solution is u = sqrt(r) K_nu(2 nu r^{-1/(2 nu)})
    and the small-argument form of K_nu gives Gamma(1-nu)/Gamma(1+nu) nu^{2 nu}.
    """
    _require(beta > 3, f"3D homogeneous potential needs beta > 3 for finite a (beta={beta})")
    m = beta - 2.0
    return gamma_fn((beta - 3.0) / m) / gamma_fn((beta - 1.0) / m) * (1.0 / m) ** (2.0 / m)


def hom_3d_prefactor_unhalved(beta):
    """Same expression with (2/(beta-2))^{2/(beta-2)}, i.e. the K_nu series taken in t
    rather than t/2.  Exceeds the true prefactor by 2^{2/(beta-2)}."""
    return hom_3d_prefactor(beta) * 2.0 ** (2.0 / (beta - 2.0))


def scatt_len_hom_3d(W0, beta) -> ScatteringResult:
    _require(beta > 3, f"3D homogeneous potential needs beta > 3 for finite a (beta={beta})")
    _require(W0 > 0, "W0 must be positive")
    lam = hom_3d_prefactor(beta)
    lam_u = hom_3d_prefactor_unhalved(beta)
    scale = (0.5 * W0) ** (1.0 / (beta - 2.0))
    return ScatteringResult(lam * scale, "closed-form", {"Lambda": lam, "Lambda_unhalved": lam_u, "a_unhalved": lam_u * scale})


def scatt_len_reg_3d(W0, beta, R) -> ScatteringResult:
    _require(W0 > 0 and R > 0 and beta > 0, "need W0, R, beta > 0")
    k = math.sqrt(0.5 * W0 * R ** (-beta))
    x = k * R
    if x < 1e-3:
        # R - tanh(x)/k with the cancellation removed
        a = R * (x * x / 3.0 - 2.0 * x**4 / 15.0 + 17.0 * x**6 / 315.0)
    else:
        a = R - math.tanh(x) / k
    return ScatteringResult(a, "closed-form", {"kR": x})


def hom_2d_prefactor(beta):
    """Xi_beta with a = Xi_beta (W0/2)^{1/(beta-2)} in two dimensions.

    The zero-energy solution is K_0(s), s = 2 sqrt(W0/2) r^{-(beta-2)/2}/(beta-2),
    and K_0(s) = -ln(s/2) - Euler_gamma + o(1) fixes the constant.
    """
    _require(beta > 2, f"2D homogeneous potential needs beta > 2 for finite a (beta={beta})")
    m = beta - 2.0
    return (math.exp(EULER_GAMMA) / m) ** (2.0 / m)


def hom_2d_log_prefactor(beta):
    """(2/(beta-2))^{2/(beta-2)}: the value obtained when K_0(s) is replaced by -ln(s)."""
    _require(beta > 2, f"2D homogeneous potential needs beta > 2 for finite a (beta={beta})")
    m = beta - 2.0
    return (2.0 / m) ** (2.0 / m)


def scatt_len_hom_2d(W0, beta) -> ScatteringResult:
    _require(beta > 2, f"2D homogeneous potential needs beta > 2 for finite a (beta={beta})")
    _require(W0 > 0, "W0 must be positive")
    xi = hom_2d_prefactor(beta)
    xi_log = hom_2d_log_prefactor(beta)
    scale = (0.5 * W0) ** (1.0 / (beta - 2.0))
    return ScatteringResult(xi * scale, "closed-form", {"Xi": xi, "Xi_log": xi_log, "a_log": xi_log * scale})


def scatt_len_reg_2d(W0, beta, R) -> ScatteringResult:
    _require(W0 > 0 and R > 0 and beta > 0, "need W0, R, beta > 0")
    z = math.sqrt(0.5 * W0) * R ** (1.0 - 0.5 * beta)
    log_a = math.log(R) - bessel_i_ratio(z) / z
    return ScatteringResult(math.exp(log_a), "closed-form", {"z": z, "log_a": log_a})


def scatt_len_skew(a, R, W0) -> ScatteringResult:
    _require(0 < a < R, f"skew potential needs 0 < a < R (a={a}, R={R})")
    _require(W0 > 0, "W0 must be positive")
    k = math.sqrt(0.5 * W0)
    x = k * (R - a)
    if x < 1e-3:
        extra = (R - a) * (x * x / 3.0 - 2.0 * x**4 / 15.0 + 17.0 * x**6 / 315.0)
    else:
        extra = (x - math.tanh(x)) / k
    return ScatteringResult(a + extra, "closed-form", {"k": k})


def scattering_length(spec: PotentialSpec) -> ScatteringResult:
    """Dispatch to the closed form for spec."""
    k, d = spec.kind, spec.d
    if k == "hard-core":
        _require(spec.a is not None and spec.a > 0, "hard core needs a > 0")
        return ScatteringResult(float(spec.a), "closed-form")
    if k == "homogeneous" and d == 3:
        return scatt_len_hom_3d(spec.W0, spec.beta)
    if k == "homogeneous" and d == 2:
        return scatt_len_hom_2d(spec.W0, spec.beta)
    if k == "regularized" and d == 3:
        return scatt_len_reg_3d(spec.W0, spec.beta, spec.R)
    if k == "regularized" and d == 2:
        return scatt_len_reg_2d(spec.W0, spec.beta, spec.R)
    if k == "skew" and d == 3:
        return scatt_len_skew(spec.a, spec.R, spec.W0)
    if k == "inverse-square":
        raise DomainError("inverse-square potential has infinite scattering length")
    raise ConfigurationError(f"no scattering length for kind={k!r} in d={d}")


# ---------------------------------------------------------------------------
# ODE oracle
#
# The radial equations are integrated in s = ln r with state (u, r u') in 3D
# (u = r phi) and (phi, r phi') in 2D:
#   3D: u_s = v, v_s = v + r^2 W/2 u
#   2D: phi_s = v, v_s = r^2 W/2 phi


def _rhs(d, W):
    if d == 3:
        def f(s, y):
            r = math.exp(s)
            return [y[1], y[1] + 0.5 * r * r * W(r) * y[0]]
    else:
        def f(s, y):
            r = math.exp(s)
            return [y[1], 0.5 * r * r * W(r) * y[0]]
    return f


def _integrate(d, W, r0, y0, r1, rtol):
    s0, s1 = math.log(r0), math.log(r1)
    sol = solve_ivp(_rhs(d, W), (s0, s1), y0, method="RK45", rtol=rtol, atol=1e-300,
                    dense_output=True, first_step=1e-6 * max(1.0, s1 - s0))
    if not sol.success:
        raise OracleFailure("ODE integration failed", message=sol.message, r0=r0, r1=r1)
    return sol


def _homogeneous_start(d, W0, beta, phase):
    """Small radius where the WKB phase is `phase`, with WKB data (u, r u') there.

    Starting deep in the classically forbidden core suppresses the
    decaying branch by exp(-2*phase) relative to the growing one.
    """
    m = 0.5 * (beta - 2.0)
    q = math.sqrt(0.5 * W0)
    # int_r^inf q s^{-beta/2} ds = q r^{-m}/m
    r0 = (q / (m * phase)) ** (1.0 / m)
    sq = q * r0 ** (-0.5 * beta)
    # u'/u = sqrt(Q) - Q'/(4Q) with Q = W/2;  2D: phi = u/sqrt(r)
    logd = sq + beta / (4.0 * r0)
    if d == 2:
        logd -= 0.5 / r0
    return r0, [1.0, r0 * logd]


def ode_oracle(spec: PotentialSpec, r_max: float | None = None, rtol: float = 1e-10,
               tail_points: int = 200, max_residual: float = 1e-6) -> ScatteringResult:
    """Scattering length from direct integration of the zero-energy equation.

    Integrates outward and least-squares fits the exterior asymptote on
    log-spaced samples over the last decade [r_max/10, r_max]:
    u ~ c1 r + c0 in 3D (a = -c0/c1) and phi ~ c1 ln r + c0 in 2D
    (a = exp(-c0/c1)).  For the 3D homogeneous potential the two leading
    corrections r^{3-beta}, r^{2-beta} are part of the fit; in 2D the
    default r_max is pushed out until r^{2-beta} is below 1e-9.
    """
    d = spec.d
    if d not in (2, 3):
        raise ConfigurationError("ode_oracle supports d = 2 and d = 3")
    k = spec.kind
    extra = []
    if k == "hard-core":
        _require(spec.a is not None and spec.a > 0, "hard core needs a > 0")
        scale = spec.a
        start, y0 = spec.a, [0.0, spec.a]
        pieces = [(start, None, lambda r: 0.0)]
    elif k == "skew":
        _require(0 < spec.a < spec.R, "skew potential needs 0 < a < R")
        scale = spec.R
        start, y0 = spec.a, [0.0, spec.a]
        pieces = [(start, spec.R, lambda r: spec.W0), (spec.R, None, lambda r: 0.0)]
    elif k == "regularized":
        scale = spec.R
        v = spec.W0 * spec.R ** (-spec.beta)
        ksq = 0.5 * v
        start = 1e-6 * spec.R
        if d == 3:
            # regular branch u = sinh(kr)/k
            kk = math.sqrt(ksq)
            y0 = [math.sinh(kk * start) / kk, start * math.cosh(kk * start)]
        else:
            # phi = I_0(kr) to third order
            y0 = [1.0 + 0.25 * ksq * start**2, 0.5 * ksq * start**2]
        pieces = [(start, spec.R, lambda r: v), (spec.R, None, lambda r: 0.0)]
    elif k == "homogeneous":
        beta = spec.beta
        if (d == 3 and beta <= 3) or (d == 2 and beta <= 2):
            raise DomainError("homogeneous potential has infinite scattering length for this beta")
        _require(spec.W0 > 0, "W0 must be positive")
        scale = (0.5 * spec.W0) ** (1.0 / (beta - 2.0))
        start, y0 = _homogeneous_start(d, spec.W0, beta, 40.0)
        W0 = spec.W0
        pieces = [(start, None, lambda r: W0 * r ** (-beta))]
        if d == 3:
            extra = [3.0 - beta, 2.0 - beta]
    else:
        raise ConfigurationError(f"ode_oracle cannot handle kind={k!r}")

    if r_max is None:
        if k == "homogeneous" and d == 2:
            r_max = 10.0 * scale * 10.0 ** (9.0 / (spec.beta - 2.0))
        elif k == "homogeneous":
            r_max = 1e4 * scale
        else:
            r_max = 100.0 * scale
    if r_max <= start or not math.isfinite(r_max):
        raise DomainError("r_max must be finite and exceed the start radius")

    y = list(y0)
    if k != "homogeneous":
        # compact support: the exterior solution is exactly c(r - a) / c ln(r/a),
        # so matching at the edge of the support is exact and avoids the
        # cancellation a tail fit suffers when a << r_max
        for ra, rb, Wp in pieces[:-1]:
            y = list(_integrate(d, Wp, ra, y, rb, rtol).y[:, -1])
        edge = pieces[-1][0]
        u, v = y
        if d == 3:
            a = edge * (1.0 - u / v)
            log_a = math.log(a) if a > 0 else -math.inf
        else:
            log_a = math.log(edge) - u / v
            a = math.exp(log_a)
        diag = {"residual": 0.0, "match_radius": float(edge), "r0": float(start), "log_a": log_a}
        if not math.isfinite(u / v):
            raise OracleFailure("matching at the support edge failed", **diag)
        return ScatteringResult(float(a), "ode-oracle", diag)

    r_tail = np.geomspace(r_max / 10.0, r_max, tail_points)
    s_tail = np.log(r_tail)
    chunks = []
    for ra, rb, Wp in pieces:
        rb = r_max if rb is None else min(rb, r_max)
        if rb <= ra:
            continue
        sol = _integrate(d, Wp, ra, y, rb, rtol)
        y = list(sol.y[:, -1])
        mask = (r_tail >= ra) & (r_tail <= rb)
        if chunks:
            mask &= r_tail > ra
        if np.any(mask):
            chunks.append(sol.sol(s_tail[mask])[0])
    u_tail = np.concatenate(chunks) if chunks else np.empty(0)
    if len(u_tail) != len(r_tail):
        raise OracleFailure("tail window not covered by the integration", r_max=r_max)

    if d == 3:
        cols = [r_tail, np.ones_like(r_tail)]
    else:
        cols = [np.log(r_tail / scale), np.ones_like(r_tail)]
    cols += [(r_tail / scale) ** p for p in extra]
    A = np.column_stack(cols)
    norms = np.linalg.norm(A, axis=0)
    coef, *_ = np.linalg.lstsq(A / norms, u_tail, rcond=None)
    coef = coef / norms
    resid = u_tail - A @ coef
    rel = float(np.linalg.norm(resid) / np.linalg.norm(u_tail))
    c1, c0 = coef[0], coef[1]
    if d == 3:
        a = -c0 / c1
    else:
        a = scale * math.exp(-c0 / c1)
    diag = {"residual": rel, "r_max": float(r_max), "r0": float(start), "log_a": math.log(a) if a > 0 else -math.inf}
    if not (rel <= max_residual) or not math.isfinite(a):
        raise OracleFailure("tail fit residual too large", **diag)
    return ScatteringResult(float(a), "ode-oracle", diag)
