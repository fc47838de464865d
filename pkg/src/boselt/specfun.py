"""Special functions: the Lieb-Liniger root, Gamma, modified Bessel I and K.

Everything here is plain float64 / numpy.  The Lieb-Liniger root is needed
vectorised (it is evaluated on every cell of a density grid), the rest is
scalar.
"""

import math

import numpy as np

from .errors import DomainError

HALF_PI = 0.5 * math.pi

# Lanczos approximation, g = 7, n = 9
_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma_fn(x: float) -> float:
    """Euler Gamma function for real x (poles at 0, -1, -2, ... raise)."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"gamma_fn: non-finite argument {x}")
    if x <= 0 and x == math.floor(x):
        raise DomainError(f"gamma_fn: pole at x={x}")
    if x < 0.5:
        # reflection
        return math.pi / (math.sin(math.pi * x) * gamma_fn(1.0 - x))
    if x > 171.7:
        raise DomainError(f"gamma_fn: overflow for x={x}")
    z = x - 1.0
    acc = _LANCZOS[0]
    for k in range(1, len(_LANCZOS)):
        acc += _LANCZOS[k] / (z + k)
    t = z + _LANCZOS_G + 0.5
    # split the power to avoid overflow near the top of the range
    half = t ** (0.5 * (z + 0.5))
    return math.sqrt(2.0 * math.pi) * half * (half * math.exp(-t)) * acc


def _xi_residual(xi, gamma):
    # xi*sin(xi) - gamma*cos(xi) has no pole on [0, pi/2] and is increasing there
    return xi * np.sin(xi) - gamma * np.cos(xi)


def xi_ll(gamma):
    """Root xi in [0, pi/2) of xi*tan(xi) = gamma, gamma >= 0.

    Accepts scalars or arrays.  gamma = +inf maps to pi/2.
    """
    g = np.asarray(gamma, dtype=float)
    if np.any(np.isnan(g)) or np.any(g < 0):
        raise DomainError("xi_ll: gamma must be >= 0")
    scalar = g.ndim == 0
    g = np.atleast_1d(g)
    out = np.empty_like(g)

    inf = np.isinf(g)
    out[inf] = HALF_PI
    fin = ~inf
    gf = g[fin]
    lo = np.zeros_like(gf)
    # xi <= sqrt(gamma) since tan(xi) >= xi
    hi = np.minimum(np.sqrt(gf), HALF_PI)
    for _ in range(44):
        mid = 0.5 * (lo + hi)
        pos = _xi_residual(mid, gf) > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    xi = 0.5 * (lo + hi)
    # Newton polish on the pole-free residual, kept inside the bracket
    for _ in range(3):
        f = _xi_residual(xi, gf)
        df = np.sin(xi) + xi * np.cos(xi) + gf * np.sin(xi)
        step = np.divide(f, df, out=np.zeros_like(f), where=df > 0)
        cand = xi - step
        xi = np.where((cand >= lo) & (cand <= hi), cand, xi)
    out[fin] = xi
    return float(out[0]) if scalar else out


def xi_ll_derivative(gamma):
    """d xi / d gamma = cos^2(xi) / (sin(xi)cos(xi) + xi); infinite at gamma = 0."""
    xi = np.asarray(xi_ll(gamma), dtype=float)
    c = np.cos(xi)
    den = np.sin(xi) * c + xi
    with np.errstate(divide="ignore"):
        res = np.where(den > 0, c * c / np.where(den > 0, den, 1.0), np.inf)
    return float(res) if res.ndim == 0 else res


def ll_energy(gamma):
    """4 xi(gamma)^2."""
    xi = xi_ll(gamma)
    return 4.0 * np.asarray(xi) ** 2 if np.ndim(xi) else 4.0 * xi * xi


def ll_energy_derivative(gamma):
    """d/dgamma of 4 xi^2; tends to 4 as gamma -> 0."""
    xi = np.asarray(xi_ll(gamma), dtype=float)
    c = np.cos(xi)
    den = np.sin(xi) * c + xi
    small = xi < 1e-8
    safe = np.where(small, 1.0, den)
    res = np.where(small, 4.0, 8.0 * xi * c * c / safe)
    return float(res) if res.ndim == 0 else res


def _check_bessel_args(nu, x):
    nu = float(nu)
    x = float(x)
    if not (x > 0) or not math.isfinite(x):
        raise DomainError(f"bessel: need finite x > 0, got {x}")
    if not (nu >= 0) or not math.isfinite(nu):
        raise DomainError(f"bessel: need finite nu >= 0, got {nu}")
    return nu, x


_I_SERIES_MAX = 25.0


def _bessel_i_series_scaled(nu, x):
    term = (0.5 * x) ** nu / gamma_fn(nu + 1.0)
    q = 0.25 * x * x
    total = term
    k = 0
    while True:
        k += 1
        term *= q / (k * (nu + k))
        total += term
        if term < 1e-17 * total:
            break
        if k > 1000:
            raise DomainError("bessel_i: series did not converge")
    return total * math.exp(-x)


def _bessel_i_asym_scaled(nu, x):
    mu = 4.0 * nu * nu
    term = 1.0
    total = 1.0
    last = 1.0
    for k in range(1, 200):
        term *= -(mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(term) > last and k > 2:
            break
        total += term
        last = abs(term)
        if last < 1e-17 * abs(total):
            break
    return total / math.sqrt(2.0 * math.pi * x)


def bessel_i(nu: float, x: float, scaled: bool = False) -> float:
    """Modified Bessel function I_nu(x); with scaled=True returns exp(-x) I_nu(x).

    Power series below x = 25 (all terms positive, no cancellation),
    Hankel asymptotic expansion above, where the neglected part is O(e^{-2x}).
    """
    nu, x = _check_bessel_args(nu, x)
    if x <= _I_SERIES_MAX:
        val = _bessel_i_series_scaled(nu, x)
    else:
        val = _bessel_i_asym_scaled(nu, x)
    if scaled:
        return val
    if x > 700:
        raise DomainError(f"bessel_i: overflow at x={x}; use scaled=True")
    return val * math.exp(x)


def bessel_k(nu: float, x: float, scaled: bool = False) -> float:
    """Modified Bessel function K_nu(x); with scaled=True returns exp(x) K_nu(x).

    Trapezoidal rule on K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt.
    The integrand is analytic in a strip, so the rule converges geometrically;
    the step shrinks like 1/sqrt(x) to resolve the peak at t = 0.
    """
    nu, x = _check_bessel_args(nu, x)
    h = min(0.1, 0.5 / math.sqrt(x))
    # exponent of the scaled integrand: -2x sinh^2(t/2) + nu t
    total = 0.5
    k = 0
    while True:
        k += 1
        t = k * h
        s = math.sinh(0.5 * t)
        f = math.exp(-2.0 * x * s * s) * math.cosh(nu * t)
        total += f
        if f < 1e-18 * total and 2.0 * x * s * s > nu * t + 5.0:
            break
        if k > 100000:
            raise DomainError("bessel_k: quadrature did not terminate")
    val = h * total
    if scaled:
        return val
    return val * math.exp(-x)


def bessel_i_ratio(x: float) -> float:
    """I_0(x) / I_1(x) without overflow."""
    return bessel_i(0.0, x, scaled=True) / bessel_i(1.0, x, scaled=True)
