"""Explicit constants for the Lieb-Thirring inequality C_{d,alpha,K}.

The pipeline runs in floats by default.  With exact=True every quantity is
a sympy expression, so that e.g. d=1, alpha=1, K=pi^2, epsilon=1/2 gives an
exact rational.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ConfigurationError, DomainError

_EXACT_CACHE = {}


def _sympy():
    if "sympy" not in _EXACT_CACHE:
        import sympy

        _EXACT_CACHE["sympy"] = sympy
    return _EXACT_CACHE["sympy"]


class _FloatOps:
    exact = False
    pi = math.pi

    @staticmethod
    def num(x):
        return float(x)

    @staticmethod
    def sqrt(x):
        return math.sqrt(x)

    @staticmethod
    def gamma(x):
        return math.gamma(x)


class _ExactOps:
    exact = True

    def __init__(self):
        sp = _sympy()
        self.sp = sp
        self.pi = sp.pi

    def num(self, x):
        sp = self.sp
        if isinstance(x, float):
            return sp.Rational(str(x))
        if isinstance(x, Fraction):
            return sp.Rational(x.numerator, x.denominator)
        return sp.sympify(x)

    def sqrt(self, x):
        return self.sp.sqrt(x)

    def gamma(self, x):
        return self.sp.gamma(x)


def _ops(exact):
    return _ExactOps() if exact else _FloatOps


@dataclass
class UncertaintyConstants:
    d: int
    alpha: float
    S1: object
    S2: object
    source: str
    epsilon: object = None
    note: str = ""


def poincare_prefactor(d, ops=_FloatOps):
    """C'_d = (pi^2/4) d^{2-2/d} / ((d+2)(d+4))."""
    d_ = ops.num(d)
    return ops.pi**2 / 4 * d_ ** (2 - ops.num(2) / d_) / ((d_ + 2) * (d_ + 4))


def sobolev_cube_constant(d, ops=_FloatOps):
    """Lower bound for the inverse-square Poincare-Sobolev constant of the unit cube, d >= 3."""
    if d < 3:
        raise DomainError("the Sobolev cube constant is defined for d >= 3")
    d_ = ops.num(d)
    sphere = 2 * ops.pi ** (d_ / 2) / ops.gamma(d_ / 2)
    p = (d_ - 1) / d_
    bracket = (2 * (d_ - 1) / d_) ** p + (2 * (d_ - 1) / (d_ - 2)) ** p
    return 16 * d_**2 / (d_**d_ * (d_ + 2) ** 2) * (d_ / sphere) ** (2 * p) / bracket**2


def gns_square_constant(alpha, ops=_FloatOps):
    """Lower bound for S1 in two dimensions: pi/(96 sqrt2) (3 sqrt2 (4+alpha))^{-(4+alpha)/alpha}."""
    a = ops.num(alpha)
    return ops.pi / (96 * ops.sqrt(2)) * (3 * ops.sqrt(2) * (4 + a)) ** (-(4 + a) / a)


def uncertainty_constants(d: int, alpha, epsilon=Fraction(1, 2), sobolev=None,
                          exact: bool = False) -> UncertaintyConstants:
    """(S1, S2) for the local uncertainty principle.

    alpha <= 2: Poincare branch with free epsilon in (0,1).
    alpha > 2: d >= 3 uses S1 = S_d/2, S2 = S_d (alpha <= 2d/(d-2));
    d = 2 uses the Gagliardo-Nirenberg bound with S2 = 1;
    d = 1 uses S1 = 1/8, S2 = 1/4, from sup rho <= M/l + 2 sqrt(M T) on an
    interval of length l, valid for every alpha.
    `sobolev` overrides the value of S_d.
    """
    if d not in (1, 2, 3):
        raise DomainError(f"d must be 1, 2 or 3, got {d}")
    if not float(alpha) > 0:
        raise DomainError("alpha must be positive")
    ops = _ops(exact)
    a = ops.num(alpha)
    if float(alpha) <= 2:
        eps = ops.num(epsilon)
        if not 0 < float(eps) < 1:
            raise DomainError("epsilon must lie in (0, 1)")
        Cp = poincare_prefactor(d, ops)
        q = 1 + ops.num(4) / d
        S1 = Cp * eps**q
        S2 = Cp * (1 + (eps / (1 - eps)) ** q)
        return UncertaintyConstants(d, alpha, S1, S2, "poincare_small_alpha", eps)
    if d >= 3:
        if float(alpha) > 2 * d / (d - 2):
            raise DomainError(f"alpha must be <= 2d/(d-2) = {2 * d / (d - 2)} in d={d}")
        Sd = sobolev_cube_constant(d, ops) if sobolev is None else ops.num(sobolev)
        src = "formula" if sobolev is None else "override"
        return UncertaintyConstants(d, alpha, Sd / 2, Sd, "sobolev_d_ge_3", note=f"S_d {src}")
    if d == 2:
        return UncertaintyConstants(d, alpha, gns_square_constant(a, ops), ops.num(1), "gns_2d")
    return UncertaintyConstants(d, alpha, ops.num(Fraction(1, 8)), ops.num(Fraction(1, 4)), "gns_1d",
                                note="S1, S2 from sup-norm interpolation on an interval")


@dataclass
class ConstantReport:
    d: int
    alpha: object
    K: object
    branch: str
    S1: object
    S2: object
    Lambda: object
    constants: dict
    candidates: dict
    C: object
    binding: str
    exact: bool = False
    source: str = ""
    notes: list = field(default_factory=list)

    @property
    def C_float(self) -> float:
        return float(self.C)

    def as_dict(self) -> dict:
        def conv(v):
            return float(v)
        out = {
            "d": self.d,
            "alpha": float(self.alpha),
            "K": float(self.K),
            "branch": self.branch,
            "S1": conv(self.S1),
            "S2": conv(self.S2),
            "Lambda": conv(self.Lambda),
            "constants": {k: conv(v) for k, v in self.constants.items()},
            "candidates": {k: conv(v) for k, v in self.candidates.items()},
            "C": conv(self.C),
            "binding": self.binding,
            "uncertainty_source": self.source,
        }
        if self.exact:
            out["C_exact"] = str(self.C)
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def constant_pipeline(d: int, alpha, K, uc: UncertaintyConstants | None = None,
                      exact: bool = False, epsilon=Fraction(1, 2)) -> ConstantReport:
    """All intermediate constants and C_{d,alpha,K} = min of the branch candidates."""
    if uc is None:
        uc = uncertainty_constants(d, alpha, epsilon, exact=exact)
    if uc.d != d or float(uc.alpha) != float(alpha):
        raise ConfigurationError("uncertainty constants were computed for a different (d, alpha)")
    ops = _ops(exact)
    if not float(K) > 0:
        raise DomainError("K must be positive")
    a = ops.num(alpha)
    K_ = ops.num(K)
    S1, S2 = ops.num(uc.S1), ops.num(uc.S2)
    two = ops.num(2)
    c0 = S1 / (two ** (two / d) * K_)
    if float(alpha) <= 2:
        Lam = 2 * S2 / S1
        c1 = two ** (-3 - two / d) * S1 / K_
        c2 = two ** (-1 - (d + 1) * (1 + two / d)) * (2 ** (d + 1) - 1) / (1 + Lam)
        c3 = two ** (1 + two / d) * (2**d - 1) * (1 + Lam) / (1 - two ** (-a))
        consts = {"c0": c0, "c1": c1, "c2": c2, "c3": c3}
        cands = {"c0": c0, "c1/2": c1 / 2, "c2/2": c2 / 2, "1/(4c3)": 1 / (4 * c3)}
        branch = "alpha<=2"
    else:
        Lam = (2 * S2 / S1) ** (a / 2)
        c4 = two ** (-3 - two / d) * S1 / K_
        c5 = two ** (-(2 + a + d + two / d)) * (2 ** (d + 1) - 1) / (1 + Lam)
        c6 = two ** (1 + two / d) * (2**d - 1) * (1 + Lam) / (1 - two ** (-2))
        consts = {"c0": c0, "c4": c4, "c5": c5, "c6": c6}
        cands = {"c0": c0, "c4/2": c4 / 2, "c5/2": c5 / 2, "1/(4c6)": 1 / (4 * c6)}
        branch = "alpha>2"
    if exact:
        sp = ops.sp
        consts = {k: sp.simplify(v) for k, v in consts.items()}
        cands = {k: sp.simplify(v) for k, v in cands.items()}
        Lam = sp.simplify(Lam)
    binding = min(cands, key=lambda k: float(cands[k]))
    notes = [uc.note] if uc.note else []
    return ConstantReport(d, alpha, K, branch, uc.S1, uc.S2, Lam, consts, cands, cands[binding],
                          binding, exact, uc.source, notes)


@dataclass
class GeometricSumReport:
    k: int
    total: float
    limit: float
    terms: list
    passed: bool


def geometric_sum_check(bound, k: int, vol_B: float, tol: float = 1e-12) -> GeometricSumReport:
    """Sum over the k nested ancestors Q_j (|Q_j| = 2^{d(k-j)}|Q_B|) of
    |Q_j|^{-2/d} e_K(gamma(|Q_j|)) relative to the same quantity on Q_B,
    compared with 1/(1 - 2^{-min(alpha, 2)})."""
    if k < 1:
        raise DomainError("k must be >= 1")
    if not vol_B > 0:
        raise DomainError("vol_B must be positive")
    d = bound.d
    base = vol_B ** (-2.0 / d) * float(bound(bound.gamma_of_volume(vol_B)))
    if not base > 0:
        raise DomainError("e vanishes on Q_B; the ratio is undefined")
    terms = []
    for j in range(1, k + 1):
        vol = 2.0 ** (d * (k - j)) * vol_B
        terms.append(vol ** (-2.0 / d) * float(bound(bound.gamma_of_volume(vol))) / base)
    limit = 1.0 / (1.0 - 2.0 ** (-min(bound.alpha, 2.0)))
    total = math.fsum(terms)
    return GeometricSumReport(k, total, limit, terms, total <= limit * (1 + tol))
