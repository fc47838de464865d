"""Exclusion bounds e(gamma) for the supported interaction families.

A bound is the data (alpha, tau, e, K): on a cube Q the two-particle energy
times |Q|^{2/d} is at least e_K(gamma(|Q|)) = min(e, K)(tau |Q|^{(2-alpha)/d}).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import scatter
from .errors import ConfigurationError, DomainError
from .specfun import bessel_i_ratio, ll_energy, ll_energy_derivative

PI2 = math.pi**2
SQRT2 = math.sqrt(2.0)
# (1 - tanh 1)/sqrt 3 and I0(1)/I1(1)
ZETA_3D = (1.0 - math.tanh(1.0)) / math.sqrt(3.0)
ZETA_2D = bessel_i_ratio(1.0)

FAMILIES = ("ll", "inv-square", "hom-elementary", "hard-sphere", "hom-3d-scatt", "hard-disk", "hom-2d-scatt")


@dataclass(frozen=True)
class ExclusionBound:
    """Concave monotone lower bound for the scaled two-particle energy.

    `energy` and `slope` evaluate the uncapped e and e'; calling the bound
    applies the cap K.
    """

    family: str
    d: int
    alpha: float
    tau: float
    energy: Callable
    slope: Callable
    K: float = math.inf
    params: dict = field(default_factory=dict)

    def __call__(self, gamma):
        return np.minimum(self.energy(gamma), self.K)

    def derivative(self, gamma):
        """Derivative of the capped function (zero where the cap binds)."""
        g = np.asarray(gamma, dtype=float)
        e = np.asarray(self.energy(g))
        de = np.asarray(self.slope(g))
        out = np.where(e < self.K, de, 0.0)
        return float(out) if out.ndim == 0 else out

    def gamma_of_volume(self, vol):
        return gamma_of_volume(self, vol)


def gamma_of_volume(bound: ExclusionBound, vol):
    """tau * vol^{(2-alpha)/d}; vol may be an array."""
    v = np.asarray(vol, dtype=float)
    if np.any(~(v > 0)):
        raise DomainError("volume must be positive")
    p = (2.0 - bound.alpha) / bound.d
    out = bound.tau * v**p
    return float(out) if out.ndim == 0 else out


def cap(bound: ExclusionBound, K: float) -> ExclusionBound:
    if not K > 0:
        raise DomainError("cap K must be positive")
    return replace(bound, K=min(bound.K, K))


def _as_array(g):
    g = np.asarray(g, dtype=float)
    if np.any(g < 0) or np.any(np.isnan(g)):
        raise DomainError("gamma must be >= 0")
    return g


def _ret(x):
    return float(x) if np.ndim(x) == 0 else x


def _linear(coef):
    def e(g):
        return _ret(coef * _as_array(g))

    def de(g):
        return _ret(np.full_like(_as_array(g), coef))
    return e, de


def _log_surrogate(shift, kink, numerator=1.0):
    """numerator / (shift + (-ln(gamma/kink))_+), with the branch at gamma = kink explicit."""

    def e(g):
        g = _as_array(g)
        with np.errstate(divide="ignore"):
            L = np.where(g < kink, -np.log(np.where(g > 0, g, 1.0) / kink), 0.0)
        L = np.where(g > 0, L, np.inf)
        return _ret(numerator / (shift + L))

    def de(g):
        g = _as_array(g)
        with np.errstate(divide="ignore", invalid="ignore"):
            L = -np.log(np.where(g > 0, g, 1.0) / kink)
            val = numerator / ((shift + L) ** 2 * np.where(g > 0, g, 1.0))
        # slope blows up logarithmically-slowly at 0; report +inf there
        return _ret(np.where(g >= kink, 0.0, np.where(g > 0, val, np.inf)))
    return e, de


def lieb_liniger_bound(eta: float) -> ExclusionBound:
    if not eta >= 0:
        raise DomainError("eta must be >= 0")
    return ExclusionBound("ll", 1, 1.0, float(eta), ll_energy, ll_energy_derivative, PI2,
                          {"e": "4 xi(gamma)^2", "gamma": "eta |Q|"})


def inverse_square_bound(d: int, W0: float, e0: float | None = None) -> ExclusionBound:
    """Inverse-square potential: gamma = W0 for every cube.

    e is taken linear, e(gamma) = e0 gamma / W0 capped at K = e0, so that
    e(tau) = e0 while e(0) = 0.  Default e0 = W0/d, the minimum of the
    potential over the unit cube (|x1 - x2|^2 <= d).
    """
    if not W0 > 0:
        raise DomainError("W0 must be positive")
    source = "pointwise potential minimum W0/d"
    if e0 is None:
        e0 = W0 / d
    else:
        source = "user supplied"
    if not e0 > 0:
        raise DomainError("e0 must be positive")
    e, de = _linear(e0 / W0)
    return ExclusionBound("inv-square", d, 2.0, float(W0), e, de, float(e0), {"e0": e0, "e0_source": source})


def hom_elementary_bound(d: int, W0: float, beta: float) -> ExclusionBound:
    if not (W0 > 0 and beta > 0):
        raise DomainError("need W0 > 0 and beta > 0")
    e, de = _linear(d ** (-0.5 * beta))
    return ExclusionBound("hom-elementary", d, float(beta), float(W0), e, de, PI2,
                          {"e": "d^{-beta/2} gamma"})


def hard_sphere_bound(a: float) -> ExclusionBound:
    if not a > 0:
        raise DomainError("hard-sphere radius must be positive")
    e, de = _linear(2.0 / math.sqrt(3.0))
    return ExclusionBound("hard-sphere", 3, 3.0, float(a), e, de, PI2, {"e": "(2/sqrt3) gamma"})


def hom_3d_scatt_bound(W0: float, beta: float) -> ExclusionBound:
    res = scatter.scatt_len_hom_3d(W0, beta)
    lam = res.diagnostics["Lambda"]
    e, de = _linear(ZETA_3D / lam)
    return ExclusionBound("hom-3d-scatt", 3, 3.0, res.a, e, de, PI2,
                          {"Lambda": lam, "zeta": ZETA_3D, "e": "zeta gamma / Lambda"})


def hard_disk_bound(a: float, c: float = 2.0) -> ExclusionBound:
    """c / (c + (-ln(gamma/sqrt2))_+), capped at 1.  Concave exactly when c >= 2."""
    if not a > 0:
        raise DomainError("hard-disk radius must be positive")
    if not c > 0:
        raise DomainError("c must be positive")
    e, de = _log_surrogate(c, SQRT2, numerator=c)
    return ExclusionBound("hard-disk", 2, 3.0, float(a), e, de, 1.0, {"c": c})


def hom_2d_scatt_bound(W0: float, beta: float) -> ExclusionBound:
    res = scatter.scatt_len_hom_2d(W0, beta)
    xi = res.diagnostics["Xi"]
    e, de = _log_surrogate(ZETA_2D, SQRT2 * xi)
    return ExclusionBound("hom-2d-scatt", 2, 3.0, res.a, e, de, 1.0, {"Xi": xi, "zeta2": ZETA_2D})


def default_family(spec: scatter.PotentialSpec) -> str:
    k, d = spec.kind, spec.d
    if k == "delta":
        return "ll"
    if k == "inverse-square":
        return "inv-square"
    if k == "hard-core":
        return {3: "hard-sphere", 2: "hard-disk"}.get(d) or _unsupported(spec, None)
    if k == "homogeneous":
        if d == 3 and spec.beta > 3:
            return "hom-3d-scatt"
        if d == 2 and spec.beta > 2:
            return "hom-2d-scatt"
        return "hom-elementary"
    return _unsupported(spec, None)


def _unsupported(spec, family):
    raise ConfigurationError(f"no exclusion bound for kind={spec.kind!r}, d={spec.d}, family={family!r}")


def make_bound(spec: scatter.PotentialSpec, family: str | None = None, **options) -> ExclusionBound:
    """Exclusion bound for a potential; `family` picks among the applicable ones."""
    fam = family or default_family(spec)
    if fam not in FAMILIES:
        raise ConfigurationError(f"unknown bound family {fam!r}; choose from {', '.join(FAMILIES)}")
    k, d = spec.kind, spec.d
    if fam == "ll" and k == "delta":
        return lieb_liniger_bound(spec.eta)
    if fam == "inv-square" and k == "inverse-square":
        return inverse_square_bound(d, spec.W0, options.get("e0"))
    if fam == "hom-elementary" and k in ("homogeneous", "inverse-square"):
        return hom_elementary_bound(d, spec.W0, spec.beta)
    if fam == "hard-sphere" and k == "hard-core" and d == 3:
        return hard_sphere_bound(spec.a)
    if fam == "hom-3d-scatt" and k == "homogeneous" and d == 3:
        return hom_3d_scatt_bound(spec.W0, spec.beta)
    if fam == "hard-disk" and k == "hard-core" and d == 2:
        return hard_disk_bound(spec.a, options.get("c", 2.0))
    if fam == "hom-2d-scatt" and k == "homogeneous" and d == 2:
        return hom_2d_scatt_bound(spec.W0, spec.beta)
    return _unsupported(spec, fam)


@dataclass
class ShapeReport:
    passed: bool
    zero_limit: float
    monotone: bool
    concave: bool
    violation: tuple | None = None
    kind: str | None = None


def check_concave_monotone(bound: ExclusionBound, grid, tol: float = 1e-9, capped: bool = True) -> ShapeReport:
    """Check e(0) = 0, monotonicity and midpoint concavity of e (or e_K) on a grid.

    Concavity is tested at the midpoint of every adjacent and every
    second-neighbour pair of grid points; the first failing triple is reported.
    """
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or len(g) < 2 or np.any(np.diff(g) <= 0) or g[0] < 0:
        raise DomainError("grid must be sorted, increasing and nonnegative")
    f = bound if capped else bound.energy
    vals = np.asarray(f(g), dtype=float)
    zero = float(np.asarray(f(0.0)))
    scale = max(1.0, float(np.max(np.abs(vals))))
    report = ShapeReport(True, zero, True, True)
    if abs(zero) > tol * scale:
        report.passed = False
        report.kind = "zero"
    drops = np.nonzero(np.diff(vals) < -tol * scale)[0]
    if len(drops):
        i = drops[0]
        report.passed = report.monotone = False
        report.violation = (g[i], g[i + 1])
        report.kind = report.kind or "monotone"
    for step in (1, 2):
        lo, hi = g[:-step], g[step:]
        mid = 0.5 * (lo + hi)
        fm = np.asarray(f(mid), dtype=float)
        bad = np.nonzero(fm < 0.5 * (vals[:-step] + vals[step:]) - tol * scale)[0]
        if len(bad) and report.concave:
            i = bad[0]
            report.passed = report.concave = False
            if report.violation is None:
                report.violation = (lo[i], mid[i], hi[i])
                report.kind = "concave"
    return report


def scaling_inequalities_hold(bound: ExclusionBound, gamma, eta, tol: float = 1e-12) -> bool:
    """e(eta g) <= eta e(g) for eta >= 1 and >= for eta <= 1 (capped e)."""
    lhs = float(bound(eta * gamma))
    rhs = eta * float(bound(gamma))
    slack = tol * max(1.0, abs(rhs))
    return lhs <= rhs + slack if eta >= 1 else lhs >= rhs - slack
