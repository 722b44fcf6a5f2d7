"""Comparison machinery between the general spin model and a rescaled
two-state model.

The entry condition on the spin law compares two closed-interval masses,
chi([a sqrt(2), inf)) >= chi([0, a]); for continuous symmetric laws the left
side strictly decreases in a and the right side grows, so the feasible set is
an interval and its supremum is located by bisection. For atomic laws the
supremum sits on one of finitely many candidate points (atom positions and
atoms divided by sqrt(2)) and is found exactly.

The one-site integrals and the finite-volume expectation inequality are
evaluated against the exact oracles (atom sums, Gauss-Legendre quadrature,
full enumeration).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geomgraph import GilbertGraph
from .spinsystem import (
    ConvergenceError,
    InteractionProfile,
    SingleSpinMeasure,
    _density_norm,
    exact_enumeration_ising,
    gauss_nodes,
    quadrature_marginals,
)

__all__ = [
    "WellsCertificate",
    "FindAResult",
    "wells_condition_holds",
    "find_a",
    "one_site_integral",
    "odd_odd_decomposition",
    "verify_one_site_positivity",
    "finite_volume_wells_check",
    "write_certificate_json",
]

SQRT2 = math.sqrt(2.0)


def wells_condition_holds(measure: SingleSpinMeasure, a: float, tol: float = 1e-9) -> bool:
    """Whether the upper-tail mass from a sqrt(2) covers the [0, a] mass.

    Closed intervals exactly as stated; atoms sitting on an endpoint count
    inside. ``tol`` is slack on the comparison.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    lhs = measure.interval_mass(a * SQRT2, math.inf)
    rhs = measure.interval_mass(0.0, a)
    return lhs >= rhs - tol


@dataclass(frozen=True)
class FindAResult:
    a: float
    attained: bool

    @property
    def usable(self) -> float:
        """Value safe to plug into downstream runs (backed off when the
        supremum itself is infeasible)."""
        return self.a if self.attained else self.a * (1.0 - 1e-6)


def _atomic_candidates(measure: SingleSpinMeasure) -> list[float]:
    atoms = [1.0] if measure.variant == "ising" else []
    cands = set()
    for p in atoms:
        cands.add(p)
        cands.add(p / SQRT2)
    return sorted(cands)


def find_a(measure: SingleSpinMeasure, tol: float = 1e-10) -> FindAResult:
    """Supremum of the feasible set of the entry condition.

    Continuous laws: bisection on the (monotone) mass difference. Atomic
    laws: the flip can only happen at a candidate point, which is returned
    exactly together with whether the condition still holds there.
    """

    def holds(a: float) -> bool:
        return wells_condition_holds(measure, a, tol=0.0)

    lo = 1e-12
    hi = measure.support_halfwidth() * 2.0
    if not holds(lo):
        raise ValueError("feasible set is empty: condition fails for arbitrarily small a")
    if holds(hi):
        raise ValueError("condition still holds at the support edge; no finite supremum bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
    if not measure.is_continuous:
        for cand in _atomic_candidates(measure):
            if lo - 10 * tol <= cand <= hi + 10 * tol:
                return FindAResult(a=cand, attained=holds(cand))
    return FindAResult(a=lo, attained=True)


def _quad_integral(measure: SingleSpinMeasure, fn, lo: float, hi: float, tol: float) -> float:
    """Normalized integral of fn against the spin law over [lo, hi], by
    Gauss-Legendre node doubling."""
    T = measure.support_halfwidth()
    hi = min(hi, T)
    lo = max(lo, -T)
    if hi <= lo:
        return 0.0
    norm = _density_norm(measure) if measure.variant == "density" else 2.0 * measure.b

    def at(nn: int) -> float:
        x, w = gauss_nodes(nn)
        mid, half = (hi + lo) / 2.0, (hi - lo) / 2.0
        t = mid + half * x
        rho = np.exp(measure.log_density(t))
        return float(np.sum(w * half * fn(t) * rho)) / norm

    nn = 32
    prev = at(nn)
    while nn < 8192:
        nn *= 2
        cur = at(nn)
        if abs(cur - prev) <= tol:
            return cur
        prev = cur
    raise ConvergenceError("one-site quadrature did not converge")


def one_site_integral(
    measure: SingleSpinMeasure, a: float, m: int, n: int, tol: float = 1e-10
) -> float:
    """Symmetrized integral of (s+a)^m (s-a)^n + (s-a)^m (s+a)^n against chi."""
    if m < 0 or n < 0:
        raise ValueError("exponents must be nonnegative")

    def fn(t):
        return (t + a) ** m * (t - a) ** n + (t - a) ** m * (t + a) ** n

    if measure.variant == "ising":
        return 0.5 * fn(1.0) + 0.5 * fn(-1.0)
    return _quad_integral(measure, fn, -math.inf, math.inf, tol)


def odd_odd_decomposition(
    measure: SingleSpinMeasure, a: float, k: int, l: int, tol: float = 1e-10
):
    """(I1, I2, I3): the odd-odd one-site integral split at a and a sqrt(2).

    Each piece integrates (s^2 - a^2)^(2l+1) [(s+a)^(2(k-l)) + (s-a)^(2(k-l))]
    over [0, a], (a, a sqrt(2)], (a sqrt(2), inf) respectively; twice their sum
    reproduces one_site_integral(2k+1, 2l+1) for laws with no mass at 0.
    """
    if k < l:
        k, l = l, k
    p = 2 * (k - l)

    def fn(t):
        core = (t * t - a * a) ** (2 * l + 1)
        return core * ((t + a) ** p + (t - a) ** p)

    if measure.variant == "ising":
        pieces = [0.0, 0.0, 0.0]
        for atom, mass in ((1.0, 0.5),):
            if 0.0 <= atom <= a:
                pieces[0] += mass * fn(atom)
            elif a < atom <= a * SQRT2:
                pieces[1] += mass * fn(atom)
            elif atom > a * SQRT2:
                pieces[2] += mass * fn(atom)
        return tuple(pieces)
    i1 = _quad_integral(measure, fn, 0.0, a, tol)
    i2 = _quad_integral(measure, fn, a, a * SQRT2, tol)
    i3 = _quad_integral(measure, fn, a * SQRT2, math.inf, tol)
    return (i1, i2, i3)


@dataclass
class WellsCertificate:
    """Outcome of scanning the one-site integrals up to a maximum exponent."""

    measure: SingleSpinMeasure
    a: float
    max_exponent: int
    min_integral: float
    all_nonnegative: bool
    failures: list[tuple[int, int, float]] = field(default_factory=list)
    decomposition_failures: list[tuple[int, int, float, float]] = field(default_factory=list)
    condition_holds: bool = True


def verify_one_site_positivity(
    measure: SingleSpinMeasure, a: float, M: int, tol: float = 1e-9
) -> WellsCertificate:
    """Evaluate every one-site integral with exponents up to M.

    Also splits each odd-odd case into its three pieces and checks the middle
    piece and the outer pair against -tol (those are the bounds that feed off
    the entry condition). Violations are recorded, never raised.
    """
    cond = wells_condition_holds(measure, a, tol=tol)
    min_val = math.inf
    failures = []
    dec_failures = []
    for m in range(M + 1):
        for n in range(m + 1):  # integrand symmetric in (m, n)
            val = one_site_integral(measure, a, m, n, tol=tol / 10)
            if val < min_val:
                min_val = val
            if val < -tol:
                failures.append((m, n, val))
            if m % 2 == 1 and n % 2 == 1:
                k, l = (m - 1) // 2, (n - 1) // 2
                i1, i2, i3 = odd_odd_decomposition(measure, a, k, l, tol=tol / 10)
                if i2 < -tol or (cond and i1 + i3 < -tol):
                    dec_failures.append((m, n, i2, i1 + i3))
    return WellsCertificate(
        measure=measure,
        a=float(a),
        max_exponent=int(M),
        min_integral=float(min_val),
        all_nonnegative=not failures,
        failures=failures,
        decomposition_failures=dec_failures,
        condition_holds=cond,
    )


def finite_volume_wells_check(
    graph: GilbertGraph,
    interior: np.ndarray,
    measure: SingleSpinMeasure,
    profile: InteractionProfile,
    a: float,
    beta: float,
    tol: float = 1e-8,
):
    """Per-site comparison of the general model against the rescaled two-state
    model on a small interior.

    Left side: expectations with spin law chi and boundary value +a. Right
    side: a times the expectations of the two-state model with couplings
    scaled by a^2 and boundary +1. Returns (lhs, rhs, holds) with
    holds = all(lhs >= rhs - tol).
    """
    if measure.is_continuous:
        lhs = quadrature_marginals(graph, interior, measure, profile, beta, a, tol=tol / 10)
    else:
        lhs = exact_enumeration_ising(graph, interior, profile, beta, a).means
    ising_side = exact_enumeration_ising(graph, interior, profile.scaled(a * a), beta, 1.0)
    rhs = a * ising_side.means
    holds = bool(np.all(lhs >= rhs - tol))
    return lhs, rhs, holds


def write_certificate_json(path, cert: WellsCertificate) -> None:
    payload = {
        "measure": cert.measure.label(),
        "a": cert.a,
        "M": cert.max_exponent,
        "min_integral": cert.min_integral,
        "all_nonnegative": cert.all_nonnegative,
        "failures": [[m, n, v] for (m, n, v) in cert.failures],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
