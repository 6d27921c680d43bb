"""Optimality certificates for a shared binary-pair distribution.

All checkers work on tables with exactly two binary characteristics, one
private and one nonprivate.  Three questions are answered:

* is the private mutual information at its floor of zero,
* is the nonprivate mutual information at its ceiling (the characteristic's
  entropy),
* is the table exchange-stationary, meaning no single constant-mode exchange
  can strictly lower the private index and strictly raise the nonprivate
  index at the same time.

Interval structure drives all three.  Per interval the checkers look at the
four fiber masses: the private characteristic's two value fibers and the
nonprivate characteristic's two value fibers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .distribution import (
    JointDistribution,
    binary_pair_roles,
    characteristic_marginal,
    fiber_matrix,
)
from .exchange import (
    CONSTANT,
    ExchangeMove,
    delta_domain,
    shift_value,
)
from .infotheory import entropy, mutual_information

#: Mass below this counts as an empty cell or fiber.
ZERO_TOL = 1e-12
#: Relative tolerance for ratio and cross-product equalities.
RATIO_TOL = 1e-9

LABEL_EMPTY = "empty"
LABEL_ONLY_FIRST = "only_first"
LABEL_ONLY_SECOND = "only_second"
LABEL_MIXED = "mixed"


def xlogx_merge_gap(x: float, y: float) -> float:
    """x log x + y log y - (x+y) log(x+y), in bits.

    Strictly negative whenever x, y and x + y all lie in (0, 1): pooling two
    positive masses always raises the entropy sum.
    """
    def f(t: float) -> float:
        return t * math.log2(t) if t > 0.0 else 0.0

    return f(x) + f(y) - f(x + y)


def xlogx_transfer_gap(x: float, y: float, z: float) -> float:
    """x log x + y log y - (x+z) log(x+z) - (y-z) log(y-z), in bits.

    For 0 <= z <= y the gap is nonnegative exactly when x + z <= y: moving
    mass z from the larger pile onto the smaller one never lowers the
    entropy sum until the piles cross.
    """
    if z < 0 or z > y:
        raise ValueError("transfer amount must lie in [0, y]")

    def f(t: float) -> float:
        return t * math.log2(t) if t > 0.0 else 0.0

    return f(x) + f(y) - f(x + z) - f(y - z)


@dataclass(frozen=True)
class IntervalClassification:
    """Structural tags per interval of a binary-pair table.

    ``labels`` describe the nonprivate fibers: no mass at all, mass only in
    the first value's fiber, only in the second's, or both.  A pair of mixed
    intervals is *balanced* when their private fiber masses are proportional
    (the cross products agree), which is what blocks private-side exchanges
    between them.  ``ratio_matched`` flags intervals whose private fiber
    split matches the population prior, the per-interval condition for a
    zero private index.
    """

    labels: tuple[str, ...]
    balanced_pairs: tuple[tuple[int, int], ...]
    ratio_matched: tuple[bool, ...]

    def to_json_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "balanced_pairs": [list(p) for p in self.balanced_pairs],
            "ratio_matched": list(self.ratio_matched),
        }


_binary_pair = binary_pair_roles


def _cross_equal(x: float, y: float) -> bool:
    scale = max(x, y)
    return abs(x - y) <= max(RATIO_TOL * scale, ZERO_TOL * ZERO_TOL)


def classify_intervals(dist: JointDistribution) -> IntervalClassification:
    u, v = _binary_pair(dist)
    priv = fiber_matrix(dist, u)
    nonpriv = fiber_matrix(dist, v)
    p1 = float(characteristic_marginal(dist, u)[0])

    labels = []
    for i in range(dist.interval_count):
        first, second = float(nonpriv[i, 0]), float(nonpriv[i, 1])
        if first <= ZERO_TOL and second <= ZERO_TOL:
            labels.append(LABEL_EMPTY)
        elif second <= ZERO_TOL:
            labels.append(LABEL_ONLY_FIRST)
        elif first <= ZERO_TOL:
            labels.append(LABEL_ONLY_SECOND)
        else:
            labels.append(LABEL_MIXED)

    mixed = [i for i, lab in enumerate(labels) if lab == LABEL_MIXED]
    balanced = []
    for i, j in itertools.combinations(mixed, 2):
        lhs = float(priv[i, 1]) * float(priv[j, 0])
        rhs = float(priv[j, 1]) * float(priv[i, 0])
        if _cross_equal(lhs, rhs):
            balanced.append((i, j))

    ratio_matched = []
    for i in range(dist.interval_count):
        lhs = (1.0 - p1) * float(priv[i, 0])
        rhs = p1 * float(priv[i, 1])
        ratio_matched.append(_cross_equal(lhs, rhs))

    return IntervalClassification(tuple(labels), tuple(balanced), tuple(ratio_matched))


def private_mi_is_minimal(dist: JointDistribution) -> bool:
    """True iff every interval is empty or splits its private fibers like
    the population prior, which forces I(data; private) to zero.
    """
    u, _ = _binary_pair(dist)
    p1 = float(characteristic_marginal(dist, u)[0])
    if p1 <= ZERO_TOL or p1 >= 1.0 - ZERO_TOL:
        raise ValueError("private characteristic is degenerate (single value)")
    priv = fiber_matrix(dist, u)
    cls = classify_intervals(dist)
    ok = True
    for i in range(dist.interval_count):
        total = float(priv[i].sum())
        if total <= ZERO_TOL:
            continue
        if not cls.ratio_matched[i]:
            ok = False
            break
    if ok:
        mi = mutual_information(dist, u)
        if mi > 1e-9:
            raise RuntimeError(
                f"ratio condition holds but the private index is {mi!r}"
            )
    return ok


def nonprivate_mi_is_maximal(dist: JointDistribution) -> bool:
    """True iff every interval carries mass in at most one nonprivate fiber,
    which pins I(data; nonprivate) to the characteristic's entropy.
    """
    _, v = _binary_pair(dist)
    cls = classify_intervals(dist)
    ok = all(lab != LABEL_MIXED for lab in cls.labels)
    if ok:
        mi = mutual_information(dist, v)
        h = entropy(characteristic_marginal(dist, v))
        if abs(mi - h) > 1e-9:
            raise RuntimeError(
                f"purity condition holds but the nonprivate index is {mi!r}, "
                f"ceiling {h!r}"
            )
    return ok


def pareto_stationary(dist: JointDistribution) -> bool:
    """True when no single constant exchange can improve both indices at once.

    Sufficient structural conditions: every pair of mixed intervals is
    balanced, and every (one-sided, mixed) pair keeps the nonprivate side
    from improving, expressed through the fiber-mass inequalities below.
    Empty and one-sided pairs need no condition.
    """
    u, v = _binary_pair(dist)
    priv = fiber_matrix(dist, u)
    nonpriv = fiber_matrix(dist, v)
    cls = classify_intervals(dist)

    mixed = [i for i, lab in enumerate(cls.labels) if lab == LABEL_MIXED]
    balanced = set(cls.balanced_pairs)
    for pair in itertools.combinations(mixed, 2):
        if pair not in balanced:
            return False

    for t, lab in enumerate(cls.labels):
        if lab not in (LABEL_ONLY_FIRST, LABEL_ONLY_SECOND):
            continue
        for w in mixed:
            ac_w, bd_w = float(nonpriv[w, 0]), float(nonpriv[w, 1])
            if lab == LABEL_ONLY_FIRST:
                ac_t = float(nonpriv[t, 0])
                if abs(ac_t - bd_w) - ac_w < -RATIO_TOL:
                    return False
            else:
                bd_t = float(nonpriv[t, 1])
                if abs(bd_t - ac_w) - bd_w < -RATIO_TOL:
                    return False
    return True


def _cell_pairs(dist: JointDistribution) -> list[tuple[int, int]]:
    k = dist.combination_count
    return [(r, s) for r in range(k) for s in range(r + 1, k)]


def pareto_witness_scan(
    dist: JointDistribution,
    tol: float = 1e-9,
    coarse_step: float = 1e-3,
    fine_step: float = 1e-6,
) -> ExchangeMove | None:
    """Search for one exchange that improves both indices simultaneously.

    Scans every interval pair and cell-pair exchange over a signed delta
    grid at ``coarse_step``, refining promising neighborhoods at
    ``fine_step``.  A witness must lower the private index below -tol and
    raise the nonprivate index above +tol.  Returns the first witness in
    lexicographic (j, k, r, s, delta) order, with delta set to the refined
    point of largest combined improvement, or None.
    """
    u, v = _binary_pair(dist)
    tab = dist.table
    priv = fiber_matrix(dist, u)
    nonpriv = fiber_matrix(dist, v)

    def shifts(j, k, r, s, deltas):
        out = []
        for fib, m in ((priv, u), (nonpriv, v)):
            vr, vs = tab.value_index(r, m), tab.value_index(s, m)
            if vr == vs:
                out.append(np.zeros(len(deltas)))
                continue
            p, q = float(fib[j, vr]), float(fib[j, vs])
            rr, ss = float(fib[k, vr]), float(fib[k, vs])
            out.append(np.array([
                -shift_value(p, q, rr, ss, d) for d in deltas
            ]))
        return out  # [delta I private, delta I nonprivate]

    n = dist.interval_count
    for j in range(n):
        for k in range(j + 1, n):
            for r, s in _cell_pairs(dist):
                probe = ExchangeMove(CONSTANT, j, k, r, s, 0.0)
                lo, hi = delta_domain(dist, probe)
                if hi - lo <= 0.0:
                    continue
                count = max(int(math.ceil((hi - lo) / coarse_step)), 2)
                grid = np.linspace(lo, hi, count + 1)
                di_u, di_v = shifts(j, k, r, s, grid)
                hit = (di_u < -tol) & (di_v > tol)
                if not np.any(hit):
                    continue
                d0 = float(grid[np.argmax(hit)])
                flo = max(lo, d0 - coarse_step)
                fhi = min(hi, d0 + coarse_step)
                fcount = max(int(math.ceil((fhi - flo) / fine_step)), 2)
                fgrid = np.linspace(flo, fhi, min(fcount, 4001) + 1)
                fu, fv = shifts(j, k, r, s, fgrid)
                fhit = (fu < -tol) & (fv > tol)
                if np.any(fhit):
                    score = np.where(fhit, -fu + fv, -np.inf)
                    best = int(np.argmax(score))
                    return ExchangeMove(CONSTANT, j, k, r, s, float(fgrid[best]))
                return ExchangeMove(CONSTANT, j, k, r, s, d0)
    return None


def improving_move_scan(
    dist: JointDistribution, which: str, tol: float = 1e-9
) -> ExchangeMove | None:
    """Find one constant exchange strictly improving a single index.

    ``which="private"`` looks for a move lowering I(data; private) by more
    than tol; ``which="nonprivate"`` for one raising I(data; nonprivate).
    Candidate deltas are exact: the interior maximizer for entropy gains,
    the domain endpoints for entropy losses.  First hit in lexicographic
    order wins.
    """
    u, v = _binary_pair(dist)
    m = u if which == "private" else v
    if which not in ("private", "nonprivate"):
        raise ValueError("which must be 'private' or 'nonprivate'")
    fib = fiber_matrix(dist, m)
    tab = dist.table
    n = dist.interval_count
    for j in range(n):
        for k in range(j + 1, n):
            for r, s in _cell_pairs(dist):
                vr, vs = tab.value_index(r, m), tab.value_index(s, m)
                if vr == vs:
                    continue
                probe = ExchangeMove(CONSTANT, j, k, r, s, 0.0)
                lo, hi = delta_domain(dist, probe)
                if hi - lo <= 0.0:
                    continue
                p, q = float(fib[j, vr]), float(fib[j, vs])
                rr, ss = float(fib[k, vr]), float(fib[k, vs])
                if which == "private":
                    # raise the private conditional entropy: interior max
                    total = p + q + rr + ss
                    if total <= 0.0:
                        continue
                    star = (q * rr - p * ss) / total
                    d = min(max(star, lo), hi)
                    if shift_value(p, q, rr, ss, d) > tol:
                        return ExchangeMove(CONSTANT, j, k, r, s, d)
                else:
                    # lower the nonprivate conditional entropy: endpoints
                    for d in (lo, hi):
                        if d != 0.0 and shift_value(p, q, rr, ss, d) < -tol:
                            return ExchangeMove(CONSTANT, j, k, r, s, d)
    return None


def checker_report(dist: JointDistribution) -> dict:
    """All three certificates plus the classification and any witness."""
    cls = classify_intervals(dist)
    witness = pareto_witness_scan(dist)
    return {
        "private_mi_minimal": private_mi_is_minimal(dist),
        "nonprivate_mi_maximal": nonprivate_mi_is_maximal(dist),
        "pareto_stationary": pareto_stationary(dist),
        "classification": cls.to_json_dict(),
        "witness": witness.to_json_dict() if witness is not None else None,
    }
