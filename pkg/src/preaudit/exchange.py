"""Probability exchange moves and their closed-form information effects.

A constant move shifts mass delta between two combination cells (or two
disjoint cell groups) inside interval j and shifts it back inside interval k,
preserving both the interval marginal and the combination marginal.  A
variable move shifts delta between intervals j and k inside a single
combination column, preserving only the combination marginal.

The conditional-entropy change of a move touching exactly two fibers of a
characteristic has a closed form in the four affected fiber masses; that form,
its derivative, its interior maximizer, and its concavity certificate are all
exposed here so optimizers never need to rebuild the table to evaluate a
candidate move.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .distribution import JointDistribution, fiber_matrix

CONSTANT = "constant"
VARIABLE = "variable"

#: Slack allowed when checking that delta lies inside its feasible domain.
DOMAIN_TOL = 1e-12

_LN2 = math.log(2.0)


def _xlx(x: float) -> float:
    # bits; rounding-level negatives count as zero mass
    return x * math.log2(x) if x > 0.0 else 0.0


def _xlx_base(x: float, base: float) -> float:
    return x * math.log(x) / math.log(base) if x > 0.0 else 0.0


def shift_value(first_j: float, second_j: float, first_k: float, second_k: float,
                delta: float, base: float = 2.0) -> float:
    """Conditional-entropy change when the first fiber gains delta at row j.

    The four arguments are the masses of the two affected fibers at rows j
    and k before the move; after it they read (first_j + delta,
    second_j - delta, first_k - delta, second_k + delta).
    """
    return (
        (_xlx_base(first_j, base) - _xlx_base(first_j + delta, base))
        + (_xlx_base(second_j, base) - _xlx_base(second_j - delta, base))
        + (_xlx_base(first_k, base) - _xlx_base(first_k - delta, base))
        + (_xlx_base(second_k, base) - _xlx_base(second_k + delta, base))
    )


def shift_derivative(first_j: float, second_j: float, first_k: float,
                     second_k: float, delta: float, base: float = 2.0) -> float:
    """d/d(delta) of ``shift_value``; defined only strictly inside the domain."""
    num = (second_j - delta) * (first_k - delta)
    den = (first_j + delta) * (second_k + delta)
    if num <= 0.0 or den <= 0.0:
        raise ValueError(
            f"derivative undefined at delta={delta!r}: a fiber mass vanishes"
        )
    return math.log(num / den) / math.log(base)


def shift_argmax(first_j: float, second_j: float, first_k: float,
                 second_k: float) -> float:
    """Interior maximizer of ``shift_value``, clamped to the feasible domain."""
    total = first_j + second_j + first_k + second_k
    if total <= 0.0:
        raise ValueError("both intervals carry zero mass")
    star = (second_j * first_k - first_j * second_k) / total
    lo = -min(first_j, second_k)
    hi = min(second_j, first_k)
    return min(max(star, lo), hi)


def shift_second_derivative(first_j: float, second_j: float, first_k: float,
                            second_k: float, delta: float,
                            base: float = 2.0) -> float:
    terms = (first_j + delta, second_j - delta, first_k - delta, second_k + delta)
    if any(t <= 0.0 for t in terms):
        raise ValueError(
            f"second derivative undefined at delta={delta!r}: a fiber mass vanishes"
        )
    return -sum(1.0 / t for t in terms) / math.log(base)


@dataclass(frozen=True)
class ExchangeMove:
    """One probability exchange.

    Constant mode: ``r`` and ``s`` are single combination cells (ints) or
    disjoint cell groups (tuples of ints).  Variable mode: only ``r`` is set.
    Indices are 0-based.
    """

    mode: str
    j: int
    k: int
    r: int | tuple[int, ...]
    s: int | tuple[int, ...] | None
    delta: float

    def __post_init__(self) -> None:
        if self.mode not in (CONSTANT, VARIABLE):
            raise ValueError(f"unknown move mode {self.mode!r}")
        if self.j == self.k:
            raise ValueError("a move needs two distinct intervals")
        if not math.isfinite(self.delta):
            raise ValueError("delta must be finite")
        if isinstance(self.r, Iterable) and not isinstance(self.r, (str, bytes)):
            object.__setattr__(self, "r", tuple(int(c) for c in self.r))
        if self.mode == VARIABLE:
            if self.s is not None:
                raise ValueError("variable moves use a single combination cell")
            if not isinstance(self.r, int):
                raise ValueError("variable moves do not take cell groups")
            return
        if self.s is None:
            raise ValueError("constant moves need both cell arguments")
        if isinstance(self.s, Iterable) and not isinstance(self.s, (str, bytes)):
            object.__setattr__(self, "s", tuple(int(c) for c in self.s))
        grouped_r = isinstance(self.r, tuple)
        grouped_s = isinstance(self.s, tuple)
        if grouped_r != grouped_s:
            raise ValueError("cell arguments must both be cells or both be groups")
        r_cells = self.r if grouped_r else (self.r,)
        s_cells = self.s if grouped_s else (self.s,)
        if not r_cells or not s_cells:
            raise ValueError("cell groups must be nonempty")
        if set(r_cells) & set(s_cells):
            raise ValueError("cell groups must be disjoint")

    @property
    def grouped(self) -> bool:
        return isinstance(self.r, tuple)

    def with_delta(self, delta: float) -> "ExchangeMove":
        return replace(self, delta=delta)

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "j": self.j,
            "k": self.k,
            "r": list(self.r) if isinstance(self.r, tuple) else self.r,
            "s": list(self.s) if isinstance(self.s, tuple) else self.s,
            "delta": self.delta,
        }


def move_from_json_dict(doc: dict) -> ExchangeMove:
    r = doc["r"]
    s = doc["s"]
    return ExchangeMove(
        mode=doc["mode"],
        j=int(doc["j"]),
        k=int(doc["k"]),
        r=tuple(r) if isinstance(r, list) else int(r),
        s=tuple(s) if isinstance(s, list) else (None if s is None else int(s)),
        delta=float(doc["delta"]),
    )


def _cell_masses(dist: JointDistribution, cells: int | tuple[int, ...],
                 row: int) -> float:
    if isinstance(cells, tuple):
        return float(dist.probs[row, list(cells)].sum())
    return float(dist.probs[row, cells])


def delta_domain(dist: JointDistribution, move: ExchangeMove) -> tuple[float, float]:
    """Feasible closed interval for the move's delta (nonnegativity of cells)."""
    _check_indices(dist, move)
    if move.mode == VARIABLE:
        return (-float(dist.probs[move.j, move.r]),
                float(dist.probs[move.k, move.r]))
    r_j = _cell_masses(dist, move.r, move.j)
    r_k = _cell_masses(dist, move.r, move.k)
    s_j = _cell_masses(dist, move.s, move.j)
    s_k = _cell_masses(dist, move.s, move.k)
    return (-min(r_j, s_k), min(s_j, r_k))


def _check_indices(dist: JointDistribution, move: ExchangeMove) -> None:
    n, k = dist.probs.shape
    for i in (move.j, move.k):
        if not 0 <= i < n:
            raise ValueError(f"interval index {i} out of range")
    cells = []
    cells += list(move.r) if isinstance(move.r, tuple) else [move.r]
    if move.s is not None:
        cells += list(move.s) if isinstance(move.s, tuple) else [move.s]
    for c in cells:
        if not 0 <= c < k:
            raise ValueError(f"combination index {c} out of range")


def apply_move(dist: JointDistribution, move: ExchangeMove) -> JointDistribution:
    """Apply the move, returning a fresh distribution.

    Rejects a delta outside the feasible domain, naming the bound it breaks.
    Grouped constant moves are realized per column in proportion to the mass
    the shrinking row holds there, which preserves the combination marginal
    exactly and makes the whole group domain reachable.
    """
    lo, hi = delta_domain(dist, move)
    d = move.delta
    if d < lo - DOMAIN_TOL:
        raise ValueError(f"delta {d!r} below the lower bound {lo!r}")
    if d > hi + DOMAIN_TOL:
        raise ValueError(f"delta {d!r} above the upper bound {hi!r}")
    probs = np.array(dist.probs, copy=True)
    j, k = move.j, move.k
    if move.mode == VARIABLE:
        probs[j, move.r] += d
        probs[k, move.r] -= d
    elif not move.grouped:
        probs[j, move.r] += d
        probs[j, move.s] -= d
        probs[k, move.s] += d
        probs[k, move.r] -= d
    elif d != 0.0:
        r_cells = list(move.r)
        s_cells = list(move.s)
        if d > 0:
            take_r, take_s = k, j
        else:
            take_r, take_s = j, k
        r_total = float(probs[take_r, r_cells].sum())
        s_total = float(probs[take_s, s_cells].sum())
        # the domain check guarantees the shrinking groups hold enough mass
        flow_r = probs[take_r, r_cells] * (abs(d) / r_total)
        flow_s = probs[take_s, s_cells] * (abs(d) / s_total)
        other_r = j if take_r == k else k
        other_s = j if take_s == k else k
        probs[take_r, r_cells] -= flow_r
        probs[other_r, r_cells] += flow_r
        probs[take_s, s_cells] -= flow_s
        probs[other_s, s_cells] += flow_s
    np.clip(probs, 0.0, None, out=probs)
    return dist.replace_probs(probs)


def _role_index(dist: JointDistribution, role: str) -> int:
    idx = dist.roles(role)
    if len(idx) != 1:
        raise ValueError(f"need exactly one {role} characteristic, found {len(idx)}")
    return idx[0]


def _binary_fibers(dist: JointDistribution, m: int,
                   j: int, k: int) -> tuple[float, float, float, float]:
    if dist.table.sizes[m] != 2:
        raise ValueError(
            f"characteristic {dist.characteristics[m].name!r} is not binary"
        )
    fib = fiber_matrix(dist, m)
    return float(fib[j, 0]), float(fib[j, 1]), float(fib[k, 0]), float(fib[k, 1])


def _which_index(dist: JointDistribution, which: str) -> int:
    if which not in ("private", "nonprivate"):
        raise ValueError("which must be 'private' or 'nonprivate'")
    return _role_index(dist, which)


def cond_entropy_shift(dist: JointDistribution, m: int, j: int, k: int,
                       delta: float, base: float = 2.0) -> float:
    """Change of H(data | characteristic m) for a grouped constant move.

    Orientation: the fiber of m's first value gains delta inside interval j
    and loses it inside interval k.
    """
    p, q, r, s = _binary_fibers(dist, m, j, k)
    return shift_value(p, q, r, s, delta, base)


def delta_h_private(dist: JointDistribution, j: int, k: int, delta: float,
                    base: float = 2.0) -> float:
    """Closed-form change of the private conditional entropy H(data | X_priv)."""
    return cond_entropy_shift(dist, _which_index(dist, "private"), j, k, delta, base)


def delta_h_nonprivate(dist: JointDistribution, j: int, k: int, delta: float,
                       base: float = 2.0) -> float:
    return cond_entropy_shift(dist, _which_index(dist, "nonprivate"), j, k, delta, base)


def delta_h_derivative(dist: JointDistribution, j: int, k: int, delta: float,
                       which: str, base: float = 2.0) -> float:
    p, q, r, s = _binary_fibers(dist, _which_index(dist, which), j, k)
    return shift_derivative(p, q, r, s, delta, base)


def optimal_delta(dist: JointDistribution, j: int, k: int, which: str) -> float:
    """Delta maximizing the grouped conditional-entropy shift, domain-clamped."""
    p, q, r, s = _binary_fibers(dist, _which_index(dist, which), j, k)
    return shift_argmax(p, q, r, s)


@dataclass(frozen=True)
class ConcavityEvidence:
    ok: bool
    points: tuple[float, ...]
    second_derivatives: tuple[float, ...]
    midpoint_gaps: tuple[float, ...]


def concavity_check(dist: JointDistribution, j: int, k: int, which: str,
                    samples: int = 9) -> ConcavityEvidence:
    """Sampled certificate that the entropy shift is strictly concave.

    Checks the closed-form second derivative at interior points and the
    midpoint inequality on consecutive sample pairs.  A degenerate
    single-point domain passes with empty evidence.
    """
    p, q, r, s = _binary_fibers(dist, _which_index(dist, which), j, k)
    lo, hi = -min(p, s), min(q, r)
    if hi - lo <= 0.0:
        return ConcavityEvidence(True, (), (), ())
    inner = np.linspace(lo, hi, samples + 2)[1:-1]
    second = tuple(shift_second_derivative(p, q, r, s, float(d)) for d in inner)
    gaps = []
    pts = [lo] + [float(d) for d in inner] + [hi]
    for a, b in zip(pts, pts[2:]):
        mid = 0.5 * (a + b)
        gap = shift_value(p, q, r, s, mid) - 0.5 * (
            shift_value(p, q, r, s, a) + shift_value(p, q, r, s, b)
        )
        gaps.append(gap)
    ok = all(x < 0.0 for x in second) and all(g >= -1e-12 for g in gaps)
    return ConcavityEvidence(ok, tuple(float(d) for d in inner), second, tuple(gaps))


def delta_i_variable(dist: JointDistribution, j: int, k: int, r: int,
                     delta: float, m: int | None = None,
                     base: float = 2.0) -> float | tuple[float, ...]:
    """MI change for a variable move: interval j gains delta in column r.

    With ``m`` given, returns the change of I(data; characteristic m);
    otherwise a tuple over all characteristics.  Equals the recomputed
    mutual_information(after) - mutual_information(before) up to rounding.
    """
    move = ExchangeMove(VARIABLE, j, k, r, None, delta)
    lo, hi = delta_domain(dist, move)
    if delta < lo - DOMAIN_TOL or delta > hi + DOMAIN_TOL:
        raise ValueError(f"delta {delta!r} outside the domain [{lo!r}, {hi!r}]")
    t_j = float(dist.probs[j].sum())
    t_k = float(dist.probs[k].sum())
    row_term = (
        (_xlx_base(t_j + delta, base) - _xlx_base(t_j, base))
        + (_xlx_base(t_k - delta, base) - _xlx_base(t_k, base))
    )
    tab = dist.table
    ms = range(len(dist.characteristics)) if m is None else (m,)
    out = []
    for mm in ms:
        fib = fiber_matrix(dist, mm)
        v = tab.value_index(r, mm)
        f_j = float(fib[j, v])
        f_k = float(fib[k, v])
        fiber_term = (
            (_xlx_base(f_j + delta, base) - _xlx_base(f_j, base))
            + (_xlx_base(f_k - delta, base) - _xlx_base(f_k, base))
        )
        out.append(fiber_term - row_term)
    if m is not None:
        return out[0]
    return tuple(out)


def constant_mi_shift(dist: JointDistribution, move: ExchangeMove, m: int,
                      base: float = 2.0) -> float:
    """MI change of characteristic m under a single-cell constant move."""
    if move.mode != CONSTANT or move.grouped:
        raise ValueError("needs a single-cell constant move")
    tab = dist.table
    vr = tab.value_index(move.r, m)
    vs = tab.value_index(move.s, m)
    if vr == vs:
        return 0.0
    fib = fiber_matrix(dist, m)
    shift = shift_value(
        float(fib[move.j, vr]), float(fib[move.j, vs]),
        float(fib[move.k, vr]), float(fib[move.k, vs]),
        move.delta, base,
    )
    # the interval marginal is fixed, so the MI change is minus the
    # conditional-entropy change
    return -shift


def move_record(move: ExchangeMove, mi_after: Sequence[float]) -> dict:
    doc = move.to_json_dict()
    doc["mi_after"] = [float(x) for x in mi_after]
    return doc


def write_move_log(path: str, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_move_log(path: str) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
