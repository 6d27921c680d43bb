"""Audit optimization: drive mutual-information indices under constraints.

The solver is a two-phase coordinate-exchange descent over probability
exchange moves.  Phase 1 restores any violated per-characteristic MI bound
(bounds on private characteristics first); phase 2 greedily minimizes the
weighted MI objective, with each move's delta chosen by a dense feasible
line search plus exact interior maximizers and bound-crossing points.
Everything is deterministic: candidate order is lexicographic in
(j, k, r, s) and equal scores resolve to the earliest candidate.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .distribution import (
    JointDistribution,
    binary_pair_roles,
    characteristic_marginal,
    fiber_matrix,
    interval_marginal,
)
from .exchange import (
    CONSTANT,
    VARIABLE,
    ExchangeMove,
    apply_move,
    delta_domain,
    move_record,
    shift_argmax,
    shift_value,
)
from .infotheory import entropy, mutual_information

STATUS_CONVERGED = "converged"
STATUS_ITERATION_LIMIT = "iteration-limit"
STATUS_INFEASIBLE = "infeasible-bounds"

#: How far a bound may be overshot by rounding before it counts as violated.
BOUND_SLACK = 1e-9

CONFIG_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class AuditConfig:
    """What the audit should achieve.

    ``weights`` maps characteristic names to objective coefficients; the
    solver minimizes sum(weight * MI).  ``upper_bounds`` and
    ``lower_bounds`` cap or floor individual MI values in bits, regardless
    of role, so both a privacy ceiling and a privacy floor sweep are
    expressible.  ``privacy_margin`` and ``utility_margin``, when set, add
    bounds relative to the unadjusted table: each private MI must drop by
    at least the privacy margin, each nonprivate MI must rise by at least
    the utility margin.
    """

    mode: str = CONSTANT
    weights: dict[str, float] = field(default_factory=dict)
    upper_bounds: dict[str, float] = field(default_factory=dict)
    lower_bounds: dict[str, float] = field(default_factory=dict)
    privacy_margin: float | None = None
    utility_margin: float | None = None
    stop_tol: float = 1e-9
    max_iters: int = 1_000_000

    def __post_init__(self) -> None:
        if self.mode not in (CONSTANT, VARIABLE):
            raise ValueError(f"unknown mode {self.mode!r}")
        for label, bounds in (("upper", self.upper_bounds),
                              ("lower", self.lower_bounds)):
            for name, b in bounds.items():
                if not math.isfinite(b) or b < 0:
                    raise ValueError(
                        f"{label} bound for {name!r} must be finite and >= 0"
                    )
        for label, m in (("privacy", self.privacy_margin),
                         ("utility", self.utility_margin)):
            if m is not None and (not math.isfinite(m) or m < 0):
                raise ValueError(f"{label} margin must be finite and >= 0")
        if not self.stop_tol > 0:
            raise ValueError("stop_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")

    def check_names(self, dist: JointDistribution) -> None:
        known = {c.name for c in dist.characteristics}
        for section in (self.weights, self.upper_bounds, self.lower_bounds):
            for name in section:
                if name not in known:
                    raise ValueError(f"unknown characteristic {name!r}")

    def to_json_dict(self) -> dict:
        return {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "mode": self.mode,
            "weights": dict(self.weights),
            "upper_bounds": dict(self.upper_bounds),
            "lower_bounds": dict(self.lower_bounds),
            "privacy_margin": self.privacy_margin,
            "utility_margin": self.utility_margin,
            "stop_tol": self.stop_tol,
            "max_iters": self.max_iters,
        }


_CONFIG_KEYS = {
    "schema_version", "mode", "weights", "upper_bounds", "lower_bounds",
    "privacy_margin", "utility_margin", "stop_tol", "max_iters",
}


def config_from_json_dict(doc: dict) -> AuditConfig:
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    version = doc.get("schema_version")
    if version != CONFIG_SCHEMA_VERSION:
        raise ValueError(
            f"unsupported config schema_version {version!r}, "
            f"expected {CONFIG_SCHEMA_VERSION}"
        )
    kwargs = {k: doc[k] for k in doc if k != "schema_version"}
    return AuditConfig(**kwargs)


@dataclass(frozen=True)
class AuditResult:
    audited: JointDistribution
    moves: tuple[dict, ...]
    trajectory: tuple[tuple[float, ...], ...]
    objective: float
    status: str

    @property
    def final_mi(self) -> tuple[float, ...]:
        return self.trajectory[-1]

    def to_json_dict(self) -> dict:
        from .distribution import to_json_dict as dist_json
        return {
            "status": self.status,
            "objective": self.objective,
            "final_mi": list(self.final_mi),
            "moves": [dict(m) for m in self.moves],
            "trajectory": [list(t) for t in self.trajectory],
            "audited": dist_json(self.audited),
        }


def _mi_vector(dist: JointDistribution) -> np.ndarray:
    return np.array([
        mutual_information(dist, m) for m in range(len(dist.characteristics))
    ])


def _xlx_vec(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    mask = a > 0
    vals = a[mask]
    out[mask] = vals * np.log2(vals)
    return out


class _CandidateSet:
    """All exchange skeletons for the current table, with vectorized ΔI."""

    def __init__(self, dist: JointDistribution, mode: str):
        self.mode = mode
        self.dist = dist
        tab = dist.table
        n, kcomb = dist.probs.shape
        mcount = len(dist.characteristics)
        fibs = [fiber_matrix(dist, m) for m in range(mcount)]
        vidx = [[tab.value_index(r, m) for r in range(kcomb)]
                for m in range(mcount)]
        pairs = list(itertools.combinations(range(n), 2))
        self.keys: list[tuple] = []
        lo, hi = [], []
        if mode == CONSTANT:
            cell_pairs = list(itertools.combinations(range(kcomb), 2))
            C = len(pairs) * len(cell_pairs)
            P = np.zeros((C, mcount)); Q = np.zeros((C, mcount))
            R = np.zeros((C, mcount)); S = np.zeros((C, mcount))
            same = np.zeros((C, mcount), dtype=bool)
            i = 0
            for j, k in pairs:
                for r, s in cell_pairs:
                    self.keys.append((j, k, r, s))
                    lo.append(-min(dist.probs[j, r], dist.probs[k, s]))
                    hi.append(min(dist.probs[j, s], dist.probs[k, r]))
                    for m in range(mcount):
                        vr, vs = vidx[m][r], vidx[m][s]
                        if vr == vs:
                            same[i, m] = True
                        else:
                            P[i, m] = fibs[m][j, vr]
                            Q[i, m] = fibs[m][j, vs]
                            R[i, m] = fibs[m][k, vr]
                            S[i, m] = fibs[m][k, vs]
                    i += 1
            self.P, self.Q, self.R, self.S, self.same = P, Q, R, S, same
        else:
            rowtot = dist.probs.sum(axis=1)
            C = len(pairs) * kcomb
            F_j = np.zeros((C, mcount)); F_k = np.zeros((C, mcount))
            T_j = np.zeros(C); T_k = np.zeros(C)
            i = 0
            for j, k in pairs:
                for r in range(kcomb):
                    self.keys.append((j, k, r))
                    lo.append(-dist.probs[j, r])
                    hi.append(dist.probs[k, r])
                    for m in range(mcount):
                        v = vidx[m][r]
                        F_j[i, m] = fibs[m][j, v]
                        F_k[i, m] = fibs[m][k, v]
                    T_j[i] = rowtot[j]
                    T_k[i] = rowtot[k]
                    i += 1
            self.F_j, self.F_k, self.T_j, self.T_k = F_j, F_k, T_j, T_k
        self.lo = np.array(lo)
        self.hi = np.array(hi)

    def deltas(self, points: int) -> np.ndarray:
        frac = np.linspace(0.0, 1.0, points)
        return self.lo[:, None] + frac[None, :] * (self.hi - self.lo)[:, None]

    def mi_shift(self, deltas: np.ndarray) -> np.ndarray:
        """ΔI array of shape (candidates, characteristics, points)."""
        d = deltas[:, None, :]
        if self.mode == CONSTANT:
            P = self.P[:, :, None]; Q = self.Q[:, :, None]
            R = self.R[:, :, None]; S = self.S[:, :, None]
            out = (
                _xlx_vec(P + d) - _xlx_vec(P)
                + _xlx_vec(Q - d) - _xlx_vec(Q)
                + _xlx_vec(R - d) - _xlx_vec(R)
                + _xlx_vec(S + d) - _xlx_vec(S)
            )
            out[self.same] = 0.0
            return out
        F_j = self.F_j[:, :, None]; F_k = self.F_k[:, :, None]
        T_j = self.T_j[:, None, None]; T_k = self.T_k[:, None, None]
        fiber = (_xlx_vec(F_j + d) - _xlx_vec(F_j)
                 + _xlx_vec(F_k - d) - _xlx_vec(F_k))
        rows = (_xlx_vec(T_j + d) - _xlx_vec(T_j)
                + _xlx_vec(T_k - d) - _xlx_vec(T_k))
        return fiber - rows

    def move(self, index: int, delta: float) -> ExchangeMove:
        key = self.keys[index]
        if self.mode == CONSTANT:
            j, k, r, s = key
            return ExchangeMove(CONSTANT, j, k, r, s, delta)
        j, k, r = key
        return ExchangeMove(VARIABLE, j, k, r, None, delta)

    def _one(self, index: int, deltas: np.ndarray) -> np.ndarray:
        """ΔI of a single candidate at many deltas: (characteristics, points)."""
        d = deltas[None, :]
        if self.mode == CONSTANT:
            P = self.P[index][:, None]; Q = self.Q[index][:, None]
            R = self.R[index][:, None]; S = self.S[index][:, None]
            out = (
                _xlx_vec(P + d) - _xlx_vec(P)
                + _xlx_vec(Q - d) - _xlx_vec(Q)
                + _xlx_vec(R - d) - _xlx_vec(R)
                + _xlx_vec(S + d) - _xlx_vec(S)
            )
            out[self.same[index]] = 0.0
            return out
        F_j = self.F_j[index][:, None]; F_k = self.F_k[index][:, None]
        T_j = self.T_j[index]; T_k = self.T_k[index]
        fiber = (_xlx_vec(F_j + d) - _xlx_vec(F_j)
                 + _xlx_vec(F_k - d) - _xlx_vec(F_k))
        rows = (_xlx_vec(np.array([T_j]) + d) - _xlx_vec(np.array([T_j]))
                + _xlx_vec(np.array([T_k]) - d) - _xlx_vec(np.array([T_k])))
        return fiber - rows


@dataclass
class _Constraint:
    m: int
    bound: float
    upper: bool  # True: MI <= bound, False: MI >= bound

    def violation(self, mi: float) -> float:
        if self.upper:
            return max(0.0, mi - self.bound)
        return max(0.0, self.bound - mi)

    def satisfied(self, mi: float) -> bool:
        return self.violation(mi) <= BOUND_SLACK


def _effective_constraints(dist: JointDistribution, cfg: AuditConfig,
                           base_mi: np.ndarray) -> list[_Constraint]:
    names = [c.name for c in dist.characteristics]
    upper: dict[int, float] = {}
    lower: dict[int, float] = {}
    for name, b in cfg.upper_bounds.items():
        upper[names.index(name)] = float(b)
    for name, b in cfg.lower_bounds.items():
        lower[names.index(name)] = float(b)
    if cfg.privacy_margin is not None:
        for m in dist.roles("private"):
            cap = float(base_mi[m]) - cfg.privacy_margin
            upper[m] = min(upper.get(m, math.inf), cap)
    if cfg.utility_margin is not None:
        for m in dist.roles("nonprivate"):
            floor = float(base_mi[m]) + cfg.utility_margin
            lower[m] = max(lower.get(m, -math.inf), floor)
    cons = [_Constraint(m, b, True) for m, b in sorted(upper.items())]
    cons += [_Constraint(m, b, False) for m, b in sorted(lower.items())]
    # bounds on private characteristics are restored first in phase 1
    private = set(dist.roles("private"))
    cons.sort(key=lambda c: (c.m not in private, c.m, not c.upper))
    return cons


def _feasible_mask(mi: np.ndarray, shifts: np.ndarray,
                   cons: list[_Constraint]) -> np.ndarray:
    """shifts: (..., characteristics, points) -> bool mask over (..., points)."""
    mask = np.ones(shifts.shape[:-2] + shifts.shape[-1:], dtype=bool)
    for c in cons:
        after = mi[c.m] + shifts[..., c.m, :]
        if c.upper:
            mask &= after <= c.bound + BOUND_SLACK
        else:
            mask &= after >= c.bound - BOUND_SLACK
    return mask


def _bisect_zero(fn, lo: float, hi: float, iters: int = 80) -> float:
    """Root of a scalar function bracketed by [lo, hi] (fn(lo), fn(hi) differ
    in sign); returns the endpoint of the shrunken bracket where fn <= 0."""
    flo = fn(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if (fmid <= 0) == (flo <= 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return lo if flo <= 0 else hi


class _Solver:
    def __init__(self, dist: JointDistribution, cfg: AuditConfig):
        cfg.check_names(dist)
        self.cfg = cfg
        self.dist = dist
        self.names = [c.name for c in dist.characteristics]
        self.weights = np.array([
            float(cfg.weights.get(name, 0.0)) for name in self.names
        ])
        self.base_mi = _mi_vector(dist)
        self.cons = _effective_constraints(dist, cfg, self.base_mi)
        self.moves: list[dict] = []
        self.trajectory: list[tuple[float, ...]] = [
            tuple(float(x) for x in self.base_mi)
        ]
        self.iterations = 0

    # -- line search -------------------------------------------------------

    def _refine(self, cands: _CandidateSet, index: int, mi: np.ndarray,
                objective_row: np.ndarray, cons: list[_Constraint],
                coarse_best: float) -> tuple[float, float]:
        """Best feasible delta for one candidate.

        ``objective_row`` are the per-characteristic objective coefficients;
        the score of a delta is coeff . ΔI(delta), smaller is better.
        Returns (delta, score).
        """
        lo = float(cands.lo[index]); hi = float(cands.hi[index])
        if hi - lo <= 0:
            return 0.0, 0.0

        def score_many(ds: np.ndarray) -> np.ndarray:
            shifts = cands._one(index, ds)
            g = objective_row @ shifts
            feas = _feasible_mask(mi, shifts[None, :, :], cons)[0]
            return np.where(feas, g, np.inf)

        pts = [np.linspace(lo, hi, 257)]
        # exact interior maximizers of each characteristic's entropy shift
        if cands.mode == CONSTANT:
            for m in range(len(mi)):
                if cands.same[index, m]:
                    continue
                p, q = cands.P[index, m], cands.Q[index, m]
                r, s = cands.R[index, m], cands.S[index, m]
                tot = p + q + r + s
                if tot > 0:
                    star = (q * r - p * s) / tot
                    pts.append(np.array([min(max(star, lo), hi)]))
        # bound-crossing deltas
        grid = pts[0]
        shifts = cands._one(index, grid)
        for c in cons:
            after = mi[c.m] + shifts[c.m]
            resid = after - c.bound if c.upper else c.bound - after
            sign = resid > 0
            flips = np.nonzero(sign[1:] != sign[:-1])[0]
            for f in flips[:8]:
                a, b = float(grid[f]), float(grid[f + 1])

                def fn(d, _m=c.m, _b=c.bound, _up=c.upper):
                    val = mi[_m] + float(cands._one(index, np.array([d]))[_m, 0])
                    return (val - _b) if _up else (_b - val)

                pts.append(np.array([_bisect_zero(fn, a, b)]))
        allpts = np.concatenate(pts)
        scores = score_many(allpts)
        best = int(np.argmin(scores))
        d0, s0 = float(allpts[best]), float(scores[best])
        # two zoom stages around the incumbent
        width = (hi - lo) / 256.0
        for _ in range(2):
            zoom = np.linspace(max(lo, d0 - width), min(hi, d0 + width), 65)
            zs = score_many(zoom)
            zbest = int(np.argmin(zs))
            if zs[zbest] < s0:
                d0, s0 = float(zoom[zbest]), float(zs[zbest])
            width /= 32.0
        if not math.isfinite(s0):
            return 0.0, 0.0
        return d0, s0

    def _best_move(self, objective_row: np.ndarray, cons: list[_Constraint],
                   points: int, topk: int,
                   dist: JointDistribution | None = None,
                   ) -> tuple[ExchangeMove | None, float]:
        """Scan all candidates, refine the most promising, return the winner."""
        if dist is None:
            dist = self.dist
        cands = _CandidateSet(dist, self.cfg.mode)
        mi = _mi_vector(dist)
        deltas = cands.deltas(points)
        shifts = cands.mi_shift(deltas)
        g = np.einsum("m,cmp->cp", objective_row, shifts)
        feas = _feasible_mask(mi, shifts, cons)
        g = np.where(feas, g, np.inf)
        per_cand = g.min(axis=1)
        order = np.argsort(per_cand, kind="stable")[:topk]
        best_move, best_score = None, 0.0
        for idx in order:
            if not math.isfinite(per_cand[idx]) and best_move is not None:
                break
            d, s = self._refine(cands, int(idx), mi, objective_row, cons,
                                float(per_cand[idx]))
            if s < best_score:
                best_move, best_score = cands.move(int(idx), d), s
        return best_move, best_score

    # -- phases ------------------------------------------------------------

    def _apply(self, move: ExchangeMove) -> None:
        self.dist = apply_move(self.dist, move)
        mi = _mi_vector(self.dist)
        self.moves.append(move_record(move, mi))
        self.trajectory.append(tuple(float(x) for x in mi))
        self.iterations += 1

    def _restore_bound(self, target: _Constraint,
                       held: list[_Constraint]) -> bool:
        """Drive one violated bound feasible without breaking held bounds."""
        sign = 1.0 if target.upper else -1.0
        row = np.zeros(len(self.names))
        row[target.m] = sign
        while self.iterations < self.cfg.max_iters:
            mi = _mi_vector(self.dist)
            if target.satisfied(mi[target.m]):
                return True
            move, score = self._best_move(row, held, points=65, topk=4)
            if move is None or score >= -self.cfg.stop_tol:
                return False
            # stop at the first crossing into feasibility
            current = float(mi[target.m])
            need = target.bound - current  # signed MI change wanted
            cands = _CandidateSet(self.dist, self.cfg.mode)
            idx = cands.keys.index(
                (move.j, move.k, move.r, move.s) if self.cfg.mode == CONSTANT
                else (move.j, move.k, move.r)
            )

            def overshoot(d: float) -> float:
                val = float(cands._one(idx, np.array([d]))[target.m, 0])
                return (need - val) * (-1.0 if target.upper else 1.0)

            if overshoot(move.delta) <= 0.0:
                # bisect along [0, delta] for the first feasible point
                a, b = 0.0, move.delta
                for _ in range(80):
                    mid = 0.5 * (a + b)
                    if overshoot(mid) <= 0.0:
                        b = mid
                    else:
                        a = mid
                move = move.with_delta(b)
            self._apply(move)
        return True

    def _mark(self) -> tuple:
        return (self.dist, len(self.moves), len(self.trajectory),
                self.iterations)

    def _rewind(self, mark: tuple) -> None:
        dist, nmoves, ntraj, iters = mark
        self.dist = dist
        del self.moves[nmoves:]
        del self.trajectory[ntraj:]
        self.iterations = iters

    def _descend(self, thorough: bool = True) -> bool:
        """Greedy single-move descent to a stall.

        Returns True when the iteration cap stopped it first.  The
        thorough variant re-scans with a denser probe before accepting a
        stall and then tries the pairwise lookahead; the light variant is
        for speculative descents that may be rewound.
        """
        while self.iterations < self.cfg.max_iters:
            move, score = self._best_move(
                self.weights, self.cons, points=65, topk=3
            )
            if move is None or score >= -self.cfg.stop_tol:
                if not thorough:
                    return False
                move, score = self._best_move(
                    self.weights, self.cons, points=257, topk=8
                )
                if move is None or score >= -self.cfg.stop_tol:
                    if self._escape_stall():
                        continue
                    return False
            self._apply(move)
        return True

    def _guided_jump(self) -> bool:
        """Coarse global scan plus guided transit, two-interval binary pairs.

        On such tables the weighted objective depends only on the first
        interval's total mass and its two value-zero fiber masses, a space
        small enough to grid directly.  Greedy descent can park in the
        wrong assignment of column patterns to intervals, separated from
        the optimum by a valley no move pair crosses.  When a grid cell
        scores clearly better than the stall, the transit walks toward its
        aggregates through ordinary exchange moves, shrinking the distance
        every move while honouring bounds, and the regular descent then
        polishes; anything short of a strict improvement is rewound.
        """
        dist = self.dist
        if dist.interval_count != 2 or dist.combination_count != 4:
            return False
        try:
            u, v = binary_pair_roles(dist)
        except ValueError:
            return False
        cells = _binary_cells(dist)
        a_c, b_c, c_c, d_c = cells
        col = dist.probs.sum(axis=0)
        col_a = float(col[a_c])
        ab_total = float(col[a_c] + col[b_c])
        ac_total = float(col[a_c] + col[c_c])
        h_u = entropy(characteristic_marginal(dist, u))
        h_v = entropy(characteristic_marginal(dist, v))
        w_u = float(self.weights[u])
        w_v = float(self.weights[v])
        cons_u = [c for c in self.cons if c.m == u]
        cons_v = [c for c in self.cons if c.m == v]
        incumbent = float(self.weights @ _mi_vector(dist))
        G = 65

        def fiber_mi(x: np.ndarray, total: float, t0: float, t1: float,
                     h: float) -> np.ndarray:
            x1 = total - x
            s = (_xlx_vec(x) + _xlx_vec(np.maximum(t0 - x, 0.0))
                 + _xlx_vec(np.maximum(x1, 0.0))
                 + _xlx_vec(np.maximum(t1 - x1, 0.0)))
            return s - float(_xlx_vec(np.array([t0, t1])).sum()) + h

        def slice_best(t0: float):
            t1 = 1.0 - t0
            if t1 < -1e-12:
                return None
            t1 = max(t1, 0.0)
            x_lo, x_hi = max(0.0, ab_total - t1), min(t0, ab_total)
            y_lo, y_hi = max(0.0, ac_total - t1), min(t0, ac_total)
            if x_hi < x_lo or y_hi < y_lo:
                return None
            xs = np.linspace(x_lo, x_hi, G)
            ys = np.linspace(y_lo, y_hi, G)
            miu = fiber_mi(xs, ab_total, t0, t1, h_u)
            miv = fiber_mi(ys, ac_total, t0, t1, h_v)
            oku = np.ones(G, dtype=bool)
            okv = np.ones(G, dtype=bool)
            for c in cons_u:
                oku &= (miu <= c.bound + BOUND_SLACK) if c.upper \
                    else (miu >= c.bound - BOUND_SLACK)
            for c in cons_v:
                okv &= (miv <= c.bound + BOUND_SLACK) if c.upper \
                    else (miv >= c.bound - BOUND_SLACK)
            su = np.where(oku, w_u * miu, np.inf)
            sv = np.where(okv, w_v * miv, np.inf)
            if not (np.isfinite(su).any() and np.isfinite(sv).any()):
                return None
            pair = su[:, None] + sv[None, :]
            ab1 = ab_total - xs
            ac1 = ac_total - ys
            lo_sum = (np.maximum(0.0, xs[:, None] + ys[None, :] - t0)
                      + np.maximum(0.0, ab1[:, None] + ac1[None, :] - t1))
            hi_sum = (np.minimum(xs[:, None], ys[None, :])
                      + np.minimum(ab1[:, None], ac1[None, :]))
            pair = np.where(
                (lo_sum <= col_a + 1e-12) & (hi_sum >= col_a - 1e-12),
                pair, np.inf,
            )
            fi = int(np.argmin(pair))
            obj = float(pair.ravel()[fi])
            if not math.isfinite(obj):
                return None
            i, j = divmod(fi, G)
            return obj, float(xs[i]), float(ys[j])

        if self.cfg.mode == CONSTANT:
            t0 = float(dist.probs[0].sum())
            found = slice_best(t0)
            best = None if found is None else (found[0], t0, found[1], found[2])
        else:
            best = None
            for t0 in np.linspace(0.0, 1.0, G):
                f = slice_best(float(t0))
                if f is not None and (best is None or f[0] < best[0]):
                    best = (f[0], float(t0), f[1], f[2])
        if best is None or best[0] >= incumbent - self.cfg.stop_tol:
            return False
        target = best[1:]

        mark = self._mark()
        for _ in range(64):
            probs = self.dist.probs
            cur = (float(probs[0].sum()),
                   float(probs[0, a_c] + probs[0, b_c]),
                   float(probs[0, a_c] + probs[0, c_c]))
            diff = [target[i] - cur[i] for i in range(3)]
            l1 = sum(abs(x) for x in diff)
            if l1 <= 1e-9:
                break
            step = self._transit_move(cells, diff, l1)
            if step is None:
                break
            self._apply(step)
        self._descend()
        final = float(self.weights @ _mi_vector(self.dist))
        if final < incumbent - self.cfg.stop_tol:
            return True
        self._rewind(mark)
        return False

    def _transit_move(self, cells: tuple[int, int, int, int],
                      diff: list[float], l1: float) -> ExchangeMove | None:
        """One move shrinking the aggregate distance (t0, ab0, ac0) most.

        Candidate deltas are the domain endpoints and each component's
        exact-hit delta; the move must respect the bounds on its own.
        """
        a_c, b_c, c_c, _ = cells
        in_ab = {a_c, b_c}
        in_ac = {a_c, c_c}
        cands = _CandidateSet(self.dist, self.cfg.mode)
        mi = _mi_vector(self.dist)
        best: tuple[float, int, float] | None = None
        for idx, key in enumerate(cands.keys):
            lo = float(cands.lo[idx])
            hi = float(cands.hi[idx])
            if hi - lo <= 0:
                continue
            if self.cfg.mode == CONSTANT:
                _, _, r, s = key
                eff = (0.0,
                       float((r in in_ab) - (s in in_ab)),
                       float((r in in_ac) - (s in in_ac)))
            else:
                _, _, r = key
                eff = (1.0, float(r in in_ab), float(r in in_ac))
            if eff == (0.0, 0.0, 0.0):
                continue
            trials = {lo, hi}
            for i in range(3):
                if eff[i] != 0.0:
                    trials.add(min(max(diff[i] / eff[i], lo), hi))
            for dlt in trials:
                if abs(dlt) <= 1e-15:
                    continue
                after = sum(abs(diff[i] - eff[i] * dlt) for i in range(3))
                if after >= l1 - 1e-15:
                    continue
                if best is not None and after >= best[0]:
                    continue
                shift = cands._one(idx, np.array([dlt]))
                if not _feasible_mask(mi, shift[None, :, :], self.cons)[0][0]:
                    continue
                best = (after, idx, dlt)
        if best is None:
            return None
        return cands.move(best[1], best[2])

    def _basin_hop_once(self) -> bool:
        """One round of full-swing restarts out of a deep local minimum.

        A stalled table can sit in the wrong assignment of column patterns
        to intervals, farther from the optimum than any move pair reaches.
        Each kick applies one candidate exchange at a domain endpoint and
        descends again; the first outcome that beats the incumbent is
        kept, every other attempt is rewound without trace.  Small tables
        only; the kick count would not scale past them.
        """
        cands = _CandidateSet(self.dist, self.cfg.mode)
        if len(cands.keys) > 64:
            return False
        mark = self._mark()
        incumbent = float(self.weights @ _mi_vector(self.dist))
        mi = _mi_vector(self.dist)
        kicks = []
        for idx in range(len(cands.keys)):
            for d in (float(cands.lo[idx]), float(cands.hi[idx])):
                if abs(d) <= 1e-15:
                    continue
                shift = cands._one(idx, np.array([d]))
                if not _feasible_mask(mi, shift[None, :, :], self.cons)[0][0]:
                    continue
                kicks.append((abs(d), idx, d))
        kicks.sort(key=lambda t: -t[0])
        for _, idx, d in kicks[:16]:
            self._apply(cands.move(idx, d))
            self._descend(thorough=False)
            final = float(self.weights @ _mi_vector(self.dist))
            if final < incumbent - self.cfg.stop_tol:
                return True
            self._rewind(mark)
        return False

    def _escape_stall(self) -> bool:
        """Look ahead one extra move from a stalled table, commit on gain.

        Single-move descent stalls where every individual exchange worsens
        the weighted objective although some pair of exchanges does not,
        typically once one index sits at an extreme that any lone move must
        leave.  The first move of a pair comes from a short probe over each
        candidate's delta range, the follow-up from the regular single-move
        search on the shifted table; both moves must respect the bounds on
        their own.
        """
        if self.iterations + 2 > self.cfg.max_iters:
            return False
        cands = _CandidateSet(self.dist, self.cfg.mode)
        mi = _mi_vector(self.dist)
        ncand = len(cands.keys)
        deltas = cands.deltas(17)
        shifts = cands.mi_shift(deltas)
        g = np.einsum("m,cmp->cp", self.weights, shifts)
        g = np.where(_feasible_mask(mi, shifts, self.cons), g, np.inf)
        per_cand = g.min(axis=1)
        order = np.argsort(per_cand, kind="stable")
        if ncand <= 48:
            probes = 7
        else:
            order = order[:24]
            probes = 3
        best: tuple[float, ExchangeMove, ExchangeMove] | None = None
        for c1 in order:
            c1 = int(c1)
            lo = float(cands.lo[c1])
            hi = float(cands.hi[c1])
            if hi - lo <= 0:
                continue
            for d1 in np.linspace(lo, hi, probes):
                d1 = float(d1)
                if abs(d1) <= 1e-15:
                    continue
                shift1 = cands._one(c1, np.array([d1]))
                if not _feasible_mask(mi, shift1[None, :, :], self.cons)[0][0]:
                    continue
                move1 = cands.move(c1, d1)
                stepped = apply_move(self.dist, move1)
                move2, score2 = self._best_move(
                    self.weights, self.cons, points=33, topk=2, dist=stepped
                )
                if move2 is None:
                    continue
                total = float(self.weights @ shift1[:, 0]) + score2
                bar = best[0] if best is not None else -self.cfg.stop_tol
                if total < bar:
                    best = (total, move1, move2)
        if best is None:
            return False
        self._apply(best[1])
        self._apply(best[2])
        return True

    def solve(self) -> AuditResult:
        # quick rejection of bounds above the information ceiling
        for c in self.cons:
            if not c.upper:
                h = entropy(characteristic_marginal(self.dist, c.m))
                if c.bound > h + BOUND_SLACK:
                    return self._result(STATUS_INFEASIBLE)
            elif c.bound < -BOUND_SLACK:
                return self._result(STATUS_INFEASIBLE)

        held: list[_Constraint] = []
        for c in self.cons:
            mi = _mi_vector(self.dist)
            if not c.satisfied(mi[c.m]):
                if not self._restore_bound(c, held):
                    return self._result(STATUS_INFEASIBLE)
            held.append(c)

        return self._result(self._weighted_phase())

    def _weighted_phase(self) -> str:
        """Descend the weighted objective from the current table."""
        if np.any(self.weights != 0.0):
            while True:
                if self._descend():
                    return STATUS_ITERATION_LIMIT
                if self._guided_jump():
                    continue
                if not self._basin_hop_once():
                    break
        return STATUS_CONVERGED

    def _result(self, status: str) -> AuditResult:
        mi = _mi_vector(self.dist)
        objective = float(self.weights @ mi)
        return AuditResult(
            audited=self.dist,
            moves=tuple(self.moves),
            trajectory=tuple(self.trajectory),
            objective=objective,
            status=status,
        )


def solve_audit(dist: JointDistribution, cfg: AuditConfig) -> AuditResult:
    """Adjust the table to minimize the weighted MI objective under bounds."""
    return _Solver(dist, cfg).solve()


def _continue_audit(dist: JointDistribution, cfg: AuditConfig,
                    warm: AuditResult) -> AuditResult:
    """Resume the weighted descent from another solve's end state.

    The warm result must already satisfy this configuration's bounds; its
    move log is kept so the continuation still replays from the same base
    table.
    """
    s = _Solver(dist, cfg)
    s.dist = warm.audited
    s.moves = [dict(m) for m in warm.moves]
    s.trajectory = [tuple(t) for t in warm.trajectory]
    s.iterations = len(s.moves)
    return s._result(s._weighted_phase())


# -- stepwise protocol -----------------------------------------------------


@dataclass(frozen=True)
class StepwiseResult:
    audited: JointDistribution
    step_moves: tuple[tuple[dict, ...], ...]
    trajectory: tuple[tuple[float, float], ...]

    def to_json_dict(self) -> dict:
        from .distribution import to_json_dict as dist_json
        return {
            "trajectory": [list(t) for t in self.trajectory],
            "step_moves": [[dict(m) for m in step] for step in self.step_moves],
            "audited": dist_json(self.audited),
        }


def _binary_cells(dist: JointDistribution) -> tuple[int, int, int, int]:
    """Flat cells ordered by (private value, nonprivate value)."""
    u, v = binary_pair_roles(dist)
    tab = dist.table
    by_value = {}
    for r in range(tab.size):
        by_value[(tab.value_index(r, u), tab.value_index(r, v))] = r
    return by_value[(0, 0)], by_value[(0, 1)], by_value[(1, 0)], by_value[(1, 1)]


def run_stepwise(dist: JointDistribution, stop_tol: float = 1e-9,
                 max_moves_per_step: int = 10_000) -> StepwiseResult:
    """Three-step constant-mode audit of a binary-pair table.

    Step 1 uses the cell pairs that shift both indices, taking each move's
    private-optimal delta truncated where the nonprivate index would start
    to fall.  Step 2 uses the private-only pairs at their interior optimum,
    step 3 the nonprivate-only pairs driven to the domain endpoint that
    raises the nonprivate index most.  Each step runs to its own fixed
    point; the private index never rises and the nonprivate index never
    falls along the way.
    """
    u, v = binary_pair_roles(dist)
    a, b, c, d = _binary_cells(dist)
    step_families = (
        ((a, d), (b, c)),
        ((a, c), (b, d)),
        ((a, b), (c, d)),
    )
    current = dist
    steps: list[tuple[dict, ...]] = []
    trajectory = [(mutual_information(current, u), mutual_information(current, v))]

    for step_no, family in enumerate(step_families, start=1):
        records: list[dict] = []
        for _ in range(max_moves_per_step):
            best = None  # (gain, j, k, cells, delta)
            pfib = fiber_matrix(current, u)
            nfib = fiber_matrix(current, v)
            tab = current.table
            n = current.interval_count
            for j in range(n):
                for k in range(j + 1, n):
                    for r, s in family:
                        probe = ExchangeMove(CONSTANT, j, k, r, s, 0.0)
                        lo, hi = delta_domain(current, probe)
                        if hi - lo <= 0:
                            continue
                        gain_delta = _step_delta(
                            step_no, current, pfib, nfib, tab,
                            u, v, j, k, r, s, lo, hi,
                        )
                        if gain_delta is None:
                            continue
                        gain, delta = gain_delta
                        if gain > stop_tol and (best is None or gain > best[0]):
                            best = (gain, j, k, (r, s), delta)
            if best is None:
                break
            _, j, k, (r, s), delta = best
            move = ExchangeMove(CONSTANT, j, k, r, s, delta)
            current = apply_move(current, move)
            records.append(move_record(move, [
                mutual_information(current, m)
                for m in range(len(current.characteristics))
            ]))
        steps.append(tuple(records))
        trajectory.append(
            (mutual_information(current, u), mutual_information(current, v))
        )

    return StepwiseResult(current, tuple(steps), tuple(trajectory))


def _step_delta(step_no, dist, pfib, nfib, tab, u, v, j, k, r, s, lo, hi):
    """Gain and delta for one stepwise candidate, or None if not improving."""
    pu = (float(pfib[j, tab.value_index(r, u)]),
          float(pfib[j, tab.value_index(s, u)]),
          float(pfib[k, tab.value_index(r, u)]),
          float(pfib[k, tab.value_index(s, u)]))
    pv = (float(nfib[j, tab.value_index(r, v)]),
          float(nfib[j, tab.value_index(s, v)]),
          float(nfib[k, tab.value_index(r, v)]),
          float(nfib[k, tab.value_index(s, v)]))

    if step_no == 2:
        total = sum(pu)
        if total <= 0:
            return None
        star = (pu[1] * pu[2] - pu[0] * pu[3]) / total
        delta = min(max(star, lo), hi)
        gain = shift_value(*pu, delta)
        return (gain, delta) if gain > 0 else None

    if step_no == 3:
        best = None
        for delta in (lo, hi):
            if delta == 0.0:
                continue
            drop = -shift_value(*pv, delta)
            if drop > 0 and (best is None or drop > best[0]):
                best = (drop, delta)
        return best

    # step 1: private-optimal delta, truncated where the nonprivate
    # index would start to fall
    total = sum(pu)
    if total <= 0:
        return None
    star = (pu[1] * pu[2] - pu[0] * pu[3]) / total
    delta = min(max(star, lo), hi)
    if delta == 0.0:
        return None
    if shift_value(*pv, delta) > 0.0:
        a, bnd = 0.0, delta
        for _ in range(80):
            mid = 0.5 * (a + bnd)
            if shift_value(*pv, mid) > 0.0:
                bnd = mid
            else:
                a = mid
        delta = a
    pgain = shift_value(*pu, delta)
    vgain = -shift_value(*pv, delta)
    if pgain <= 0 or vgain < -1e-15:
        return None
    return (pgain + max(vgain, 0.0), delta)


# -- frontier sweeps -------------------------------------------------------


@dataclass(frozen=True)
class SweepAxis:
    """One swept bound: which characteristic, which direction, which values."""

    characteristic: str
    direction: str  # "upper" or "lower"
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.direction not in ("upper", "lower"):
            raise ValueError("direction must be 'upper' or 'lower'")
        object.__setattr__(self, "values", tuple(float(x) for x in self.values))


@dataclass(frozen=True)
class FrontierPoint:
    bounds: tuple[tuple[str, str, float], ...]  # (name, direction, value)
    result: AuditResult


def _point_config(cfg: AuditConfig, axes: list[SweepAxis],
                  values: tuple[float, ...]) -> AuditConfig:
    upper = dict(cfg.upper_bounds)
    lower = dict(cfg.lower_bounds)
    for axis, val in zip(axes, values):
        if axis.direction == "upper":
            upper[axis.characteristic] = val
        else:
            lower[axis.characteristic] = val
    return replace(cfg, upper_bounds=upper, lower_bounds=lower)


def _sweep_point(item) -> AuditResult:
    dist, cfg = item
    return solve_audit(dist, cfg)


def _at_least_as_tight(p_vals: tuple[float, ...], q_vals: tuple[float, ...],
                       axes: list[SweepAxis]) -> bool:
    """Whether the swept bounds at p imply those at q on every axis."""
    for axis, pv, qv in zip(axes, p_vals, q_vals):
        if axis.direction == "lower":
            if pv < qv:
                return False
        elif pv > qv:
            return False
    return True


def _share_across_grid(dist: JointDistribution, configs: list[AuditConfig],
                       grid: list[tuple[float, ...]],
                       axes: list[SweepAxis],
                       results: list[AuditResult]) -> list[AuditResult]:
    """Propagate better solutions to points with slacker swept bounds.

    A point's feasible set contains that of any point whose swept bounds
    are at least as tight, so the tighter point's table is a valid warm
    start and the exact optimal objectives are monotone along each axis.
    Local stalls break that monotonicity; adopting the better neighbour
    and descending further restores it without ever worsening a point.
    """
    base_mi = _mi_vector(dist)
    cons_list = [_effective_constraints(dist, c, base_mi) for c in configs]
    changed = True
    while changed:
        changed = False
        for qi in range(len(results)):
            incumbent = results[qi].objective
            donor = None
            for pi, p in enumerate(results):
                if pi == qi or p.status != STATUS_CONVERGED:
                    continue
                if p.objective >= incumbent - 1e-12:
                    continue
                if not _at_least_as_tight(grid[pi], grid[qi], axes):
                    continue
                if not all(c.satisfied(p.final_mi[c.m]) for c in cons_list[qi]):
                    continue
                incumbent = p.objective
                donor = pi
            if donor is not None:
                results[qi] = _continue_audit(dist, configs[qi], results[donor])
                changed = True
    return results


def sweep_frontier(dist: JointDistribution, cfg: AuditConfig,
                   axes: list[SweepAxis] | SweepAxis,
                   jobs: int = 1) -> list[FrontierPoint]:
    """Solve one audit per grid point of the swept bounds.

    Every solve starts from the same input table; points are solved
    independently, then better solutions propagate to points with slacker
    swept bounds so the reported frontier is monotone along each axis.
    Results come back in row-major input order (first axis slowest).
    """
    if isinstance(axes, SweepAxis):
        axes = [axes]
    if not axes:
        raise ValueError("need at least one sweep axis")
    grid = list(itertools.product(*(axis.values for axis in axes)))
    configs = [_point_config(cfg, axes, values) for values in grid]
    items = [(dist, c) for c in configs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, items))
    else:
        results = [_sweep_point(it) for it in items]
    results = _share_across_grid(dist, configs, grid, axes, results)
    points = []
    for values, res in zip(grid, results):
        bounds = tuple(
            (axis.characteristic, axis.direction, val)
            for axis, val in zip(axes, values)
        )
        points.append(FrontierPoint(bounds, res))
    return points


def frontier_csv(points: list[FrontierPoint],
                 dist: JointDistribution) -> str:
    """Render sweep results as CSV: bounds, final MI values, objective, status."""
    names = [c.name for c in dist.characteristics]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if not points:
        writer.writerow(["objective", "status"])
        return buf.getvalue()
    head = [f"bound_{name}_{direction}" for name, direction, _ in points[0].bounds]
    head += [f"mi_{name}" for name in names] + ["objective", "status"]
    writer.writerow(head)
    for pt in points:
        row = [repr(float(val)) for _, _, val in pt.bounds]
        row += [repr(float(x)) for x in pt.result.final_mi]
        row += [repr(float(pt.result.objective)), pt.result.status]
        writer.writerow(row)
    return buf.getvalue()


# -- exhaustive oracle -----------------------------------------------------


@dataclass(frozen=True)
class OracleResult:
    feasible: bool
    objective: float
    mi: tuple[float, ...]
    table: JointDistribution | None


#: How many near-best grid points each oracle pass keeps for refinement.
_ORACLE_POOL = 12


def _thin_pool(pool: list, radius: float) -> list:
    """Best-first filter dropping points within radius of a kept point.

    Keeps at most _ORACLE_POOL entries, so refinement inspects distinct
    regions instead of one minimum and its mesh neighbours.
    """
    pool.sort(key=lambda e: (e[0], e[1]))
    kept: list = []
    for entry in pool:
        if any(
            max(abs(a - b) for a, b in zip(entry[1], k[1])) <= radius
            for k in kept
        ):
            continue
        kept.append(entry)
        if len(kept) == _ORACLE_POOL:
            break
    return kept


def brute_force_oracle(dist: JointDistribution, cfg: AuditConfig,
                       grid: float = 1e-3, refinements: int = 2,
                       mesh_only: bool = False) -> OracleResult:
    """Exhaustive grid minimum of the weighted MI objective.

    Small binary-pair tables only (two binary characteristics, two or three
    intervals).  The objective depends on the cell matrix only through each
    interval's private and nonprivate fiber masses (plus interval totals in
    variable mode), so the search grids over those aggregates and keeps the
    points that a nonnegative cell matrix with the right column sums can
    realize.  Each refinement shrinks the grid by a factor of ten around
    every surviving near-best point, not just the single incumbent, so
    near-tied minima in separate regions are all inspected.  ``mesh_only``
    disables the sliced walk used for the variable-mode two-interval case,
    so both evaluation orders can be compared against each other.
    """
    cfg.check_names(dist)
    u, v = binary_pair_roles(dist)
    if dist.combination_count != 4:
        raise ValueError("oracle supports exactly four combinations")
    n = dist.interval_count
    if n > 3:
        raise ValueError("oracle supports at most three intervals")

    names = [c.name for c in dist.characteristics]
    weights = np.array([float(cfg.weights.get(nm, 0.0)) for nm in names])
    base_mi = _mi_vector(dist)
    cons = _effective_constraints(dist, cfg, base_mi)

    tab = dist.table
    cells = _binary_cells(dist)  # (a, b, c, d) by (priv, nonpriv) value
    col = dist.probs.sum(axis=0)
    col_a, col_b, col_c, col_d = (float(col[c]) for c in cells)
    ab_total = col_a + col_b
    ac_total = col_a + col_c
    rowtot = dist.probs.sum(axis=1)
    h_u = entropy(characteristic_marginal(dist, u))
    h_v = entropy(characteristic_marginal(dist, v))

    free = n - 1
    if cfg.mode == CONSTANT:
        dims = []
        for i in range(free):
            dims.append(("ab", i, 0.0, min(ab_total, 1.0)))
            dims.append(("ac", i, 0.0, min(ac_total, 1.0)))
    else:
        dims = []
        for i in range(free):
            dims.append(("t", i, 0.0, 1.0))
            dims.append(("ab", i, 0.0, min(ab_total, 1.0)))
            dims.append(("ac", i, 0.0, min(ac_total, 1.0)))

    def _evaluate_block(flat: list[np.ndarray]) -> list:
        npts = flat[0].size
        t = np.empty((n, npts)); ab = np.empty((n, npts)); ac = np.empty((n, npts))
        if cfg.mode == CONSTANT:
            for i in range(n):
                t[i] = rowtot[i]
            for idx, (kind, i, _, _) in enumerate(dims):
                (ab if kind == "ab" else ac)[i] = flat[idx]
        else:
            for idx, (kind, i, _, _) in enumerate(dims):
                {"t": t, "ab": ab, "ac": ac}[kind][i] = flat[idx]
            t[free] = 1.0 - t[:free].sum(axis=0)
        ab[free] = ab_total - ab[:free].sum(axis=0)
        ac[free] = ac_total - ac[:free].sum(axis=0)

        ok = np.ones(npts, dtype=bool)
        for i in range(n):
            ok &= (t[i] >= -1e-12) & (ab[i] >= -1e-12) & (ac[i] >= -1e-12)
            ok &= (ab[i] <= t[i] + 1e-12) & (ac[i] <= t[i] + 1e-12)
        # realizability: a nonnegative cell in the (0,0) slot per interval,
        # summing to the (0,0) column mass
        lo_cell = np.maximum(0.0, ab + ac - t)
        hi_cell = np.minimum(ab, ac)
        ok &= lo_cell.sum(axis=0) <= col_a + 1e-12
        ok &= hi_cell.sum(axis=0) >= col_a - 1e-12
        if not np.any(ok):
            return []

        s_t = _xlx_vec(t).sum(axis=0)
        s_u = _xlx_vec(ab).sum(axis=0) + _xlx_vec(np.maximum(t - ab, 0.0)).sum(axis=0)
        s_v = _xlx_vec(ac).sum(axis=0) + _xlx_vec(np.maximum(t - ac, 0.0)).sum(axis=0)
        mi_u = s_u - s_t + h_u
        mi_v = s_v - s_t + h_v
        mi_all = np.zeros((len(names), npts))
        mi_all[u] = mi_u
        mi_all[v] = mi_v
        for c in cons:
            if c.upper:
                ok &= mi_all[c.m] <= c.bound + BOUND_SLACK
            else:
                ok &= mi_all[c.m] >= c.bound - BOUND_SLACK
        if not np.any(ok):
            return []
        obj = weights @ mi_all
        obj = np.where(ok, obj, np.inf)
        take = min(_ORACLE_POOL, obj.size)
        entries = []
        for b in np.argpartition(obj, take - 1)[:take]:
            b = int(b)
            if not math.isfinite(obj[b]):
                continue
            params = tuple(float(f[b]) for f in flat)
            entries.append((float(obj[b]), params,
                            tuple(float(mi_all[m][b]) for m in range(len(names)))))
        return entries

    def evaluate_mesh(axes: list[np.ndarray], step: float) -> list:
        """Near-best feasible points on the mesh of the given axes, chunked."""
        sizes = [len(a) for a in axes]
        rest = int(np.prod(sizes[1:])) if len(sizes) > 1 else 1
        chunk = max(1, int(2e7 // max(rest, 1)))
        pool: list = []
        for start in range(0, sizes[0], chunk):
            head = axes[0][start:start + chunk]
            mesh = np.meshgrid(head, *axes[1:], indexing="ij", sparse=False)
            flat = [m.ravel() for m in mesh]
            pool.extend(_evaluate_block(flat))
        return _thin_pool(pool, 1.5 * step)

    def evaluate_slices(axes: list[np.ndarray], step: float) -> list:
        """Same mesh as evaluate_mesh for the variable-mode two-interval
        case, walked one interval-mass slice at a time.

        For fixed t the score splits into a term in ab plus a term in ac,
        so each slice is scored from two lookup vectors; the sum of their
        minima is a lower bound that lets slices be skipped once they
        cannot reach the kept pool, without forming the pair grid.  Only
        the realizability inequalities couple ab with ac and they are
        checked on the surviving slices.
        """
        t_axis, ab_axis, ac_axis = axes
        w_u, w_v = float(weights[u]), float(weights[v])
        cons_u = [c for c in cons if c.m == u]
        cons_v = [c for c in cons if c.m == v]
        ab1 = ab_total - ab_axis
        ac1 = ac_total - ac_axis
        pool: list = []
        threshold = math.inf
        for t0 in t_axis:
            t1 = 1.0 - t0
            if t1 < -1e-12:
                continue
            s_t = float(_xlx_vec(np.array([t0, max(t1, 0.0)])).sum())
            ok_u = (ab_axis <= t0 + 1e-12) & (ab1 >= -1e-12) & (ab1 <= t1 + 1e-12)
            ok_v = (ac_axis <= t0 + 1e-12) & (ac1 >= -1e-12) & (ac1 <= t1 + 1e-12)
            if not (ok_u.any() and ok_v.any()):
                continue
            mi_u = (_xlx_vec(ab_axis) + _xlx_vec(np.maximum(t0 - ab_axis, 0.0))
                    + _xlx_vec(np.maximum(ab1, 0.0))
                    + _xlx_vec(np.maximum(t1 - ab1, 0.0))) - s_t + h_u
            mi_v = (_xlx_vec(ac_axis) + _xlx_vec(np.maximum(t0 - ac_axis, 0.0))
                    + _xlx_vec(np.maximum(ac1, 0.0))
                    + _xlx_vec(np.maximum(t1 - ac1, 0.0))) - s_t + h_v
            for c in cons_u:
                ok_u &= (mi_u <= c.bound + BOUND_SLACK) if c.upper \
                    else (mi_u >= c.bound - BOUND_SLACK)
            for c in cons_v:
                ok_v &= (mi_v <= c.bound + BOUND_SLACK) if c.upper \
                    else (mi_v >= c.bound - BOUND_SLACK)
            su = np.where(ok_u, w_u * mi_u, np.inf)
            sv = np.where(ok_v, w_v * mi_v, np.inf)
            floor = su.min() + sv.min()
            if not math.isfinite(floor) or floor >= threshold:
                continue
            pair = su[:, None] + sv[None, :]
            lo_sum = (np.maximum(0.0, ab_axis[:, None] + ac_axis[None, :] - t0)
                      + np.maximum(0.0, ab1[:, None] + ac1[None, :] - t1))
            hi_sum = (np.minimum(ab_axis[:, None], ac_axis[None, :])
                      + np.minimum(ab1[:, None], ac1[None, :]))
            pair = np.where(
                (lo_sum <= col_a + 1e-12) & (hi_sum >= col_a - 1e-12),
                pair, np.inf,
            )
            flat_pair = pair.ravel()
            take = min(4, flat_pair.size)
            for fi in np.argpartition(flat_pair, take - 1)[:take]:
                obj = float(flat_pair[int(fi)])
                if not math.isfinite(obj):
                    continue
                i, j = divmod(int(fi), len(ac_axis))
                mi_point = [0.0] * len(names)
                mi_point[u] = float(mi_u[i])
                mi_point[v] = float(mi_v[j])
                pool.append((obj,
                             (float(t0), float(ab_axis[i]), float(ac_axis[j])),
                             tuple(mi_point)))
            if len(pool) >= 2 * _ORACLE_POOL:
                pool.sort(key=lambda e: (e[0], e[1]))
                del pool[_ORACLE_POOL:]
                threshold = pool[-1][0]
        return _thin_pool(pool, 1.5 * step)

    if cfg.mode == VARIABLE and n == 2 and not mesh_only:
        evaluate = evaluate_slices
    else:
        evaluate = evaluate_mesh

    def axes_for(step: float, center: tuple[float, ...] | None):
        axes = []
        for idx, (_, _, lo, hi) in enumerate(dims):
            if center is None:
                a, b = lo, hi
            else:
                a = max(lo, center[idx] - step * 10)
                b = min(hi, center[idx] + step * 10)
            axes.append(np.arange(a, b + step * 0.5, step))
        return axes

    cands = evaluate(axes_for(grid, None), grid)
    if not cands:
        return OracleResult(False, math.inf, tuple(base_mi), None)
    step = grid
    for _ in range(refinements):
        step /= 10.0
        refined = []
        for entry in cands:
            local = evaluate(axes_for(step, entry[1]), step)
            if local and local[0][0] <= entry[0]:
                refined.append(local[0])
            else:
                refined.append(entry)
        refined.sort(key=lambda e: (e[0], e[1]))
        cands = refined

    best_obj, best_params, best_mi = cands[0]
    table = _reconstruct(dist, cfg.mode, best_params, dims, rowtot,
                         ab_total, ac_total, cells, col_a)
    return OracleResult(True, best_obj, best_mi, table)


def _reconstruct(dist, mode, params, dims, rowtot, ab_total, ac_total,
                 cells, col_a):
    n = dist.interval_count
    free = n - 1
    t = [float(rt) for rt in rowtot] if mode == CONSTANT else [0.0] * n
    ab = [0.0] * n
    ac = [0.0] * n
    for val, (kind, i, _, _) in zip(params, dims):
        if kind == "t":
            t[i] = val
        elif kind == "ab":
            ab[i] = val
        else:
            ac[i] = val
    if mode == VARIABLE:
        t[free] = 1.0 - sum(t[:free])
    ab[free] = ab_total - sum(ab[:free])
    ac[free] = ac_total - sum(ac[:free])

    lo = [max(0.0, ab[i] + ac[i] - t[i]) for i in range(n)]
    hi = [min(ab[i], ac[i]) for i in range(n)]
    remaining = col_a - sum(lo)
    x_a = []
    for i in range(n):
        extra = min(max(remaining, 0.0), hi[i] - lo[i])
        x_a.append(lo[i] + extra)
        remaining -= extra
    probs = np.zeros_like(np.asarray(dist.probs))
    a_cell, b_cell, c_cell, d_cell = cells
    for i in range(n):
        probs[i, a_cell] = x_a[i]
        probs[i, b_cell] = max(ab[i] - x_a[i], 0.0)
        probs[i, c_cell] = max(ac[i] - x_a[i], 0.0)
        probs[i, d_cell] = max(t[i] - ab[i] - ac[i] + x_a[i], 0.0)
    return dist.replace_probs(probs)


def utility_mi_ceiling(dist: JointDistribution, private_names: list[str],
                       nonprivate_name: str, base: float = 2.0) -> float:
    """Ceiling on a nonprivate MI once the listed private MIs are zero.

    Equals the nonprivate characteristic's entropy conditioned on the listed
    private characteristics, a population quantity untouched by adjustments.
    """
    from .infotheory import characteristic_conditional_entropy
    v = dist.characteristic_index(nonprivate_name)
    us = [dist.characteristic_index(nm) for nm in private_names]
    return characteristic_conditional_entropy(dist, v, us, base)
