"""Entropy and mutual information for interval/characteristic tables.

All quantities default to bits; pass ``base=math.e`` for nats.  The
0 * log 0 = 0 convention applies throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .distribution import (
    JointDistribution,
    MASS_TOL,
    characteristics_joint,
    fiber_matrix,
    interval_marginal,
)

#: Mutual information this far below zero is treated as rounding noise.
NEG_MI_TOL = 1e-12


def _unit(base: float) -> str:
    if base == 2:
        return "bits"
    if abs(base - math.e) < 1e-12:
        return "nats"
    return f"log{base}"


def xlogx(x: np.ndarray | float, base: float = 2.0) -> np.ndarray | float:
    """x * log(x) with 0 (and rounding-level negatives) mapped to 0."""
    arr = np.asarray(x, dtype=float)
    out = np.zeros_like(arr)
    mask = arr > 0
    np.multiply(arr, np.log(arr, where=mask, out=np.zeros_like(arr)), out=out)
    out[~mask] = 0.0
    out /= math.log(base)
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out


def entropy(p: np.ndarray, base: float = 2.0) -> float:
    """Shannon entropy of a probability vector (or flattened table)."""
    arr = np.asarray(p, dtype=float).ravel()
    if np.any(arr < 0):
        raise ValueError("entropy input has a negative entry")
    total = float(arr.sum())
    if abs(total - 1.0) > MASS_TOL:
        raise ValueError(f"entropy input is not normalized: mass {total!r}")
    return float(-np.sum(xlogx(arr, base)))


def _sum_xlogx(arr: np.ndarray, base: float) -> float:
    return float(np.sum(xlogx(arr, base)))


def _resolve(dist: JointDistribution, m: int | str) -> int:
    if isinstance(m, str):
        return dist.characteristic_index(m)
    return int(m)


def conditional_entropy(dist: JointDistribution, m: int | str,
                        base: float = 2.0) -> float:
    """H(data | characteristic m), by index or name.

    Values of m with zero probability contribute nothing.
    """
    fib = fiber_matrix(dist, _resolve(dist, m))
    marg = fib.sum(axis=0)
    return -_sum_xlogx(fib, base) + _sum_xlogx(marg, base)


def mutual_information(dist: JointDistribution, m: int | str,
                       base: float = 2.0) -> float:
    """I(data; characteristic m), clipped to zero from rounding noise."""
    h_y = entropy(interval_marginal(dist), base)
    mi = h_y - conditional_entropy(dist, _resolve(dist, m), base)
    if mi < 0:
        if mi < -NEG_MI_TOL:
            raise ValueError(f"mutual information {mi!r} below rounding tolerance")
        mi = 0.0
    return mi


def conditional_mutual_information(
    dist: JointDistribution, m: int | str, given: int | str, base: float = 2.0
) -> float:
    """I(data; characteristic m | characteristic ``given``)."""
    m = _resolve(dist, m)
    given = _resolve(dist, given)
    if m == given:
        raise ValueError("conditioning characteristic must differ from the target")
    tab = dist.table
    km, kg = tab.sizes[m], tab.sizes[given]
    # cube[i, v_m, v_g] = P(interval i, m = v_m, given = v_g)
    cube = np.zeros((dist.interval_count, km, kg))
    for r in range(tab.size):
        cube[:, tab.value_index(r, m), tab.value_index(r, given)] += dist.probs[:, r]
    total = 0.0
    for w in range(kg):
        block = cube[:, :, w]
        pw = float(block.sum())
        if pw <= 0:
            continue
        cond = block / pw
        mi_w = (
            -_sum_xlogx(cond.sum(axis=1), base)
            - _sum_xlogx(cond.sum(axis=0), base)
            + _sum_xlogx(cond, base)
        )
        total += pw * mi_w
    return max(total, 0.0)


def characteristic_conditional_entropy(
    dist: JointDistribution, m: int | str,
    given: list[int | str] | tuple[int | str, ...], base: float = 2.0
) -> float:
    """H(characteristic m | other characteristics), data marginalized out."""
    m = _resolve(dist, m)
    given = [_resolve(dist, g) for g in given]
    if m in given:
        raise ValueError("conditioning set must not contain the target")
    joint = characteristics_joint(dist, [m] + given)
    if not given:
        return -_sum_xlogx(joint, base)
    cond_marg = joint.sum(axis=0)
    return -_sum_xlogx(joint, base) + _sum_xlogx(cond_marg, base)


@dataclass(frozen=True)
class MiRegion:
    """Feasible region for a (private, nonprivate) mutual-information pair."""

    private_ceiling: float
    nonprivate_ceiling: float
    difference_floor: float
    difference_ceiling: float

    def contains(self, mi_private: float, mi_nonprivate: float, tol: float = 0.0) -> bool:
        diff = mi_nonprivate - mi_private
        return (
            -tol <= mi_private <= self.private_ceiling + tol
            and -tol <= mi_nonprivate <= self.nonprivate_ceiling + tol
            and self.difference_floor - tol <= diff <= self.difference_ceiling + tol
        )


def mi_region(
    dist: JointDistribution, private_m: int | str, nonprivate_m: int | str,
    base: float = 2.0
) -> MiRegion:
    """Bounds every achievable MI pair must satisfy for this owner population.

    The box caps each index at its characteristic's entropy; the difference
    band caps I(nonprivate) - I(private) between -H(private | nonprivate)
    and H(nonprivate | private).  All four depend only on the combination
    marginal, which adjustments preserve.
    """
    private_m = _resolve(dist, private_m)
    nonprivate_m = _resolve(dist, nonprivate_m)
    if private_m == nonprivate_m:
        raise ValueError("private and nonprivate characteristics must differ")
    h_u = -_sum_xlogx(characteristics_joint(dist, [private_m]), base)
    h_v = -_sum_xlogx(characteristics_joint(dist, [nonprivate_m]), base)
    h_u_given_v = characteristic_conditional_entropy(dist, private_m, [nonprivate_m], base)
    h_v_given_u = characteristic_conditional_entropy(dist, nonprivate_m, [private_m], base)
    return MiRegion(h_u, h_v, -h_u_given_v, h_v_given_u)


@dataclass(frozen=True)
class MiReport:
    """Entropies and mutual information for every characteristic of a table."""

    unit: str
    data_entropy: float
    names: tuple[str, ...]
    roles: tuple[str, ...]
    char_entropies: tuple[float, ...]
    conditional_data_entropies: tuple[float, ...]
    mutual_informations: tuple[float, ...]
    regions: tuple[tuple[str, str, MiRegion], ...]

    def mutual_information_of(self, name: str) -> float:
        return self.mutual_informations[self.names.index(name)]

    def to_json_dict(self) -> dict:
        return {
            "unit": self.unit,
            "data_entropy": self.data_entropy,
            "characteristics": [
                {
                    "name": n,
                    "role": role,
                    "entropy": h,
                    "conditional_data_entropy": hc,
                    "mutual_information": mi,
                }
                for n, role, h, hc, mi in zip(
                    self.names,
                    self.roles,
                    self.char_entropies,
                    self.conditional_data_entropies,
                    self.mutual_informations,
                )
            ],
            "regions": [
                {
                    "private": u,
                    "nonprivate": v,
                    "private_ceiling": reg.private_ceiling,
                    "nonprivate_ceiling": reg.nonprivate_ceiling,
                    "difference_floor": reg.difference_floor,
                    "difference_ceiling": reg.difference_ceiling,
                }
                for u, v, reg in self.regions
            ],
        }

    def dumps(self, indent: int | None = None) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=indent)


def full_report(dist: JointDistribution, base: float = 2.0) -> MiReport:
    names = tuple(c.name for c in dist.characteristics)
    roles = tuple(c.role for c in dist.characteristics)
    h_y = entropy(interval_marginal(dist), base)
    h_c, h_cond, mis = [], [], []
    for m in range(len(names)):
        h_c.append(-_sum_xlogx(characteristics_joint(dist, [m]), base))
        h_cond.append(conditional_entropy(dist, m, base))
        mis.append(mutual_information(dist, m, base))
    regions = tuple(
        (names[u], names[v], mi_region(dist, u, v, base))
        for u in dist.roles("private")
        for v in dist.roles("nonprivate")
    )
    return MiReport(
        unit=_unit(base),
        data_entropy=h_y,
        names=names,
        roles=roles,
        char_entropies=tuple(h_c),
        conditional_data_entropies=tuple(h_cond),
        mutual_informations=tuple(mis),
        regions=regions,
    )
