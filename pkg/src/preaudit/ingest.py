"""Turn raw records into auditable tables and release plans.

A record carries an id, a numeric data value, and one label per declared
characteristic.  Ingestion quantizes values into intervals, optionally
merges characteristic values into two groups (picking the split that keeps
the most information about the data), tallies the empirical joint table,
and later converts an audited table back into a per-record release plan.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass

import numpy as np

from .distribution import CharacteristicSpec, JointDistribution

EQUAL_FREQUENCY = "equal-frequency"
EQUAL_WIDTH = "equal-width"

#: Two tallied MI values closer than this count as a tie for the
#: bipartition search, which then falls back to the lexicographic order.
BIPARTITION_TIE_TOL = 1e-12

MAX_BIPARTITION_VALUES = 20


@dataclass(frozen=True)
class Quantizer:
    """Maps data values to interval indices via fixed cut points.

    Intervals are right-open: a value equal to a cut point falls in the
    interval above it.
    """

    strategy: str
    cut_points: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.strategy not in (EQUAL_FREQUENCY, EQUAL_WIDTH):
            raise ValueError(f"unknown quantizer strategy {self.strategy!r}")
        cuts = tuple(float(c) for c in self.cut_points)
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ValueError("cut points must be strictly increasing")
        object.__setattr__(self, "cut_points", cuts)

    @property
    def interval_count(self) -> int:
        return len(self.cut_points) + 1

    def assign(self, values: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.cut_points, np.asarray(values, dtype=float),
                               side="right")

    def to_json_dict(self) -> dict:
        return {"strategy": self.strategy, "cut_points": list(self.cut_points)}


def fit_quantizer(values: np.ndarray, strategy: str = EQUAL_FREQUENCY,
                  intervals: int = 8) -> Quantizer:
    """Choose cut points from data.

    Equal-frequency places cuts at the k/n quantiles and needs at least
    ``intervals`` distinct values; equal-width splits the observed range
    evenly and needs a nonconstant column.
    """
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        raise ValueError("no values to quantize")
    if not np.all(np.isfinite(vals)):
        raise ValueError("values must be finite")
    if intervals < 2:
        raise ValueError("need at least two intervals")
    if strategy == EQUAL_FREQUENCY:
        if np.unique(vals).size < intervals:
            raise ValueError(
                f"equal-frequency needs at least {intervals} distinct values"
            )
        qs = np.arange(1, intervals) / intervals
        cuts = np.quantile(vals, qs)
        if np.any(np.diff(cuts) <= 0):
            raise ValueError(
                "tied values collapse the equal-frequency cut points"
            )
    elif strategy == EQUAL_WIDTH:
        lo, hi = float(vals.min()), float(vals.max())
        if hi <= lo:
            raise ValueError("constant value column cannot be quantized")
        cuts = lo + (hi - lo) * np.arange(1, intervals) / intervals
    else:
        raise ValueError(f"unknown quantizer strategy {strategy!r}")
    return Quantizer(strategy, tuple(float(c) for c in cuts))


@dataclass(frozen=True)
class RecordSet:
    """Parsed records: ids, numeric values, and one label per characteristic."""

    characteristics: tuple[CharacteristicSpec, ...]
    ids: tuple[str, ...]
    values: np.ndarray
    labels: tuple[tuple[str, ...], ...]  # one tuple per characteristic

    def __post_init__(self) -> None:
        object.__setattr__(self, "characteristics", tuple(self.characteristics))
        vals = np.asarray(self.values, dtype=float)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        labels = tuple(tuple(col) for col in self.labels)
        object.__setattr__(self, "labels", labels)
        nrec = len(self.ids)
        if vals.shape != (nrec,):
            raise ValueError("value column length does not match ids")
        if len(labels) != len(self.characteristics):
            raise ValueError("need one label column per characteristic")
        for spec, col in zip(self.characteristics, labels):
            if len(col) != nrec:
                raise ValueError(
                    f"label column for {spec.name!r} has wrong length"
                )
            bad = set(col) - set(spec.values)
            if bad:
                raise ValueError(
                    f"unknown value {sorted(bad)[0]!r} for characteristic "
                    f"{spec.name!r}"
                )

    def __len__(self) -> int:
        return len(self.ids)


def read_records_csv(path: str, characteristics: tuple[CharacteristicSpec, ...],
                     id_column: str = "id",
                     value_column: str = "value") -> RecordSet:
    """Load records from CSV with columns id, value, and one per characteristic."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty records file")
        missing = [
            col for col in [id_column, value_column]
            + [c.name for c in characteristics]
            if col not in reader.fieldnames
        ]
        if missing:
            raise ValueError(f"{path}: missing column {missing[0]!r}")
        ids, values = [], []
        label_cols: list[list[str]] = [[] for _ in characteristics]
        for lineno, row in enumerate(reader, start=2):
            ids.append(row[id_column])
            try:
                values.append(float(row[value_column]))
            except (TypeError, ValueError):
                raise ValueError(
                    f"{path}:{lineno}: non-numeric value {row[value_column]!r}"
                ) from None
            for col, spec in zip(label_cols, characteristics):
                col.append(row[spec.name])
    if not ids:
        raise ValueError(f"{path}: no records")
    return RecordSet(characteristics, tuple(ids), np.array(values),
                     tuple(tuple(c) for c in label_cols))


def _mi_from_counts(table: np.ndarray) -> float:
    total = table.sum()
    if total <= 0:
        return 0.0
    p = table / total

    def s(a):
        a = a[a > 0]
        return float(np.sum(a * np.log2(a)))

    return s(p.ravel()) - s(p.sum(axis=1)) - s(p.sum(axis=0))


@dataclass(frozen=True)
class Bipartition:
    """A characteristic's values split into two groups, with the tallied MI."""

    first: tuple[str, ...]
    second: tuple[str, ...]
    mi: float


def binarize_characteristic(intervals: np.ndarray, labels: tuple[str, ...] | list[str],
                            values: tuple[str, ...],
                            contiguous: bool = False) -> Bipartition:
    """Split a characteristic's values into the two groups that retain the
    most mutual information with the quantized data value.

    All 2^(k-1) - 1 bipartitions are scored (prefix splits only when
    ``contiguous`` is set, for ordinal value sets); MI ties resolve to the
    lexicographically smallest membership pattern, so a characteristic
    carrying no information splits into the first value versus the rest.
    """
    k = len(values)
    if k < 2:
        raise ValueError("need at least two values to bipartition")
    if k > MAX_BIPARTITION_VALUES:
        raise ValueError(
            f"{k} values exceed the bipartition cap of {MAX_BIPARTITION_VALUES}"
        )
    intervals = np.asarray(intervals)
    value_index = {v: i for i, v in enumerate(values)}
    try:
        lab_idx = np.array([value_index[l] for l in labels])
    except KeyError as exc:
        raise ValueError(f"unknown value {exc.args[0]!r}") from None
    n_int = int(intervals.max()) + 1 if intervals.size else 1
    counts = np.zeros((n_int, k))
    np.add.at(counts, (intervals, lab_idx), 1.0)

    if contiguous:
        masks = []
        for cut in range(1, k):
            bits = tuple(1 if i < cut else 0 for i in range(k))
            masks.append(bits)
    else:
        masks = []
        for sub in range(1, 1 << (k - 1)):
            # bit i set puts value i+1 in the second group; value 0 stays first
            bits = tuple(
                [1] + [0 if (sub >> i) & 1 else 1 for i in range(k - 1)]
            )
            masks.append(bits)

    best: tuple[float, tuple[int, ...]] | None = None
    for bits in masks:
        sel = np.array(bits, dtype=bool)
        merged = np.stack([counts[:, sel].sum(axis=1),
                           counts[:, ~sel].sum(axis=1)], axis=1)
        mi = _mi_from_counts(merged)
        if best is None:
            best = (mi, bits)
            continue
        if mi > best[0] + BIPARTITION_TIE_TOL:
            best = (mi, bits)
        elif abs(mi - best[0]) <= BIPARTITION_TIE_TOL and bits < best[1]:
            best = (max(mi, best[0]), bits)
    assert best is not None
    mi, bits = best
    first = tuple(v for v, b in zip(values, bits) if b)
    second = tuple(v for v, b in zip(values, bits) if not b)
    return Bipartition(first, second, mi)


def _grouped_spec(spec: CharacteristicSpec,
                  groups: tuple[tuple[str, ...], ...]) -> CharacteristicSpec:
    flat = [v for g in groups for v in g]
    if sorted(flat) != sorted(spec.values):
        raise ValueError(
            f"groups for {spec.name!r} must cover each value exactly once"
        )
    return CharacteristicSpec(
        spec.name, tuple("|".join(g) for g in groups), spec.role
    )


def build_empirical_joint(rs: RecordSet, quantizer: Quantizer,
                          groupings: dict[str, tuple[tuple[str, ...], ...]] | None = None,
                          ) -> JointDistribution:
    """Tally records into a joint table of intervals and combinations.

    ``groupings`` optionally merges a characteristic's values (for example
    the result of ``binarize_characteristic``); cell probabilities are
    exact record counts divided by the record count.
    """
    groupings = groupings or {}
    specs = []
    group_maps = []
    for spec in rs.characteristics:
        groups = groupings.get(spec.name)
        if groups is None:
            groups = tuple((v,) for v in spec.values)
        specs.append(_grouped_spec(spec, tuple(tuple(g) for g in groups)))
        gmap = {}
        for gi, g in enumerate(groups):
            for v in g:
                gmap[v] = gi
        group_maps.append(gmap)
    specs = tuple(specs)

    intervals = np.asarray(quantizer.assign(rs.values))
    dist0 = JointDistribution(specs, np.zeros((quantizer.interval_count,
                                               int(np.prod([len(s.values) for s in specs])))))
    tab = dist0.table
    counts = np.zeros((quantizer.interval_count, tab.size))
    nrec = len(rs)
    for idx in range(nrec):
        combo = tab.flatten([
            group_maps[m][rs.labels[m][idx]] for m in range(len(specs))
        ])
        counts[intervals[idx], combo] += 1.0
    return JointDistribution(specs, counts / nrec)


@dataclass(frozen=True)
class ReleasePlan:
    """Per-combination couplings from original to released intervals.

    ``couplings[r][i]`` is the probability row for releasing a record that
    sits in interval i with combination r; rows are stochastic and their
    push-forward of the source table's column r equals the target's.
    """

    couplings: np.ndarray  # (combinations, intervals, intervals)

    def __post_init__(self) -> None:
        arr = np.array(self.couplings, dtype=float, copy=True)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValueError("couplings must be (combinations, n, n)")
        rows = arr.sum(axis=2)
        if np.any(np.abs(rows - 1.0) > 1e-9):
            raise ValueError("coupling rows must each sum to one")
        arr.flags.writeable = False
        object.__setattr__(self, "couplings", arr)

    def to_json_dict(self) -> dict:
        return {"couplings": [[list(map(float, row)) for row in mat]
                              for mat in self.couplings]}


def _northwest(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    n = len(u)
    plan = np.zeros((n, n))
    uu = u.astype(float).copy()
    vv = v.astype(float).copy()
    i = j = 0
    while i < n and j < n:
        x = min(uu[i], vv[j])
        plan[i, j] = x
        uu[i] -= x
        vv[j] -= x
        if uu[i] == 0.0:
            i += 1
        else:
            j += 1
    # Mass mismatch between u and v is bounded by the caller's marginal
    # check; park any residue in the last column so rows still sum to u.
    plan[:, n - 1] += uu
    return plan


def build_release_plan(before: JointDistribution,
                       after: JointDistribution) -> ReleasePlan:
    """Northwest-corner couplings carrying each combination column of
    ``before`` onto the same column of ``after``.

    Requires matching shapes and combination marginals; adjustments
    preserve the latter in both modes.
    """
    if before.probs.shape != after.probs.shape:
        raise ValueError("tables must have the same shape")
    if before.characteristics != after.characteristics:
        raise ValueError("tables must declare the same characteristics")
    n, k = before.probs.shape
    cols_b = before.probs.sum(axis=0)
    cols_a = after.probs.sum(axis=0)
    for r in range(k):
        if abs(cols_b[r] - cols_a[r]) > 1e-12:
            raise ValueError(
                f"combination marginal mismatch in column {r}: "
                f"{cols_b[r]!r} vs {cols_a[r]!r}"
            )
    couplings = np.zeros((k, n, n))
    for r in range(k):
        u = before.probs[:, r]
        v = after.probs[:, r]
        transport = _northwest(u, v)
        for i in range(n):
            if u[i] > 1e-15:
                couplings[r, i] = transport[i] / u[i]
                total = couplings[r, i].sum()
                couplings[r, i] /= total
            else:
                couplings[r, i, i] = 1.0
    return ReleasePlan(couplings)


def apply_release_plan(plan: ReleasePlan, intervals: np.ndarray,
                       combinations: np.ndarray,
                       rng: np.random.Generator) -> np.ndarray:
    """Resample each record's interval through its combination's coupling."""
    intervals = np.asarray(intervals)
    combinations = np.asarray(combinations)
    if intervals.shape != combinations.shape:
        raise ValueError("intervals and combinations must align")
    n = plan.couplings.shape[1]
    out = np.empty_like(intervals)
    for idx in range(intervals.size):
        row = plan.couplings[combinations[idx], intervals[idx]]
        out[idx] = rng.choice(n, p=row)
    return out
