"""Discrete joint distributions over data intervals and owner characteristics.

The central object is a table P[i, r] giving the probability that a data
point falls in interval i while its owner has characteristic-value
combination r.  Combinations enumerate the Cartesian product of the declared
characteristic value sets in row-major order, so with two binary
characteristics the four columns are (0,0), (0,1), (1,0), (1,1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

ROLE_PRIVATE = "private"
ROLE_NONPRIVATE = "nonprivate"
_ROLES = (ROLE_PRIVATE, ROLE_NONPRIVATE)

#: Total probability mass may deviate from one by at most this much.
MASS_TOL = 1e-12


@dataclass(frozen=True)
class CharacteristicSpec:
    """One owner characteristic: a name, its value labels, and its role."""

    name: str
    values: tuple[str, ...]
    role: str

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("characteristic name must be nonempty")
        object.__setattr__(self, "values", tuple(str(v) for v in self.values))
        if len(self.values) < 2:
            raise ValueError(
                f"characteristic {self.name!r} needs at least two values"
            )
        if len(set(self.values)) != len(self.values):
            raise ValueError(f"characteristic {self.name!r} has duplicate values")
        if self.role not in _ROLES:
            raise ValueError(
                f"characteristic {self.name!r} role must be one of {_ROLES}"
            )


class CombinationTable:
    """Row-major flattening of characteristic value tuples to column indices."""

    def __init__(self, characteristics: Sequence[CharacteristicSpec]):
        self.characteristics = tuple(characteristics)
        self.sizes = tuple(len(c.values) for c in self.characteristics)
        self.size = int(np.prod(self.sizes)) if self.sizes else 0
        # strides[m] = product of sizes of later characteristics
        strides = []
        acc = 1
        for n in reversed(self.sizes):
            strides.append(acc)
            acc *= n
        self._strides = tuple(reversed(strides))

    def flatten(self, values: Sequence[int]) -> int:
        if len(values) != len(self.sizes):
            raise ValueError("value tuple length does not match characteristics")
        r = 0
        for v, n, st in zip(values, self.sizes, self._strides):
            if not 0 <= v < n:
                raise ValueError(f"value index {v} out of range for size {n}")
            r += v * st
        return r

    def unflatten(self, r: int) -> tuple[int, ...]:
        if not 0 <= r < self.size:
            raise ValueError(f"combination index {r} out of range")
        out = []
        for n, st in zip(self.sizes, self._strides):
            out.append((r // st) % n)
        return tuple(out)

    def value_index(self, r: int, m: int) -> int:
        """Value index of characteristic m inside combination r."""
        return (r // self._strides[m]) % self.sizes[m]

    def fiber(self, m: int, v: int) -> np.ndarray:
        """Column indices whose combination assigns value v to characteristic m."""
        if not 0 <= m < len(self.sizes):
            raise ValueError(f"characteristic index {m} out of range")
        if not 0 <= v < self.sizes[m]:
            raise ValueError(f"value index {v} out of range")
        cols = np.arange(self.size)
        return cols[(cols // self._strides[m]) % self.sizes[m] == v]


@lru_cache(maxsize=None)
def _table_for(characteristics: tuple[CharacteristicSpec, ...]) -> CombinationTable:
    return CombinationTable(characteristics)


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Joint distribution of data intervals and characteristic combinations.

    ``probs`` has shape (interval_count, combination_count); the stored array
    is read-only so every adjustment produces a fresh object.
    """

    characteristics: tuple[CharacteristicSpec, ...]
    probs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "characteristics", tuple(self.characteristics))
        names = [c.name for c in self.characteristics]
        if len(set(names)) != len(names):
            raise ValueError("duplicate characteristic name")
        arr = np.array(self.probs, dtype=float, copy=True)
        if arr.ndim != 2:
            raise ValueError("probability table must be two-dimensional")
        if arr.shape[1] != self.table.size:
            raise ValueError(
                f"table has {arr.shape[1]} columns but the characteristics "
                f"define {self.table.size} combinations"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "probs", arr)

    @property
    def table(self) -> CombinationTable:
        return _table_for(self.characteristics)

    @property
    def interval_count(self) -> int:
        return self.probs.shape[0]

    @property
    def combination_count(self) -> int:
        return self.probs.shape[1]

    def characteristic_index(self, name: str) -> int:
        for m, c in enumerate(self.characteristics):
            if c.name == name:
                return m
        raise KeyError(f"no characteristic named {name!r}")

    def roles(self, role: str) -> list[int]:
        return [m for m, c in enumerate(self.characteristics) if c.role == role]

    def replace_probs(self, probs: np.ndarray) -> "JointDistribution":
        return JointDistribution(self.characteristics, probs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, JointDistribution):
            return NotImplemented
        return (
            self.characteristics == other.characteristics
            and self.probs.shape == other.probs.shape
            and bool(np.array_equal(self.probs, other.probs))
        )


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    failures: tuple[str, ...] = ()

    @property
    def first_failure(self) -> str | None:
        return self.failures[0] if self.failures else None


def validate(dist: JointDistribution) -> ValidationResult:
    """Check the basic distribution invariants, reporting every violation.

    The failure list preserves check order, so ``first_failure`` names the
    first violated invariant.
    """
    failures: list[str] = []
    probs = dist.probs
    if np.any(probs < 0):
        i, r = map(int, np.argwhere(probs < 0)[0])
        failures.append(
            f"negative probability at interval {i}, combination {r}: {probs[i, r]!r}"
        )
    total = float(probs.sum())
    if abs(total - 1.0) > MASS_TOL:
        failures.append(f"not normalized: total mass {total!r}")
    if dist.interval_count < 2:
        failures.append(
            f"needs at least 2 intervals, got {dist.interval_count}"
        )
    if dist.combination_count < 4:
        failures.append(
            f"needs at least 4 combinations, got {dist.combination_count}"
        )
    return ValidationResult(not failures, tuple(failures))


def interval_marginal(dist: JointDistribution) -> np.ndarray:
    """Distribution of the data value over intervals."""
    return dist.probs.sum(axis=1)


def combination_marginal(dist: JointDistribution) -> np.ndarray:
    """Distribution of the owner characteristics over combinations."""
    return dist.probs.sum(axis=0)


def group_sum(dist: JointDistribution, i: int, cells: Iterable[int]) -> float:
    """Probability mass of a set of combination cells within interval i."""
    idx = list(cells)
    if not idx:
        raise ValueError("empty combination group")
    if not 0 <= i < dist.interval_count:
        raise ValueError(f"interval index {i} out of range")
    return float(dist.probs[i, idx].sum())


def fiber_matrix(dist: JointDistribution, m: int) -> np.ndarray:
    """Aggregate the table to shape (intervals, values of characteristic m)."""
    tab = dist.table
    k = tab.sizes[m]
    out = np.empty((dist.interval_count, k))
    for v in range(k):
        out[:, v] = dist.probs[:, tab.fiber(m, v)].sum(axis=1)
    return out


def characteristic_marginal(dist: JointDistribution, m: int) -> np.ndarray:
    """Distribution of characteristic m's values."""
    return fiber_matrix(dist, m).sum(axis=0)


def characteristics_joint(dist: JointDistribution, ms: Sequence[int]) -> np.ndarray:
    """Joint distribution of a subset of characteristics, data marginalized out.

    The result has one axis per entry of ``ms`` in the given order.
    """
    if len(set(ms)) != len(ms):
        raise ValueError("characteristic indices must be distinct")
    tab = dist.table
    col = combination_marginal(dist)
    shape = tuple(tab.sizes[m] for m in ms)
    out = np.zeros(shape)
    for r in range(tab.size):
        key = tuple(tab.value_index(r, m) for m in ms)
        out[key] += col[r]
    return out


def binary_pair_roles(dist: JointDistribution) -> tuple[int, int]:
    """Indices (private, nonprivate) for a table of two binary characteristics.

    Raises unless there is exactly one characteristic per role and both are
    binary; the structural checkers and the stepwise routine require this
    layout.
    """
    priv = dist.roles(ROLE_PRIVATE)
    nonpriv = dist.roles(ROLE_NONPRIVATE)
    if len(priv) != 1 or len(nonpriv) != 1:
        raise ValueError(
            "need exactly one private and one nonprivate characteristic"
        )
    u, v = priv[0], nonpriv[0]
    tab = _table_for(dist.characteristics)
    if tab.sizes[u] != 2 or tab.sizes[v] != 2:
        raise ValueError("both characteristics must be binary")
    return u, v


def to_json_dict(dist: JointDistribution) -> dict:
    return {
        "characteristics": [
            {"name": c.name, "values": list(c.values), "role": c.role}
            for c in dist.characteristics
        ],
        "interval_count": dist.interval_count,
        "probs": [[float(x) for x in row] for row in dist.probs],
    }


def from_json_dict(doc: dict) -> JointDistribution:
    unknown = set(doc) - {"characteristics", "probs", "interval_count"}
    if unknown:
        raise ValueError(f"unknown distribution keys: {sorted(unknown)}")
    try:
        chars = tuple(
            CharacteristicSpec(c["name"], tuple(c["values"]), c["role"])
            for c in doc["characteristics"]
        )
        probs = np.array(doc["probs"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed distribution document: {exc}") from exc
    dist = JointDistribution(chars, probs)
    if dist.interval_count != doc.get("interval_count", dist.interval_count):
        raise ValueError(
            "interval_count does not match the probability table"
        )
    return dist


def dumps(dist: JointDistribution, indent: int | None = None) -> str:
    # repr-based float serialization keeps round-trips bit-exact
    return json.dumps(to_json_dict(dist), sort_keys=True, indent=indent)


def loads(text: str) -> JointDistribution:
    return from_json_dict(json.loads(text))
