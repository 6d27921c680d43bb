"""Shared fixtures and independent oracles.

The oracles recompute entropies and mutual information with plain Python
loops and explicit row-major index arithmetic, independent of the package's
vectorized implementations, so tests can compare the two.
"""

import math

import numpy as np
import pytest

from preaudit import CharacteristicSpec, JointDistribution

BINARY_PAIR = (
    CharacteristicSpec("income", ("low", "high"), "private"),
    CharacteristicSpec("region", ("north", "south"), "nonprivate"),
)

D1_ROWS = (
    (0.30, 0.10, 0.05, 0.05),
    (0.05, 0.05, 0.20, 0.20),
)


def make_binary_pair(rows) -> JointDistribution:
    return JointDistribution(BINARY_PAIR, np.asarray(rows, dtype=float))


@pytest.fixture
def d1() -> JointDistribution:
    return make_binary_pair(D1_ROWS)


def random_binary_pair(rng, n=2, skew=2.0) -> JointDistribution:
    mat = rng.random((n, 4)) ** skew
    mat /= mat.sum()
    return make_binary_pair(mat)


def random_distribution(rng, n, sizes, roles) -> JointDistribution:
    specs = tuple(
        CharacteristicSpec(
            f"c{m}", tuple(f"v{j}" for j in range(size)), role
        )
        for m, (size, role) in enumerate(zip(sizes, roles))
    )
    mat = rng.random((n, int(np.prod(sizes))))
    mat /= mat.sum()
    return JointDistribution(specs, mat)


# -- independent index arithmetic -----------------------------------------


def oracle_strides(sizes):
    strides = [1] * len(sizes)
    for m in range(len(sizes) - 2, -1, -1):
        strides[m] = strides[m + 1] * sizes[m + 1]
    return strides


def oracle_value_of(r, m, sizes):
    return (r // oracle_strides(sizes)[m]) % sizes[m]


def oracle_char_joint(dist, m):
    """P(interval, value of characteristic m), by explicit summation."""
    sizes = [len(c.values) for c in dist.characteristics]
    out = np.zeros((dist.probs.shape[0], sizes[m]))
    for i in range(dist.probs.shape[0]):
        for r in range(dist.probs.shape[1]):
            out[i, oracle_value_of(r, m, sizes)] += dist.probs[i, r]
    return out


# -- independent information measures -------------------------------------


def oracle_entropy(vec, base=2.0):
    total = 0.0
    for p in np.asarray(vec, dtype=float).ravel():
        if p > 0.0:
            total -= p * math.log(p, base)
    return total


def oracle_conditional_entropy(dist, m, base=2.0):
    joint = oracle_char_joint(dist, m)
    cols = joint.sum(axis=0)
    total = 0.0
    for v in range(joint.shape[1]):
        if cols[v] <= 0.0:
            continue
        for i in range(joint.shape[0]):
            p = joint[i, v] / cols[v]
            if p > 0.0:
                total -= cols[v] * p * math.log(p, base)
    return total


def oracle_mi(dist, m, base=2.0):
    """Double-sum definition of I(data; characteristic m)."""
    joint = oracle_char_joint(dist, m)
    rows = joint.sum(axis=1)
    cols = joint.sum(axis=0)
    total = 0.0
    for i in range(joint.shape[0]):
        for v in range(joint.shape[1]):
            p = joint[i, v]
            if p > 0.0:
                total += p * math.log(p / (rows[i] * cols[v]), base)
    return total
