"""Estimator-style wrapper around the audit pipeline.

``PreventiveAuditor`` follows the familiar fit/transform shape: fit learns
a quantizer, tallies the joint table, runs the bound-constrained
adjustment, and derives a release plan; transform resamples record
intervals through that plan.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .distribution import CharacteristicSpec
from .infotheory import full_report
from .ingest import (
    RecordSet,
    apply_release_plan,
    binarize_characteristic,
    build_empirical_joint,
    build_release_plan,
    fit_quantizer,
)
from .optimizer import AuditConfig, solve_audit


def _as_spec(item) -> CharacteristicSpec:
    if isinstance(item, CharacteristicSpec):
        return item
    if isinstance(item, dict):
        return CharacteristicSpec(item["name"], tuple(item["values"]),
                                  item["role"])
    name, values, role = item
    return CharacteristicSpec(name, tuple(values), role)


def _column(X, name: str):
    if isinstance(X, dict):
        if name not in X:
            raise ValueError(f"input is missing column {name!r}")
        return list(X[name])
    if hasattr(X, "columns"):
        if name not in X.columns:
            raise ValueError(f"input is missing column {name!r}")
        return list(X[name])
    rows = list(X)
    try:
        return [row[name] for row in rows]
    except (KeyError, TypeError, IndexError):
        raise ValueError(f"input is missing column {name!r}") from None


class PreventiveAuditor(TransformerMixin, BaseEstimator):
    """Audit a data column against private and nonprivate characteristics.

    Parameters mirror the pipeline stages: ``characteristics`` declares the
    owner attributes (specs, dicts, or (name, values, role) tuples),
    ``intervals``/``strategy`` configure quantization, ``binarize`` merges
    many-valued characteristics into two groups before auditing, and the
    remaining parameters are passed through to the adjustment solver.
    ``weights`` defaults to +1 per private and -1 per nonprivate
    characteristic, so the solver trades privacy gains against information
    kept for the listed nonprivate ones.

    After ``fit`` the instance exposes ``distribution_`` (empirical),
    ``result_`` (solver output), ``audited_``, ``plan_`` and ``report_``.
    ``transform`` maps each record's quantized interval to a released
    interval by sampling the plan with ``random_state``.
    """

    def __init__(self, characteristics=None, intervals: int = 8,
                 strategy: str = "equal-frequency", binarize: bool = True,
                 mode: str = "constant", weights=None, upper_bounds=None,
                 lower_bounds=None, privacy_margin=None, utility_margin=None,
                 stop_tol: float = 1e-9, max_iters: int = 1_000_000,
                 value_column: str = "value", id_column: str = "id",
                 random_state: int = 0):
        self.characteristics = characteristics
        self.intervals = intervals
        self.strategy = strategy
        self.binarize = binarize
        self.mode = mode
        self.weights = weights
        self.upper_bounds = upper_bounds
        self.lower_bounds = lower_bounds
        self.privacy_margin = privacy_margin
        self.utility_margin = utility_margin
        self.stop_tol = stop_tol
        self.max_iters = max_iters
        self.value_column = value_column
        self.id_column = id_column
        self.random_state = random_state

    def _specs(self) -> tuple[CharacteristicSpec, ...]:
        if not self.characteristics:
            raise ValueError("characteristics must be declared before fitting")
        return tuple(_as_spec(item) for item in self.characteristics)

    def _records(self, X, specs: tuple[CharacteristicSpec, ...]) -> RecordSet:
        values = np.asarray([float(v) for v in _column(X, self.value_column)])
        try:
            ids = tuple(str(i) for i in _column(X, self.id_column))
        except ValueError:
            ids = tuple(str(i) for i in range(len(values)))
        labels = tuple(
            tuple(str(v) for v in _column(X, spec.name)) for spec in specs
        )
        return RecordSet(specs, ids, values, labels)

    def fit(self, X, y=None):
        specs = self._specs()
        rs = self._records(X, specs)
        self.quantizer_ = fit_quantizer(rs.values, self.strategy,
                                        self.intervals)
        assigned = self.quantizer_.assign(rs.values)
        groupings = {}
        if self.binarize:
            for m, spec in enumerate(specs):
                if len(spec.values) > 2:
                    part = binarize_characteristic(assigned, rs.labels[m],
                                                   spec.values)
                    groupings[spec.name] = (part.first, part.second)
        self.groupings_ = groupings
        self.distribution_ = build_empirical_joint(rs, self.quantizer_,
                                                   groupings)
        weights = self.weights
        if weights is None:
            weights = {
                spec.name: 1.0 if spec.role == "private" else -1.0
                for spec in self.distribution_.characteristics
            }
        config = AuditConfig(
            mode=self.mode,
            weights=dict(weights),
            upper_bounds=dict(self.upper_bounds or {}),
            lower_bounds=dict(self.lower_bounds or {}),
            privacy_margin=self.privacy_margin,
            utility_margin=self.utility_margin,
            stop_tol=self.stop_tol,
            max_iters=self.max_iters,
        )
        self.result_ = solve_audit(self.distribution_, config)
        self.audited_ = self.result_.audited
        self.plan_ = build_release_plan(self.distribution_, self.audited_)
        self.report_ = full_report(self.audited_)
        return self

    def _combinations(self, rs: RecordSet) -> np.ndarray:
        table = self.distribution_.table
        maps = []
        for m, spec in enumerate(self.distribution_.characteristics):
            raw = {}
            for gi, label in enumerate(spec.values):
                for v in label.split("|"):
                    raw[v] = gi
            maps.append(raw)
        out = np.empty(len(rs), dtype=int)
        for idx in range(len(rs)):
            out[idx] = table.flatten([
                maps[m][rs.labels[m][idx]] for m in range(len(maps))
            ])
        return out

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "plan_")
        rs = self._records(X, self._specs())
        assigned = self.quantizer_.assign(rs.values)
        combos = self._combinations(rs)
        rng = np.random.default_rng(self.random_state)
        released = apply_release_plan(self.plan_, assigned, combos, rng)
        return released.reshape(-1, 1)

    def get_feature_names_out(self, input_features=None):
        return np.asarray(["released_interval"], dtype=object)
