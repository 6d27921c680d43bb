"""Preventive audits for data sharing.

Tools for measuring and adjusting the mutual information between shareable
data intervals and their owners' private and nonprivate characteristics,
before the data leaves the owner's hands.
"""

from .distribution import (
    CharacteristicSpec,
    CombinationTable,
    JointDistribution,
    ValidationResult,
    binary_pair_roles,
    characteristic_marginal,
    characteristics_joint,
    combination_marginal,
    dumps,
    fiber_matrix,
    group_sum,
    interval_marginal,
    loads,
    validate,
)
from .infotheory import (
    MiRegion,
    MiReport,
    characteristic_conditional_entropy,
    conditional_entropy,
    conditional_mutual_information,
    entropy,
    full_report,
    mi_region,
    mutual_information,
)
from .exchange import (
    CONSTANT,
    VARIABLE,
    ConcavityEvidence,
    ExchangeMove,
    apply_move,
    concavity_check,
    constant_mi_shift,
    delta_domain,
    delta_h_derivative,
    delta_h_nonprivate,
    delta_h_private,
    delta_i_variable,
    move_from_json_dict,
    move_record,
    optimal_delta,
    read_move_log,
    shift_argmax,
    shift_derivative,
    shift_second_derivative,
    shift_value,
    write_move_log,
)
from .propositions import (
    IntervalClassification,
    checker_report,
    classify_intervals,
    improving_move_scan,
    nonprivate_mi_is_maximal,
    pareto_stationary,
    pareto_witness_scan,
    private_mi_is_minimal,
)
from .optimizer import (
    AuditConfig,
    AuditResult,
    FrontierPoint,
    OracleResult,
    StepwiseResult,
    SweepAxis,
    brute_force_oracle,
    config_from_json_dict,
    frontier_csv,
    run_stepwise,
    solve_audit,
    sweep_frontier,
    utility_mi_ceiling,
)
from .ingest import (
    Bipartition,
    Quantizer,
    RecordSet,
    ReleasePlan,
    apply_release_plan,
    binarize_characteristic,
    build_empirical_joint,
    build_release_plan,
    fit_quantizer,
    read_records_csv,
)
from .estimator import PreventiveAuditor

__version__ = "0.1.0"

__all__ = [
    "CharacteristicSpec",
    "CombinationTable",
    "JointDistribution",
    "ValidationResult",
    "binary_pair_roles",
    "characteristic_marginal",
    "characteristics_joint",
    "combination_marginal",
    "dumps",
    "fiber_matrix",
    "group_sum",
    "interval_marginal",
    "loads",
    "validate",
    "MiRegion",
    "MiReport",
    "characteristic_conditional_entropy",
    "conditional_entropy",
    "conditional_mutual_information",
    "entropy",
    "full_report",
    "mi_region",
    "mutual_information",
    "CONSTANT",
    "VARIABLE",
    "ConcavityEvidence",
    "ExchangeMove",
    "apply_move",
    "concavity_check",
    "constant_mi_shift",
    "delta_domain",
    "delta_h_derivative",
    "delta_h_nonprivate",
    "delta_h_private",
    "delta_i_variable",
    "move_from_json_dict",
    "move_record",
    "optimal_delta",
    "read_move_log",
    "shift_argmax",
    "shift_derivative",
    "shift_second_derivative",
    "shift_value",
    "write_move_log",
    "IntervalClassification",
    "checker_report",
    "classify_intervals",
    "improving_move_scan",
    "nonprivate_mi_is_maximal",
    "pareto_stationary",
    "pareto_witness_scan",
    "private_mi_is_minimal",
    "AuditConfig",
    "AuditResult",
    "FrontierPoint",
    "OracleResult",
    "StepwiseResult",
    "SweepAxis",
    "brute_force_oracle",
    "config_from_json_dict",
    "frontier_csv",
    "run_stepwise",
    "solve_audit",
    "sweep_frontier",
    "utility_mi_ceiling",
    "Bipartition",
    "Quantizer",
    "RecordSet",
    "ReleasePlan",
    "apply_release_plan",
    "binarize_characteristic",
    "build_empirical_joint",
    "build_release_plan",
    "fit_quantizer",
    "read_records_csv",
    "PreventiveAuditor",
    "__version__",
]
