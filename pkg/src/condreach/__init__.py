"""Sound bounds on weighted conditional reachability in labeled CTMCs
whose observation times are only known up to time sets."""

from .abstraction import (
    AbstractionError,
    IntervalMdp,
    TransientBoundCache,
    abstract,
    restrict_reachable,
)
from .ctmc import (
    Ctmc,
    ModelError,
    bounded_reachability,
    invariance,
    parse_ctmc,
    serialize_ctmc,
    transient,
    weight_from_property,
)
from .driver import AnalysisConfig, AnalysisTrace, analyze
from .evidence import (
    EvidenceError,
    Formula,
    ImpreciseEvidence,
    PreciseEvidence,
    TimePartition,
    TimeSet,
    coarsest_partition,
    is_instance,
    parse_evidence,
    parse_formula,
    sample_instance,
    serialize_evidence,
)
from .simulate import sample_envelope, simulate_states_at
from .solver import (
    BoundsReport,
    Scheduler,
    SolverError,
    compute_bounds,
    repair_consistency,
    robust_value_iteration,
)
from .unfolding import (
    conditional_weight,
    evidence_likelihood,
    unfold_precise,
)

__version__ = "0.1.0"

__all__ = [
    "AbstractionError",
    "AnalysisConfig",
    "AnalysisTrace",
    "BoundsReport",
    "Ctmc",
    "EvidenceError",
    "Formula",
    "ImpreciseEvidence",
    "IntervalMdp",
    "ModelError",
    "PreciseEvidence",
    "Scheduler",
    "SolverError",
    "TimePartition",
    "TimeSet",
    "TransientBoundCache",
    "abstract",
    "analyze",
    "bounded_reachability",
    "coarsest_partition",
    "compute_bounds",
    "conditional_weight",
    "evidence_likelihood",
    "invariance",
    "is_instance",
    "parse_ctmc",
    "parse_evidence",
    "parse_formula",
    "repair_consistency",
    "restrict_reachable",
    "robust_value_iteration",
    "sample_envelope",
    "sample_instance",
    "serialize_ctmc",
    "serialize_evidence",
    "simulate_states_at",
    "transient",
    "unfold_precise",
    "weight_from_property",
]
