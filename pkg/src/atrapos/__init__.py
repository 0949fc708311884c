"""Metapath query workloads over heterogeneous information networks.

Evaluation runs as sparse matrix-chain multiplication: a dynamic-programming
planner prices multiplication orders with a sparsity-aware cost model, and an
overlap index over already-evaluated metapath strings detects repeated
sub-metapaths so their result matrices can be cached and reused in real time.
"""

from .cache import CacheEntry, CacheState, Policy, insertion_candidates
from .engine import ClockMode, Engine, EngineConfig, MqeResult, Variant, WorkloadReport
from .hin import (
    Constraint,
    Hin,
    MetapathQuery,
    Schema,
    constrained_adjacency,
    load_hin,
    parse_metapath,
)
from .overlap_tree import NodeStats, OverlapTree, make_key, restrict_key
from .planner import (
    ChainSpec,
    CostModel,
    Plan,
    SpanCostHint,
    brute_force_plan,
    enumerate_plans,
    execute_plan,
    plan_chain,
)
from .sparse import (
    CostCoefficients,
    MatrixStats,
    SparseMatrix,
    estimate_cost,
    estimate_density,
    fit_cost_model,
    spgemm,
    standard_cost,
)
from .workload import (
    Distribution,
    WorkloadSpec,
    enumerate_metapaths,
    generate_workload,
    load_workload,
    save_workload,
)

__version__ = "0.1.0"

__all__ = [
    "CacheEntry",
    "CacheState",
    "ChainSpec",
    "ClockMode",
    "Constraint",
    "CostCoefficients",
    "CostModel",
    "Distribution",
    "Engine",
    "EngineConfig",
    "Hin",
    "MatrixStats",
    "MetapathQuery",
    "MqeResult",
    "NodeStats",
    "OverlapTree",
    "Plan",
    "Policy",
    "Schema",
    "SpanCostHint",
    "SparseMatrix",
    "Variant",
    "WorkloadReport",
    "WorkloadSpec",
    "brute_force_plan",
    "constrained_adjacency",
    "enumerate_metapaths",
    "enumerate_plans",
    "estimate_cost",
    "estimate_density",
    "execute_plan",
    "fit_cost_model",
    "generate_workload",
    "insertion_candidates",
    "load_hin",
    "load_workload",
    "make_key",
    "parse_metapath",
    "plan_chain",
    "restrict_key",
    "save_workload",
    "spgemm",
    "standard_cost",
]
