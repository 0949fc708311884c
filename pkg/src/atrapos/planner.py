"""Multiplication-order planning for one matrix chain, with cache-aware hints."""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

from .sparse import (
    CostCoefficients,
    MatrixStats,
    ShapeMismatch,
    SparseMatrix,
    estimate_cost,
    estimate_density,
    spgemm,
    standard_cost,
)

Span = tuple[int, int]

MAX_BRUTE_FORCE_ITEMS = 12


class CostModel(str, Enum):
    SPARSE = "sparse"
    STANDARD = "standard"


class HintStatus(Enum):
    CACHED = "cached"
    KNOWN = "known"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SpanCostHint:
    """What the engine already knows about a sub-chain result."""

    status: HintStatus
    cost: float = 0.0
    density: float = 0.0

    @classmethod
    def cached(cls, cost: float, density: float) -> SpanCostHint:
        return cls(HintStatus.CACHED, cost, density)

    @classmethod
    def known(cls, cost: float, density: float) -> SpanCostHint:
        return cls(HintStatus.KNOWN, cost, density)

    @classmethod
    def unknown(cls) -> SpanCostHint:
        return cls(HintStatus.UNKNOWN)


HintFn = Callable[[Span], SpanCostHint]


@dataclass(frozen=True)
class ChainSpec:
    """Stats of the chain items plus the engine's span-to-cache-key mapping."""

    items: tuple[MatrixStats, ...]
    span_key: Callable[[int, int], object] | None = None

    def __post_init__(self):
        if not self.items:
            raise ValueError("empty chain")
        for a, b in zip(self.items, self.items[1:]):
            if a.cols != b.rows:
                raise ShapeMismatch(f"chain items {a.rows}x{a.cols} and {b.rows}x{b.cols}")

    def key_for(self, span: Span):
        if self.span_key is None:
            return span
        return self.span_key(span[0], span[1])


@dataclass
class Leaf:
    span: Span
    index: int
    density: float


@dataclass
class FetchCached:
    span: Span
    key: object
    density: float
    cost: float


@dataclass
class Multiply:
    span: Span
    left: PlanNode
    right: PlanNode
    density: float


PlanNode = Leaf | FetchCached | Multiply


@dataclass
class PlanTable:
    """Per-span minimal costs, result densities, and chosen split points."""

    costs: list[list[float]]
    densities: list[list[float]]
    splits: list[list[int]]


@dataclass
class Plan:
    root: PlanNode
    cost: float
    table: PlanTable | None = None

    def to_string(self, labels: Sequence[str] | None = None) -> str:
        return plan_to_string(self.root, labels)


@dataclass
class ProducedEntry:
    """One materialized multiplication: span, result, wall seconds, op count."""

    span: Span
    matrix: SparseMatrix
    seconds: float
    op_count: int


class CacheFetchError(RuntimeError):
    """A FETCH_CACHED span could not be served; the engine should replan."""

    def __init__(self, span: Span, key: object):
        super().__init__(f"cache fetch failed for span {span} key {key!r}")
        self.span = span
        self.key = key


class _Cand:
    """One achievable (cost, density) point for a span, with its structure."""

    __slots__ = ("cost", "density", "kind", "k", "left", "right", "order")

    def __init__(self, cost, density, kind, k=-1, left=None, right=None, order=0):
        self.cost = cost
        self.density = density
        self.kind = kind  # "leaf" | "fetch" | "mul"
        self.k = k
        self.left = left
        self.right = right
        self.order = order


def _pair_cost(
    x: MatrixStats, y: MatrixStats, coeffs: CostCoefficients, model: CostModel
) -> tuple[float, MatrixStats]:
    if model is CostModel.STANDARD:
        cost = float(standard_cost(x, y))
        return cost, MatrixStats(x.rows, y.cols, estimate_density(x.density, y.density, x.cols))
    return estimate_cost(x, y, coeffs)


def _pareto(cands: list[_Cand]) -> list[_Cand]:
    # keep the cheapest candidate per density level; parent cost and density
    # are monotone in both coordinates, so dominated points can never win
    cands.sort(key=lambda c: (c.cost, c.density, c.order))
    front: list[_Cand] = []
    best_density = float("inf")
    for c in cands:
        if c.density < best_density:
            front.append(c)
            best_density = c.density
    return front


def plan_chain(
    chain: ChainSpec,
    coeffs: CostCoefficients,
    hints: HintFn | None = None,
    *,
    cost_model: CostModel = CostModel.SPARSE,
) -> Plan:
    """Choose a multiplication order minimizing the estimated chain cost.

    Spans reported CACHED by the hints become fetch nodes priced at the hinted
    retrieval cost; KNOWN spans keep their computed structure but compete with
    the recorded recomputation cost and adopt the recorded density. The search
    keeps every Pareto-optimal (cost, density) alternative per span, because a
    span's density estimate depends on its own parenthesization. Cost ties
    break toward the smallest split index.
    """
    items = chain.items
    p = len(items)
    cand: dict[Span, list[_Cand]] = {}
    for i in range(p):
        cand[(i, i)] = [_Cand(0.0, items[i].density, "leaf", k=i)]
    order_counter = 0
    for length in range(2, p + 1):
        for i in range(0, p - length + 1):
            j = i + length - 1
            span = (i, j)
            hint = hints(span) if hints is not None else SpanCostHint.unknown()
            if hint.status is HintStatus.CACHED:
                cand[span] = [_Cand(hint.cost, hint.density, "fetch")]
                continue
            raw: list[_Cand] = []
            for k in range(i, j):
                for cl in cand[(i, k)]:
                    xs = MatrixStats(items[i].rows, items[k].cols, cl.density)
                    for cr in cand[(k + 1, j)]:
                        ys = MatrixStats(items[k + 1].rows, items[j].cols, cr.density)
                        pair, zst = _pair_cost(xs, ys, coeffs, cost_model)
                        order_counter += 1
                        raw.append(
                            _Cand(
                                cl.cost + cr.cost + pair,
                                zst.density,
                                "mul",
                                k=k,
                                left=cl,
                                right=cr,
                                order=order_counter,
                            )
                        )
            if hint.status is HintStatus.KNOWN:
                best = min(raw, key=lambda c: (c.cost, c.order))
                cost = min(best.cost, hint.cost)
                cand[span] = [
                    _Cand(cost, hint.density, "mul", k=best.k, left=best.left, right=best.right)
                ]
            else:
                cand[span] = _pareto(raw)

    root = min(cand[(0, p - 1)], key=lambda c: (c.cost, c.order))
    table = _build_table(cand, p)
    return Plan(_materialize(root, 0, p - 1, chain), root.cost, table)


def _build_table(cand: dict[Span, list[_Cand]], p: int) -> PlanTable:
    costs = [[0.0] * p for _ in range(p)]
    dens = [[0.0] * p for _ in range(p)]
    splits = [[-1] * p for _ in range(p)]
    for (i, j), lst in cand.items():
        best = min(lst, key=lambda c: (c.cost, c.order))
        costs[i][j] = best.cost
        dens[i][j] = best.density
        splits[i][j] = best.k if best.kind == "mul" else (-2 if best.kind == "fetch" else -1)
    return PlanTable(costs, dens, splits)


def _materialize(c: _Cand, i: int, j: int, chain: ChainSpec) -> PlanNode:
    if c.kind == "leaf":
        return Leaf((i, j), i, c.density)
    if c.kind == "fetch":
        return FetchCached((i, j), chain.key_for((i, j)), c.density, c.cost)
    left = _materialize(c.left, i, c.k, chain)
    right = _materialize(c.right, c.k + 1, j, chain)
    return Multiply((i, j), left, right, c.density)


def enumerate_plans(
    chain: ChainSpec,
    coeffs: CostCoefficients,
    *,
    cost_model: CostModel = CostModel.SPARSE,
) -> list[tuple[float, Plan]]:
    """Every full parenthesization of the chain with its propagated cost."""
    items = chain.items
    p = len(items)
    if p > MAX_BRUTE_FORCE_ITEMS:
        raise ValueError(f"chain too long for exhaustive enumeration ({p} items)")

    memo: dict[Span, list[tuple[float, float, PlanNode]]] = {}

    def trees(i: int, j: int) -> list[tuple[float, float, PlanNode]]:
        span = (i, j)
        got = memo.get(span)
        if got is not None:
            return got
        if i == j:
            got = [(0.0, items[i].density, Leaf(span, i, items[i].density))]
        else:
            got = []
            for k in range(i, j):
                for cl, dl, nl in trees(i, k):
                    xs = MatrixStats(items[i].rows, items[k].cols, dl)
                    for cr, dr, nr in trees(k + 1, j):
                        ys = MatrixStats(items[k + 1].rows, items[j].cols, dr)
                        pair, zst = _pair_cost(xs, ys, coeffs, cost_model)
                        got.append(
                            (cl + cr + pair, zst.density, Multiply(span, nl, nr, zst.density))
                        )
        memo[span] = got
        return got

    return [(cost, Plan(node, cost)) for cost, _, node in trees(0, p - 1)]


def brute_force_plan(
    chain: ChainSpec,
    coeffs: CostCoefficients,
    *,
    cost_model: CostModel = CostModel.SPARSE,
) -> Plan:
    """Global minimum over every parenthesization; the planner's test oracle."""
    plans = enumerate_plans(chain, coeffs, cost_model=cost_model)
    best_cost, best = plans[0]
    for cost, plan in plans[1:]:
        if cost < best_cost:
            best_cost, best = cost, plan
    return best


FetchFn = Callable[[object], SparseMatrix]


def execute_plan(
    plan: Plan,
    inputs: Sequence[SparseMatrix],
    fetch: FetchFn | None = None,
) -> tuple[SparseMatrix, list[ProducedEntry]]:
    """Run the plan over concrete matrices.

    Returns the chain product and a ledger of every materialized
    multiplication in execution order, with measured wall time and op count.
    Fetch failures raise CacheFetchError so the caller can replan.
    """
    produced: list[ProducedEntry] = []

    def ev(node: PlanNode) -> SparseMatrix:
        if isinstance(node, Leaf):
            return inputs[node.index]
        if isinstance(node, FetchCached):
            if fetch is None:
                raise CacheFetchError(node.span, node.key)
            try:
                matrix = fetch(node.key)
            except (KeyError, LookupError):
                raise CacheFetchError(node.span, node.key) from None
            if matrix is None:
                raise CacheFetchError(node.span, node.key)
            return matrix
        left = ev(node.left)
        right = ev(node.right)
        t0 = time.perf_counter()
        z, ops = spgemm(left, right)
        produced.append(ProducedEntry(node.span, z, time.perf_counter() - t0, ops))
        return z

    return ev(plan.root), produced


def plan_to_string(node: PlanNode, labels: Sequence[str] | None = None) -> str:
    """Parenthesized rendering, e.g. ``((A·M)·B)``; fetches render as ``<key>``."""
    if isinstance(node, Leaf):
        return labels[node.index] if labels else f"A{node.index}"
    if isinstance(node, FetchCached):
        return f"<{node.key}>"
    return f"({plan_to_string(node.left, labels)}·{plan_to_string(node.right, labels)})"
