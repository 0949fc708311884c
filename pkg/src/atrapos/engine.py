"""Per-query evaluation strategies and sequential workload execution."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .cache import CacheEntry, CacheState, Policy, insertion_candidates
from .hin import Constraint, Hin, MetapathQuery, constraint_mask
from .overlap_tree import OverlapTree, make_key, restrict_key
from .planner import (
    CacheFetchError,
    ChainSpec,
    CostModel,
    HintStatus,
    ProducedEntry,
    Span,
    SpanCostHint,
    execute_plan,
    plan_chain,
)
from .sparse import CostCoefficients, SparseMatrix


class Variant(str, Enum):
    HRANKS = "hranks"
    CBS1 = "cbs1"
    CBS2 = "cbs2"
    ATRAPOS = "atrapos"


class ClockMode(str, Enum):
    """Unit used for recompute-cost bookkeeping.

    WALL records seconds; OPS records scalar multiply-accumulate counts, which
    makes plans and cache traces reproducible across runs.
    """

    WALL = "wall"
    OPS = "ops"


_DEFAULT_COEFFS = CostCoefficients(1.0, 1.0, 1.0)


@dataclass
class EngineConfig:
    variant: Variant = Variant.ATRAPOS
    policy: Policy | None = None
    capacity_bytes: int = 64 * 2**20
    coeffs: CostCoefficients = _DEFAULT_COEFFS
    retrieval_cost: float = 0.0
    clock: ClockMode = ClockMode.WALL

    def __post_init__(self):
        if self.variant is Variant.HRANKS:
            if self.policy is not None:
                raise ValueError("the plain variant runs without a cache")
        elif self.variant in (Variant.CBS1, Variant.CBS2):
            if self.policy is None:
                self.policy = Policy.LRU
            if self.policy is not Policy.LRU:
                raise ValueError("cache baselines use the LRU policy")
        else:
            if self.policy is None:
                self.policy = Policy.OTREE


@dataclass
class MqeResult:
    """All (source, target) pairs with instance counts, plus run metrics."""

    source_type: str
    target_type: str
    matrix: SparseMatrix
    seconds: float
    op_count: int
    hits: int
    plan: str


@dataclass
class QueryRecord:
    text: str
    seconds: float
    cum_seconds: float
    op_count: int
    hits: int
    evictions: int
    plan: str
    error: str | None = None


@dataclass
class WorkloadReport:
    records: list[QueryRecord]
    total_seconds: float
    total_op_count: int
    total_hits: int
    total_misses: int
    total_evictions: int
    total_insertions: int
    peak_cache_used: int
    errors: list[int] = field(default_factory=list)


class Engine:
    """One evaluation strategy bound to an immutable network.

    Queries are processed strictly in arrival order; nothing about query i
    depends on any later query.
    """

    def __init__(self, hin: Hin, config: EngineConfig | None = None):
        self.hin = hin
        self.config = config or EngineConfig()
        self.tree = OverlapTree() if self.config.variant is Variant.ATRAPOS else None
        if self.config.variant is Variant.HRANKS:
            self.cache = None
        else:
            self.cache = CacheState(self.config.capacity_bytes, self.config.policy)

    # -- shared machinery --------------------------------------------------

    def _cost_of(self, e: ProducedEntry) -> float:
        return e.seconds if self.config.clock is ClockMode.WALL else float(e.op_count)

    def _canonical(self, query: MetapathQuery) -> tuple[str | None, str]:
        """Node-symbol string plus constraint key; None when pairs are ambiguous.

        The overlap machinery spells sub-metapaths with node symbols, which
        only identifies a computation when each consecutive type pair has a
        single edge type. Ambiguous queries are evaluated without caching.
        """
        for k, esym in enumerate(query.edge_seq):
            between = self.hin.schema.edges_between(query.node_seq[k], query.node_seq[k + 1])
            if len(between) != 1 or between[0].symbol != esym:
                return None, make_key(query.constraints)
        return "".join(query.node_seq), make_key(query.constraints)

    def _build_chain(self, query: MetapathQuery) -> list[SparseMatrix]:
        """Constrained adjacency chain: one matrix per edge of the metapath.

        A constraint applies to every position of its node type: rows of that
        position's outgoing matrix, or columns of the last matrix for the
        final position.
        """
        by_type: dict[str, list[Constraint]] = {}
        for c in query.constraints:
            by_type.setdefault(c.node_type, []).append(c)
        masks = {t: constraint_mask(self.hin, t, cs) for t, cs in by_type.items()}
        n = query.length
        chain: list[SparseMatrix] = []
        for k in range(n - 1):
            m = self.hin.adjacency[query.edge_seq[k]]
            src_t = query.node_seq[k]
            if src_t in masks:
                m = m.filter_rows(masks[src_t])
            if k == n - 2 and query.node_seq[n - 1] in masks:
                m = m.filter_cols(masks[query.node_seq[n - 1]])
            chain.append(m)
        return chain

    def _span_sub(self, m_str: str, span: Span) -> str:
        return m_str[span[0] : span[1] + 2]

    def _span_key(self, m_str: str, full_key: str, span: Span, p: int) -> tuple[str, str]:
        sub = self._span_sub(m_str, span)
        return sub, restrict_key(full_key, sub, final=span[1] == p - 1)

    def _plan_and_execute(
        self, query, chain, hints, fetch, span_key=None
    ) -> tuple[SparseMatrix, list[ProducedEntry], str]:
        labels = list(query.edge_seq)
        if len(chain) == 1:
            return chain[0], [], labels[0]
        spec = ChainSpec(tuple(m.stats() for m in chain), span_key=span_key)
        banned: set[Span] = set()

        def hint_fn(span: Span) -> SpanCostHint:
            if hints is None or span in banned:
                return SpanCostHint.unknown()
            h = hints(span)
            if h.status is HintStatus.CACHED and self.config.retrieval_cost:
                return SpanCostHint.cached(self.config.retrieval_cost, h.density)
            return h

        while True:
            plan = plan_chain(spec, self.config.coeffs, hint_fn, cost_model=CostModel.SPARSE)
            try:
                result, produced = execute_plan(plan, chain, fetch)
                return result, produced, plan.to_string(labels)
            except CacheFetchError as err:
                banned.add(err.span)

    def _cumulative_costs(self, produced: list[ProducedEntry]) -> dict[Span, float]:
        out: dict[Span, float] = {}
        for e in produced:
            out[e.span] = sum(
                self._cost_of(x)
                for x in produced
                if e.span[0] <= x.span[0] and x.span[1] <= e.span[1]
            )
        return out

    # -- variant paths -------------------------------------------------------

    def evaluate_query(self, query: MetapathQuery) -> MqeResult:
        """Evaluate one constrained metapath query under the configured variant."""
        query.validate(self.hin.schema)
        hits_before = self.cache.hits if self.cache else 0
        t0 = time.perf_counter()
        variant = self.config.variant
        m_str, full_key = self._canonical(query)
        if variant is Variant.HRANKS or m_str is None:
            result, produced, plan_str = self._evaluate_plain(query)
        elif variant is Variant.CBS1:
            result, produced, plan_str = self._evaluate_cbs1(query, m_str, full_key)
        elif variant is Variant.CBS2:
            result, produced, plan_str = self._evaluate_cbs2(query, m_str, full_key)
        else:
            result, produced, plan_str = self._evaluate_atrapos(query, m_str, full_key)
        seconds = time.perf_counter() - t0
        return MqeResult(
            query.node_seq[0],
            query.node_seq[-1],
            result,
            seconds,
            sum(e.op_count for e in produced),
            (self.cache.hits - hits_before) if self.cache else 0,
            plan_str,
        )

    def _evaluate_plain(self, query):
        chain = self._build_chain(query)
        return self._plan_and_execute(query, chain, None, None)

    def _whole_key(self, m_str: str, full_key: str) -> str:
        # the stored key of a whole-query result is its final-span projection,
        # which disambiguates it from interior spans spelling the same string
        return restrict_key(full_key, m_str, final=True)

    def _evaluate_cbs1(self, query, m_str, full_key):
        key = (m_str, self._whole_key(m_str, full_key))
        got = self.cache.request(key)
        if got is not None:
            return got, [], f"<{m_str}>"
        result, produced, plan_str = self._evaluate_plain(query)
        cost = sum(self._cost_of(e) for e in produced)
        self.cache.try_insert(CacheEntry(key, result, cost))
        return result, produced, plan_str

    def _evaluate_cbs2(self, query, m_str, full_key):
        whole = (m_str, self._whole_key(m_str, full_key))
        got = self.cache.request(whole)
        if got is not None:
            return got, [], f"<{m_str}>"
        chain = self._build_chain(query)
        p = len(chain)

        def hints(span: Span) -> SpanCostHint:
            entry = self.cache.entries.get(self._span_key(m_str, full_key, span, p))
            if entry is None:
                return SpanCostHint.unknown()
            return SpanCostHint.cached(0.0, entry.matrix.density)

        def fetch(key):
            got = self.cache.request(key)
            if got is None:
                raise KeyError(key)
            return got

        result, produced, plan_str = self._plan_and_execute(
            query, chain, hints, fetch,
            span_key=lambda i, j: self._span_key(m_str, full_key, (i, j), p),
        )
        cum = self._cumulative_costs(produced)
        for e in produced:
            key_e = self._span_key(m_str, full_key, e.span, p)
            if key_e not in self.cache.entries:
                self.cache.try_insert(CacheEntry(key_e, e.matrix, cum[e.span]))
        if p == 1:
            self.cache.try_insert(CacheEntry(whole, result, 0.0))
        return result, produced, plan_str

    def _evaluate_atrapos(self, query, m_str, full_key):
        report = self.tree.insert_query(m_str, full_key)
        chain = self._build_chain(query)
        p = len(chain)
        whole_stats = report.whole_stats

        if p == 1:
            produced: list[ProducedEntry] = []
            if whole_stats.cache_ref is not None:
                result = self.cache.request(
                    (m_str, self._whole_key(m_str, full_key)), whole_stats
                )
                plan_str = f"<{m_str}>"
            else:
                result = chain[0]
                plan_str = query.edge_seq[0]
        else:

            def hints(span: Span) -> SpanCostHint:
                sub, key = self._span_key(m_str, full_key, span, p)
                return self.tree.span_hint(sub, key)

            def fetch(key):
                stats = self.tree.get_stats(*key)
                got = self.cache.request(key, stats)
                if got is None:
                    raise KeyError(key)
                return got

            result, produced, plan_str = self._plan_and_execute(
                query, chain, hints, fetch,
                span_key=lambda i, j: self._span_key(m_str, full_key, (i, j), p),
            )

        # measured cost and result sparsity flow back into the tree
        cum = self._cumulative_costs(produced)
        for e in produced:
            sub, key_e = self._span_key(m_str, full_key, e.span, p)
            stats = self.tree.get_stats(sub, key_e)
            if stats is not None:
                stats.record_result(cum[e.span], e.matrix.nnz, e.matrix.rows, e.matrix.cols)
        result_cost = sum(self._cost_of(e) for e in produced)
        if produced or whole_stats.c is None:
            whole_stats.record_result(result_cost, result.nnz, result.rows, result.cols)

        produced_spans = [
            (*self._span_key(m_str, full_key, e.span, p), e.matrix, cum[e.span])
            for e in produced
        ]
        for draft in insertion_candidates(
            self.tree,
            m_str,
            self._whole_key(m_str, full_key),
            result,
            result_cost,
            produced_spans,
            whole_stats,
        ):
            if draft.stats.cache_ref is not None:
                continue
            if self.cache.request(draft.cache_key(), draft.stats) is None:
                self.cache.try_insert(draft.to_entry(), self.tree)
        return result, produced, plan_str

    # -- workloads -----------------------------------------------------------

    def run_workload(self, queries: Iterable[MetapathQuery]) -> WorkloadReport:
        """Evaluate queries strictly in sequence; per-query errors are recorded."""
        records: list[QueryRecord] = []
        errors: list[int] = []
        cum_seconds = 0.0
        total_ops = 0
        for idx, query in enumerate(queries):
            ev_before = self.cache.evictions if self.cache else 0
            try:
                r = self.evaluate_query(query)
            except Exception as exc:  # noqa: BLE001 - workload keeps going
                records.append(
                    QueryRecord(
                        query.text(self.hin.schema), 0.0, cum_seconds, 0, 0, 0, "", f"{type(exc).__name__}: {exc}"
                    )
                )
                errors.append(idx)
                continue
            cum_seconds += r.seconds
            total_ops += r.op_count
            records.append(
                QueryRecord(
                    query.text(self.hin.schema),
                    r.seconds,
                    cum_seconds,
                    r.op_count,
                    r.hits,
                    (self.cache.evictions - ev_before) if self.cache else 0,
                    r.plan,
                )
            )
        cache = self.cache
        return WorkloadReport(
            records,
            cum_seconds,
            total_ops,
            cache.hits if cache else 0,
            cache.misses if cache else 0,
            cache.evictions if cache else 0,
            cache.insertions if cache else 0,
            cache.peak_used if cache else 0,
            errors,
        )
