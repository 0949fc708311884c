import random
from types import SimpleNamespace

import pytest

from atrapos.cache import Policy
from atrapos.engine import ClockMode, Engine, EngineConfig, Variant
from atrapos.hin import MetapathQuery, parse_metapath
from atrapos.synth import SynthEdgeType, SynthNodeType, SynthSpec, synth_hin
from atrapos.workload import (
    WorkloadSpec,
    build_constraint_universe,
    enumerate_metapaths,
    generate_workload,
)

from conftest import DATA
from oracles import count_paths_dfs, matrix_to_pairs

OPS = ClockMode.OPS


def _engine(hin, variant, policy=None, capacity=8 * 2**20, **kw):
    return Engine(
        hin,
        EngineConfig(variant=variant, policy=policy, capacity_bytes=capacity, clock=OPS, **kw),
    )


def _scholarly_truth(scholarly):
    """Edge lists re-read from the CSVs, independent of ingestion."""
    edges = {}
    for sym in scholarly.adjacency:
        rows = (DATA / "scholarly" / f"edges_{sym}.csv").read_text().strip().splitlines()[1:]
        edges[sym] = [tuple(r.split(",")) for r in rows]
    return SimpleNamespace(edges=edges)


def variant_policy_matrix():
    return [
        (Variant.HRANKS, None),
        (Variant.CBS1, Policy.LRU),
        (Variant.CBS2, Policy.LRU),
        (Variant.ATRAPOS, Policy.LRU),
        (Variant.ATRAPOS, Policy.PGDS),
        (Variant.ATRAPOS, Policy.OTREE),
    ]


def test_worked_query_identical_across_variants(scholarly):
    q = parse_metapath("APT | P.year>2020", scholarly.schema)
    truth = _scholarly_truth(scholarly)
    oracle = count_paths_dfs(scholarly, truth, q)
    results = []
    for variant, policy in variant_policy_matrix():
        r = _engine(scholarly, variant, policy).evaluate_query(q)
        assert (r.matrix.rows, r.matrix.cols) == (4, 3)
        assert r.source_type == "A" and r.target_type == "T"
        assert matrix_to_pairs(r.matrix) == oracle
        results.append(r.matrix)
    for m in results[1:]:
        assert m == results[0]


def test_every_stored_count_is_positive(scholarly):
    q = parse_metapath("APVPA", scholarly.schema)
    r = _engine(scholarly, Variant.HRANKS).evaluate_query(q)
    assert all(v >= 1 for _, _, v in r.matrix.items())


def test_length_two_query_returns_adjacency(scholarly):
    q = parse_metapath("AP", scholarly.schema)
    r = _engine(scholarly, Variant.HRANKS).evaluate_query(q)
    assert r.matrix == scholarly.adjacency["AP"]
    assert r.op_count == 0
    assert r.plan == "AP"


def test_random_queries_match_dfs_oracle(scholarly_synth):
    hin, truth = scholarly_synth
    rng = random.Random(6)
    universe = enumerate_metapaths(hin.schema, 3, 5)
    cons = build_constraint_universe(hin, 10, seed=6)
    engines = {v: _engine(hin, v, p) for v, p in [
        (Variant.HRANKS, None), (Variant.CBS1, None), (Variant.CBS2, None), (Variant.ATRAPOS, None)
    ]}
    for _ in range(25):
        nodes, edges = universe[rng.randrange(len(universe))]
        c = cons[rng.randrange(len(cons))]
        constraints = frozenset({c}) if c.node_type in nodes else frozenset()
        q = MetapathQuery(nodes, edges, constraints)
        oracle = count_paths_dfs(hin, truth, q)
        for variant, engine in engines.items():
            r = engine.evaluate_query(q)
            assert matrix_to_pairs(r.matrix) == oracle, (variant, q.text())


def test_atrapos_reuses_whole_result(scholarly):
    eng = _engine(scholarly, Variant.ATRAPOS)
    q = parse_metapath("APT | P.year>2020", scholarly.schema)
    first = eng.evaluate_query(q)
    second = eng.evaluate_query(q)
    assert second.hits >= 1
    assert second.op_count == 0
    assert second.matrix == first.matrix


def test_news_overlap_is_cached_and_reused(news):
    hin, _ = news
    eng = _engine(hin, Variant.ATRAPOS)
    queries = [parse_metapath(t, hin.schema) for t in ("ICPAL", "ICPAT", "ICPAO")]
    r0 = eng.evaluate_query(queries[0])
    r1 = eng.evaluate_query(queries[1])
    r2 = eng.evaluate_query(queries[2])
    node = eng.tree.walk_exact("ICPA")
    assert node is not None
    assert ("ICPA", "") in eng.cache.entries
    assert r2.hits >= 1
    assert "<" in r2.plan  # the plan fetched the shared sub-metapath


def test_deterministic_plans_and_traces(scholarly_synth):
    hin, _ = scholarly_synth
    universe = enumerate_metapaths(hin.schema, 3, 5)
    spec = WorkloadSpec(
        metapaths=universe,
        constraints=build_constraint_universe(hin, 12, seed=3),
        count=60,
        restart_p=0.15,
        seed=3,
    )
    queries = generate_workload(hin.schema, spec)

    def run():
        eng = _engine(hin, Variant.ATRAPOS, Policy.OTREE, capacity=200_000)
        report = eng.run_workload(queries)
        return [r.plan for r in report.records], list(eng.cache.trace)

    plans_a, trace_a = run()
    plans_b, trace_b = run()
    assert plans_a == plans_b
    assert trace_a == trace_b


def test_opcount_dominance_on_repeat_fixture(scholarly):
    # workload of exact repeats: with everything fitting in cache the
    # tiered variants can never do more scalar work than the plain engine
    texts = ["APTPA | P.year>2018", "APVPA", "APT | P.year>2020"] * 6
    queries = [parse_metapath(t, scholarly.schema) for t in texts]
    totals = {}
    for variant in (Variant.HRANKS, Variant.CBS1, Variant.CBS2, Variant.ATRAPOS):
        report = _engine(scholarly, variant).run_workload(queries)
        assert not report.errors
        totals[variant] = report.total_op_count
    assert totals[Variant.ATRAPOS] <= totals[Variant.CBS2] <= totals[Variant.HRANKS]
    assert totals[Variant.CBS1] <= totals[Variant.HRANKS]
    assert totals[Variant.ATRAPOS] < totals[Variant.HRANKS]


def test_atrapos_beats_plain_on_overlapping_workload(scholarly_synth):
    hin, _ = scholarly_synth
    universe = enumerate_metapaths(hin.schema, 3, 5)
    spec = WorkloadSpec(
        metapaths=universe,
        constraints=build_constraint_universe(hin, 8, seed=19),
        count=100,
        restart_p=0.1,
        seed=19,
    )
    queries = generate_workload(hin.schema, spec)
    plain = _engine(hin, Variant.HRANKS).run_workload(queries)
    tiered = _engine(hin, Variant.ATRAPOS).run_workload(queries)
    assert not plain.errors and not tiered.errors
    assert tiered.total_op_count < plain.total_op_count


def test_run_workload_records_errors_and_continues(scholarly):
    good = parse_metapath("APT", scholarly.schema)
    bad = MetapathQuery(("A", "P"), ("PT",))  # edge does not connect the pair
    report = _engine(scholarly, Variant.ATRAPOS).run_workload([good, bad, good])
    assert report.errors == [1]
    assert len(report.records) == 3
    assert report.records[1].error is not None
    assert report.records[2].error is None


def test_real_time_sequencing(scholarly):
    eng = _engine(scholarly, Variant.ATRAPOS)
    q = parse_metapath("APT", scholarly.schema)
    log = []
    original = eng.evaluate_query

    def instrumented(query):
        log.append("evaluate")
        return original(query)

    eng.evaluate_query = instrumented

    def stream():
        for _ in range(4):
            log.append("yield")
            yield q

    eng.run_workload(stream())
    assert log == ["yield", "evaluate"] * 4


def test_workload_report_metrics(scholarly):
    texts = ["APT | P.year>2020", "APT | P.year>2020", "APVPA"]
    queries = [parse_metapath(t, scholarly.schema) for t in texts]
    eng = _engine(scholarly, Variant.ATRAPOS)
    report = eng.run_workload(queries)
    assert len(report.records) == 3
    assert report.total_hits >= 1
    assert report.peak_cache_used > 0
    assert report.records[-1].cum_seconds == pytest.approx(report.total_seconds)
    assert report.total_op_count == sum(r.op_count for r in report.records)


def test_ambiguous_pair_bypasses_caching(tmp_path):
    spec = SynthSpec(
        node_types=[SynthNodeType("A", 10), SynthNodeType("B", 10), SynthNodeType("C", 10)],
        edge_types=[
            SynthEdgeType("X1", "A", "B", 20),
            SynthEdgeType("X2", "A", "B", 15),
            SynthEdgeType("BC", "B", "C", 20),
        ],
    )
    hin, _ = synth_hin(spec, tmp_path, seed=2)
    q = parse_metapath("A-[X1]->B-[BC]->C", hin.schema)
    plain = _engine(hin, Variant.HRANKS).evaluate_query(q)
    eng = _engine(hin, Variant.ATRAPOS)
    r1 = eng.evaluate_query(q)
    r2 = eng.evaluate_query(q)
    assert r1.matrix == plain.matrix and r2.matrix == plain.matrix
    assert not eng.cache.entries  # node-symbol keys cannot disambiguate X1/X2
    assert r2.hits == 0


def test_config_validation():
    with pytest.raises(ValueError):
        EngineConfig(variant=Variant.HRANKS, policy=Policy.LRU)
    with pytest.raises(ValueError):
        EngineConfig(variant=Variant.CBS1, policy=Policy.OTREE)
    assert EngineConfig(variant=Variant.CBS2).policy is Policy.LRU
    assert EngineConfig(variant=Variant.ATRAPOS).policy is Policy.OTREE


def test_retrieval_cost_knob(news):
    # an interior cached span is fetched at the default zero retrieval cost,
    # but the planner routes around it when retrieval is priced absurdly high;
    # a cached whole-query result is always fetched (the root span cannot be
    # split around)
    hin, _ = news
    texts = ("ICPAL", "ICPAT", "ICPAO")
    for cost, expect_fetch in ((0.0, True), (1e12, False)):
        eng = _engine(hin, Variant.ATRAPOS, retrieval_cost=cost)
        results = [eng.evaluate_query(parse_metapath(t, hin.schema)) for t in texts]
        assert ("<" in results[2].plan) == expect_fetch
        assert results[2].matrix == _engine(hin, Variant.HRANKS).evaluate_query(
            parse_metapath(texts[2], hin.schema)
        ).matrix


def test_replans_when_a_fetch_fails(news):
    # a hint claiming a span is cached while the cache cannot serve it must
    # not break evaluation: the engine drops the hint and recomputes
    hin, _ = news
    eng = _engine(hin, Variant.ATRAPOS)
    q1 = parse_metapath("ICPAL", hin.schema)
    q2 = parse_metapath("ICPAT", hin.schema)
    q3 = parse_metapath("ICPAO", hin.schema)
    eng.evaluate_query(q1)
    eng.evaluate_query(q2)  # caches the shared ICPA result
    # drop the matrix behind the tree's back, leaving the hint stale
    stats = eng.tree.get_stats("ICPA", "")
    del eng.cache.entries[("ICPA", "")]
    eng.cache.used -= stats.cache_ref.size
    r3 = eng.evaluate_query(q3)
    plain = _engine(hin, Variant.HRANKS).evaluate_query(q3)
    assert r3.matrix == plain.matrix
    assert "<" not in r3.plan  # replanned without the stale fetch


def test_cache_capacity_respected_under_pressure(scholarly_synth):
    hin, _ = scholarly_synth
    universe = enumerate_metapaths(hin.schema, 3, 5)
    spec = WorkloadSpec(
        metapaths=universe,
        constraints=build_constraint_universe(hin, 6, seed=9),
        count=80,
        restart_p=0.2,
        seed=9,
    )
    queries = generate_workload(hin.schema, spec)
    for policy in (Policy.LRU, Policy.PGDS, Policy.OTREE):
        eng = _engine(hin, Variant.ATRAPOS, policy, capacity=20_000)
        report = eng.run_workload(queries)
        assert not report.errors
        assert eng.cache.used <= eng.cache.capacity
        assert report.peak_cache_used <= eng.cache.capacity
        assert report.total_evictions > 0
