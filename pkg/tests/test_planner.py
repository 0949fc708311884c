import random

import pytest

from atrapos.planner import (
    CacheFetchError,
    ChainSpec,
    CostModel,
    FetchCached,
    Leaf,
    Multiply,
    SpanCostHint,
    brute_force_plan,
    enumerate_plans,
    execute_plan,
    plan_chain,
)
from atrapos.sparse import CostCoefficients, MatrixStats, ShapeMismatch, spgemm
from atrapos.synth import random_sparse

COEFFS = CostCoefficients(1.0, 1.0, 1.0)

FIG2_CHAIN = ChainSpec(
    (MatrixStats(4, 5, 1.0), MatrixStats(5, 5, 1.0), MatrixStats(5, 3, 1.0))
)


def _random_chain(rng, max_len=6):
    p = rng.randint(2, max_len)
    dims = [rng.randint(1, 64) for _ in range(p + 1)]
    return ChainSpec(
        tuple(MatrixStats(dims[i], dims[i + 1], rng.random()) for i in range(p))
    )


def test_worked_example_right_association_wins():
    plan = plan_chain(FIG2_CHAIN, COEFFS, cost_model=CostModel.STANDARD)
    assert plan.cost == 135
    assert plan.to_string(["A", "M", "B"]) == "(A·(M·B))"
    # the chosen split for the full span keeps the first item alone
    assert plan.table.splits[0][2] == 0
    priced = {p.to_string(["A", "M", "B"]): c for c, p in enumerate_plans(FIG2_CHAIN, COEFFS, cost_model=CostModel.STANDARD)}
    assert priced == {"(A·(M·B))": 135, "((A·M)·B)": 160}


def test_single_item_chain():
    plan = plan_chain(ChainSpec((MatrixStats(4, 6, 0.5),)), COEFFS)
    assert plan.cost == 0.0
    assert isinstance(plan.root, Leaf)


def test_two_item_chain_unique_plan():
    chain = ChainSpec((MatrixStats(3, 4, 0.5), MatrixStats(4, 2, 0.5)))
    plans = enumerate_plans(chain, COEFFS)
    assert len(plans) == 1
    assert plan_chain(chain, COEFFS).cost == plans[0][0]


def test_catalan_enumeration_count():
    chain = ChainSpec(tuple(MatrixStats(3, 3, 0.5) for _ in range(5)))
    assert len(enumerate_plans(chain, COEFFS)) == 14  # Catalan(4)


def test_enumeration_guard():
    chain = ChainSpec(tuple(MatrixStats(2, 2, 0.5) for _ in range(13)))
    with pytest.raises(ValueError, match="too long"):
        brute_force_plan(chain, COEFFS)


@pytest.mark.parametrize("model", [CostModel.SPARSE, CostModel.STANDARD])
def test_optimality_random_chains(model):
    rng = random.Random(42)
    for _ in range(200):
        chain = _random_chain(rng)
        coeffs = CostCoefficients(rng.random() * 2, rng.random() * 2, rng.random() * 2)
        assert (
            plan_chain(chain, coeffs, cost_model=model).cost
            == brute_force_plan(chain, coeffs, cost_model=model).cost
        )


def test_dimension_mismatch():
    with pytest.raises(ShapeMismatch):
        ChainSpec((MatrixStats(3, 4, 0.5), MatrixStats(5, 2, 0.5)))


def test_cached_hint_forces_fetch():
    def hints(span):
        if span == (1, 2):
            return SpanCostHint.cached(0.0, 1.0)
        return SpanCostHint.unknown()

    plan = plan_chain(FIG2_CHAIN, COEFFS, hints, cost_model=CostModel.STANDARD)
    assert isinstance(plan.root, Multiply)
    assert isinstance(plan.root.right, FetchCached)
    assert plan.cost == 60  # only the final 4x5 by 5x3 multiply remains


def test_cached_hint_zero_cost_never_raises_total():
    rng = random.Random(11)
    for _ in range(120):
        chain = _random_chain(rng, max_len=5)
        coeffs = CostCoefficients(rng.random(), rng.random(), rng.random())
        base = plan_chain(chain, coeffs)
        p = len(chain.items)
        spans = [(i, j) for i in range(p) for j in range(i + 1, p)]
        if not spans:
            continue
        span = spans[rng.randrange(len(spans))]
        base_density = base.table.densities[span[0]][span[1]]

        def hints(s):
            if s == span:
                return SpanCostHint.cached(0.0, base_density)
            return SpanCostHint.unknown()

        hinted = plan_chain(chain, coeffs, hints)
        assert hinted.cost <= base.cost


def test_known_hint_substitutes_cheaper_cost():
    chain = ChainSpec((MatrixStats(8, 8, 1.0), MatrixStats(8, 8, 1.0)))
    base = plan_chain(chain, COEFFS)
    assert base.cost > 1.0

    def hints(span):
        if span == (0, 1):
            return SpanCostHint.known(1.0, 0.25)
        return SpanCostHint.unknown()

    hinted = plan_chain(chain, COEFFS, hints)
    assert hinted.cost == 1.0
    # structure stays a multiplication: the recorded cost only reprices it
    assert isinstance(hinted.root, Multiply)
    assert hinted.table.densities[0][1] == 0.25


def test_known_hint_density_feeds_downstream_estimates():
    chain = ChainSpec(
        (MatrixStats(6, 6, 0.9), MatrixStats(6, 6, 0.9), MatrixStats(6, 4, 0.5))
    )

    def hints(span):
        if span == (0, 1):
            return SpanCostHint.known(1e9, 0.0)  # recompute cost too high to win
        return SpanCostHint.unknown()

    plan = plan_chain(chain, COEFFS, hints)
    assert plan.table.densities[0][1] == 0.0


def test_plan_densities_are_estimator_compositions():
    # every multiply node's annotated density equals the estimator applied to
    # its children's densities, exactly as the search computed them
    rng = random.Random(23)
    from atrapos.sparse import estimate_density

    for _ in range(30):
        chain = _random_chain(rng)
        plan = plan_chain(chain, COEFFS)

        def check(node):
            if isinstance(node, Leaf):
                assert node.density == chain.items[node.index].density
                return node.density
            dl = check(node.left)
            dr = check(node.right)
            inner = chain.items[node.left.span[1]].cols
            expect = estimate_density(dl, dr, inner)
            assert node.density == expect
            assert 0.0 <= node.density <= 1.0
            return node.density

        check(plan.root)


def test_plan_table_shape_and_ranges():
    rng = random.Random(17)
    chain = _random_chain(rng)
    plan = plan_chain(chain, COEFFS)
    p = len(chain.items)
    for i in range(p):
        assert plan.table.costs[i][i] == 0.0
        assert plan.table.densities[i][i] == chain.items[i].density
        for j in range(i, p):
            assert 0.0 <= plan.table.densities[i][j] <= 1.0
            assert plan.table.costs[i][j] >= 0.0


# -- execution ------------------------------------------------------------------


def _matrices_for(rng, dims):
    return [random_sparse(rng, dims[i], dims[i + 1], 0.3, max_value=2) for i in range(len(dims) - 1)]


def test_execute_leaf_plan():
    rng = random.Random(1)
    mats = _matrices_for(rng, [5, 7])
    plan = plan_chain(ChainSpec((mats[0].stats(),)), COEFFS)
    result, produced = execute_plan(plan, mats)
    assert result == mats[0]
    assert produced == []


def test_execute_matches_any_association():
    rng = random.Random(2)
    dims = [6, 9, 4, 8, 5]
    mats = _matrices_for(rng, dims)
    chain = ChainSpec(tuple(m.stats() for m in mats))
    results = []
    for _, plan in enumerate_plans(chain, COEFFS):
        r, produced = execute_plan(plan, mats)
        results.append(r)
        assert len(produced) == len(mats) - 1
        spans = [e.span for e in produced]
        assert spans[-1] == (0, len(mats) - 1)  # root multiplication reported last
    first = results[0]
    for r in results[1:]:
        assert r == first


def test_execute_produced_ledger_contents():
    rng = random.Random(3)
    mats = _matrices_for(rng, [6, 5, 7, 4])
    chain = ChainSpec(tuple(m.stats() for m in mats))
    plan = plan_chain(chain, COEFFS)
    result, produced = execute_plan(plan, mats)
    for entry in produced:
        assert entry.op_count >= 0
        assert entry.seconds >= 0.0
        i, j = entry.span
        expect = mats[i]
        for k in range(i + 1, j + 1):
            expect, _ = spgemm(expect, mats[k])
        assert entry.matrix == expect
    assert produced[-1].matrix == result


def test_execute_fetch_and_failure():
    rng = random.Random(4)
    mats = _matrices_for(rng, [6, 5, 7, 4])
    sub, _ = spgemm(mats[0], mats[1])
    chain = ChainSpec(tuple(m.stats() for m in mats), span_key=lambda i, j: (i, j))

    def hints(span):
        return SpanCostHint.cached(0.0, sub.density) if span == (0, 1) else SpanCostHint.unknown()

    plan = plan_chain(chain, COEFFS, hints)
    assert isinstance(plan.root.left, FetchCached)
    result, produced = execute_plan(plan, mats, fetch=lambda key: {(0, 1): sub}[key])
    direct, _ = spgemm(sub, mats[2])
    assert result == direct
    assert [e.span for e in produced] == [(0, 2)]

    with pytest.raises(CacheFetchError):
        execute_plan(plan, mats, fetch=lambda key: {}[key])
    with pytest.raises(CacheFetchError):
        execute_plan(plan, mats, fetch=None)


def test_plan_string_rendering():
    plan = plan_chain(FIG2_CHAIN, COEFFS, cost_model=CostModel.STANDARD)
    assert plan.to_string() == "(A0·(A1·A2))"
