"""Synthetic query workloads: analyst sessions over metapaths and constraints."""

from __future__ import annotations

import random
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from itertools import accumulate
from pathlib import Path

from .hin import Constraint, Hin, MetapathQuery, Schema, parse_metapath

Metapath = tuple[tuple[str, ...], tuple[str, ...]]  # (node_seq, edge_seq)


class Distribution(str, Enum):
    UNIFORM = "uniform"
    ZIPF = "zipf"


@dataclass
class WorkloadSpec:
    """Parameters of one synthetic workload.

    Items are ranked by position in their universe list; under ZIPF the draw
    probability of rank k is proportional to k^-alpha. A fixed seed makes the
    generated workload byte-identical.
    """

    metapaths: list[Metapath]
    constraints: list[Constraint] = field(default_factory=list)
    count: int = 500
    restart_p: float = 0.1
    distribution: Distribution = Distribution.UNIFORM
    alpha: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.metapaths:
            raise ValueError("metapath universe is empty")
        if not 0.0 < self.restart_p <= 1.0:
            raise ValueError("restart probability must lie in (0, 1]")
        if self.distribution is Distribution.ZIPF and self.alpha <= 0:
            raise ValueError("zipf alpha must be positive")
        if self.count < 1:
            raise ValueError("count must be positive")


def enumerate_metapaths(schema: Schema, len_min: int, len_max: int) -> list[Metapath]:
    """All schema-valid type sequences with lengths in [len_min, len_max]."""
    if len_min < 2:
        raise ValueError("metapaths have length at least 2")
    out: list[Metapath] = []

    def extend(nodes: list[str], edges: list[str]) -> None:
        if len(nodes) >= len_min:
            out.append((tuple(nodes), tuple(edges)))
        if len(nodes) == len_max:
            return
        for et in schema.edge_types.values():
            if et.src == nodes[-1]:
                extend(nodes + [et.dst], edges + [et.symbol])

    for sym in schema.node_types:
        extend([sym], [])
    return out


class _Sampler:
    """Seed-stable index sampler over a ranked universe."""

    def __init__(self, size: int, distribution: Distribution, alpha: float):
        self.size = size
        if distribution is Distribution.ZIPF:
            weights = [1.0 / (k**alpha) for k in range(1, size + 1)]
            self.cum = list(accumulate(weights))
        else:
            self.cum = None

    def draw(self, rng: random.Random) -> int:
        if self.cum is None:
            return rng.randrange(self.size)
        x = rng.random() * self.cum[-1]
        return min(bisect_right(self.cum, x), self.size - 1)


def zipf_probabilities(size: int, alpha: float) -> list[float]:
    """Analytic rank probabilities p(k) = k^-alpha / H for rank 1..size."""
    weights = [1.0 / (k**alpha) for k in range(1, size + 1)]
    total = sum(weights)
    return [w / total for w in weights]


@dataclass
class GeneratedWorkload:
    queries: list[MetapathQuery]
    session_lengths: list[int]


def generate_workload_with_sessions(spec: WorkloadSpec) -> GeneratedWorkload:
    """Session simulation behind generate_workload, keeping session lengths.

    The first query opens a session with a sampled constraint; each later step
    restarts with probability p (fresh constraint and metapath) or keeps the
    constraint and samples a different metapath. The finished list is shuffled
    with the same seeded generator to interleave sessions.
    """
    rng = random.Random(spec.seed)
    meta_sampler = _Sampler(len(spec.metapaths), spec.distribution, spec.alpha)
    cons_sampler = (
        _Sampler(len(spec.constraints), spec.distribution, spec.alpha)
        if spec.constraints
        else None
    )

    def draw_constraint() -> Constraint | None:
        if cons_sampler is None:
            return None
        for _ in range(1000):
            c = spec.constraints[cons_sampler.draw(rng)]
            if any(c.node_type in nodes for nodes, _ in spec.metapaths):
                return c
        raise ValueError("no metapath contains any constrained node type")

    def draw_metapath(constraint: Constraint | None, avoid: Metapath | None) -> Metapath:
        candidates_exist = any(
            (constraint is None or constraint.node_type in nodes)
            for nodes, _ in spec.metapaths
        )
        if not candidates_exist:
            raise ValueError("constraint type appears in no metapath")
        last = None
        for _ in range(10000):
            m = spec.metapaths[meta_sampler.draw(rng)]
            if constraint is not None and constraint.node_type not in m[0]:
                continue
            last = m
            if m != avoid:
                return m
        return last  # degenerate universe: allow a repeat rather than spin

    queries: list[MetapathQuery] = []
    session_lengths: list[int] = []
    constraint = draw_constraint()
    metapath = draw_metapath(constraint, None)
    current_len = 1
    queries.append(_build_query(metapath, constraint))
    for _ in range(spec.count - 1):
        if rng.random() < spec.restart_p:
            session_lengths.append(current_len)
            current_len = 1
            constraint = draw_constraint()
            metapath = draw_metapath(constraint, None)
        else:
            current_len += 1
            metapath = draw_metapath(constraint, metapath)
        queries.append(_build_query(metapath, constraint))
    session_lengths.append(current_len)
    rng.shuffle(queries)
    return GeneratedWorkload(queries, session_lengths)


def _build_query(metapath: Metapath, constraint: Constraint | None) -> MetapathQuery:
    nodes, edges = metapath
    cons = frozenset({constraint}) if constraint is not None else frozenset()
    return MetapathQuery(nodes, edges, cons)


def generate_workload(schema: Schema, spec: WorkloadSpec) -> list[MetapathQuery]:
    """Generate and validate the workload queries for a schema."""
    generated = generate_workload_with_sessions(spec)
    for q in generated.queries:
        q.validate(schema)
    return generated.queries


def build_constraint_universe(
    hin: Hin,
    size: int,
    seed: int = 0,
    *,
    id_equality_weight: float = 0.5,
) -> list[Constraint]:
    """Sampled constraints over a network's observed values.

    Mixes entity-equality constraints (``T.id = <some id>``) with integer
    range constraints whose thresholds are drawn uniformly from the observed
    value range and whose operator comes from {>, <, =}.
    """
    rng = random.Random(seed)
    int_props = []
    id_types = []
    for sym, table in hin.node_tables.items():
        if len(table) == 0:
            continue
        id_types.append(sym)
        decl = hin.schema.node_types[sym]
        for p in decl.properties:
            if p.kind == "integer" and table.columns[p.name]:
                int_props.append((sym, p.name))
    out: list[Constraint] = []
    seen = set()
    attempts = 0
    while len(out) < size and attempts < size * 50:
        attempts += 1
        if int_props and (not id_types or rng.random() >= id_equality_weight):
            sym, prop = int_props[rng.randrange(len(int_props))]
            values = hin.node_tables[sym].columns[prop]
            lo, hi = min(values), max(values)
            threshold = rng.randint(lo, hi) if hi > lo else lo
            op = rng.choice([">", "<", "="])
            c = Constraint(sym, prop, op, threshold)
        elif id_types:
            sym = id_types[rng.randrange(len(id_types))]
            table = hin.node_tables[sym]
            c = Constraint(sym, "id", "=", table.ids[rng.randrange(len(table))])
        else:
            break
        if c not in seen:
            seen.add(c)
            out.append(c)
    return out


def save_workload(queries: list[MetapathQuery], path: str | Path, schema: Schema | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# one metapath query per line\n")
        for q in queries:
            fh.write(q.text(schema) + "\n")


def load_workload(path: str | Path, schema: Schema) -> list[MetapathQuery]:
    queries = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            queries.append(parse_metapath(line, schema))
    return queries
