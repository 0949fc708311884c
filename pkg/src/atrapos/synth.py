"""Random network fixtures: CSV emission with recorded ground truth."""

from __future__ import annotations

import json
import random
import string
from dataclasses import dataclass, field
from pathlib import Path

from .hin import Hin, load_hin
from .sparse import SparseMatrix


def random_sparse(
    rng: random.Random, rows: int, cols: int, density: float, max_value: int = 1
) -> SparseMatrix:
    """Uniformly placed nonzeros with exactly round(density*rows*cols) entries."""
    nnz = min(rows * cols, round(density * rows * cols))
    flat = rng.sample(range(rows * cols), nnz)
    ri = [f // cols for f in flat]
    ci = [f % cols for f in flat]
    vals = [rng.randint(1, max_value) for _ in range(nnz)] if max_value > 1 else None
    return SparseMatrix.from_coo(rows, cols, ri, ci, vals)


@dataclass
class SynthNodeType:
    symbol: str
    count: int
    int_props: dict[str, tuple[int, int]] = field(default_factory=dict)  # name -> (lo, hi)
    str_props: dict[str, list[str]] = field(default_factory=dict)  # name -> value pool


@dataclass
class SynthEdgeType:
    symbol: str
    src: str
    dst: str
    nnz: int
    reverse_symbol: str | None = None  # emit the transposed relation too


@dataclass
class SynthSpec:
    node_types: list[SynthNodeType]
    edge_types: list[SynthEdgeType]


@dataclass
class GroundTruth:
    """What the generator actually emitted, for ingestion oracles."""

    node_counts: dict[str, int]
    edge_nnz: dict[str, int]
    edges: dict[str, list[tuple[str, str]]]
    node_ids: dict[str, list[str]]
    properties: dict[str, dict[str, list]]


def generate_hin_files(
    spec: SynthSpec, out_dir: str | Path, seed: int = 0
) -> tuple[dict, GroundTruth]:
    """Write schema config plus node/edge CSVs; return paths and ground truth."""
    rng = random.Random(seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    schema_config = {
        "node_types": [
            {
                "symbol": nt.symbol,
                "id_column": "id",
                "properties": (
                    [{"name": n, "kind": "integer"} for n in nt.int_props]
                    + [{"name": n, "kind": "string"} for n in nt.str_props]
                ),
            }
            for nt in spec.node_types
        ],
        "edge_types": [],
    }
    node_ids: dict[str, list[str]] = {}
    properties: dict[str, dict[str, list]] = {}
    node_files: dict[str, Path] = {}
    for nt in spec.node_types:
        ids = [f"{nt.symbol}{i}" for i in range(nt.count)]
        node_ids[nt.symbol] = ids
        props: dict[str, list] = {}
        for name, (lo, hi) in nt.int_props.items():
            props[name] = [rng.randint(lo, hi) for _ in range(nt.count)]
        for name, pool in nt.str_props.items():
            props[name] = [rng.choice(pool) for _ in range(nt.count)]
        properties[nt.symbol] = props
        path = out_dir / f"nodes_{nt.symbol}.csv"
        node_files[nt.symbol] = path
        header = ["id"] + list(props.keys())
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(header) + "\n")
            for i, nid in enumerate(ids):
                row = [nid] + [str(props[name][i]) for name in props]
                fh.write(",".join(row) + "\n")

    edge_files: dict[str, Path] = {}
    edges: dict[str, list[tuple[str, str]]] = {}
    edge_nnz: dict[str, int] = {}
    counts = {nt.symbol: nt.count for nt in spec.node_types}
    for et in spec.edge_types:
        ns, nd = counts[et.src], counts[et.dst]
        nnz = min(et.nnz, ns * nd)
        flat = rng.sample(range(ns * nd), nnz)
        pairs = [(node_ids[et.src][f // nd], node_ids[et.dst][f % nd]) for f in flat]
        edges[et.symbol] = pairs
        edge_nnz[et.symbol] = len(pairs)
        schema_config["edge_types"].append({"symbol": et.symbol, "src": et.src, "dst": et.dst})
        path = out_dir / f"edges_{et.symbol}.csv"
        edge_files[et.symbol] = path
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("src,dst\n")
            for a, b in pairs:
                fh.write(f"{a},{b}\n")
        if et.reverse_symbol:
            rpairs = [(b, a) for a, b in pairs]
            edges[et.reverse_symbol] = rpairs
            edge_nnz[et.reverse_symbol] = len(rpairs)
            schema_config["edge_types"].append(
                {"symbol": et.reverse_symbol, "src": et.dst, "dst": et.src}
            )
            rpath = out_dir / f"edges_{et.reverse_symbol}.csv"
            edge_files[et.reverse_symbol] = rpath
            with open(rpath, "w", encoding="utf-8") as fh:
                fh.write("src,dst\n")
                for a, b in rpairs:
                    fh.write(f"{a},{b}\n")

    schema_path = out_dir / "schema.json"
    with open(schema_path, "w", encoding="utf-8") as fh:
        json.dump(schema_config, fh, indent=1)

    paths = {"schema": schema_path, "nodes": node_files, "edges": edge_files}
    truth = GroundTruth(dict(counts), edge_nnz, edges, node_ids, properties)
    return paths, truth


def synth_hin(spec: SynthSpec, out_dir: str | Path, seed: int = 0) -> tuple[Hin, GroundTruth]:
    """Generate files and ingest them in one step."""
    paths, truth = generate_hin_files(spec, out_dir, seed)
    hin = load_hin(paths["schema"], paths["nodes"], paths["edges"])
    return hin, truth


def random_chain_spec(
    rng: random.Random, n_types: int, count_range: tuple[int, int], degree: float
) -> SynthSpec:
    """A connected random schema: a ring of types plus a few chords.

    Every consecutive type pair gets exactly one edge type in each direction,
    so the simplified metapath grammar stays unambiguous.
    """
    symbols = list(string.ascii_uppercase[:n_types])
    node_types = [
        SynthNodeType(
            s,
            rng.randint(*count_range),
            int_props={"year": (2000, 2030)},
        )
        for s in symbols
    ]
    counts = {nt.symbol: nt.count for nt in node_types}
    edge_types: list[SynthEdgeType] = []
    seen_pairs: set[tuple[str, str]] = set()

    def add_edge(a: str, b: str) -> None:
        if a == b or (a, b) in seen_pairs:
            return
        seen_pairs.add((a, b))
        seen_pairs.add((b, a))
        nnz = max(1, int(degree * min(counts[a], counts[b])))
        edge_types.append(SynthEdgeType(f"{a}{b}", a, b, nnz, reverse_symbol=f"{b}{a}"))

    for i in range(n_types):
        add_edge(symbols[i], symbols[(i + 1) % n_types])
    extra = rng.randint(0, max(0, n_types - 2))
    for _ in range(extra):
        a, b = rng.sample(symbols, 2)
        add_edge(a, b)
    return SynthSpec(node_types, edge_types)
