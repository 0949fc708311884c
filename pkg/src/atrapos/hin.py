"""Typed property-graph model: schema, CSV ingestion, and adjacency matrices."""

from __future__ import annotations

import csv
import json
import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sparse import SparseMatrix

OPERATORS = ("<=", ">=", "!=", "<", ">", "=")

# implicit string-valued property backed by the node id column
ID_PROPERTY = "id"


class SchemaError(ValueError):
    """Schema declaration violates the model invariants."""


class IngestError(ValueError):
    """Node or edge data contradicts the schema or itself."""


class MetapathParseError(ValueError):
    """Query text is not valid under the workload grammar."""


@dataclass(frozen=True)
class PropertyDecl:
    name: str
    kind: str  # "integer" | "string"

    def __post_init__(self):
        if self.kind not in ("integer", "string"):
            raise SchemaError(f"unknown property kind {self.kind!r}")


@dataclass(frozen=True)
class NodeTypeDecl:
    symbol: str
    id_column: str
    properties: tuple[PropertyDecl, ...] = ()

    def property_kind(self, name: str) -> str | None:
        if name == ID_PROPERTY:
            return "string"
        for p in self.properties:
            if p.name == name:
                return p.kind
        return None


@dataclass(frozen=True)
class EdgeTypeDecl:
    symbol: str
    src: str
    dst: str
    label: str | None = None


class Schema:
    """Node and edge type declarations of a heterogeneous network."""

    def __init__(self, node_types: list[NodeTypeDecl], edge_types: list[EdgeTypeDecl]):
        if len(node_types) < 2 or len(edge_types) < 2:
            raise SchemaError("a heterogeneous schema needs more than one node and edge type")
        self.node_types: dict[str, NodeTypeDecl] = {}
        for nt in node_types:
            if len(nt.symbol) != 1:
                raise SchemaError(f"node type symbol {nt.symbol!r} must be a single character")
            if nt.symbol in self.node_types:
                raise SchemaError(f"duplicate node type symbol {nt.symbol!r}")
            self.node_types[nt.symbol] = nt
        self.edge_types: dict[str, EdgeTypeDecl] = {}
        for et in edge_types:
            if et.symbol in self.edge_types:
                raise SchemaError(f"duplicate edge type symbol {et.symbol!r}")
            if et.src not in self.node_types or et.dst not in self.node_types:
                raise SchemaError(f"edge type {et.symbol!r} references undeclared node types")
            self.edge_types[et.symbol] = et

    def edges_between(self, src: str, dst: str) -> list[EdgeTypeDecl]:
        return [e for e in self.edge_types.values() if e.src == src and e.dst == dst]

    @classmethod
    def from_config(cls, config: dict) -> Schema:
        nts = [
            NodeTypeDecl(
                symbol=n["symbol"],
                id_column=n.get("id_column", "id"),
                properties=tuple(
                    PropertyDecl(p["name"], p["kind"]) for p in n.get("properties", ())
                ),
            )
            for n in config["node_types"]
        ]
        ets = [
            EdgeTypeDecl(e["symbol"], e["src"], e["dst"], e.get("label"))
            for e in config["edge_types"]
        ]
        return cls(nts, ets)

    @classmethod
    def from_file(cls, path: str | Path) -> Schema:
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_config(json.load(fh))

    def to_config(self) -> dict:
        return {
            "node_types": [
                {
                    "symbol": nt.symbol,
                    "id_column": nt.id_column,
                    "properties": [{"name": p.name, "kind": p.kind} for p in nt.properties],
                }
                for nt in self.node_types.values()
            ],
            "edge_types": [
                {"symbol": et.symbol, "src": et.src, "dst": et.dst, "label": et.label}
                for et in self.edge_types.values()
            ],
        }


@dataclass(frozen=True)
class Constraint:
    """Property predicate restricting which nodes of a type may appear."""

    node_type: str
    prop: str
    op: str
    value: int | str

    def __post_init__(self):
        if self.op not in OPERATORS:
            raise ValueError(f"unknown operator {self.op!r}")

    def canonical(self) -> str:
        return f"{self.node_type}.{self.prop}{self.op}{self.value}"

    def matches(self, value: int | str) -> bool:
        op = self.op
        if op == "=":
            return value == self.value
        if op == "!=":
            return value != self.value
        if op == "<":
            return value < self.value
        if op == "<=":
            return value <= self.value
        if op == ">":
            return value > self.value
        return value >= self.value


def validate_constraint(schema: Schema, c: Constraint) -> None:
    decl = schema.node_types.get(c.node_type)
    if decl is None:
        raise MetapathParseError(f"unknown node type {c.node_type!r} in constraint")
    kind = decl.property_kind(c.prop)
    if kind is None:
        raise MetapathParseError(f"{c.node_type!r} has no property {c.prop!r}")
    if kind == "integer" and not isinstance(c.value, int):
        raise MetapathParseError(f"constraint on {c.node_type}.{c.prop} needs an integer literal")
    if kind == "string" and not isinstance(c.value, str):
        raise MetapathParseError(f"constraint on {c.node_type}.{c.prop} needs a string literal")


@dataclass(frozen=True)
class MetapathQuery:
    """A node-type/edge-type sequence plus property constraints."""

    node_seq: tuple[str, ...]
    edge_seq: tuple[str, ...]
    constraints: frozenset[Constraint] = frozenset()

    def __post_init__(self):
        if len(self.node_seq) < 2:
            raise ValueError("a metapath needs at least two node types")
        if len(self.edge_seq) != len(self.node_seq) - 1:
            raise ValueError("edge sequence length must be node sequence length minus one")

    @property
    def length(self) -> int:
        return len(self.node_seq)

    def validate(self, schema: Schema) -> None:
        for sym in self.node_seq:
            if sym not in schema.node_types:
                raise MetapathParseError(f"unknown node type symbol {sym!r}")
        for k, esym in enumerate(self.edge_seq):
            decl = schema.edge_types.get(esym)
            if decl is None:
                raise MetapathParseError(f"unknown edge type symbol {esym!r}")
            if decl.src != self.node_seq[k] or decl.dst != self.node_seq[k + 1]:
                raise MetapathParseError(
                    f"edge {esym!r} does not connect {self.node_seq[k]!r} to {self.node_seq[k + 1]!r}"
                )
        for c in self.constraints:
            validate_constraint(schema, c)
            if c.node_type not in self.node_seq:
                raise MetapathParseError(
                    f"constraint on {c.node_type!r} which does not occur in the metapath"
                )

    def text(self, schema: Schema | None = None) -> str:
        """Canonical workload-grammar rendering of this query."""
        simple = True
        if schema is not None:
            for k in range(len(self.edge_seq)):
                between = schema.edges_between(self.node_seq[k], self.node_seq[k + 1])
                if len(between) != 1 or between[0].symbol != self.edge_seq[k]:
                    simple = False
                    break
        if simple:
            path = "".join(self.node_seq)
        else:
            bits = [self.node_seq[0]]
            for k, esym in enumerate(self.edge_seq):
                bits.append(f"-[{esym}]->{self.node_seq[k + 1]}")
            path = "".join(bits)
        if not self.constraints:
            return path
        cons = ",".join(sorted(c.canonical() for c in self.constraints))
        return f"{path} | {cons}"


class NodeTable:
    """Ordered nodes of one type with dense 0-based row indices."""

    def __init__(self, symbol: str):
        self.symbol = symbol
        self.ids: list[str] = []
        self.index: dict[str, int] = {}
        self.columns: dict[str, list] = {}

    def __len__(self) -> int:
        return len(self.ids)

    def property_values(self, prop: str) -> list:
        if prop == ID_PROPERTY:
            return self.ids
        return self.columns[prop]


@dataclass
class Hin:
    """Immutable ingested network: node tables plus one matrix per edge type."""

    schema: Schema
    node_tables: dict[str, NodeTable]
    adjacency: dict[str, SparseMatrix]

    def node_count(self, symbol: str) -> int:
        return len(self.node_tables[symbol])

    # -- binary fixture ------------------------------------------------------

    def save(self, path: str | Path) -> None:
        header = {
            "schema": self.schema.to_config(),
            "nodes": {
                sym: {"ids": t.ids, "columns": t.columns}
                for sym, t in self.node_tables.items()
            },
            "edge_order": list(self.adjacency.keys()),
        }
        head = json.dumps(header).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(struct.pack("<q", len(head)))
            fh.write(head)
            for sym in header["edge_order"]:
                blob = self.adjacency[sym].to_bytes()
                fh.write(struct.pack("<q", len(blob)))
                fh.write(blob)

    @classmethod
    def load(cls, path: str | Path) -> Hin:
        with open(path, "rb") as fh:
            (hlen,) = struct.unpack("<q", fh.read(8))
            header = json.loads(fh.read(hlen).decode("utf-8"))
            schema = Schema.from_config(header["schema"])
            tables: dict[str, NodeTable] = {}
            for sym, data in header["nodes"].items():
                t = NodeTable(sym)
                t.ids = list(data["ids"])
                t.index = {nid: i for i, nid in enumerate(t.ids)}
                t.columns = {k: list(v) for k, v in data["columns"].items()}
                tables[sym] = t
            adjacency = {}
            for sym in header["edge_order"]:
                (blen,) = struct.unpack("<q", fh.read(8))
                adjacency[sym] = SparseMatrix.from_bytes(fh.read(blen))
        return cls(schema, tables, adjacency)


def _read_node_csv(decl: NodeTypeDecl, path: str | Path) -> NodeTable:
    table = NodeTable(decl.symbol)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IngestError(f"{path}: empty node file")
        if header[0] != decl.id_column:
            raise IngestError(
                f"{path}: first column must be {decl.id_column!r}, found {header[0]!r}"
            )
        declared = {p.name for p in decl.properties}
        if set(header[1:]) != declared:
            raise IngestError(
                f"{path}: property columns {header[1:]} do not match schema {sorted(declared)}"
            )
        kinds = {p.name: p.kind for p in decl.properties}
        for name in header[1:]:
            table.columns[name] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            nid = row[0]
            if nid in table.index:
                raise IngestError(f"{path}:{lineno}: duplicate node id {nid!r}")
            table.index[nid] = len(table.ids)
            table.ids.append(nid)
            for name, raw in zip(header[1:], row[1:]):
                if kinds[name] == "integer":
                    try:
                        table.columns[name].append(int(raw))
                    except ValueError:
                        raise IngestError(
                            f"{path}:{lineno}: expected integer for {decl.symbol}.{name}, got {raw!r}"
                        ) from None
                else:
                    table.columns[name].append(raw)
    return table


def _read_edge_csv(
    decl: EdgeTypeDecl, path: str | Path, src_table: NodeTable, dst_table: NodeTable
) -> SparseMatrix:
    pairs: set[tuple[int, int]] = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)  # header row
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            src_id, dst_id = row[0], row[1]
            si = src_table.index.get(src_id)
            if si is None:
                raise IngestError(f"{path}:{lineno}: unknown {decl.src} node id {src_id!r}")
            di = dst_table.index.get(dst_id)
            if di is None:
                raise IngestError(f"{path}:{lineno}: unknown {decl.dst} node id {dst_id!r}")
            pairs.add((si, di))
    if not pairs:
        return SparseMatrix.zeros(len(src_table), len(dst_table))
    ri = [p[0] for p in pairs]
    ci = [p[1] for p in pairs]
    return SparseMatrix.from_coo(len(src_table), len(dst_table), ri, ci)


def load_hin(
    schema_config: str | Path,
    node_files: dict[str, str | Path],
    edge_files: dict[str, str | Path],
) -> Hin:
    """Ingest a network from a schema config plus per-type node and edge CSVs.

    Node row order follows file order, so matrices are reproducible. Edge CSVs
    carry a header row and two columns (source id, target id). Edge types with
    no file get an all-zero matrix of the declared shape.
    """
    schema = Schema.from_file(schema_config)
    tables: dict[str, NodeTable] = {}
    for sym, decl in schema.node_types.items():
        if sym not in node_files:
            raise IngestError(f"missing node file for type {sym!r}")
        tables[sym] = _read_node_csv(decl, node_files[sym])
    adjacency: dict[str, SparseMatrix] = {}
    for sym, decl in schema.edge_types.items():
        src_table, dst_table = tables[decl.src], tables[decl.dst]
        if sym in edge_files:
            adjacency[sym] = _read_edge_csv(decl, edge_files[sym], src_table, dst_table)
        else:
            adjacency[sym] = SparseMatrix.zeros(len(src_table), len(dst_table))
    return Hin(schema, tables, adjacency)


_CONSTRAINT_RE = re.compile(r"^\s*(\w)\.(\w+)\s*(<=|>=|!=|<|>|=)\s*(.+?)\s*$")
_EXPLICIT_RE = re.compile(r"-\[([^\]]+)\]->(\w)")


def parse_constraint(text: str, schema: Schema) -> Constraint:
    m = _CONSTRAINT_RE.match(text)
    if m is None:
        raise MetapathParseError(f"ill-formed constraint {text!r}")
    sym, prop, op, literal = m.groups()
    decl = schema.node_types.get(sym)
    if decl is None:
        raise MetapathParseError(f"unknown node type {sym!r} in constraint")
    kind = decl.property_kind(prop)
    if kind is None:
        raise MetapathParseError(f"{sym!r} has no property {prop!r}")
    value: int | str
    if kind == "integer":
        try:
            value = int(literal)
        except ValueError:
            raise MetapathParseError(
                f"ill-formed constraint literal {literal!r} for integer {sym}.{prop}"
            ) from None
    else:
        value = literal.strip("\"'")
    return Constraint(sym, prop, op, value)


def parse_metapath(text: str, schema: Schema) -> MetapathQuery:
    """Parse workload-grammar text into a validated query.

    Simplified form (``APT``) is accepted only when every consecutive type
    pair has exactly one edge type in the schema; the explicit form
    (``A-[AP]->P-[PT]->T``) always is. Constraints follow after ``|``,
    comma separated.
    """
    if "|" in text:
        path_text, cons_text = text.split("|", 1)
    else:
        path_text, cons_text = text, ""
    path_text = path_text.strip()
    if not path_text:
        raise MetapathParseError("empty metapath")

    if "-[" in path_text:
        head = path_text[0]
        node_seq = [head]
        edge_seq: list[str] = []
        rest = path_text[1:]
        pos = 0
        for m in _EXPLICIT_RE.finditer(rest):
            if m.start() != pos:
                raise MetapathParseError(f"cannot parse metapath near {rest[pos:]!r}")
            token, nxt = m.group(1), m.group(2)
            edge_seq.append(_resolve_edge(schema, token, node_seq[-1], nxt))
            node_seq.append(nxt)
            pos = m.end()
        if pos != len(rest) or not edge_seq:
            raise MetapathParseError(f"cannot parse metapath {path_text!r}")
    else:
        node_seq = list(path_text)
        edge_seq = []
        for sym in node_seq:
            if sym not in schema.node_types:
                raise MetapathParseError(f"unknown node type symbol {sym!r}")
        if len(node_seq) < 2:
            raise MetapathParseError("a metapath needs at least two node types")
        for a, b in zip(node_seq, node_seq[1:]):
            between = schema.edges_between(a, b)
            if not between:
                raise MetapathParseError(f"no edge type connects {a!r} to {b!r}")
            if len(between) > 1:
                raise MetapathParseError(
                    f"ambiguous pair {a}{b}: use the explicit -[..]-> form"
                )
            edge_seq.append(between[0].symbol)

    constraints = set()
    if cons_text.strip():
        for chunk in cons_text.split(","):
            constraints.add(parse_constraint(chunk, schema))
    query = MetapathQuery(tuple(node_seq), tuple(edge_seq), frozenset(constraints))
    query.validate(schema)
    return query


def _resolve_edge(schema: Schema, token: str, src: str, dst: str) -> str:
    decl = schema.edge_types.get(token)
    if decl is not None and decl.src == src and decl.dst == dst:
        return token
    by_label = [
        e for e in schema.edges_between(src, dst) if e.label == token
    ]
    if len(by_label) == 1:
        return by_label[0].symbol
    raise MetapathParseError(
        f"no edge type {token!r} from {src!r} to {dst!r}"
    )


def constraint_mask(hin: Hin, node_type: str, constraints) -> np.ndarray:
    """Boolean selector over the nodes of a type satisfying every constraint."""
    table = hin.node_tables[node_type]
    mask = np.ones(len(table), dtype=bool)
    for c in constraints:
        if c.node_type != node_type:
            raise ValueError(f"constraint on {c.node_type!r} applied to {node_type!r}")
        values = table.property_values(c.prop)
        mask &= np.array([c.matches(v) for v in values], dtype=bool)
    return mask


def constrained_adjacency(hin: Hin, edge_type: str, constraints) -> SparseMatrix:
    """Adjacency of an edge type with non-qualifying endpoints zeroed.

    Constraints on the source type drop rows, constraints on the target type
    drop columns; a constraint whose type is both endpoints applies to both
    sides. Implemented by filtering, never by materializing diagonal
    selectors, so the result is never denser than the plain matrix.
    """
    decl = hin.schema.edge_types.get(edge_type)
    if decl is None:
        raise ValueError(f"unknown edge type {edge_type!r}")
    row_cons = []
    col_cons = []
    for c in constraints:
        validate_constraint(hin.schema, c)
        hit = False
        if c.node_type == decl.src:
            row_cons.append(c)
            hit = True
        if c.node_type == decl.dst:
            col_cons.append(c)
            hit = True
        if not hit:
            raise ValueError(
                f"constraint on {c.node_type!r} not incident to edge type {edge_type!r}"
            )
    matrix = hin.adjacency[edge_type]
    if row_cons:
        matrix = matrix.filter_rows(constraint_mask(hin, decl.src, row_cons))
    if col_cons:
        matrix = matrix.filter_cols(constraint_mask(hin, decl.dst, col_cons))
    return matrix
