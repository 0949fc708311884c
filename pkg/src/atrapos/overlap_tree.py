"""Suffix-structure index over evaluated metapath strings.

Internal nodes mark sub-metapaths observed in more than one suffix context and
carry per-constraint statistics (occurrence count, recompute cost, result
nonzeros) plus references into the result cache. Construction is the naive
quadratic insertion: every query contributes all its sentinel-terminated
suffixes, so each query of length n adds exactly n leaves.
"""

from __future__ import annotations

from dataclasses import dataclass

from .planner import SpanCostHint


def _is_sentinel(token: str) -> bool:
    return token.startswith("#")


def restrict_key(key: str, sub_metapath: str, *, final: bool) -> str:
    """Project a constraint key onto the constraints baked into a sub-chain.

    A sub-chain's matrices carry row filters for every node position except
    the last one; the last position is filtered (on columns) only when the
    sub-chain ends the whole query. Constraints outside those positions are
    dropped. When the final symbol's type also occurs earlier in the span, a
    ``$`` marker records the extra column filter: the interior and final
    projections would otherwise alias two different products (e.g. span PAP
    constrained on P, with and without the last position filtered).
    """
    if not key:
        return ""
    interior = set(sub_metapath[:-1])
    last = sub_metapath[-1]
    allowed = interior | {last} if final else interior
    kept = sorted(part for part in key.split(",") if part and part[0] in allowed)
    if final and last in interior and any(part[0] == last for part in kept):
        kept.append("$")
    return ",".join(kept)


def make_key(constraints) -> str:
    """Canonical key string for a set of constraints (empty when unconstrained)."""
    return ",".join(sorted(c.canonical() for c in constraints))


def applicable_keys(metapath: str, sub_metapath: str, key: str) -> list[str]:
    """Key buckets a query touches at the node spelling ``sub_metapath``.

    A substring occurring somewhere strictly inside the metapath binds the
    interior projection of the key; one ending at the metapath's end binds the
    final projection. Both can apply when the substring repeats.
    """
    keys = set()
    pos = metapath.find(sub_metapath)
    n = len(sub_metapath)
    while pos >= 0:
        final = pos + n == len(metapath)
        keys.add(restrict_key(key, sub_metapath, final=final))
        pos = metapath.find(sub_metapath, pos + 1)
    return sorted(keys)


class NodeStats:
    """Per-constraint statistics of one tree node.

    ``f`` counts distinct queries containing the sub-metapath under this key
    plus explicit cache-request bumps; ``c`` and ``rho`` are written back
    after the corresponding multiplication actually ran.
    """

    __slots__ = ("_qids", "_bumps", "cache_ref", "c", "rho", "rows", "cols")

    def __init__(self):
        self._qids: set[int] = set()
        self._bumps = 0
        self.cache_ref = None
        self.c: float | None = None
        self.rho: int | None = None
        self.rows: int | None = None
        self.cols: int | None = None

    @property
    def f(self) -> int:
        return len(self._qids) + self._bumps

    def bump_request(self) -> None:
        self._bumps += 1

    def record_result(self, cost: float, nnz: int, rows: int, cols: int) -> None:
        self.c = cost
        self.rho = nnz
        self.rows = rows
        self.cols = cols

    def density(self) -> float:
        if self.rho is None or not self.rows or not self.cols:
            return 0.0
        return self.rho / (self.rows * self.cols)

    def __repr__(self):
        return f"NodeStats(f={self.f}, cached={self.cache_ref is not None}, c={self.c}, rho={self.rho})"


class _Node:
    __slots__ = ("label", "children", "index", "spelled", "is_leaf", "qid", "query", "query_key", "clean")

    def __init__(self, label: tuple[str, ...], *, spelled: str | None = None, is_leaf: bool = False):
        self.label = label
        self.children: dict[str, _Node] = {}
        self.index: dict[str, NodeStats] = {}
        self.spelled = spelled  # clean symbols from the root; None for leaves
        self.is_leaf = is_leaf
        self.qid = -1
        self.query = ""
        self.query_key = ""
        self.clean = ""  # leaf only: suffix without the sentinel


@dataclass
class InsertReport:
    """Internal nodes touched by one insertion, longest sub-metapath first."""

    qid: int
    nodes: list[tuple[str, NodeStats]]
    whole_stats: NodeStats


class OverlapTree:
    """Dynamic index of metapath overlaps, built one query at a time."""

    def __init__(self):
        self.root = _Node((), spelled="")
        self.next_qid = 0
        self.leaf_count = 0
        self.internal_count = 0  # excludes the root

    # -- construction ------------------------------------------------------

    def insert_query(self, metapath: str, key: str = "") -> InsertReport:
        """Insert a metapath and all its suffixes, updating overlap statistics.

        Every suffix ends at a fresh leaf thanks to the query-unique sentinel;
        edges are split where a match ends mid-edge, and the new internal node
        inherits statistics for the queries already below it.
        """
        if len(metapath) < 2:
            raise ValueError("metapath must have length at least 2")
        if "#" in metapath:
            raise ValueError("'#' is reserved for sentinels")
        qid = self.next_qid
        self.next_qid += 1
        sentinel = f"#{qid}"
        touched: dict[int, _Node] = {}
        leaf0: _Node | None = None
        for k in range(len(metapath)):
            suffix = tuple(metapath[k:]) + (sentinel,)
            leaf = self._insert_suffix(suffix, metapath[k:], qid, metapath, key, touched)
            if k == 0:
                leaf0 = leaf

        for node in touched.values():
            for bucket_key in applicable_keys(metapath, node.spelled, key):
                node.index.setdefault(bucket_key, NodeStats())._qids.add(qid)

        whole_node = self.walk_exact(metapath)
        if whole_node is not None:
            whole_stats = whole_node.index[restrict_key(key, metapath, final=True)]
        else:
            assert leaf0 is not None
            whole_stats = next(iter(leaf0.index.values()))

        report_nodes = [
            (node.spelled, node.index[restrict_key(key, node.spelled, final=metapath.endswith(node.spelled))])
            for node in touched.values()
        ]
        report_nodes.sort(key=lambda t: (-len(t[0]), t[0]))
        return InsertReport(qid, report_nodes, whole_stats)

    def _insert_suffix(
        self,
        suffix: tuple[str, ...],
        clean: str,
        qid: int,
        metapath: str,
        key: str,
        touched: dict[int, _Node],
    ) -> _Node:
        node = self.root
        pos = 0
        while True:
            child = node.children.get(suffix[pos])
            if child is None:
                leaf = self._new_leaf(suffix[pos:], clean, qid, metapath, key)
                node.children[suffix[pos]] = leaf
                return leaf
            label = child.label
            limit = min(len(label), len(suffix) - pos)
            i = 1
            while i < limit and label[i] == suffix[pos + i]:
                i += 1
            if i == len(label):
                # full edge match; only internal nodes can be matched through
                node = child
                pos += i
                touched[id(child)] = child
                continue
            # the match ends inside this edge: break it in two
            split = _Node(label[:i], spelled=node.spelled + "".join(label[:i]))
            self.internal_count += 1
            child.label = label[i:]
            split.children[child.label[0]] = child
            node.children[suffix[pos]] = split
            if child.is_leaf and len(child.label) == 1 and _is_sentinel(child.label[0]):
                # the split lands exactly on the sentinel: the new node spells
                # the leaf's whole sub-metapath, so it takes over its stats
                split.index = child.index
                child.index = {}
                shell = NodeStats()
                shell._qids.add(child.qid)
                child.index[restrict_key(child.query_key, child.clean, final=True)] = shell
            else:
                self._seed_index(split)
            leaf = self._new_leaf(suffix[pos + i :], clean, qid, metapath, key)
            split.children[suffix[pos + i]] = leaf
            touched[id(split)] = split
            return leaf

    def _new_leaf(
        self, label: tuple[str, ...], clean: str, qid: int, metapath: str, key: str
    ) -> _Node:
        leaf = _Node(label, is_leaf=True)
        leaf.qid = qid
        leaf.query = metapath
        leaf.query_key = key
        leaf.clean = clean
        stats = NodeStats()
        stats._qids.add(qid)
        leaf.index[restrict_key(key, clean, final=True)] = stats
        self.leaf_count += 1
        return leaf

    def _seed_index(self, split: _Node) -> None:
        # reconstruct per-key occurrence counts for the queries whose suffixes
        # already pass through the new node
        sub = split.spelled
        for leaf in self._leaves_below(split):
            for bucket_key in applicable_keys(leaf.query, sub, leaf.query_key):
                split.index.setdefault(bucket_key, NodeStats())._qids.add(leaf.qid)

    def _leaves_below(self, node: _Node):
        stack = [node]
        while stack:
            cur = stack.pop()
            if cur.is_leaf:
                yield cur
            else:
                stack.extend(cur.children.values())

    # -- queries -----------------------------------------------------------

    def walk_exact(self, sub_metapath: str) -> _Node | None:
        """Node spelling exactly this string, if the walk ends on a node."""
        if not sub_metapath:
            return None
        node = self.root
        pos = 0
        while pos < len(sub_metapath):
            child = node.children.get(sub_metapath[pos])
            if child is None:
                return None
            label = child.label
            for i in range(len(label)):
                if pos + i >= len(sub_metapath):
                    return None  # ends mid-edge
                if label[i] != sub_metapath[pos + i]:
                    return None
            node = child
            pos += len(label)
        return node if not node.is_leaf else None

    def get_stats(self, sub_metapath: str, key: str) -> NodeStats | None:
        node = self.walk_exact(sub_metapath)
        if node is None:
            return None
        return node.index.get(key)

    def span_hint(self, sub_metapath: str, key: str) -> SpanCostHint:
        """Planner hint for one sub-metapath under one constraint key."""
        stats = self.get_stats(sub_metapath, key)
        if stats is None:
            return SpanCostHint.unknown()
        if stats.cache_ref is not None:
            return SpanCostHint.cached(0.0, stats.density())
        if stats.c is not None:
            return SpanCostHint.known(stats.c, stats.density())
        return SpanCostHint.unknown()

    def longest_overlap_match(
        self, metapath: str, key: str, candidate_spans
    ) -> tuple[str, NodeStats] | None:
        """Longest candidate sub-metapath that is a repeated overlap.

        Candidates are contiguous substrings of the metapath (the produced
        intermediates of a plan), given either as plain strings or as
        (substring, key) pairs in production order. A candidate qualifies when
        it spells an internal node whose stats under the projected key show at
        least two occurrences. Ties break toward higher frequency, then
        earlier production order.
        """
        best = None
        best_rank = None
        for order, cand in enumerate(candidate_spans):
            if isinstance(cand, tuple):
                sub, sub_key = cand
            else:
                sub = cand
                sub_key = restrict_key(key, sub, final=metapath.endswith(sub))
            node = self.walk_exact(sub)
            if node is None or node is self.root:
                continue
            stats = node.index.get(sub_key)
            if stats is None or stats.f < 2:
                continue
            rank = (len(sub), stats.f, -order)
            if best_rank is None or rank > best_rank:
                best_rank = rank
                best = (sub, stats)
        return best

    def subtree_cached_entries(self, node: _Node, key: str) -> list[NodeStats]:
        """Stats of live cache entries strictly below a node, compatible keys only.

        A descendant entry qualifies when its key, projected onto the
        ancestor's sub-metapath, equals the ancestor's key: the cached
        descendant result embeds exactly the ancestor's constraints on the
        shared span.
        """
        out: list[NodeStats] = []
        anc = node.spelled
        stack = [node.children[s] for s in sorted(node.children, reverse=True)]
        while stack:
            cur = stack.pop()
            for key_d in sorted(cur.index):
                stats = cur.index[key_d]
                if stats.cache_ref is not None and restrict_key(key_d, anc, final=False) == key:
                    out.append(stats)
            if not cur.is_leaf:
                stack.extend(cur.children[s] for s in sorted(cur.children, reverse=True))
        return out

    # -- introspection -----------------------------------------------------

    @property
    def node_count(self) -> int:
        """All nodes except the root."""
        return self.leaf_count + self.internal_count

    def internal_nodes(self):
        stack = list(self.root.children.values())
        while stack:
            cur = stack.pop()
            if not cur.is_leaf:
                yield cur
                stack.extend(cur.children.values())

    def dump(self) -> str:
        """Indented rendering of edges, sub-metapaths, and per-key statistics."""
        lines: list[str] = []

        def fmt_stats(node: _Node) -> str:
            bits = []
            for k in sorted(node.index):
                st = node.index[k]
                cached = "yes" if st.cache_ref is not None else "no"
                c = "-" if st.c is None else f"{st.c:g}"
                rho = "-" if st.rho is None else str(st.rho)
                bits.append(f"{k or 'ε'}: f={st.f} cached={cached} c={c} rho={rho}")
            return "; ".join(bits)

        def rec(node: _Node, depth: int) -> None:
            for sym in sorted(node.children):
                ch = node.children[sym]
                label = "".join(ch.label)
                name = "".join(ch.label) if ch.is_leaf else ch.spelled
                kind = "leaf" if ch.is_leaf else "node"
                lines.append(f"{'  ' * depth}{label} [{kind} {name}] {fmt_stats(ch)}".rstrip())
                if not ch.is_leaf:
                    rec(ch, depth + 1)

        lines.append("root")
        rec(self.root, 1)
        return "\n".join(lines)
