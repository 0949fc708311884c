"""Bounded result-matrix store with LRU, PGDS, and overlap-aware policies."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .overlap_tree import NodeStats, OverlapTree
from .sparse import SparseMatrix

CacheKey = tuple[str, str]  # (sub-metapath, constraint key)

OVERSIZE_FRACTION = 0.8


class Policy(str, Enum):
    LRU = "lru"
    PGDS = "pgds"
    OTREE = "otree"


class FreqStats:
    """Request-frequency adapter for policies running without an overlap tree."""

    __slots__ = ("f", "cache_ref")

    def __init__(self):
        self.f = 0
        self.cache_ref = None

    def bump_request(self) -> None:
        self.f += 1


class CacheEntry:
    """One stored result matrix with the bookkeeping the policies need.

    The cost is mutable: under the overlap-aware policy it shrinks when an
    ancestor result is cached (recomputation got cheaper) and is reinstated
    when that ancestor is evicted.
    """

    __slots__ = ("key", "matrix", "size", "cost", "stats", "tree_node", "inserted_L", "h", "insert_seq", "recency_seq")

    def __init__(self, key: CacheKey, matrix: SparseMatrix, cost: float, stats=None, tree_node=None):
        self.key = key
        self.matrix = matrix
        self.size = matrix.size_bytes()
        self.cost = float(cost)
        self.stats = stats
        self.tree_node = tree_node
        self.inserted_L = 0.0
        self.h = 0.0
        self.insert_seq = -1
        self.recency_seq = -1

    @property
    def f(self) -> int:
        return self.stats.f if self.stats is not None else 1

    def recompute_h(self) -> None:
        self.h = self.f * self.cost / self.size + self.inserted_L


@dataclass(frozen=True)
class InsertOutcome:
    inserted: bool
    reason: str | None = None


def _fmt(v) -> str:
    if isinstance(v, float):
        return str(int(v)) if v.is_integer() else repr(v)
    return str(v)


class CacheState:
    """Byte-bounded store of result matrices under a pluggable policy."""

    def __init__(self, capacity_bytes: int, policy: Policy = Policy.OTREE):
        if capacity_bytes <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity_bytes)
        self.policy = policy
        self.entries: dict[CacheKey, CacheEntry] = {}
        self.used = 0
        self.peak_used = 0
        self.L = 0.0
        self.hits = 0
        self.misses = 0
        self.insertions = 0
        self.evictions = 0
        self.trace: list[str] = []
        self._seq = 0

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _log(self, event: str, key: CacheKey, entry: CacheEntry | None = None, extra: str = "") -> None:
        name = f"{key[0]}|{key[1]}" if key[1] else key[0]
        if entry is not None:
            line = (
                f"{event} {name} f={entry.f} c={_fmt(entry.cost)} "
                f"s={entry.size} h={_fmt(entry.h)} L={_fmt(self.L)}"
            )
        else:
            line = f"{event} {name} L={_fmt(self.L)}"
        if extra:
            line += f" {extra}"
        self.trace.append(line)

    # -- operations ----------------------------------------------------------

    def request(self, key: CacheKey, stats=None) -> SparseMatrix | None:
        """Look up a result; every request bumps the frequency counter.

        On a hit the entry's inflation baseline moves to the current L and its
        utility is recomputed (recency is bumped instead under LRU). A miss
        leaves the store untouched.
        """
        if stats is not None:
            stats.bump_request()
        entry = self.entries.get(key)
        if entry is None:
            self.misses += 1
            self._log("MISS", key)
            return None
        self.hits += 1
        if self.policy is Policy.LRU:
            entry.recency_seq = self._next_seq()
        else:
            entry.inserted_L = self.L
            entry.recompute_h()
        self._log("HIT", key, entry)
        return entry.matrix

    def try_insert(self, entry: CacheEntry, tree: OverlapTree | None = None) -> InsertOutcome:
        """Insert an entry, evicting by policy until it fits.

        Entries larger than 80% of the capacity are rejected outright. Under
        the overlap-aware policy every eviction reinstates the victim's cost
        onto live entries in its subtree, and the insertion subtracts the new
        entry's cost from live entries in its own subtree (floored at zero).
        """
        if entry.key in self.entries:
            return InsertOutcome(False, "exists")
        if entry.size > OVERSIZE_FRACTION * self.capacity:
            self._log("REJECT", entry.key, entry, extra="oversize")
            return InsertOutcome(False, "oversize")
        while self.used + entry.size > self.capacity:
            victim = self._pick_victim()
            if self.policy is not Policy.LRU:
                self.L = max(self.L, victim.h)
            self._evict(victim, tree)
        entry.inserted_L = self.L
        entry.recompute_h()
        entry.insert_seq = self._next_seq()
        entry.recency_seq = entry.insert_seq
        self.entries[entry.key] = entry
        self.used += entry.size
        self.peak_used = max(self.peak_used, self.used)
        self.insertions += 1
        if entry.stats is not None:
            entry.stats.cache_ref = entry
        self._log("INSERT", entry.key, entry)
        if self.policy is Policy.OTREE and tree is not None and entry.tree_node is not None:
            for dep_stats in tree.subtree_cached_entries(entry.tree_node, entry.key[1]):
                dep = dep_stats.cache_ref
                dep.cost = max(0.0, dep.cost - entry.cost)
                dep.recompute_h()
        return InsertOutcome(True)

    def _pick_victim(self) -> CacheEntry:
        if self.policy is Policy.LRU:
            return min(self.entries.values(), key=lambda e: e.recency_seq)
        return min(self.entries.values(), key=lambda e: (e.h, e.insert_seq))

    def _evict(self, victim: CacheEntry, tree: OverlapTree | None) -> None:
        del self.entries[victim.key]
        self.used -= victim.size
        self.evictions += 1
        if victim.stats is not None:
            victim.stats.cache_ref = None
        self._log("EVICT", victim.key, victim)
        if self.policy is Policy.OTREE and tree is not None and victim.tree_node is not None:
            for dep_stats in tree.subtree_cached_entries(victim.tree_node, victim.key[1]):
                dep = dep_stats.cache_ref
                dep.cost += victim.cost
                dep.recompute_h()


@dataclass
class CandidateDraft:
    """A cache entry the insertion policy wants to attempt."""

    sub_metapath: str
    key: str
    matrix: SparseMatrix
    cost: float
    stats: NodeStats
    tree_node: object | None

    def cache_key(self) -> CacheKey:
        return (self.sub_metapath, self.key)

    def to_entry(self) -> CacheEntry:
        return CacheEntry(self.cache_key(), self.matrix, self.cost, self.stats, self.tree_node)


def insertion_candidates(
    tree: OverlapTree,
    metapath: str,
    key: str,
    result_matrix: SparseMatrix,
    result_cost: float,
    produced_spans: list[tuple[str, str, SparseMatrix, float]],
    whole_stats: NodeStats,
) -> list[CandidateDraft]:
    """Insertion policy: the whole result plus the longest repeated overlap.

    The overlap draft is the longest produced intermediate that spells an
    internal tree node seen at least twice under the span's constraint key;
    shorter overlaps are skipped even when their results are available. The
    query must already be inserted in the tree.
    """
    drafts = [
        CandidateDraft(
            metapath, key, result_matrix, result_cost, whole_stats, tree.walk_exact(metapath)
        )
    ]
    match = tree.longest_overlap_match(
        metapath, key, [(sub, sub_key) for sub, sub_key, _, _ in produced_spans]
    )
    if match is not None:
        sub, stats = match
        if sub != metapath:
            for cand_sub, cand_key, matrix, cost in produced_spans:
                if cand_sub == sub and tree.get_stats(cand_sub, cand_key) is stats:
                    drafts.append(
                        CandidateDraft(sub, cand_key, matrix, cost, stats, tree.walk_exact(sub))
                    )
                    break
    return drafts
