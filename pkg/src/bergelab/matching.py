"""Matching toolkit: bipartite maximum matching and hyperedge pattern matchings.

A pattern matching between disjoint vertex sets U1, U2 pairs each vertex of
U1 with a distinct vertex of U2 through a distinct witness hyperedge that
meets the two sets in pattern (1, r-1) or (r-1, 1).  A 2-matching assigns
every source vertex two distinct witness edges with an injective
representative map into the target set.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import Hypergraph, ParameterError, _set_mask

__all__ = [
    "MatchedPair",
    "PairMatching",
    "TwoMatchingEntry",
    "TwoMatching",
    "NoMatchingError",
    "max_bipartite_matching",
    "hall_violator",
    "find_U1U2_matching",
    "find_one_sided_matching",
    "find_two_matching",
]


class NoMatchingError(Exception):
    """Raised when no saturating matching exists; carries a Hall-violating set.

    ``violator`` is a subset T of the left side with fewer than |T| neighbours
    in the auxiliary bipartite graph.
    """

    def __init__(self, violator: Sequence[int], message: str = ""):
        self.violator = tuple(sorted(violator))
        super().__init__(message or f"Hall violation at T={self.violator}")


@dataclass(frozen=True)
class MatchedPair:
    a: int
    b: int
    edge_id: int
    pattern: tuple  # (|e ∩ U1|, |e ∩ U2|)


@dataclass
class PairMatching:
    pairs: List[MatchedPair]

    def edge_ids(self) -> set:
        return {p.edge_id for p in self.pairs}

    def validate(self, H: Hypergraph, U1: Iterable[int], U2: Iterable[int]) -> None:
        u1 = set(U1)
        u2 = set(U2)
        a_seen: set = set()
        b_seen: set = set()
        e_seen: set = set()
        for p in self.pairs:
            if p.a in a_seen or p.b in b_seen or p.edge_id in e_seen:
                raise ParameterError("matching entries are not pairwise distinct")
            a_seen.add(p.a)
            b_seen.add(p.b)
            e_seen.add(p.edge_id)
            edge = set(H.edge(p.edge_id))
            if p.a not in edge or p.b not in edge:
                raise ParameterError(f"edge {p.edge_id} misses its endpoints")
            i, j = len(edge & u1), len(edge & u2)
            if (i, j) != p.pattern or i + j != H.r or p.pattern not in ((1, H.r - 1), (H.r - 1, 1)):
                raise ParameterError(f"edge {p.edge_id} pattern {(i, j)} invalid")


@dataclass(frozen=True)
class TwoMatchingEntry:
    a: int
    e_edge: int
    f_edge: int
    tau_e: int  # representative of e_edge in B
    tau_f: int  # representative of f_edge in B


@dataclass
class TwoMatching:
    entries: List[TwoMatchingEntry]

    def edge_ids(self) -> set:
        out: set = set()
        for t in self.entries:
            out.add(t.e_edge)
            out.add(t.f_edge)
        return out

    def validate(self, H: Hypergraph, A: Iterable[int], B: Iterable[int]) -> None:
        a_set = set(A)
        b_set = set(B)
        eids: list = []
        taus: list = []
        for t in self.entries:
            if t.a not in a_set:
                raise ParameterError(f"source {t.a} outside A")
            eids.extend([t.e_edge, t.f_edge])
            taus.extend([t.tau_e, t.tau_f])
            for eid, tau in ((t.e_edge, t.tau_e), (t.f_edge, t.tau_f)):
                edge = set(H.edge(eid))
                if t.a not in edge:
                    raise ParameterError(f"edge {eid} misses its source {t.a}")
                if tau not in edge or tau not in b_set:
                    raise ParameterError(f"representative {tau} invalid for edge {eid}")
                if len(edge & a_set) != 1 or len(edge & b_set) != H.r - 1:
                    raise ParameterError(f"edge {eid} is not a (1, r-1)-edge for (A, B)")
        if len(set(eids)) != len(eids):
            raise ParameterError("2-matching edges are not pairwise distinct")
        if len(set(taus)) != len(taus):
            raise ParameterError("representative map is not injective")


# -- bipartite maximum matching (Hopcroft-Karp) ---------------------------

_INF = -1


def max_bipartite_matching(
    left_size: int,
    right_size: int,
    adjacency: Sequence[Sequence[int]],
) -> Dict[int, int]:
    """Maximum matching via layered BFS phases and augmenting DFS.

    ``adjacency[a]`` lists right-side neighbours of left vertex ``a``.
    Deterministic given adjacency order.  Returns {left: right}.
    """
    if len(adjacency) != left_size:
        raise ParameterError("adjacency must have one entry per left vertex")
    pair_l = [_INF] * left_size
    pair_r = [_INF] * right_size
    dist = [0] * left_size

    def bfs() -> bool:
        q: deque = deque()
        for a in range(left_size):
            if pair_l[a] == _INF:
                dist[a] = 0
                q.append(a)
            else:
                dist[a] = _INF
        found = False
        while q:
            a = q.popleft()
            for b in adjacency[a]:
                a2 = pair_r[b]
                if a2 == _INF:
                    found = True
                elif dist[a2] == _INF:
                    dist[a2] = dist[a] + 1
                    q.append(a2)
        return found

    def dfs(a: int) -> bool:
        for b in adjacency[a]:
            a2 = pair_r[b]
            if a2 == _INF or (dist[a2] == dist[a] + 1 and dfs(a2)):
                pair_l[a] = b
                pair_r[b] = a
                return True
        dist[a] = _INF
        return False

    while bfs():
        for a in range(left_size):
            if pair_l[a] == _INF:
                dfs(a)
    return {a: b for a, b in enumerate(pair_l) if b != _INF}


def hall_violator(
    left_size: int,
    adjacency: Sequence[Sequence[int]],
    matching: Dict[int, int],
) -> Optional[Tuple[int, ...]]:
    """Hall-violating left set if the matching does not saturate the left side.

    Standard alternating-reachability argument: T is every left vertex
    reachable from an unmatched one by alternating paths; then N(T) is fully
    matched into T and |N(T)| = |T| - #unmatched < |T|.
    """
    unmatched = [a for a in range(left_size) if a not in matching]
    if not unmatched:
        return None
    right_owner = {b: a for a, b in matching.items()}
    seen_l = set(unmatched)
    seen_r: set = set()
    q = deque(unmatched)
    while q:
        a = q.popleft()
        for b in adjacency[a]:
            if b in seen_r:
                continue
            seen_r.add(b)
            a2 = right_owner.get(b)
            if a2 is not None and a2 not in seen_l:
                seen_l.add(a2)
                q.append(a2)
    assert len(seen_r) < len(seen_l)
    return tuple(sorted(seen_l))


# -- hyperedge pattern matchings ------------------------------------------


def _aux_graph(
    H: Hypergraph,
    u1: List[int],
    u2: List[int],
    one_sided: bool,
    forbidden_edges: FrozenSet[int],
):
    """Auxiliary bipartite adjacency from qualifying pattern edges.

    One pass over the edges incident to U1; for each qualifying edge one
    witness per (a, b) pair, ties broken by smallest edge id.
    """
    m1 = _set_mask(H, u1)
    m2 = _set_mask(H, u2)
    if np.any(m1 & m2):
        raise ParameterError("U1 and U2 must be disjoint")
    idx1 = {v: i for i, v in enumerate(u1)}
    idx2 = {v: i for i, v in enumerate(u2)}
    cand = np.unique(np.concatenate([H.incident(v) for v in u1])) if u1 else np.empty(0, np.int64)
    witness: Dict[Tuple[int, int], Tuple[int, tuple]] = {}
    r = H.r
    for eid in cand:
        eid = int(eid)
        if eid in forbidden_edges:
            continue
        edge = H.edges_array[eid]
        in1 = [int(v) for v in edge if m1[v]]
        in2 = [int(v) for v in edge if m2[v]]
        i, j = len(in1), len(in2)
        if (i, j) == (1, r - 1):
            a = in1[0]
            for b in in2:
                witness.setdefault((idx1[a], idx2[b]), (eid, (1, r - 1)))
        elif (i, j) == (r - 1, 1) and not one_sided:
            b = in2[0]
            for a in in1:
                witness.setdefault((idx1[a], idx2[b]), (eid, (r - 1, 1)))
    adjacency: List[List[int]] = [[] for _ in u1]
    for (ai, bi) in sorted(witness):
        adjacency[ai].append(bi)
    return adjacency, witness


def _pattern_matching(
    H: Hypergraph,
    U1: Iterable[int],
    U2: Iterable[int],
    one_sided: bool,
    forbidden_edges: FrozenSet[int],
) -> PairMatching:
    u1 = sorted(set(int(v) for v in U1))
    u2 = sorted(set(int(v) for v in U2))
    if len(u1) > len(u2):
        raise ParameterError("need |U1| <= |U2|")
    adjacency, witness = _aux_graph(H, u1, u2, one_sided, forbidden_edges)
    matching = max_bipartite_matching(len(u1), len(u2), adjacency)
    if len(matching) < len(u1):
        viol = hall_violator(len(u1), adjacency, matching)
        raise NoMatchingError(tuple(u1[i] for i in viol))
    pairs = []
    for ai in range(len(u1)):
        bi = matching[ai]
        eid, pattern = witness[(ai, bi)]
        pairs.append(MatchedPair(a=u1[ai], b=u2[bi], edge_id=eid, pattern=pattern))
    out = PairMatching(pairs=pairs)
    out.validate(H, u1, u2)
    return out


def find_U1U2_matching(
    H: Hypergraph,
    U1: Iterable[int],
    U2: Iterable[int],
    forbidden_edges: Iterable[int] = (),
) -> PairMatching:
    """Saturate U1 with distinct (1,r-1)- or (r-1,1)-pattern edges into U2.

    Raises NoMatchingError carrying a Hall-violating subset of U1 when
    impossible.  Edge reuse across pairs cannot occur: a shared witness
    would force equal a- or b-endpoints.
    """
    return _pattern_matching(H, U1, U2, one_sided=False, forbidden_edges=frozenset(forbidden_edges))


def find_one_sided_matching(
    H: Hypergraph,
    U1: Iterable[int],
    U2: Iterable[int],
    forbidden_edges: Iterable[int] = (),
) -> PairMatching:
    """Like find_U1U2_matching but admitting only (1, r-1)-pattern edges."""
    return _pattern_matching(H, U1, U2, one_sided=True, forbidden_edges=frozenset(forbidden_edges))


def find_two_matching(
    H: Hypergraph,
    A: Iterable[int],
    B: Iterable[int],
    seed: int,
    forbidden_edges: Iterable[int] = (),
) -> TwoMatching:
    """Two distinct (1, r-1)-witness edges per source vertex, injective into B.

    Splits B into degree-inheriting halves, finds a one-sided matching into
    each half, and reads the representatives off the matched endpoints.
    Injectivity and edge distinctness follow from the halves being disjoint;
    both are re-validated before returning.
    """
    # deferred import: connect imports this module
    from .connect import normalized_min_degree, sample_inheriting_subset

    a_list = sorted(set(int(v) for v in A))
    b_list = sorted(set(int(v) for v in B))
    if set(a_list) & set(b_list):
        raise ParameterError("A and B must be disjoint")
    if not a_list:
        return TwoMatching(entries=[])
    forb = frozenset(forbidden_edges)
    half = len(b_list) // 2
    dens = normalized_min_degree(H, b_list, a_list)
    b1 = sample_inheriting_subset(
        H,
        b_list,
        half,
        demand=a_list,
        gamma=0.75 * dens,
        slack=0.3,
        attempts=24,
        seed=seed,
    )
    b2 = sorted(set(b_list) - set(b1))
    m1 = find_one_sided_matching(H, a_list, b1, forbidden_edges=forb)
    m2 = find_one_sided_matching(H, a_list, b2, forbidden_edges=forb | m1.edge_ids())
    by_a1 = {p.a: p for p in m1.pairs}
    by_a2 = {p.a: p for p in m2.pairs}
    entries = [
        TwoMatchingEntry(
            a=a,
            e_edge=by_a1[a].edge_id,
            f_edge=by_a2[a].edge_id,
            tau_e=by_a1[a].b,
            tau_f=by_a2[a].b,
        )
        for a in a_list
    ]
    out = TwoMatching(entries=entries)
    out.validate(H, a_list, b_list)
    return out
