"""Expansion and connection machinery over block-partitioned vertex pools.

The connectors here walk Berge paths through freshly sampled vertex blocks,
keeping an explicit used-edge ledger and consuming only the sequence
vertices of the paths they emit.  Every step edge places r-1 of its
vertices inside the block being entered, which together with the ledger
makes all emitted paths pairwise edge-disjoint.

Degree thresholds are driven by measured densities rather than asymptotic
constants: a carve demands that each watched vertex inherit a caller-chosen
fraction of its proportional share of edges into the new block.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .core import (
    BergePath,
    Hypergraph,
    ParameterError,
    _deg_into,
    _set_mask,
    concat_paths,
    validate_walk,
)

__all__ = [
    "ConnectConfig",
    "ExpandResult",
    "LayeredReach",
    "PathSystem",
    "SamplingFailedError",
    "EmptyLayerError",
    "ExhaustedError",
    "RoundFailedError",
    "normalized_min_degree",
    "sample_inheriting_subset",
    "expand_step",
    "robust_connect",
    "extract_path",
    "build_path_system",
    "connect_pairs",
]

log = logging.getLogger(__name__)


class SamplingFailedError(Exception):
    """No sampled subset satisfied the degree demands within the attempt budget."""

    def __init__(self, worst_vertex: int, achieved: float, needed: float, attempts: int):
        self.worst_vertex = worst_vertex
        self.achieved = achieved
        self.needed = needed
        self.attempts = attempts
        super().__init__(
            f"subset sampling failed after {attempts} attempts: "
            f"vertex {worst_vertex} reached {achieved:.2f} < {needed:.2f}"
        )


class EmptyLayerError(Exception):
    """A layered reach died out before the final block."""

    def __init__(self, layer: int):
        self.layer = layer
        super().__init__(f"reach is empty at layer {layer}")


class ExhaustedError(Exception):
    """Fewer paths were constructible than requested."""

    def __init__(self, built: int, requested: int):
        self.built = built
        self.requested = requested
        super().__init__(f"built only {built} of {requested} requested paths")


class RoundFailedError(Exception):
    """A connection round could not make progress; wraps the causing failure."""

    def __init__(self, round_index: int, cause):
        self.round_index = round_index
        self.cause = cause
        super().__init__(f"round {round_index} failed: {cause}")


@dataclass(frozen=True)
class ConnectConfig:
    """Tunable shapes for the connector.

    gamma is the structural expansion margin (must stay below 2**(1-r));
    inheritance_slack is the multiplicative headroom applied to measured
    degree shares when carving blocks.  min_half_blocks forces longer
    connectors: a value of 2 yields walks of length at least 5, which
    absorber cycles require.
    """

    gamma: float = 0.05
    min_block_size: int = 4
    parity: str = "odd"
    max_sample_attempts: int = 24
    inheritance_slack: float = 0.3
    min_half_blocks: int = 1
    block_pad: int = 3

    def validate(self, r: int) -> None:
        if not 0 < self.gamma < 2.0 ** (1 - r):
            raise ParameterError(f"gamma={self.gamma} outside (0, 2^(1-r)) for r={r}")
        if self.min_block_size < r:
            raise ParameterError("min_block_size must be at least r")
        if self.parity not in ("odd", "even"):
            raise ParameterError(f"parity must be 'odd' or 'even', got {self.parity!r}")
        if not 0 <= self.inheritance_slack < 1:
            raise ParameterError("inheritance_slack must lie in [0, 1)")
        if self.min_half_blocks < 1:
            raise ParameterError("min_half_blocks must be at least 1")


@dataclass
class ExpandResult:
    reached: Dict[int, Tuple[int, int]]  # b -> (a, witness edge id)
    threshold: float
    threshold_met: bool


@dataclass
class LayeredReach:
    """Forward reach through blocks with per-vertex back-pointers.

    layers[i] maps each reached vertex of block i to its (previous vertex,
    edge id) back-pointer; layer 0 is the source set with no pointers.
    """

    blocks: List[frozenset]
    layers: List[Dict[int, Optional[Tuple[int, int]]]]
    used_edges: Set[int]

    @property
    def last_layer(self) -> Dict[int, Optional[Tuple[int, int]]]:
        return self.layers[-1]


def normalized_min_degree(H: Hypergraph, S: Iterable[int], demand: Iterable[int]) -> float:
    """Minimum over the demand set of deg(v, S) divided by its maximum possible value."""
    s_list = sorted(set(int(v) for v in S))
    mask = _set_mask(H, s_list)
    best = math.inf
    for v in set(int(x) for x in demand):
        inside = bool(mask[v])
        denom = math.comb(len(s_list) - (1 if inside else 0), H.r - 1)
        if denom == 0:
            return 0.0
        best = min(best, _deg_into(H, v, mask) / denom)
    return 0.0 if best is math.inf else float(best)


def sample_inheriting_subset(
    H: Hypergraph,
    pool: Iterable[int],
    m: int,
    demand: Iterable[int],
    gamma: float,
    slack: float = 0.3,
    attempts: int = 24,
    seed: int = 0,
) -> Tuple[int, ...]:
    """Sample U of size m from the pool so every demanded vertex keeps its degree share.

    Each v in the demand set must satisfy deg(v, U) >= (1-slack) * gamma *
    C(|U|, r-1) and deg(v, pool minus U) >= (1-slack) * gamma * C(|pool|-m, r-1),
    with gamma a caller-measured density coefficient (see
    normalized_min_degree); for a demanded vertex lying inside the sampled
    set the binomial is taken over the remaining vertices.  Sample-and-verify
    with retries replaces a one-shot probabilistic existence argument, so
    failure is detectable and reported.
    """
    pool_list = sorted(set(int(v) for v in pool))
    if m <= 0:
        raise ParameterError("subset size m must be positive")
    if len(pool_list) < 2 * m:
        raise ParameterError(f"pool of {len(pool_list)} cannot host a subset of size {m} (need 2m)")
    demand_list = sorted(set(int(v) for v in demand))
    rng = np.random.default_rng(seed)
    pool_arr = np.array(pool_list, dtype=np.int64)
    r = H.r
    rest = len(pool_list) - m
    worst: Tuple[int, float, float] = (-1, 0.0, 1.0)
    for _ in range(max(1, attempts)):
        pick = rng.choice(pool_arr, size=m, replace=False)
        umask = np.zeros(H.n, dtype=bool)
        umask[pick] = True
        cmask = np.zeros(H.n, dtype=bool)
        cmask[pool_arr] = True
        cmask[pick] = False
        ok = True
        for v in demand_list:
            need_in = (1 - slack) * gamma * math.comb(m - (1 if umask[v] else 0), r - 1)
            din = _deg_into(H, v, umask)
            if din < need_in:
                ok = False
                if din - need_in < worst[1] - worst[2]:
                    worst = (v, float(din), float(need_in))
                break
            need_out = (1 - slack) * gamma * math.comb(rest - (1 if cmask[v] else 0), r - 1)
            dout = _deg_into(H, v, cmask)
            if dout < need_out:
                ok = False
                if dout - need_out < worst[1] - worst[2]:
                    worst = (v, float(dout), float(need_out))
                break
        if ok:
            return tuple(int(v) for v in np.sort(pick))
    raise SamplingFailedError(worst[0], worst[1], worst[2], attempts)


def expand_step(
    H: Hypergraph,
    U1: Iterable[int],
    U2: Iterable[int],
    T1: Iterable[int],
    gamma: float = 0.0,
    allowed: Optional[Iterable[int]] = None,
    forbidden_edges: Iterable[int] = (),
) -> ExpandResult:
    """One-step neighbourhood of T1 inside U2 through edges with r-1 vertices in U2.

    Each reached vertex carries one witness edge; smallest edge ids win, so
    the result is deterministic.  A small image is a reported condition, not
    an exception: threshold_met records whether |T2| >= (1/2 + gamma)|U2|.
    """
    u1_set = set(int(v) for v in U1)
    u2_list = sorted(set(int(v) for v in U2))
    t1_list = sorted(set(int(v) for v in T1))
    if not set(t1_list) <= u1_set:
        raise ParameterError("T1 must be a subset of U1")
    u2_mask = _set_mask(H, u2_list)
    if any(u2_mask[v] for v in u1_set):
        raise ParameterError("U1 and U2 must be disjoint")
    allowed_mask = u2_mask if allowed is None else (_set_mask(H, allowed) & u2_mask)
    forb = set(int(e) for e in forbidden_edges)
    reached: Dict[int, Tuple[int, int]] = {}
    if t1_list:
        cand = np.unique(np.concatenate([H.incident(v) for v in t1_list]))
        if cand.size:
            rows = H.edges_array[cand]
            good = cand[u2_mask[rows].sum(axis=1) == H.r - 1]
            t1_set = set(t1_list)
            for eid in good:
                eid = int(eid)
                if eid in forb:
                    continue
                edge = H.edges_array[eid]
                outside = [int(v) for v in edge if not u2_mask[v]]
                if len(outside) != 1 or outside[0] not in t1_set:
                    continue
                a = outside[0]
                for b in edge:
                    b = int(b)
                    if allowed_mask[b] and b not in reached:
                        reached[b] = (a, eid)
    threshold = (0.5 + gamma) * len(u2_list)
    return ExpandResult(reached=reached, threshold=threshold, threshold_met=len(reached) >= threshold)


def robust_connect(
    H: Hypergraph,
    blocks: Sequence[Iterable[int]],
    alloweds: Optional[Sequence[Iterable[int]]] = None,
    gamma: float = 0.0,
    forbidden_edges: Iterable[int] = (),
) -> LayeredReach:
    """Layered forward search through the blocks, restricted to the allowed sets.

    blocks[0] acts as the source set.  Every step from layer i into block
    i+1 uses an edge with r-1 vertices inside block i+1, so walking
    back-pointers from any final-layer vertex yields a Berge path visiting
    one allowed vertex per block.  Raises EmptyLayerError when the reach
    dies out.
    """
    if len(blocks) < 2:
        raise ParameterError("robust_connect needs a source block and at least one target block")
    blist = [frozenset(int(v) for v in b) for b in blocks]
    if alloweds is None:
        wlist = blist
    else:
        if len(alloweds) != len(blist):
            raise ParameterError("alloweds must match blocks in length")
        wlist = [frozenset(int(v) for v in w) for w in alloweds]
        for w, b in zip(wlist, blist):
            if not w <= b:
                raise ParameterError("allowed sets must be subsets of their blocks")
    forb = set(int(e) for e in forbidden_edges)
    layers: List[Dict[int, Optional[Tuple[int, int]]]] = []
    used: Set[int] = set()
    source: Dict[int, Optional[Tuple[int, int]]] = {v: None for v in sorted(wlist[0])}
    if not source:
        raise EmptyLayerError(0)
    layers.append(source)
    for i in range(1, len(blist)):
        res = expand_step(
            H,
            U1=blist[i - 1],
            U2=blist[i],
            T1=layers[-1].keys(),
            gamma=gamma,
            allowed=wlist[i],
            forbidden_edges=forb,
        )
        if not res.reached:
            raise EmptyLayerError(i)
        layers.append(dict(sorted(res.reached.items())))
        used.update(e for (_, e) in res.reached.values())
    return LayeredReach(blocks=blist, layers=layers, used_edges=used)


def extract_path(reach: LayeredReach, v: int) -> BergePath:
    """Berge path from the source layer to v, walking back-pointers."""
    if v not in reach.last_layer:
        raise ParameterError(f"vertex {v} is not in the final layer")
    verts: List[int] = [v]
    eids: List[int] = []
    layer = len(reach.layers) - 1
    cur = v
    while layer > 0:
        prev = reach.layers[layer][cur]
        assert prev is not None
        a, eid = prev
        verts.append(a)
        eids.append(eid)
        cur = a
        layer -= 1
    return BergePath(vertices=tuple(reversed(verts)), edge_ids=tuple(reversed(eids)))


@dataclass
class PathSystem:
    paths: List[BergePath]
    pairing: List[Tuple[int, int]]
    used_inner: Set[int]
    used_edges: Set[int]

    def validate(self, H: Hypergraph) -> None:
        seen_edges: Set[int] = set()
        seen_inner: Set[int] = set()
        for path, (a, b) in zip(self.paths, self.pairing):
            rep = validate_walk(H, path, "berge")
            if not rep.ok:
                raise ParameterError(f"invalid path in system: {rep.first_violation}")
            if path.closed:
                if path.vertices[0] != a or a != b:
                    raise ParameterError("closed entry must start at its doubled endpoint")
                inner = set(path.vertices) - {a}
            else:
                if (path.vertices[0], path.vertices[-1]) != (a, b):
                    raise ParameterError("path endpoints do not match the pairing")
                inner = set(path.vertices) - {a, b}
            es = set(path.edge_ids)
            if es & seen_edges:
                raise ParameterError("paths share an edge")
            if inner & seen_inner:
                raise ParameterError("paths share an inner vertex")
            seen_edges |= es
            seen_inner |= inner
        if not seen_edges <= self.used_edges:
            raise ParameterError("used-edge ledger is inconsistent with the paths")
        if not seen_inner <= self.used_inner:
            raise ParameterError("inner-vertex ledger is inconsistent with the paths")


# -- single-pair connector over carved blocks ------------------------------


def _connect_through_blocks(
    H: Hypergraph,
    alpha: int,
    beta: int,
    blocks: List[frozenset],
    used_inner: Set[int],
    forbidden_edges: Set[int],
    gamma: float,
) -> Optional[BergePath]:
    """One Berge walk alpha -> blocks... -> beta, closed when alpha == beta.

    Forward reach through the first half of the blocks and backward reach
    through the rest meet in the middle block; the smallest common vertex
    wins.  Returns None when no meeting point survives.
    """
    k = len(blocks)
    jf = (k + 1) // 2
    avail = [frozenset(b - used_inner) for b in blocks]
    fwd_blocks = [frozenset([alpha])] + blocks[:jf]
    fwd_allow = [frozenset([alpha])] + avail[:jf]
    bwd_blocks = [frozenset([beta])] + blocks[jf:][::-1] + [blocks[jf - 1]]
    bwd_allow = [frozenset([beta])] + avail[jf:][::-1] + [avail[jf - 1]]
    try:
        fwd = robust_connect(H, fwd_blocks, fwd_allow, gamma, forbidden_edges)
        bwd = robust_connect(H, bwd_blocks, bwd_allow, gamma, forbidden_edges)
    except EmptyLayerError:
        return None
    for v in sorted(set(fwd.last_layer) & set(bwd.last_layer)):
        left = extract_path(fwd, v)
        right = extract_path(bwd, v)
        if alpha == beta:
            rv = tuple(reversed(right.vertices))
            cand = BergePath(
                vertices=left.vertices + rv[1:-1],
                edge_ids=left.edge_ids + tuple(reversed(right.edge_ids)),
                closed=True,
            )
        else:
            cand = concat_paths(left, right.reverse())
        if len(set(cand.edge_ids)) != len(cand.edge_ids):
            continue
        if validate_walk(H, cand, "berge").ok:
            return cand
    return None


def _carve_round_blocks(
    H: Hypergraph,
    pool: Set[int],
    k: int,
    block_size: int,
    alphas: Iterable[int],
    betas: Iterable[int],
    slack: float,
    attempts: int,
    seed: int,
) -> List[frozenset]:
    """Carve k pairwise-disjoint blocks from the pool in walk order.

    Demand sets follow the walk structure: the first block serves the left
    endpoints, the last the right endpoints, every interior block its walk
    predecessor, and the meeting block (carved last) both of its neighbours.
    """
    jf = (k + 1) // 2
    order: List[int] = list(range(jf - 1)) + list(range(k - 1, jf - 1, -1)) + [jf - 1]
    carved: Dict[int, Tuple[int, ...]] = {}
    remaining = set(pool)
    alpha_set = sorted(set(alphas))
    beta_set = sorted(set(betas))
    for step, j in enumerate(order):
        demand: Set[int] = set()
        if j == 0:
            demand |= set(alpha_set)
        if j == k - 1:
            demand |= set(beta_set)
        if j - 1 in carved:
            demand |= set(carved[j - 1])
        if j + 1 in carved:
            demand |= set(carved[j + 1])
        dens = normalized_min_degree(H, remaining, demand)
        if dens <= 0:
            v = min(demand) if demand else -1
            raise SamplingFailedError(v, 0.0, 1e-9, 0)
        # cap the implied per-vertex demand at one edge: reach survival only
        # needs every watched vertex to keep a single step into the block
        cap = 1.0 / ((1 - slack) * math.comb(block_size - 1, H.r - 1))
        block = sample_inheriting_subset(
            H,
            remaining,
            block_size,
            demand=demand,
            gamma=min(0.75 * dens, cap),
            slack=slack,
            attempts=attempts,
            seed=seed + 977 * step,
        )
        carved[j] = block
        remaining -= set(block)
    return [frozenset(carved[j]) for j in range(k)]


# -- spec-level system builder ---------------------------------------------


def build_path_system(
    H: Hypergraph,
    A: Sequence[int],
    B: Sequence[int],
    blocks: Sequence[Iterable[int]],
    gamma: float,
    count: int,
    used_inner: Optional[Set[int]] = None,
    forbidden_edges: Iterable[int] = (),
) -> PathSystem:
    """count edge-disjoint Berge paths joining same-index endpoints through the blocks.

    Each path carries one inner vertex per block; inner vertices and edges
    are consumed through explicit ledgers shared across the system.  Raises
    ExhaustedError when fewer than count same-index pairs connect.
    """
    if len(A) != len(B):
        raise ParameterError("A and B orderings must have equal length")
    blist = [frozenset(int(v) for v in b) for b in blocks]
    if len(blist) < 2:
        raise ParameterError("need at least two blocks")
    inner: Set[int] = set() if used_inner is None else set(used_inner)
    ledger: Set[int] = set(int(e) for e in forbidden_edges)
    paths: List[BergePath] = []
    pairing: List[Tuple[int, int]] = []
    new_edges: Set[int] = set()
    for a, b in zip(A, B):
        if len(paths) == count:
            break
        cand = _connect_through_blocks(H, int(a), int(b), blist, inner, ledger, gamma)
        if cand is None:
            continue
        paths.append(cand)
        pairing.append((int(a), int(b)))
        es = set(cand.edge_ids)
        ledger |= es
        new_edges |= es
        ends = {int(a)} if cand.closed else {int(a), int(b)}
        inner |= set(cand.vertices) - ends
    if len(paths) < count:
        raise ExhaustedError(len(paths), count)
    system = PathSystem(paths=paths, pairing=pairing, used_inner=inner, used_edges=new_edges)
    system.validate(H)
    return system


# -- round-structured targeted connector ------------------------------------


@dataclass
class _PairState:
    a: int
    b: int
    is_cycle: bool
    # committed chain hops outward from the original endpoints: (edge, vertex)
    a_chain: List[Tuple[int, int]] = field(default_factory=list)
    b_chain: List[Tuple[int, int]] = field(default_factory=list)
    # pending next-endpoint candidates from the latest demotion: (vertex, edge)
    a_options: List[Tuple[int, int]] = field(default_factory=list)
    b_options: List[Tuple[int, int]] = field(default_factory=list)
    connector: Optional[BergePath] = None
    done: bool = False

    def alpha_candidates(self) -> List[Tuple[int, Optional[int]]]:
        if self.a_options:
            return list(self.a_options)
        return [(self.a_chain[-1][1] if self.a_chain else self.a, None)]

    def beta_candidates(self) -> List[Tuple[int, Optional[int]]]:
        if self.b_options:
            return list(self.b_options)
        return [(self.b_chain[-1][1] if self.b_chain else self.b, None)]


def _assemble_pair_path(st: _PairState) -> BergePath:
    conn = st.connector
    assert conn is not None
    if conn.closed:
        return conn
    verts: List[int] = [st.a]
    eids: List[int] = []
    for e, v in st.a_chain:
        eids.append(e)
        verts.append(v)
    assert conn.vertices[0] == verts[-1]
    verts.extend(conn.vertices[1:])
    eids.extend(conn.edge_ids)
    # walk back inward along the b-side chain: outermost hop first
    back = [st.b] + [v for (_e, v) in st.b_chain]
    assert verts[-1] == back[-1]
    for i in range(len(st.b_chain) - 1, -1, -1):
        eids.append(st.b_chain[i][0])
        verts.append(back[i])
    if st.is_cycle:
        assert verts[-1] == verts[0]
        return BergePath(vertices=tuple(verts[:-1]), edge_ids=tuple(eids), closed=True)
    return BergePath(vertices=tuple(verts), edge_ids=tuple(eids), closed=False)


def connect_pairs(
    H: Hypergraph,
    pairs: Sequence[Tuple[int, int]],
    U: Iterable[int],
    cfg: ConnectConfig,
    seed: int,
    forbidden_edges: Iterable[int] = (),
) -> PathSystem:
    """Connect every (a_i, b_i) by edge-disjoint Berge paths confined to U.

    Round structure: carve fresh blocks from the pool, route each remaining
    pair through them, and re-root pairs that failed onto fresh endpoints
    via 2-matchings before the next round.  A doubled entry a_i == b_i
    yields a Berge cycle through a_i.  Emitted walks have length between
    2L+1 and 4L+2 where L = max(cfg.min_half_blocks, floor(log2 m)), with
    parity cfg.parity; a demotion lengthens a walk by exactly 2, so parity
    is preserved.
    """
    from .matching import NoMatchingError, find_two_matching

    cfg.validate(H.r)
    pool: Set[int] = set(int(v) for v in U)
    m0 = len(pairs)
    if m0 == 0:
        return PathSystem(paths=[], pairing=[], used_inner=set(), used_edges=set())
    for a, b in pairs:
        if a in pool or b in pool:
            raise ParameterError("pair endpoints must be disjoint from the reservoir U")
    if len({a for a, _ in pairs}) != m0 or len({b for _, b in pairs}) != m0:
        raise ParameterError("left endpoints and right endpoints must each be distinct")
    budget = (3.0 / cfg.gamma) * m0 * (math.log2(m0) ** 2 if m0 > 1 else 0.0)
    if len(pool) < budget:
        log.warning(
            "connector reservoir has %d vertices, below the nominal budget %.0f",
            len(pool), budget,
        )
    L = max(cfg.min_half_blocks, int(math.floor(math.log2(m0))) if m0 >= 2 else 1)
    k = 2 * L + (1 if cfg.parity == "even" else 0)
    base_len = k + 1
    max_len = 4 * max(L, math.ceil(math.log2(m0)) if m0 >= 2 else 1) + 2
    rounds = 1 + max(0, (max_len - base_len) // 2)

    ledger: Set[int] = set(int(e) for e in forbidden_edges)
    new_edges: Set[int] = set()
    used_inner: Set[int] = set()
    reserved: Set[int] = set()  # pool vertices parked while a demotion is pending
    states = [_PairState(a=int(a), b=int(b), is_cycle=(a == b)) for a, b in pairs]

    def commit_edges(es: Iterable[int]) -> None:
        for e in es:
            e = int(e)
            ledger.add(e)
            new_edges.add(e)

    def reserve_options(st: _PairState) -> None:
        for (v, _e) in st.a_options + st.b_options:
            if v in pool:
                pool.discard(v)
                reserved.add(v)
            used_inner.add(v)

    def resolve(st: _PairState, side: str, chosen: Optional[Tuple[int, int]]) -> None:
        """Commit one pending demotion branch (default: the first); release the rest."""
        options = st.a_options if side == "a" else st.b_options
        if not options:
            return
        v, e = chosen if chosen is not None else options[0]
        commit_edges([e])
        used_inner.add(v)
        reserved.discard(v)
        for (v2, _e2) in options:
            if v2 != v and v2 in reserved:
                reserved.discard(v2)
                pool.add(v2)
                used_inner.discard(v2)
        if side == "a":
            st.a_chain.append((e, v))
            st.a_options = []
        else:
            st.b_chain.append((e, v))
            st.b_options = []

    dens0 = normalized_min_degree(
        H, pool, [v for a, b in pairs[: min(m0, 8)] for v in (a, b)],
    )
    b_dens = H.r + 1
    while dens0 > 0 and dens0 * math.comb(b_dens, H.r - 1) < 3.0 and b_dens < 48:
        b_dens += 1

    for rnd in range(1, rounds + 1):
        remaining = [st for st in states if not st.done]
        if not remaining:
            break
        m_rem = len(remaining)
        block_size = max(cfg.min_block_size, m_rem + cfg.block_pad, b_dens)
        block_size = min(block_size, len(pool) // (k + 1))
        if block_size < max(H.r, 3):
            raise RoundFailedError(rnd, f"reservoir too small for {k} blocks")
        alphas = [v for st in remaining for (v, _) in st.alpha_candidates()]
        betas = [v for st in remaining for (v, _) in st.beta_candidates()]
        try:
            blocks = _carve_round_blocks(
                H, pool, k, block_size, alphas, betas,
                slack=cfg.inheritance_slack,
                attempts=cfg.max_sample_attempts,
                seed=seed + 7919 * rnd,
            )
        except (SamplingFailedError, ParameterError) as exc:
            raise RoundFailedError(rnd, exc)
        for st in remaining:
            for (av, ae) in st.alpha_candidates():
                for (bv, be) in st.beta_candidates():
                    if av == bv and (ae is not None or be is not None):
                        continue
                    cand = _connect_through_blocks(
                        H, av, bv, list(blocks), used_inner, ledger, cfg.gamma,
                    )
                    if cand is None:
                        continue
                    commit_edges(cand.edge_ids)
                    ends = {av} if cand.closed else {av, bv}
                    used_inner |= set(cand.vertices) - ends
                    pool.difference_update(cand.vertices)
                    resolve(st, "a", (av, ae) if ae is not None else None)
                    resolve(st, "b", (bv, be) if be is not None else None)
                    st.connector = cand
                    st.done = True
                    break
                if st.done:
                    break
        failed = [st for st in states if not st.done]
        if not failed or rnd == rounds:
            continue
        # demote every failed pair onto fresh endpoints via 2-matchings
        try:
            for st in failed:
                resolve(st, "a", None)
                resolve(st, "b", None)
            fresh_cycles = [st for st in failed if st.is_cycle and not st.a_chain]
            others = [st for st in failed if st not in fresh_cycles]
            if fresh_cycles:
                srcs = [st.a for st in fresh_cycles]
                dpool = _demotion_pool(H, pool, srcs, cfg, seed + 31 * rnd)
                tm = find_two_matching(H, srcs, dpool, seed=seed + 37 * rnd, forbidden_edges=ledger)
                by_a = {t.a: t for t in tm.entries}
                for st in fresh_cycles:
                    t = by_a[st.a]
                    st.a_options = [(t.tau_e, t.e_edge)]
                    st.b_options = [(t.tau_f, t.f_edge)]
                    reserve_options(st)
            if others:
                a_srcs = [st.alpha_candidates()[0][0] for st in others]
                b_srcs = [st.beta_candidates()[0][0] for st in others]
                pool_a = _demotion_pool(H, pool, a_srcs, cfg, seed + 41 * rnd)
                tma = find_two_matching(H, a_srcs, pool_a, seed=seed + 43 * rnd, forbidden_edges=ledger)
                pool_b = _demotion_pool(H, pool - set(pool_a), b_srcs, cfg, seed + 47 * rnd)
                tmb = find_two_matching(H, b_srcs, pool_b, seed=seed + 53 * rnd, forbidden_edges=ledger)
                by_a = {t.a: t for t in tma.entries}
                by_b = {t.a: t for t in tmb.entries}
                for st, sa, sb in zip(others, a_srcs, b_srcs):
                    ta, tb = by_a[sa], by_b[sb]
                    st.a_options = [(ta.tau_e, ta.e_edge), (ta.tau_f, ta.f_edge)]
                    st.b_options = [(tb.tau_e, tb.e_edge), (tb.tau_f, tb.f_edge)]
                    reserve_options(st)
        except (NoMatchingError, SamplingFailedError, ParameterError) as exc:
            raise RoundFailedError(rnd, exc)

    leftover = [st for st in states if not st.done]
    if leftover:
        raise RoundFailedError(rounds, f"{len(leftover)} pair(s) unconnected after {rounds} round(s)")

    paths: List[BergePath] = []
    for st in states:
        path = _assemble_pair_path(st)
        if path.length % 2 != (0 if cfg.parity == "even" else 1):
            raise RoundFailedError(rounds, f"emitted length {path.length} breaks parity {cfg.parity}")
        if not base_len <= path.length <= max_len:
            raise RoundFailedError(rounds, f"emitted length {path.length} outside [{base_len}, {max_len}]")
        rep = validate_walk(H, path, "berge")
        if not rep.ok:
            raise RoundFailedError(rounds, f"assembled walk invalid: {rep.first_violation}")
        paths.append(path)
    system = PathSystem(
        paths=paths,
        pairing=[(st.a, st.b) for st in states],
        used_inner=used_inner,
        used_edges=new_edges,
    )
    system.validate(H)
    return system


def _demotion_pool(
    H: Hypergraph,
    pool: Set[int],
    sources: Sequence[int],
    cfg: ConnectConfig,
    seed: int,
) -> Tuple[int, ...]:
    size = max(4 * len(sources), 2 * cfg.min_block_size)
    size = min(size, len(pool) // 2)
    if size < 2 * (H.r - 1):
        raise SamplingFailedError(sources[0] if sources else -1, 0.0, 1.0, 0)
    dens = normalized_min_degree(H, pool, sources)
    if dens <= 0:
        raise SamplingFailedError(sources[0] if sources else -1, 0.0, 1e-9, 0)
    return sample_inheriting_subset(
        H, pool, size, demand=sources, gamma=0.75 * dens,
        slack=cfg.inheritance_slack, attempts=cfg.max_sample_attempts, seed=seed,
    )
