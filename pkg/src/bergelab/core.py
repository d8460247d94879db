"""r-uniform hypergraphs: representation, generation, degrees, adversaries, walk validation.

Vertices are the integers 0..n-1.  Edges are r-element vertex subsets stored
in canonical form: each edge sorted ascending, edges ordered lexicographically,
and edge ids are the dense ranks 0..|E|-1 in that order.  A ``Hypergraph`` is
immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "ParameterError",
    "Hypergraph",
    "BergePath",
    "WalkReport",
    "DegreeProfile",
    "gen_random_hypergraph",
    "complete_hypergraph",
    "degree",
    "degree_profile",
    "collective_degree",
    "max_collective_degree",
    "edges_between",
    "validate_walk",
    "adversary_bipartition",
    "adversary_degree_trim",
    "write_hypergraph",
    "parse_hypergraph",
    "write_walk",
    "parse_walk",
    "concat_paths",
    "close_cycle",
]

# Above this many potential edges the generator switches from full enumeration
# to binomial-count plus rejection sampling of distinct subsets.
ENUMERATE_CAP = 12_000_000

WALK_KINDS = ("berge-cycle", "berge-path", "weak-cycle", "weak-path")


class ParameterError(ValueError):
    """Invalid argument to a bergelab operation."""


def _as_edge_array(edges: Iterable[Sequence[int]], r: int) -> np.ndarray:
    rows = list(edges)
    if not rows:
        return np.empty((0, r), dtype=np.int64)
    arr = np.asarray(rows, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != r:
        raise ParameterError(f"edges must be sequences of exactly r={r} vertices")
    return arr


class Hypergraph:
    """Immutable r-uniform hypergraph with a canonical edge order.

    Edges are kept in an (E, r) integer array with sorted rows in
    lexicographic order; the edge id of a subset is its row index.  A
    per-vertex incidence index (edge ids, ascending) is built once at
    construction.
    """

    __slots__ = ("n", "r", "_edges", "_keys", "_inc", "_key_base")

    def __init__(self, n: int, r: int, edges: Iterable[Sequence[int]] | np.ndarray):
        if n < 0:
            raise ParameterError("vertex count must be nonnegative")
        if r < 2:
            raise ParameterError("uniformity r must be at least 2")
        arr = edges if isinstance(edges, np.ndarray) else _as_edge_array(edges, r)
        arr = np.array(arr, dtype=np.int64, copy=True).reshape(-1, r)
        self.n = n
        self.r = r
        self._key_base = max(n, 1)
        if arr.size:
            if arr.min() < 0 or arr.max() >= n:
                raise ParameterError("edge vertex out of range [0, n)")
            arr.sort(axis=1)
            if np.any(arr[:, 1:] == arr[:, :-1]):
                raise ParameterError("edge contains a repeated vertex")
            # canonical (lexicographic) order and dedup via packed keys:
            # much cheaper than row-wise unique on millions of edges
            keys = self._pack(arr)
            order = np.argsort(keys, kind="stable")
            arr = arr[order]
            keys = keys[order]
            if arr.shape[0] > 1:
                fresh = np.concatenate(([True], keys[1:] != keys[:-1]))
                arr = arr[fresh]
                keys = keys[fresh]
        else:
            keys = self._pack(arr)
        self._edges = arr
        self._keys = keys
        self._inc = self._build_incidence(arr, n)
        self._edges.flags.writeable = False
        self._keys.flags.writeable = False

    def _pack(self, arr: np.ndarray) -> np.ndarray:
        """Encode each sorted row as one integer; lexicographic = numeric order."""
        base = self._key_base
        if arr.shape[0] and base > 1 and base ** self.r >= 2 ** 62:
            raise ParameterError("instance too large for packed edge keys")
        keys = np.zeros(arr.shape[0], dtype=np.int64)
        for j in range(self.r):
            keys = keys * base + arr[:, j]
        return keys

    @staticmethod
    def _build_incidence(arr: np.ndarray, n: int) -> list:
        inc: list = [None] * n
        if arr.size == 0:
            empty = np.empty(0, dtype=np.int64)
            return [empty] * n
        r = arr.shape[1]
        flat = arr.ravel()
        order = np.argsort(flat, kind="stable")
        eids = (order // r).astype(np.int64)
        verts = flat[order]
        bounds = np.searchsorted(verts, np.arange(n + 1))
        for v in range(n):
            ids = eids[bounds[v]:bounds[v + 1]]
            ids.flags.writeable = False
            inc[v] = ids
        return inc

    # -- basic accessors -------------------------------------------------

    @property
    def edge_count(self) -> int:
        return self._edges.shape[0]

    @property
    def edges_array(self) -> np.ndarray:
        """(E, r) read-only array of sorted edges in canonical (id) order."""
        return self._edges

    def edge(self, eid: int) -> tuple:
        if not 0 <= eid < self.edge_count:
            raise ParameterError(f"edge id {eid} out of range")
        return tuple(int(v) for v in self._edges[eid])

    def edge_id(self, vertices: Sequence[int]) -> Optional[int]:
        """Id of the edge with this vertex set, or None if absent."""
        vs = sorted(int(v) for v in vertices)
        if len(vs) != self.r or any(v < 0 or v >= self.n for v in vs):
            return None
        key = 0
        for v in vs:
            key = key * self._key_base + v
        pos = int(np.searchsorted(self._keys, key))
        if pos < self.edge_count and self._keys[pos] == key:
            return pos
        return None

    def has_edge(self, vertices: Sequence[int]) -> bool:
        return self.edge_id(vertices) is not None

    def incident(self, v: int) -> np.ndarray:
        """Ascending edge ids of all edges containing v."""
        if not 0 <= v < self.n:
            raise ParameterError(f"vertex {v} out of range")
        return self._inc[v]

    def iter_edges(self):
        for row in self._edges:
            yield tuple(int(v) for v in row)

    def with_edges(self, keep_eids: np.ndarray) -> "Hypergraph":
        """New hypergraph on the same vertex set keeping the given edge ids."""
        return Hypergraph(self.n, self.r, self._edges[np.asarray(keep_eids, dtype=np.int64)])

    def __repr__(self) -> str:
        return f"Hypergraph(n={self.n}, r={self.r}, edges={self.edge_count})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Hypergraph)
            and self.n == other.n
            and self.r == other.r
            and self._edges.shape == other._edges.shape
            and bool(np.all(self._edges == other._edges))
        )

    def __hash__(self):
        return hash((self.n, self.r, self.edge_count, self._keys[:8].tobytes()))


@dataclass(frozen=True)
class BergePath:
    """Alternating vertex/edge-id sequence; the universal walk certificate.

    Open walk: ``len(edge_ids) == len(vertices) - 1``.  Closed walk:
    ``len(edge_ids) == len(vertices)`` and the last edge joins the last
    vertex back to the first.  ``is_berge`` records whether edge
    distinctness has been verified; it is advisory, the validator is
    authoritative.
    """

    vertices: tuple
    edge_ids: tuple
    closed: bool = False
    is_berge: bool = False

    @property
    def length(self) -> int:
        return len(self.edge_ids)

    @property
    def endpoints(self) -> tuple:
        if self.closed:
            return (self.vertices[0], self.vertices[0])
        return (self.vertices[0], self.vertices[-1])

    def reverse(self) -> "BergePath":
        if self.closed:
            raise ParameterError("reverse is defined for open walks only")
        return BergePath(
            vertices=tuple(reversed(self.vertices)),
            edge_ids=tuple(reversed(self.edge_ids)),
            closed=False,
            is_berge=self.is_berge,
        )


def concat_paths(p: BergePath, q: BergePath) -> BergePath:
    """Join two open walks sharing exactly the junction vertex p.end == q.start."""
    if p.closed or q.closed:
        raise ParameterError("can only concatenate open walks")
    if p.vertices[-1] != q.vertices[0]:
        raise ParameterError("walks do not share a junction vertex")
    return BergePath(
        vertices=p.vertices + q.vertices[1:],
        edge_ids=p.edge_ids + q.edge_ids,
        closed=False,
    )


def close_cycle(p: BergePath, eid: int) -> BergePath:
    """Close an open walk into a cycle with one more edge joining end to start."""
    if p.closed:
        raise ParameterError("walk already closed")
    return BergePath(vertices=p.vertices, edge_ids=p.edge_ids + (eid,), closed=True)


@dataclass
class WalkReport:
    """Validation outcome for a walk against a hypergraph."""

    ok: bool
    mode: str
    closed: bool
    length: int
    vertex_distinct: bool
    pairs_contained: bool
    edges_distinct: Optional[bool]
    spanning: bool
    first_violation: Optional[str] = None


@dataclass
class DegreeProfile:
    per_vertex: dict
    min: int
    max_collective2: int


# -- generation ----------------------------------------------------------


def _enumerate_edges(n: int, r: int) -> np.ndarray:
    total = comb(n, r)
    out = np.empty((total, r), dtype=np.int64)
    it = itertools.combinations(range(n), r)
    chunk = 200_000
    filled = 0
    while filled < total:
        take = min(chunk, total - filled)
        flat = np.fromiter(
            itertools.chain.from_iterable(itertools.islice(it, take)),
            dtype=np.int64,
            count=take * r,
        )
        out[filled:filled + take] = flat.reshape(take, r)
        filled += take
    return out


def _sample_distinct_subsets(n: int, r: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """First m distinct r-subsets of an iid uniform stream (uniform m-subset of all)."""
    base = n
    have = np.empty(0, dtype=np.int64)
    rows: list = []
    while sum(len(b) for b in rows) < m:
        need = m - sum(len(b) for b in rows)
        batch = rng.integers(0, n, size=(int(need * 1.3) + 16, r))
        batch.sort(axis=1)
        distinct = np.all(batch[:, 1:] != batch[:, :-1], axis=1)
        batch = batch[distinct]
        keys = np.zeros(batch.shape[0], dtype=np.int64)
        for j in range(r):
            keys = keys * base + batch[:, j]
        fresh = ~np.isin(keys, have)
        # drop duplicates inside the batch, keeping first occurrences
        _, first_idx = np.unique(keys[fresh], return_index=True)
        batch = batch[fresh][np.sort(first_idx)]
        keys = keys[fresh][np.sort(first_idx)]
        batch = batch[:need]
        keys = keys[:need]
        rows.append(batch)
        have = np.concatenate([have, keys])
        have.sort()
    return np.concatenate(rows)[:m]


def gen_random_hypergraph(
    n: int,
    r: int,
    p: float,
    seed: int,
    enumerate_cap: int = ENUMERATE_CAP,
) -> Hypergraph:
    """Binomial random hypergraph: each r-subset appears independently with probability p.

    Deterministic for a fixed seed.  Below ``enumerate_cap`` potential edges
    all subsets are enumerated and a coin is flipped per subset; above it,
    the edge count is drawn from Binomial(C(n,r), p) and that many distinct
    subsets are rejection-sampled, which keeps sparse regimes feasible
    without materializing C(n,r) subsets.
    """
    if not 2 <= r <= n:
        raise ParameterError(f"need 2 <= r <= n, got r={r}, n={n}")
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"probability p={p} outside [0, 1]")
    total = comb(n, r)
    if p == 0.0 or total == 0:
        return Hypergraph(n, r, np.empty((0, r), dtype=np.int64))
    if p == 1.0:
        return Hypergraph(n, r, _enumerate_edges(n, r))
    rng = np.random.default_rng(seed)
    if total <= enumerate_cap:
        allx = _enumerate_edges(n, r)
        mask = rng.random(total) < p
        return Hypergraph(n, r, allx[mask])
    m = int(rng.binomial(total, p))
    return Hypergraph(n, r, _sample_distinct_subsets(n, r, m, rng))


def complete_hypergraph(n: int, r: int) -> Hypergraph:
    if not 2 <= r <= n:
        raise ParameterError(f"need 2 <= r <= n, got r={r}, n={n}")
    return Hypergraph(n, r, _enumerate_edges(n, r))


# -- degrees -------------------------------------------------------------


def _deg_into(H: Hypergraph, v: int, mask: np.ndarray) -> int:
    """Number of edges e with v in e and e minus {v} inside the masked set."""
    ids = H.incident(v)
    if ids.size == 0:
        return 0
    rows = H.edges_array[ids]
    counts = mask[rows].sum(axis=1) - int(mask[v])
    return int(np.count_nonzero(counts == H.r - 1))


def _set_mask(H: Hypergraph, S: Iterable[int]) -> np.ndarray:
    mask = np.zeros(H.n, dtype=bool)
    idx = np.fromiter((int(v) for v in S), dtype=np.int64)
    if idx.size:
        if idx.min() < 0 or idx.max() >= H.n:
            raise ParameterError("vertex set member out of range")
        mask[idx] = True
    return mask


def degree(H: Hypergraph, v: int, U: Optional[Iterable[int]] = None) -> int:
    """deg(v), or with U the number of edges at v whose other vertices all lie in U."""
    if not 0 <= v < H.n:
        raise ParameterError(f"vertex {v} out of range")
    if U is None:
        return int(H.incident(v).size)
    mask = _set_mask(H, U)
    if mask[v]:
        raise ParameterError("restricted degree requires v not in U")
    return _deg_into(H, v, mask)


def degree_profile(H: Hypergraph) -> DegreeProfile:
    per = {v: int(H.incident(v).size) for v in range(H.n)}
    dmin = min(per.values()) if per else 0
    return DegreeProfile(per_vertex=per, min=dmin, max_collective2=max_collective_degree(H, 2))


def collective_degree(H: Hypergraph, T: Iterable[int]) -> int:
    """Number of edges containing every vertex of T (0 when |T| > r)."""
    ts = sorted(set(int(v) for v in T))
    if not ts:
        return H.edge_count
    if len(ts) > H.r:
        return 0
    for v in ts:
        if not 0 <= v < H.n:
            raise ParameterError(f"vertex {v} out of range")
    ids = H.incident(ts[0])
    for v in ts[1:]:
        ids = np.intersect1d(ids, H.incident(v), assume_unique=True)
        if ids.size == 0:
            return 0
    return int(ids.size)


def max_collective_degree(H: Hypergraph, ell: int, with_witness: bool = False):
    """Max over all ell-sets T of the number of edges containing T.

    Computed by iterating edges (each edge charges its C(r, ell) sub-tuples),
    never by enumerating all ell-sets.
    """
    if ell <= 0:
        raise ParameterError("ell must be positive")
    if ell > H.r or H.edge_count == 0:
        return (0, None) if with_witness else 0
    arr = H.edges_array
    base = max(H.n, 1)
    best = 0
    best_key = None
    for cols in itertools.combinations(range(H.r), ell):
        keys = np.zeros(arr.shape[0], dtype=np.int64)
        for c in cols:
            keys = keys * base + arr[:, c]
        uniq, counts = np.unique(keys, return_counts=True)
        i = int(np.argmax(counts))
        if counts[i] > best:
            best = int(counts[i])
            best_key = int(uniq[i])
    if not with_witness:
        return best
    tup = []
    k = best_key
    for _ in range(ell):
        tup.append(k % base)
        k //= base
    return best, tuple(sorted(tup))


def edges_between(H: Hypergraph, T: Iterable[int], U: Iterable[int]) -> int:
    """Number of edges meeting T in exactly 1 vertex and U in exactly r-1 vertices."""
    tmask = _set_mask(H, T)
    umask = _set_mask(H, U)
    if np.any(tmask & umask):
        raise ParameterError("T and U must be disjoint")
    tverts = np.flatnonzero(tmask)
    if tverts.size == 0:
        return 0
    ids = np.unique(np.concatenate([H.incident(int(v)) for v in tverts]))
    if ids.size == 0:
        return 0
    rows = H.edges_array[ids]
    ct = tmask[rows].sum(axis=1)
    cu = umask[rows].sum(axis=1)
    return int(np.count_nonzero((ct == 1) & (cu == H.r - 1)))


# -- walk validation -----------------------------------------------------


def validate_walk(H: Hypergraph, walk: BergePath, mode: str = "berge") -> WalkReport:
    """Check a walk against the hypergraph; invalid walks yield a failing report.

    Berge mode additionally requires pairwise-distinct edge ids; weak mode
    allows repeats.  The report carries the first violation found.
    """
    if mode not in ("weak", "berge"):
        raise ParameterError(f"unknown mode {mode!r}")
    vs = walk.vertices
    es = walk.edge_ids
    closed = walk.closed
    report = WalkReport(
        ok=False,
        mode=mode,
        closed=closed,
        length=len(es),
        vertex_distinct=True,
        pairs_contained=True,
        edges_distinct=None if mode == "weak" else True,
        spanning=False,
    )

    def fail(msg: str) -> WalkReport:
        if report.first_violation is None:
            report.first_violation = msg
        report.ok = False
        return report

    if len(vs) == 0:
        return fail("walk has no vertices")
    expected = len(vs) if closed else len(vs) - 1
    if len(es) != expected:
        return fail(f"expected {expected} edges for this walk shape, got {len(es)}")
    if any(not 0 <= v < H.n for v in vs):
        report.vertex_distinct = False
        return fail("vertex id out of range")
    if len(set(vs)) != len(vs):
        report.vertex_distinct = False
        return fail("repeated vertex in sequence")
    for i, eid in enumerate(es):
        if not 0 <= eid < H.edge_count:
            report.pairs_contained = False
            return fail(f"edge id {eid} out of range at position {i}")
        a = vs[i]
        b = vs[(i + 1) % len(vs)]
        edge = H.edges_array[eid]
        if a not in edge or b not in edge:
            report.pairs_contained = False
            return fail(f"pair ({a},{b}) not inside edge {eid} at position {i}")
    if mode == "berge":
        if len(set(es)) != len(es):
            report.edges_distinct = False
            return fail("repeated edge id in a berge walk")
        report.edges_distinct = True
    report.spanning = len(set(vs)) == H.n
    report.ok = True
    return report


# -- adversaries ----------------------------------------------------------


def adversary_bipartition(H: Hypergraph, seed: int):
    """Delete all edges crossing a uniformly random near-equipartition.

    Returns (hypergraph, (V1, V2)).  No surviving edge crosses the cut, so
    the result has no weak (hence no Berge) Hamilton cycle.
    """
    if H.n < 2 * H.r:
        raise ParameterError("bipartition adversary needs n >= 2r")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(H.n)
    half = (H.n + 1) // 2
    v1 = np.sort(perm[:half])
    v2 = np.sort(perm[half:])
    mask = np.zeros(H.n, dtype=bool)
    mask[v1] = True
    counts = mask[H.edges_array].sum(axis=1) if H.edge_count else np.empty(0, dtype=np.int64)
    keep = (counts == H.r) | (counts == 0)
    out = Hypergraph(H.n, H.r, H.edges_array[keep])
    return out, (tuple(int(v) for v in v1), tuple(int(v) for v in v2))


def adversary_degree_trim(H: Hypergraph, rho: float, seed: int):
    """Greedily delete a random edge set with every vertex losing at most floor(rho*deg(v)).

    Returns (hypergraph, per-vertex achieved deletion fraction).  Candidate
    edges are visited in a random order; an edge is deleted whenever all its
    vertices still have allowance, processed in vectorized rounds (within a
    round an edge is accepted only if even counting every earlier candidate
    at each of its vertices stays under the caps, so caps are never broken).
    """
    if not 0.0 <= rho <= 1.0:
        raise ParameterError(f"rho={rho} outside [0, 1]")
    deg0 = np.array([H.incident(v).size for v in range(H.n)], dtype=np.int64)
    caps = np.floor(rho * deg0).astype(np.int64)
    rng = np.random.default_rng(seed)
    alive = rng.permutation(H.edge_count)
    lost = np.zeros(H.n, dtype=np.int64)
    drop = np.zeros(H.edge_count, dtype=bool)
    arr = H.edges_array
    r = H.r
    while alive.size:
        rows = arr[alive]
        flat = rows.ravel()
        order2 = np.argsort(flat, kind="stable")
        sorted_v = flat[order2]
        new_group = np.concatenate(([True], sorted_v[1:] != sorted_v[:-1]))
        starts = np.flatnonzero(new_group)
        sizes = np.diff(np.concatenate((starts, [sorted_v.size])))
        cumcount = np.arange(sorted_v.size) - np.repeat(starts, sizes)
        rank = np.empty(flat.size, dtype=np.int64)
        rank[order2] = cumcount
        rank = rank.reshape(rows.shape)
        ok = np.all(rank < (caps - lost)[rows], axis=1)
        if not ok.any():
            break
        accepted = alive[ok]
        drop[accepted] = True
        lost += np.bincount(arr[accepted].ravel(), minlength=H.n)
        alive = alive[~ok]
    out = Hypergraph(H.n, H.r, arr[~drop])
    fractions = {
        v: (float(lost[v]) / deg0[v] if deg0[v] else 0.0) for v in range(H.n)
    }
    return out, fractions


# -- serialization --------------------------------------------------------


def write_hypergraph(H: Hypergraph, comments: Iterable[str] = ()) -> str:
    """Canonical text form: header 'n r', one sorted edge per line."""
    lines = [f"# {c}" for c in comments]
    lines.append(f"{H.n} {H.r}")
    for row in H.edges_array:
        lines.append(" ".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def parse_hypergraph(text: str) -> Hypergraph:
    rows = []
    header = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if header is None:
            if len(parts) != 2:
                raise ParameterError(f"line {ln}: header must be 'n r'")
            header = (int(parts[0]), int(parts[1]))
            continue
        rows.append([int(x) for x in parts])
    if header is None:
        raise ParameterError("missing 'n r' header line")
    n, r = header
    for row in rows:
        if len(row) != r:
            raise ParameterError(f"edge {row} does not have r={r} vertices")
    return Hypergraph(n, r, _as_edge_array(rows, r) if rows else np.empty((0, r), dtype=np.int64))


def _walk_kind(walk: BergePath, mode: str) -> str:
    shape = "cycle" if walk.closed else "path"
    return f"{mode}-{shape}"


def write_walk(walk: BergePath, mode: str = "berge", comments: Iterable[str] = ()) -> str:
    """Certificate text: kind + vertex count, vertex sequence, edge-id sequence."""
    if mode not in ("weak", "berge"):
        raise ParameterError(f"unknown mode {mode!r}")
    lines = [f"# {c}" for c in comments]
    lines.append(f"{_walk_kind(walk, mode)} {len(walk.vertices)}")
    lines.append(" ".join(str(v) for v in walk.vertices))
    lines.append(" ".join(str(e) for e in walk.edge_ids))
    return "\n".join(lines) + "\n"


def parse_walk(text: str):
    """Parse a walk certificate; returns (BergePath, mode)."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.strip().startswith("#")]
    if len(lines) < 2:
        raise ParameterError("walk certificate needs a header and a vertex line")
    head = lines[0].split()
    if len(head) != 2 or head[0] not in WALK_KINDS:
        raise ParameterError(f"bad walk header {lines[0]!r}")
    kind, k = head[0], int(head[1])
    mode, shape = kind.split("-")
    vertices = tuple(int(x) for x in lines[1].split())
    edge_ids = tuple(int(x) for x in lines[2].split()) if len(lines) > 2 else ()
    if len(vertices) != k:
        raise ParameterError(f"header announces {k} vertices, found {len(vertices)}")
    walk = BergePath(vertices=vertices, edge_ids=edge_ids, closed=(shape == "cycle"))
    return walk, mode
