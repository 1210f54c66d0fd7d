"""Small labeled graphs as relation bitsets, isomorphism tools, subgraph densities.

Conventions used across the package:

- A graph on n nodes has m = n*(n-1)/2 relation slots.  Slot indices follow
  lexicographic order over pairs (i, j) with i < j, row-major:
  (0,1), (0,2), ..., (0,n-1), (1,2), ..., (n-2,n-1).
  This order is part of the wire format and never changes.
- A Graph stores its edge set as a Python int with bit s set iff slot s holds
  an edge.  Ints are unbounded, so any n is representable; the vectorized
  helpers additionally require m <= 63 so slots fit in int64.
- A PartialGraph marks each slot Present, Absent or Obscured, stored as two
  disjoint bitmasks (edges, obscured).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CapabilityError, DataError

# Beyond this many candidate orderings, exact canonicalization of one
# connected component is refused rather than left to run for hours.
_PERM_BUDGET = 2_000_000

_ENUM_MAX_NODES = 8


def pair_count(n: int) -> int:
    """Number of relation slots m = C(n, 2)."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    return n * (n - 1) // 2


def relation_index(i: int, j: int, n: int) -> int:
    """Slot index of the unordered pair {i, j} under the fixed pair order."""
    if i == j:
        raise ValueError(f"self-pairs have no slot: ({i}, {j})")
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"pair ({i}, {j}) out of range for n={n}")
    if i > j:
        i, j = j, i
    return i * n - i * (i + 1) // 2 + (j - i - 1)


@lru_cache(maxsize=64)
def slot_pairs(n: int) -> tuple[tuple[int, int], ...]:
    """All pairs (i, j), i < j, in slot order."""
    return tuple((i, j) for i in range(n) for j in range(i + 1, n))


@dataclass(frozen=True)
class Graph:
    """Undirected labeled graph; `bits` has bit s set iff slot s is an edge."""

    n: int
    bits: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need n >= 1, got n={self.n}")
        if not (0 <= self.bits < 1 << pair_count(self.n)):
            raise ValueError(f"bits out of range for n={self.n}")

    @staticmethod
    def from_edges(n: int, edges) -> "Graph":
        bits = 0
        for i, j in edges:
            s = relation_index(i, j, n)
            if bits >> s & 1:
                raise ValueError(f"duplicate edge ({i}, {j})")
            bits |= 1 << s
        return Graph(n, bits)

    @property
    def edge_count(self) -> int:
        return self.bits.bit_count()

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.bits >> relation_index(i, j, self.n) & 1)

    def edges(self) -> list[tuple[int, int]]:
        pairs = slot_pairs(self.n)
        return [pairs[s] for s in range(len(pairs)) if self.bits >> s & 1]

    def neighbor_masks(self) -> list[int]:
        """Per-node bitmask over node ids (not slots) of adjacent nodes."""
        masks = [0] * self.n
        for s, (i, j) in enumerate(slot_pairs(self.n)):
            if self.bits >> s & 1:
                masks[i] |= 1 << j
                masks[j] |= 1 << i
        return masks

    def degree_sequence(self) -> tuple[int, ...]:
        return tuple(sorted(m.bit_count() for m in self.neighbor_masks()))


@dataclass(frozen=True)
class PartialGraph:
    """Graph with some slots obscured.  Slots not in `edges` or `obscured` are
    locked absent."""

    n: int
    edges: int
    obscured: int

    def __post_init__(self):
        m = pair_count(self.n)
        if not (0 <= self.edges < 1 << m and 0 <= self.obscured < 1 << m):
            raise ValueError(f"bitmask out of range for n={self.n}")
        if self.edges & self.obscured:
            raise ValueError("a slot cannot be both present and obscured")

    @staticmethod
    def obscure(g: Graph, slots) -> "PartialGraph":
        """Hide the given slot indices of g."""
        mask = 0
        for s in slots:
            if not (0 <= s < pair_count(g.n)):
                raise ValueError(f"slot {s} out of range")
            mask |= 1 << s
        return PartialGraph(g.n, g.bits & ~mask, mask)

    @property
    def n_obs(self) -> int:
        return self.obscured.bit_count()

    @property
    def shown_count(self) -> int:
        return pair_count(self.n) - self.n_obs

    @property
    def obscured_fraction(self) -> float:
        return self.n_obs / pair_count(self.n)

    def obscured_slots(self) -> list[int]:
        return [s for s in range(pair_count(self.n)) if self.obscured >> s & 1]

    def is_completion(self, g: Graph) -> bool:
        """True iff g agrees with every shown slot."""
        return g.n == self.n and g.bits & ~self.obscured == self.edges

    def completions(self):
        """All consistent graphs, obscured slots counting up as a binary
        number (slot list ascending, counter bit t drives slot[t])."""
        slots = self.obscured_slots()
        for c in range(1 << len(slots)):
            bits = self.edges
            for t, s in enumerate(slots):
                bits |= (c >> t & 1) << s
            yield Graph(self.n, bits)

    def completion_bits(self) -> np.ndarray:
        """Bits of all completions as int64, same order as completions()."""
        slots = self.obscured_slots()
        if pair_count(self.n) > 63:
            raise CapabilityError("completion_bits needs C(n,2) <= 63")
        if len(slots) > 24:
            raise CapabilityError(f"2^{len(slots)} completions is too many to enumerate")
        c = np.arange(1 << len(slots), dtype=np.int64)
        bits = np.full(c.shape, self.edges, dtype=np.int64)
        for t, s in enumerate(slots):
            bits |= (c >> t & 1) << s
        return bits


# ---------------------------------------------------------------------------
# canonical forms


@dataclass(frozen=True)
class CanonicalGraph:
    """Canonical representative of an isomorphism class."""

    graph: Graph
    orbit_size: int  # number of distinct labeled graphs in the class
    aut_size: int  # |Aut|, so orbit_size * aut_size = n!


def _refine_colors(adj: list[int]) -> list[int]:
    """Iterated degree refinement; returns stable color ranks per vertex.

    Color values are ranks of isomorphism-invariant signatures, so two
    isomorphic graphs induce matching colors.
    """
    k = len(adj)
    colors = [a.bit_count() for a in adj]
    while True:
        sigs = []
        for v in range(k):
            nb = adj[v]
            neigh = tuple(sorted(colors[u] for u in range(k) if nb >> u & 1))
            sigs.append((colors[v], neigh))
        ranking = {s: r for r, s in enumerate(sorted(set(sigs)))}
        new = [ranking[s] for s in sigs]
        if len(set(new)) == len(set(colors)):
            return new
        colors = new


def _component_orderings(cells: list[list[int]]):
    """All vertex orderings that respect the cell order."""
    for combo in itertools.product(*(itertools.permutations(c) for c in cells)):
        yield [v for block in combo for v in block]


def _canon_component(adj: list[int]) -> tuple[int, int]:
    """Canonical bits and |Aut| of one connected component (local labels)."""
    k = len(adj)
    if k == 1:
        return 0, 1
    if k == 2:
        return 1, 2
    colors = _refine_colors(adj)
    by_color: dict[int, list[int]] = {}
    for v, c in enumerate(colors):
        by_color.setdefault(c, []).append(v)
    cells = [by_color[c] for c in sorted(by_color)]

    if all(len(c) == 1 for c in cells):
        # Discrete refinement forces the ordering and kills all automorphisms.
        order = [c[0] for c in cells]
        pos = {v: p for p, v in enumerate(order)}
        bits = 0
        for i in range(k):
            nb = adj[i]
            for j in range(i + 1, k):
                if nb >> j & 1:
                    bits |= 1 << relation_index(pos[i], pos[j], k)
        return bits, 1

    total = math.prod(math.factorial(len(c)) for c in cells)
    if total > _PERM_BUDGET:
        raise CapabilityError(
            f"component with {k} nodes is too symmetric to canonicalize exactly"
        )
    perms = np.array(list(_component_orderings(cells)), dtype=np.intp)
    amat = np.zeros((k, k), dtype=bool)
    for v in range(k):
        for u in range(k):
            if adj[v] >> u & 1:
                amat[v, u] = True
    permuted = amat[perms[:, :, None], perms[:, None, :]]
    iu, ju = np.triu_indices(k, 1)
    tri = permuted[:, iu, ju]
    weights = np.left_shift(np.int64(1), np.arange(tri.shape[1] - 1, -1, -1, dtype=np.int64))
    vals = tri @ weights
    best = int(vals.argmin())
    aut = int((vals == vals[best]).sum())
    row = tri[best]
    bits = 0
    for s in range(row.shape[0]):
        if row[s]:
            bits |= 1 << s
    return bits, aut


def _components(g: Graph) -> list[list[int]]:
    masks = g.neighbor_masks()
    seen = 0
    comps = []
    for start in range(g.n):
        if seen >> start & 1:
            continue
        frontier = 1 << start
        comp = 0
        while frontier:
            comp |= frontier
            nxt = 0
            v = frontier
            while v:
                low = (v & -v).bit_length() - 1
                nxt |= masks[low]
                v &= v - 1
            frontier = nxt & ~comp
        seen |= comp
        comps.append([v for v in range(g.n) if comp >> v & 1])
    return comps


@lru_cache(maxsize=1 << 19)
def _canonical_cached(n: int, bits: int) -> CanonicalGraph:
    g = Graph(n, bits)
    pieces = []
    for comp in _components(g):
        k = len(comp)
        local = {v: i for i, v in enumerate(comp)}
        adj = [0] * k
        for a, b in itertools.combinations(comp, 2):
            if g.has_edge(a, b):
                adj[local[a]] |= 1 << local[b]
                adj[local[b]] |= 1 << local[a]
        cbits, aut = _canon_component(adj)
        pieces.append((k, cbits.bit_count() if k > 1 else 0, cbits, aut))

    # Larger, denser components first; ties broken by canonical bits.
    pieces.sort(key=lambda p: (-p[0], -p[1], p[2]))

    out = 0
    offset = 0
    aut_total = 1
    for key, group in itertools.groupby(pieces, key=lambda p: p[:3]):
        members = list(group)
        aut_total *= math.factorial(len(members))
        for _, _, _, aut in members:
            aut_total *= aut
    for k, _, cbits, _ in pieces:
        for s in range(pair_count(k)):
            if cbits >> s & 1:
                i, j = slot_pairs(k)[s]
                out |= 1 << relation_index(offset + i, offset + j, n)
        offset += k

    orbit = math.factorial(n) // aut_total
    return CanonicalGraph(Graph(n, out), orbit, aut_total)


def canonical_form(g: Graph) -> CanonicalGraph:
    """Canonical representative of g's isomorphism class with orbit size.

    Isomorphic inputs yield bit-identical representatives.  Exact for any
    graph whose components pass the permutation budget; all graphs on
    n <= 8 nodes do.
    """
    return _canonical_cached(g.n, g.bits)


_ISO_CACHE: dict[int, tuple[CanonicalGraph, ...]] = {}


def enumerate_nonisomorphic(n: int) -> list[CanonicalGraph]:
    """All isomorphism classes on n nodes, sorted by (edge count, bits).

    Supported for n <= 8 (12346 classes); larger n raises CapabilityError.
    """
    if not (1 <= n <= _ENUM_MAX_NODES):
        raise CapabilityError(f"class enumeration supports 1 <= n <= {_ENUM_MAX_NODES}")
    if n in _ISO_CACHE:
        return list(_ISO_CACHE[n])
    if n == 1:
        classes = [canonical_form(Graph(1, 0))]
    else:
        prev = enumerate_nonisomorphic(n - 1)
        remap = [relation_index(i, j, n) for (i, j) in slot_pairs(n - 1)]
        found: dict[int, CanonicalGraph] = {}
        for cg in prev:
            base = 0
            old = cg.graph.bits
            for s, t in enumerate(remap):
                if old >> s & 1:
                    base |= 1 << t
            new_slots = [relation_index(i, n - 1, n) for i in range(n - 1)]
            for nb in range(1 << (n - 1)):
                bits = base
                for i in range(n - 1):
                    if nb >> i & 1:
                        bits |= 1 << new_slots[i]
                c = canonical_form(Graph(n, bits))
                found.setdefault(c.graph.bits, c)
        classes = sorted(found.values(), key=lambda c: (c.graph.edge_count, c.graph.bits))
    _ISO_CACHE[n] = tuple(classes)
    return list(classes)


def class_index(n: int) -> dict[int, int]:
    """Canonical bits -> position in enumerate_nonisomorphic(n)."""
    return {cg.graph.bits: i for i, cg in enumerate(enumerate_nonisomorphic(n))}


_CLASS_TABLE_CACHE: dict[int, np.ndarray] = {}
_CLASS_TABLE_MAX_NODES = 6


def labeled_class_table(n: int) -> np.ndarray:
    """Class index of every labeled graph on n nodes, indexed by bits.

    Materializes all 2^C(n,2) labeled graphs, so capped at n <= 6.
    """
    if n > _CLASS_TABLE_MAX_NODES:
        raise CapabilityError(f"labeled class table supports n <= {_CLASS_TABLE_MAX_NODES}")
    if n not in _CLASS_TABLE_CACHE:
        idx = class_index(n)
        table = np.empty(1 << pair_count(n), dtype=np.int32)
        for bits in range(table.shape[0]):
            table[bits] = idx[canonical_form(Graph(n, bits)).graph.bits]
        _CLASS_TABLE_CACHE[n] = table
    return _CLASS_TABLE_CACHE[n]


# ---------------------------------------------------------------------------
# subgraph basis and injective homomorphism densities


def enumerate_basis(r: int, n: int) -> list[Graph]:
    """Canonical subgraphs with 1..r edges, no isolated nodes, <= n nodes.

    Sorted by (edge count, node count, bits).  These index moment and
    coefficient vectors everywhere else.
    """
    if r < 1:
        raise ValueError(f"need r >= 1, got {r}")
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    # Grow by edge count: a graph with k+1 edges and no isolated nodes is an
    # edge-extension of one with k edges (drop any edge, then strip the at
    # most two nodes it isolated).
    by_edges: list[dict[int, Graph]] = [{} for _ in range(r + 1)]
    e1 = canonical_form(Graph(2, 1)).graph
    by_edges[1][e1.bits] = e1
    for k in range(1, r):
        for g in by_edges[k].values():
            for h in _edge_extensions(g):
                if h.n > n:
                    continue
                c = canonical_form(h).graph
                by_edges[k + 1].setdefault(c.bits, c)
    out = []
    for k in range(1, r + 1):
        out.extend(sorted(by_edges[k].values(), key=lambda g: (g.n, g.bits)))
    return [g for g in out if g.n <= n]


def _edge_extensions(g: Graph):
    """Supergraphs of g with one extra edge and still no isolated nodes."""
    # New edge between existing nodes.
    for i, j in itertools.combinations(range(g.n), 2):
        if not g.has_edge(i, j):
            yield Graph(g.n, g.bits | 1 << relation_index(i, j, g.n))
    # New edge to one fresh node.
    grown = _with_extra_nodes(g, 1)
    for i in range(g.n):
        yield Graph(grown.n, grown.bits | 1 << relation_index(i, g.n, grown.n))
    # New disjoint edge.
    grown2 = _with_extra_nodes(g, 2)
    yield Graph(grown2.n, grown2.bits | 1 << relation_index(g.n, g.n + 1, grown2.n))


def _with_extra_nodes(g: Graph, extra: int) -> Graph:
    n2 = g.n + extra
    bits = 0
    for i, j in g.edges():
        bits |= 1 << relation_index(i, j, n2)
    return Graph(n2, bits)


@lru_cache(maxsize=4096)
def _slot_mask_table(gn: int, gbits: int, n: int):
    """Unique K_n slot masks hit by injective maps of g, with multiplicities.

    Returns (masks int64[M], counts float64[M], total int).  total counts all
    injective maps n!/(n-k)!; hits of a host graph H are
    sum(counts[masks & ~H == 0]).
    """
    g = Graph(gn, gbits)
    k = g.n
    total = math.perm(n, k)
    if k > n or total == 0:
        return np.zeros(0, np.int64), np.zeros(0), 0
    if pair_count(n) > 63:
        raise CapabilityError("slot mask table needs C(n,2) <= 63")
    gedges = g.edges()
    seen: dict[int, int] = {}
    for p in itertools.permutations(range(n), k):
        mask = 0
        for i, j in gedges:
            mask |= 1 << relation_index(p[i], p[j], n)
        seen[mask] = seen.get(mask, 0) + 1
    masks = np.array(sorted(seen), dtype=np.int64)
    counts = np.array([seen[m] for m in sorted(seen)], dtype=np.float64)
    return masks, counts, total


def injective_count(g: Graph, host: Graph) -> tuple[int, int]:
    """(hits, total): injective maps of g into host preserving g's edges,
    over all n!/(n-k)! injective node maps.  Exact integers."""
    if g.n > host.n:
        return 0, 1
    if pair_count(host.n) <= 63:
        masks, counts, total = _slot_mask_table(g.n, g.bits, host.n)
        ok = (masks & ~np.int64(host.bits)) == 0
        return int(counts[ok].sum()), total
    # Unbounded-width fallback: direct count.
    gedges = g.edges()
    hits = 0
    total = math.perm(host.n, g.n)
    for p in itertools.permutations(range(host.n), g.n):
        if all(host.has_edge(p[i], p[j]) for i, j in gedges):
            hits += 1
    return hits, total


def injective_density(g: Graph, host: Graph) -> float:
    """Fraction of injective node maps g -> host landing all g-edges on
    host-edges.  Exact rational internally, returned as float."""
    hits, total = injective_count(g, host)
    return hits / total


def mu_batch(bits: np.ndarray, basis: list[Graph], n: int, chunk: int = 1 << 14) -> np.ndarray:
    """Density matrix (len(bits), len(basis)) for labeled graphs given as an
    int64 bits array."""
    bits = np.asarray(bits, dtype=np.int64)
    out = np.empty((bits.shape[0], len(basis)))
    for f, g in enumerate(basis):
        masks, counts, total = _slot_mask_table(g.n, g.bits, n)
        if total == 0:
            out[:, f] = 0.0
            continue
        col = np.empty(bits.shape[0])
        for lo in range(0, bits.shape[0], chunk):
            blk = bits[lo : lo + chunk, None]
            col[lo : lo + chunk] = ((blk & masks) == masks) @ counts
        out[:, f] = col / total
    return out


_MU_TABLE_CACHE: dict[tuple[int, tuple], np.ndarray] = {}


def mu_table(n: int, basis: list[Graph]) -> np.ndarray:
    """Densities of every labeled graph on n nodes (n <= 6), cached.

    Row index is the labeled bits value; columns follow the basis order.
    """
    if n > _CLASS_TABLE_MAX_NODES:
        raise CapabilityError(f"mu table supports n <= {_CLASS_TABLE_MAX_NODES}")
    key = (n, tuple((g.n, g.bits) for g in basis))
    if key not in _MU_TABLE_CACHE:
        all_bits = np.arange(1 << pair_count(n), dtype=np.int64)
        _MU_TABLE_CACHE[key] = mu_batch(all_bits, basis, n)
    return _MU_TABLE_CACHE[key]


# ---------------------------------------------------------------------------
# wire formats


def graph_to_json(g: Graph) -> dict:
    return {"n": g.n, "edges": [list(e) for e in g.edges()]}


def graph_from_json(obj: dict) -> Graph:
    try:
        n = int(obj["n"])
        edges = [(int(i), int(j)) for i, j in obj["edges"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed graph object: {exc}") from exc
    try:
        return Graph.from_edges(n, edges)
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def partial_graph_to_json(pg: PartialGraph) -> dict:
    pairs = slot_pairs(pg.n)
    absent = [
        list(pairs[s])
        for s in range(pair_count(pg.n))
        if not (pg.edges >> s & 1 or pg.obscured >> s & 1)
    ]
    return {
        "n": pg.n,
        "edges": [list(pairs[s]) for s in range(pair_count(pg.n)) if pg.edges >> s & 1],
        "absent": absent,
        "obscured": [list(pairs[s]) for s in range(pair_count(pg.n)) if pg.obscured >> s & 1],
    }


def partial_graph_from_json(obj: dict) -> PartialGraph:
    try:
        n = int(obj["n"])
        groups = {k: [(int(i), int(j)) for i, j in obj[k]] for k in ("edges", "absent", "obscured")}
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed partial graph object: {exc}") from exc
    seen = 0
    masks = {}
    for k, pairs in groups.items():
        mask = 0
        for i, j in pairs:
            try:
                s = relation_index(i, j, n)
            except ValueError as exc:
                raise DataError(str(exc)) from exc
            if seen >> s & 1:
                raise DataError(f"slot ({i}, {j}) listed twice")
            seen |= 1 << s
            mask |= 1 << s
        masks[k] = mask
    if seen != (1 << pair_count(n)) - 1:
        raise DataError("edges/absent/obscured must cover every slot exactly once")
    return PartialGraph(n, masks["edges"], masks["obscured"])


def dumps(obj: dict) -> str:
    """Canonical single-line JSON used in logs and exports."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
