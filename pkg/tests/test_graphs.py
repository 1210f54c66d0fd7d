"""Graph core: pair indexing, canonical forms, enumeration, densities.

Canonicalization and density tests check against independent brute-force
oracles (full permutation scans), not against the implementation's own
machinery.
"""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphprior.errors import CapabilityError, DataError
from graphprior.graphs import (
    CanonicalGraph,
    Graph,
    PartialGraph,
    canonical_form,
    class_index,
    enumerate_basis,
    enumerate_nonisomorphic,
    graph_from_json,
    graph_to_json,
    injective_count,
    injective_density,
    labeled_class_table,
    mu_batch,
    pair_count,
    partial_graph_from_json,
    partial_graph_to_json,
    relation_index,
    slot_pairs,
)

# ---------------------------------------------------------------------------
# oracles


def permute_bits(g: Graph, perm) -> int:
    """Relabel nodes by perm (node i -> perm[i]) and return the new bits."""
    bits = 0
    for i, j in g.edges():
        bits |= 1 << relation_index(perm[i], perm[j], g.n)
    return bits


def brute_orbit(g: Graph) -> set[int]:
    return {permute_bits(g, p) for p in itertools.permutations(range(g.n))}


def brute_isomorphic(a: Graph, b: Graph) -> bool:
    return a.n == b.n and b.bits in brute_orbit(a)


def brute_injective_count(g: Graph, host: Graph) -> tuple[int, int]:
    if g.n > host.n:
        return 0, 1
    hits = 0
    total = 0
    for p in itertools.permutations(range(host.n), g.n):
        total += 1
        if all(host.has_edge(p[i], p[j]) for i, j in g.edges()):
            hits += 1
    return hits, total


def graphs(max_n=6, min_n=1):
    return st.integers(min_n, max_n).flatmap(
        lambda n: st.builds(Graph, st.just(n), st.integers(0, (1 << pair_count(n)) - 1))
    )


# ---------------------------------------------------------------------------
# pair order


def test_relation_index_examples():
    assert relation_index(0, 1, 4) == 0
    assert relation_index(2, 3, 4) == 5
    assert relation_index(3, 2, 4) == 5  # symmetric


def test_relation_index_bad_args():
    with pytest.raises(ValueError):
        relation_index(1, 1, 4)
    with pytest.raises(ValueError):
        relation_index(0, 4, 4)
    with pytest.raises(ValueError):
        relation_index(-1, 2, 4)


def test_relation_index_is_row_major_bijection():
    for n in range(2, 9):
        seen = [relation_index(i, j, n) for i in range(n) for j in range(i + 1, n)]
        assert seen == list(range(pair_count(n)))
        assert slot_pairs(n) == tuple((i, j) for i in range(n) for j in range(i + 1, n))


# ---------------------------------------------------------------------------
# Graph / PartialGraph basics


def test_graph_validation():
    with pytest.raises(ValueError):
        Graph(3, 8)
    with pytest.raises(ValueError):
        Graph(0, 0)
    with pytest.raises(ValueError):
        Graph.from_edges(3, [(0, 1), (1, 0)])


def test_partial_graph_masks_disjoint():
    with pytest.raises(ValueError):
        PartialGraph(3, 0b001, 0b001)


def test_obscure_and_counts():
    g = Graph.from_edges(4, [(0, 1), (2, 3)])
    pg = PartialGraph.obscure(g, [0, 3])
    assert pg.n_obs == 2
    assert pg.shown_count == 4
    assert pg.edges == g.bits & ~0b001001
    assert pg.is_completion(g)


def test_completions_binary_counter_order():
    pg = PartialGraph(3, 0b001, 0b110)  # slots 1 and 2 obscured
    got = [g.bits for g in pg.completions()]
    assert got == [0b001, 0b011, 0b101, 0b111]
    arr = pg.completion_bits()
    assert arr.tolist() == got


@given(graphs(max_n=6), st.data())
def test_completions_are_exactly_consistent_set(g, data):
    m = pair_count(g.n)
    k = data.draw(st.integers(0, min(m, 6)))
    slots = data.draw(st.permutations(range(m)))[:k]
    pg = PartialGraph.obscure(g, slots)
    comps = list(pg.completions())
    assert len(comps) == 1 << pg.n_obs
    assert len({c.bits for c in comps}) == len(comps)
    assert all(pg.is_completion(c) for c in comps)
    assert sum(pg.is_completion(Graph(g.n, b)) for b in range(1 << m)) == len(comps) or pair_count(
        g.n
    ) > 12


# ---------------------------------------------------------------------------
# canonical forms against brute force


def test_canonical_examples():
    # A 3-path relabeled three ways.
    forms = {
        canonical_form(Graph.from_edges(3, [(0, 1), (1, 2)])).graph.bits,
        canonical_form(Graph.from_edges(3, [(1, 0), (0, 2)])).graph.bits,
        canonical_form(Graph.from_edges(3, [(2, 1), (2, 0)])).graph.bits,
    }
    assert len(forms) == 1
    assert canonical_form(Graph(3, 0b111)).orbit_size == 1  # triangle
    single_edge = canonical_form(Graph.from_edges(3, [(1, 2)]))
    assert single_edge.orbit_size == 3


@settings(max_examples=60, deadline=None)
@given(graphs(max_n=6, min_n=2), st.data())
def test_canonical_matches_brute_force_oracle(g, data):
    perm = data.draw(st.permutations(range(g.n)))
    relabeled = Graph(g.n, permute_bits(g, perm))
    a, b = canonical_form(g), canonical_form(relabeled)
    assert a.graph.bits == b.graph.bits
    orbit = brute_orbit(g)
    assert a.orbit_size == len(orbit)
    assert a.orbit_size * a.aut_size == math.factorial(g.n)
    assert a.graph.bits in orbit  # representative belongs to the class


@settings(max_examples=30, deadline=None)
@given(graphs(max_n=5, min_n=2), graphs(max_n=5, min_n=2))
def test_canonical_separates_nonisomorphic(a, b):
    same = canonical_form(a).graph == canonical_form(b).graph
    assert same == brute_isomorphic(a, b)


def test_canonical_rejects_oversized_symmetric_component():
    with pytest.raises(CapabilityError):
        canonical_form(Graph(12, (1 << pair_count(12)) - 1))


# ---------------------------------------------------------------------------
# enumeration


def test_enumeration_counts_small():
    assert [len(enumerate_nonisomorphic(n)) for n in range(1, 8)] == [1, 2, 4, 11, 34, 156, 1044]


def test_enumeration_orbits_partition_labeled_graphs():
    for n in range(2, 7):
        classes = enumerate_nonisomorphic(n)
        assert sum(c.orbit_size for c in classes) == 1 << pair_count(n)
        assert all(isinstance(c, CanonicalGraph) for c in classes)
        # Representatives are fixed points of canonicalization.
        for c in classes[:20]:
            assert canonical_form(c.graph).graph.bits == c.graph.bits
        counts = [c.graph.edge_count for c in classes]
        assert counts == sorted(counts)


def test_enumeration_rejects_large_n():
    with pytest.raises(CapabilityError):
        enumerate_nonisomorphic(9)


def test_labeled_class_table_matches_direct_canonicalization():
    table = labeled_class_table(4)
    idx = class_index(4)
    for bits in range(1 << 6):
        assert table[bits] == idx[canonical_form(Graph(4, bits)).graph.bits]


# ---------------------------------------------------------------------------
# basis


def test_basis_first_orders():
    b1 = enumerate_basis(1, 5)
    assert len(b1) == 1 and b1[0].edge_count == 1
    b2 = enumerate_basis(2, 5)
    # edge, then the two 2-edge graphs: cherry (3 nodes) and 2-matching (4 nodes)
    assert [(g.edge_count, g.n) for g in b2] == [(1, 2), (2, 3), (2, 4)]
    # With only 3 nodes available the 2-matching drops out.
    assert [(g.edge_count, g.n) for g in enumerate_basis(2, 3)] == [(1, 2), (2, 3)]


def test_basis_is_downward_closed_and_canonical():
    basis = enumerate_basis(4, 8)
    seen = {(g.n, g.bits) for g in basis}
    for g in basis:
        assert canonical_form(g).graph.bits == g.bits
        assert all(m.bit_count() > 0 for m in g.neighbor_masks())  # no isolated nodes
        # Dropping any one edge (and stripping isolated nodes) stays in the basis.
        for i, j in g.edges():
            sub = Graph(g.n, g.bits & ~(1 << relation_index(i, j, g.n)))
            keep = [v for v, m in enumerate(sub.neighbor_masks()) if m]
            if not keep:
                continue
            relab = {v: t for t, v in enumerate(keep)}
            shrunk = Graph.from_edges(
                len(keep), [(relab[a], relab[b]) for a, b in sub.edges()]
            )
            c = canonical_form(shrunk).graph
            assert (c.n, c.bits) in seen


def test_basis_count_r3():
    # 3-edge classes without isolated nodes: triangle, 3-path, 3-star,
    # cherry+edge, 3-matching.
    b3 = [g for g in enumerate_basis(3, 8) if g.edge_count == 3]
    assert len(b3) == 5


# ---------------------------------------------------------------------------
# densities against brute force


def test_density_examples():
    edge = enumerate_basis(1, 3)[0]
    cherry = Graph.from_edges(3, [(0, 1), (0, 2)])
    triangle = Graph(3, 0b111)
    k3 = Graph(3, 0b111)
    p3 = Graph.from_edges(3, [(0, 1), (1, 2)])
    assert injective_density(edge, k3) == 1.0
    assert injective_density(cherry, p3) == pytest.approx(1 / 3, abs=0)
    assert injective_density(triangle, p3) == 0.0


@settings(max_examples=80, deadline=None)
@given(st.data())
def test_density_matches_brute_force_oracle(data):
    host = data.draw(graphs(max_n=6, min_n=2))
    k = data.draw(st.integers(2, 5))
    sub = data.draw(
        st.integers(0, (1 << pair_count(k)) - 1).map(lambda b: Graph(k, b))
    )
    hits, total = injective_count(sub, host)
    bhits, btotal = brute_injective_count(sub, host)
    # Exact rational equality.
    assert hits * btotal == bhits * total
    assert injective_density(sub, host) == bhits / btotal


def test_density_zero_node_shortfall():
    big = Graph(5, 0)
    host = Graph(3, 0b111)
    assert injective_count(big, host) == (0, 1)
    assert injective_density(big, host) == 0.0


def test_mu_batch_matches_scalar_density():
    basis = enumerate_basis(3, 6)
    rng = np.random.default_rng(7)
    bits = rng.integers(0, 1 << pair_count(5), size=40, dtype=np.int64)
    mat = mu_batch(bits, basis, 5)
    for row, b in zip(mat, bits):
        host = Graph(5, int(b))
        for f, g in enumerate(basis):
            assert row[f] == pytest.approx(injective_density(g, host), abs=0)


# ---------------------------------------------------------------------------
# wire formats


@given(graphs(max_n=7))
def test_graph_json_round_trip(g):
    assert graph_from_json(graph_to_json(g)) == g


@given(graphs(max_n=6), st.data())
def test_partial_graph_json_round_trip(g, data):
    m = pair_count(g.n)
    slots = data.draw(st.permutations(range(m)))[: data.draw(st.integers(0, m))]
    pg = PartialGraph.obscure(g, slots)
    obj = partial_graph_to_json(pg)
    assert partial_graph_from_json(obj) == pg
    n_slots = len(obj["edges"]) + len(obj["absent"]) + len(obj["obscured"])
    assert n_slots == m


def test_partial_graph_json_rejects_overlap_and_gaps():
    with pytest.raises(DataError):
        partial_graph_from_json({"n": 3, "edges": [[0, 1]], "absent": [[0, 1], [0, 2]], "obscured": [[1, 2]]})
    with pytest.raises(DataError):
        partial_graph_from_json({"n": 3, "edges": [[0, 1]], "absent": [], "obscured": [[1, 2]]})


def test_graph_json_rejects_garbage():
    with pytest.raises(DataError):
        graph_from_json({"n": 3})
    with pytest.raises(DataError):
        graph_from_json({"n": 3, "edges": [[0, 3]]})
