"""Graph moments and graph cumulants of exchangeable priors.

The moment of subgraph g is E[mu_g(G)] under the prior.  Cumulants are
defined by Mobius inversion over partitions of g's edge set:

    kappa_g = mu_g - sum over non-trivial partitions pi of E(g) of
              prod over blocks B of kappa_{g[B]}

where g[B] is the subgraph on block B's edges with isolated nodes dropped.
Every cumulant of order >= 2 vanishes on an ER prior, and independently
thinning edges by x scales kappa_g by x^E(g) (each monomial in the expansion
carries total edge count E(g)).

Arithmetic stays in plain Python objects, so the same recursion runs on
floats and on symbolic values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ergm import PriorTable
from .graphs import Graph, canonical_form, mu_batch


@dataclass(frozen=True)
class MomentVector:
    """E[mu_g] per basis element; basis must be downward closed under taking
    blocks of edge partitions (enumerate_basis output always is)."""

    basis: tuple[Graph, ...]
    values: tuple

    def __post_init__(self):
        if len(self.basis) != len(self.values):
            raise ValueError("basis and values lengths differ")
        object.__setattr__(self, "basis", tuple(self.basis))
        object.__setattr__(self, "values", tuple(self.values))

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=np.float64)


@dataclass(frozen=True)
class CumulantVector:
    basis: tuple[Graph, ...]
    kappas: tuple
    scaled: tuple | None = None
    scaled_valid: bool = True

    def __post_init__(self):
        object.__setattr__(self, "basis", tuple(self.basis))
        object.__setattr__(self, "kappas", tuple(self.kappas))
        if self.scaled is not None:
            object.__setattr__(self, "scaled", tuple(self.scaled))

    def as_array(self) -> np.ndarray:
        return np.array(self.kappas, dtype=np.float64)


def moments_of_prior(prior: PriorTable, basis: list[Graph]) -> MomentVector:
    """Exact moments: probability-weighted densities over all classes."""
    classes = prior.classes
    bits = np.array([c.graph.bits for c in classes], dtype=np.int64)
    mu = mu_batch(bits, list(basis), prior.n)
    return MomentVector(tuple(basis), tuple(float(v) for v in prior.probs @ mu))


def _set_partitions(items: tuple):
    """All partitions of items, deterministic order."""
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield ((first,),) + part
        for i in range(len(part)):
            yield part[:i] + ((part[i] + (first,)),) + part[i + 1 :]


def _block_subgraph(g: Graph, block_edges) -> Graph:
    """Subgraph of g on the given edges, isolated nodes dropped, canonical."""
    nodes = sorted({v for e in block_edges for v in e})
    relab = {v: i for i, v in enumerate(nodes)}
    sub = Graph.from_edges(len(nodes), [(relab[a], relab[b]) for a, b in block_edges])
    return canonical_form(sub).graph


def _basis_lookup(basis) -> dict[tuple[int, int], int]:
    return {(g.n, g.bits): i for i, g in enumerate(basis)}


def cumulants_from_moments(moments: MomentVector) -> CumulantVector:
    """Mobius inversion; requires the basis to be downward closed."""
    basis = moments.basis
    lookup = _basis_lookup(basis)
    order = sorted(range(len(basis)), key=lambda i: basis[i].edge_count)
    kappas: list = [None] * len(basis)
    for i in order:
        g = basis[i]
        edges = tuple(g.edges())
        total = moments.values[i]
        for part in _set_partitions(edges):
            if len(part) == 1:
                continue  # trivial partition contributes kappa_g itself
            prod = 1
            for block in part:
                sub = _block_subgraph(g, block)
                j = lookup.get((sub.n, sub.bits))
                if j is None:
                    raise ValueError(
                        f"basis is not downward closed: missing {sub.edge_count}-edge block"
                    )
                prod = prod * kappas[j]
            total = total - prod
        kappas[i] = total
    return CumulantVector(basis, tuple(kappas))


def moments_from_cumulants(c: CumulantVector) -> MomentVector:
    """Inverse of cumulants_from_moments: sum over all edge partitions."""
    basis = c.basis
    lookup = _basis_lookup(basis)
    values = []
    for i, g in enumerate(basis):
        edges = tuple(g.edges())
        total = 0
        for part in _set_partitions(edges):
            prod = 1
            for block in part:
                sub = _block_subgraph(g, block)
                j = lookup.get((sub.n, sub.bits))
                if j is None:
                    raise ValueError("basis is not downward closed")
                prod = prod * c.kappas[j]
            total = total + prod
        values.append(total)
    return MomentVector(basis, tuple(values))


def scaled_cumulants(c: CumulantVector, moments: MomentVector) -> CumulantVector:
    """kappa_g / mu_edge^E(g); undefined (NaN, flagged) when mu_edge is 0."""
    if moments.basis != c.basis:
        raise ValueError("moment and cumulant bases differ")
    edge_idx = next(i for i, g in enumerate(c.basis) if g.edge_count == 1)
    mu_e = moments.values[edge_idx]
    if isinstance(mu_e, float) and mu_e == 0.0:
        scaled = tuple(float("nan") for _ in c.kappas)
        return CumulantVector(c.basis, c.kappas, scaled, scaled_valid=False)
    scaled = tuple(
        k / mu_e ** g.edge_count for k, g in zip(c.kappas, c.basis)
    )
    return CumulantVector(c.basis, c.kappas, scaled, scaled_valid=True)


def thin_moments(moments: MomentVector, x: float) -> MomentVector:
    """Moments after keeping each edge independently with probability x."""
    if not 0 <= x <= 1:
        raise ValueError(f"need 0 <= x <= 1, got {x}")
    vals = tuple(v * x**g.edge_count for v, g in zip(moments.values, moments.basis))
    return MomentVector(moments.basis, vals)
