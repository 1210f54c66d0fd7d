"""Iterated-learning chains over graph completions and their spectra.

One round of the process: obscure a uniform random set of n_obs relation
slots of the current graph, then resample those slots from the prior's
posterior given the shown slots.  The stationary distribution of the induced
chain over isomorphism classes is the prior itself.

The transition operator is computed exactly.  Averaging over all
C(m, n_obs) obscured masks is collapsed to one representative mask per
mask-isomorphism class: for a node-exchangeable prior, the class-lumped
transition from class c under the full mask average equals the average over
all labeled members of c under a single representative mask, weighted by the
mask class's orbit size.  Masks of k slots are exactly the k-edge graph
classes, so the representatives come from the class enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, DataError, NonErgodicError
from .ergm import (
    ErgmModel,
    PriorTable,
    ResponseDataset,
    ResponseItem,
    posterior_sample,
    prior_table,
)
from .graphs import (
    Graph,
    PartialGraph,
    canonical_form,
    class_index,
    enumerate_nonisomorphic,
    labeled_class_table,
    pair_count,
    relation_index,
)

_TRANSITION_MAX_NODES = 6


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic transition over the classes of enumerate_nonisomorphic(n)."""

    n: int
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        c = len(enumerate_nonisomorphic(self.n))
        if probs.shape != (c, c):
            raise ValueError(f"need a {c}x{c} matrix for n={self.n}")
        object.__setattr__(self, "probs", probs)


_BITS_MATRIX_CACHE: dict[int, np.ndarray] = {}


def _bits_matrix(n: int) -> np.ndarray:
    """(2^m, m) 0/1 matrix: row G lists the slots of labeled graph G."""
    if n not in _BITS_MATRIX_CACHE:
        m = pair_count(n)
        all_bits = np.arange(1 << m, dtype=np.int64)
        _BITS_MATRIX_CACHE[n] = ((all_bits[:, None] >> np.arange(m)) & 1).astype(np.int64)
    return _BITS_MATRIX_CACHE[n]


def build_transition_matrix(prior: PriorTable, n_obs: int) -> TransitionMatrix:
    """Exact class-level operator for one chain round (n <= 6)."""
    n = prior.n
    m = pair_count(n)
    if n > _TRANSITION_MAX_NODES:
        raise CapabilityError(f"transition matrices support n <= {_TRANSITION_MAX_NODES}")
    if not (0 <= n_obs <= m):
        raise ValueError(f"need 0 <= n_obs <= {m}, got {n_obs}")
    classes = enumerate_nonisomorphic(n)
    n_classes = len(classes)
    orbit = np.array([c.orbit_size for c in classes], dtype=np.float64)
    table = labeled_class_table(n)
    pi_lab = prior.labeled_probs()
    bits_mat = _bits_matrix(n)
    k = n_obs
    n_keys = 1 << (m - k)
    breadth = 1 << k
    mask_reps = [c for c in classes if c.graph.edge_count == k]
    assert sum(c.orbit_size for c in mask_reps) == math.comb(m, k)

    acc = np.zeros((n_classes, n_classes))
    key_rows = np.repeat(np.arange(n_keys, dtype=np.int64), breadth)
    for rep in mask_reps:
        on = [s for s in range(m) if rep.graph.bits >> s & 1]
        off = [s for s in range(m) if not rep.graph.bits >> s & 1]
        comp_id = bits_mat[:, on] @ (np.int64(1) << np.arange(k, dtype=np.int64))
        key_id = bits_mat[:, off] @ (np.int64(1) << np.arange(m - k, dtype=np.int64))
        order = (key_id << k) | comp_id  # bijection onto [0, 2^m)
        w = np.zeros(1 << m)
        w[order] = pi_lab
        cid = np.zeros(1 << m, dtype=np.int64)
        cid[order] = table
        w = w.reshape(n_keys, breadth)
        cid = cid.reshape(n_keys, breadth)
        z = w.sum(axis=1)
        dead = z == 0
        if dead.any():
            # No prior mass anywhere in the block: resample uniformly.
            w[dead] = 1.0
            z = w.sum(axis=1)
        flat = key_rows * n_classes + cid.reshape(-1)
        resampled = np.bincount(
            flat, weights=(w / z[:, None]).reshape(-1), minlength=n_keys * n_classes
        ).reshape(n_keys, n_classes)
        counts = np.bincount(flat, minlength=n_keys * n_classes).reshape(n_keys, n_classes)
        acc += (rep.orbit_size / math.comb(m, k)) * (counts.T @ resampled)
    return TransitionMatrix(n, acc / orbit[:, None])


def stationary_gap(prior: PriorTable, matrix: TransitionMatrix) -> float:
    """Max-abs violation of pi M = pi."""
    return float(np.abs(prior.probs @ matrix.probs - prior.probs).max())


def mixing_time(matrix: TransitionMatrix) -> float:
    """tau = 1 / |log lambda_2| with lambda_2 the second-largest eigenvalue
    modulus.  Raises NonErgodicError when the spectral gap is zero."""
    mods = np.sort(np.abs(np.linalg.eigvals(matrix.probs)))[::-1]
    if mods.shape[0] < 2:
        return 0.0
    lam2 = float(mods[1])
    if lam2 >= 1.0 - 1e-12:
        raise NonErgodicError(f"second eigenvalue modulus {lam2:.12f} leaves no spectral gap")
    if lam2 <= 1e-14:  # numerically zero: the chain forgets in one step
        return 0.0
    return 1.0 / abs(math.log(lam2))


def er_mixing_time(b: float) -> float:
    """Analytic mixing time -1/log(1-b) of any ER prior when a fraction b of
    slots is obscured per round.  Independent of n and of the edge density."""
    if not (0.0 < b <= 1.0):
        raise ValueError(f"need 0 < b <= 1, got {b}")
    if b == 1.0:
        return 0.0
    return -1.0 / math.log1p(-b)


def make_peak_prior(n: int, peak_distance: int) -> PriorTable:
    """Bimodal edge-count prior: 25% of mass uniform over the labeled graphs
    at each of two edge counts a Hamming distance peak_distance apart
    (50% at the single peak when the distance is 0), the remaining 50%
    uniform over all other labeled graphs."""
    m = pair_count(n)
    if not (0 <= peak_distance <= m):
        raise ValueError(f"need 0 <= peak_distance <= {m}, got {peak_distance}")
    k_low = (m - peak_distance) // 2
    k_high = k_low + peak_distance
    peak_labeled = math.comb(m, k_low) + (math.comb(m, k_high) if peak_distance else 0)
    rest_labeled = (1 << m) - peak_labeled
    if rest_labeled == 0:
        raise ValueError("peaks cover every graph; no mass left to spread")
    probs = []
    for c in enumerate_nonisomorphic(n):
        e = c.graph.edge_count
        if e == k_low:
            probs.append(0.25 * (2.0 if peak_distance == 0 else 1.0) * c.orbit_size / math.comb(m, k_low))
        elif e == k_high:
            probs.append(0.25 * c.orbit_size / math.comb(m, k_high))
        else:
            probs.append(0.5 * c.orbit_size / rest_labeled)
    return PriorTable(n, np.array(probs))


# ---------------------------------------------------------------------------
# chain simulation


@dataclass(frozen=True)
class ChainConfig:
    n: int
    n_obs: int
    rounds: int
    chains: int = 1
    seed: int = 0
    init: str | Graph = "spread"  # "spread", "prior", or a fixed Graph

    def __post_init__(self):
        m = pair_count(self.n)
        if not (0 <= self.n_obs <= m):
            raise ValueError(f"need 0 <= n_obs <= {m}, got {self.n_obs}")
        if self.rounds < 1 or self.chains < 1:
            raise ValueError("rounds and chains must be >= 1")
        if isinstance(self.init, Graph):
            if self.init.n != self.n:
                raise ValueError("init graph node count does not match config")
        elif self.init not in ("spread", "prior"):
            raise ValueError(f"unknown init policy {self.init!r}")


def _relabel(g: Graph, perm) -> Graph:
    bits = 0
    for i, j in g.edges():
        bits |= 1 << relation_index(int(perm[i]), int(perm[j]), g.n)
    return Graph(g.n, bits)


def sample_prior_class(prior: PriorTable, rng: np.random.Generator) -> Graph:
    """Uniformly labeled draw from the prior."""
    idx = rng.choice(prior.probs.shape[0], p=prior.probs)
    rep = prior.classes[idx].graph
    return _relabel(rep, rng.permutation(rep.n))


class _TableSampler:
    """Posterior resampling under an explicit class prior."""

    def __init__(self, prior: PriorTable):
        self.prior = prior
        self.labeled = prior.labeled_probs() if pair_count(prior.n) <= 15 else None
        if self.labeled is None:
            self.idx = class_index(prior.n)
            self.per_class = prior.probs / prior.orbit_sizes()

    def _weights(self, bits: np.ndarray) -> np.ndarray:
        if self.labeled is not None:
            return self.labeled[bits]
        return np.array(
            [
                self.per_class[self.idx[canonical_form(Graph(self.prior.n, int(b))).graph.bits]]
                for b in bits
            ]
        )

    def sample(self, pg: PartialGraph, rng: np.random.Generator) -> Graph:
        bits = pg.completion_bits()
        w = self._weights(bits)
        total = w.sum()
        if total == 0:
            w = np.full(bits.shape[0], 1.0 / bits.shape[0])
        else:
            w = w / total
        return Graph(pg.n, int(bits[rng.choice(bits.shape[0], p=w)]))


def simulate_chains(prior: PriorTable | ErgmModel, cfg: ChainConfig) -> ResponseDataset:
    """Run independent chains; returns every round as a response record.

    Chains are seeded from (cfg.seed, chain_id), so results do not depend on
    scheduling and single chains can be reproduced in isolation.
    """
    if isinstance(prior, ErgmModel):
        if prior.n != cfg.n:
            raise ValueError("model node count does not match config")
        draw = lambda pg, rng: posterior_sample(prior, pg, rng)  # noqa: E731
        class_prior = None
    else:
        if prior.n != cfg.n:
            raise ValueError("prior node count does not match config")
        sampler = _TableSampler(prior)
        draw = sampler.sample
        class_prior = prior
    m = pair_count(cfg.n)
    records = []
    for chain in range(cfg.chains):
        rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, chain)))
        if isinstance(cfg.init, Graph):
            current = cfg.init
        elif cfg.init == "spread":
            rho = 0.5 if cfg.chains == 1 else 0.05 + 0.9 * chain / (cfg.chains - 1)
            bits = 0
            draws = rng.random(m)
            for s in range(m):
                if draws[s] < rho:
                    bits |= 1 << s
            current = Graph(cfg.n, bits)
        else:  # "prior"
            if class_prior is None:
                class_prior = prior_table(prior)
            current = sample_prior_class(class_prior, rng)
        for t in range(1, cfg.rounds + 1):
            slots = rng.choice(m, size=cfg.n_obs, replace=False)
            pg = PartialGraph.obscure(current, [int(s) for s in slots])
            response = draw(pg, rng)
            records.append(ResponseItem(pg, response, chain_id=chain, round_index=t))
            current = response
    return ResponseDataset(cfg.n, tuple(records))


def frequency_estimator(data: ResponseDataset, burn_in: int = 0) -> PriorTable:
    """Empirical class frequencies of responses with round_index > burn_in.
    Unseen classes get probability zero (no smoothing)."""
    idx = class_index(data.n)
    counts = np.zeros(len(enumerate_nonisomorphic(data.n)))
    for item in data.records:
        if item.round_index > burn_in:
            counts[idx[canonical_form(item.response).graph.bits]] += 1
    if counts.sum() == 0:
        raise DataError(f"no records beyond burn_in={burn_in}")
    return PriorTable(data.n, counts / counts.sum())


def kl_divergence(p: PriorTable, q: PriorTable) -> float:
    """KL(p || q) in nats; +inf when q misses mass where p has support."""
    if p.n != q.n:
        raise ValueError("priors live on different node counts")
    pv, qv = p.probs, q.probs
    support = pv > 0
    if (qv[support] == 0).any():
        return math.inf
    return float(np.sum(pv[support] * np.log(pv[support] / qv[support])))
