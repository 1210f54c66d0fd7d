"""Max-entropy priors over labeled graphs and conditional-likelihood fitting.

The model family weights each labeled graph G on n nodes by

    log w(G) = sum_g beta_g * mu_g(G)

over a basis of subgraphs g with at most r edges, where mu_g is the injective
homomorphism density.  The base measure is uniform over labeled graphs, so it
cancels from every conditional likelihood below.

Fitting maximizes the conditional likelihood of responses given their partial
graphs.  The objective, gradient and Hessian are exact sums over the
enumerated completions of each record; the Hessian is a negated sum of
covariance matrices and therefore negative semidefinite, which makes damped
Newton globally stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import CapabilityError, DataError, FitError
from .graphs import (
    CanonicalGraph,
    Graph,
    PartialGraph,
    canonical_form,
    class_index,
    enumerate_basis,
    enumerate_nonisomorphic,
    graph_to_json,
    labeled_class_table,
    mu_batch,
    mu_table,
    pair_count,
)

_EXACT_ENUM_LIMIT = 24  # max obscured slots for exhaustive completion sums
_FEATURE_CACHE_FLOATS = 1 << 24  # materialize features when under this many


# ---------------------------------------------------------------------------
# prior tables over isomorphism classes


@dataclass(frozen=True)
class PriorTable:
    """Probability per isomorphism class, aligned with enumerate_nonisomorphic(n).

    Node-exchangeable by construction: the implied labeled-graph probability
    is probs[c] / orbit_size[c] for every member of class c.
    """

    n: int
    probs: np.ndarray

    def __post_init__(self):
        classes = enumerate_nonisomorphic(self.n)
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.shape != (len(classes),):
            raise ValueError(f"need {len(classes)} class probabilities for n={self.n}")
        if (probs < 0).any() or not np.isfinite(probs).all():
            raise ValueError("probabilities must be finite and nonnegative")
        total = probs.sum()
        if not np.isclose(total, 1.0, rtol=0, atol=1e-9):
            raise ValueError(f"probabilities sum to {total}, not 1")
        object.__setattr__(self, "probs", probs / total)

    @property
    def classes(self) -> list[CanonicalGraph]:
        return enumerate_nonisomorphic(self.n)

    def prob_of(self, g: Graph) -> float:
        idx = class_index(self.n)[canonical_form(g).graph.bits]
        return float(self.probs[idx])

    def orbit_sizes(self) -> np.ndarray:
        return np.array([c.orbit_size for c in self.classes], dtype=np.float64)

    def labeled_probs(self) -> np.ndarray:
        """Probability of each labeled graph, indexed by bits (n <= 6)."""
        table = labeled_class_table(self.n)
        per_class = self.probs / self.orbit_sizes()
        return per_class[table]

    def edge_count_distribution(self) -> np.ndarray:
        m = pair_count(self.n)
        out = np.zeros(m + 1)
        for cg, p in zip(self.classes, self.probs):
            out[cg.graph.edge_count] += p
        return out


def er_prior(n: int, rho: float) -> PriorTable:
    """Erdos-Renyi G(n, rho) collapsed onto isomorphism classes."""
    if not (0.0 <= rho <= 1.0):
        raise ValueError(f"need 0 <= rho <= 1, got {rho}")
    m = pair_count(n)
    probs = np.array(
        [
            c.orbit_size * rho**c.graph.edge_count * (1 - rho) ** (m - c.graph.edge_count)
            for c in enumerate_nonisomorphic(n)
        ]
    )
    return PriorTable(n, probs)


def uniform_class_prior(n: int) -> PriorTable:
    classes = enumerate_nonisomorphic(n)
    return PriorTable(n, np.full(len(classes), 1.0 / len(classes)))


# ---------------------------------------------------------------------------
# model and dataset types


@dataclass(frozen=True)
class ErgmModel:
    n: int
    r: int
    basis: tuple[Graph, ...]
    beta: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        if beta.shape != (len(self.basis),):
            raise ValueError("beta length must match basis length")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "basis", tuple(self.basis))

    @staticmethod
    def with_order(n: int, r: int, beta=None) -> "ErgmModel":
        basis = tuple(enumerate_basis(r, n))
        if beta is None:
            beta = np.zeros(len(basis))
        return ErgmModel(n, r, basis, np.asarray(beta, dtype=np.float64))

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "r": self.r,
            "basis": [graph_to_json(g) for g in self.basis],
            "beta": [float(b) for b in self.beta],
        }


def log_weight(model: ErgmModel, g: Graph) -> float:
    """Unnormalized log prior weight beta . mu(g)."""
    if g.n != model.n:
        raise ValueError(f"graph has n={g.n}, model has n={model.n}")
    mu = mu_batch(np.array([g.bits], dtype=np.int64), list(model.basis), model.n)[0]
    return float(mu @ model.beta)


def prior_table(model: ErgmModel) -> PriorTable:
    """Exact induced distribution over isomorphism classes (n <= 8)."""
    classes = enumerate_nonisomorphic(model.n)
    bits = np.array([c.graph.bits for c in classes], dtype=np.int64)
    mu = mu_batch(bits, list(model.basis), model.n)
    logw = mu @ model.beta + np.log([c.orbit_size for c in classes])
    probs = np.exp(logw - logsumexp(logw))
    return PriorTable(model.n, probs / probs.sum())


def posterior_sample(model: ErgmModel, pg: PartialGraph, rng: np.random.Generator) -> Graph:
    """Sample a completion of pg with probability proportional to its prior
    weight.  Exact via Gumbel-max over the enumerated completions."""
    if pg.n != model.n:
        raise ValueError(f"partial graph has n={pg.n}, model has n={model.n}")
    if pg.n_obs > _EXACT_ENUM_LIMIT:
        raise CapabilityError(f"{pg.n_obs} obscured slots is beyond exact enumeration")
    best_val = -np.inf
    best_bits = pg.edges
    basis = list(model.basis)
    chunk = 1 << 16
    all_bits = pg.completion_bits()
    for lo in range(0, all_bits.shape[0], chunk):
        blk = all_bits[lo : lo + chunk]
        logits = mu_batch(blk, basis, model.n) @ model.beta
        keyed = logits + rng.gumbel(size=blk.shape[0])
        j = int(keyed.argmax())
        if keyed[j] > best_val:
            best_val = keyed[j]
            best_bits = int(blk[j])
    return Graph(model.n, best_bits)


@dataclass(frozen=True)
class ResponseItem:
    """One round: what the participant saw and the graph they returned."""

    pg: PartialGraph
    response: Graph
    chain_id: int = 0
    round_index: int = 0


@dataclass(frozen=True)
class ResponseDataset:
    n: int
    records: tuple[ResponseItem, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        for t, item in enumerate(self.records):
            if item.pg.n != self.n or item.response.n != self.n:
                raise DataError(f"record {t} has node count != {self.n}")
            if not item.pg.is_completion(item.response):
                raise DataError(f"record {t}: response contradicts a shown relation")

    def __len__(self) -> int:
        return len(self.records)

    def subset(self, indices) -> "ResponseDataset":
        return ResponseDataset(self.n, tuple(self.records[i] for i in indices))


# ---------------------------------------------------------------------------
# prepared objectives


class _FeatureSource:
    """Per-completion feature rows for a record batch, lazily gathered."""

    def __init__(self, n: int, basis: list[Graph]):
        self.n = n
        self.basis = basis
        self.table = mu_table(n, basis) if pair_count(n) <= 15 else None

    def rows(self, bits: np.ndarray) -> np.ndarray:
        if self.table is not None:
            return self.table[bits]
        return mu_batch(bits.reshape(-1), self.basis, self.n).reshape(*bits.shape, -1)


class _Group:
    """Records sharing one completion count, evaluated as a 3d batch.

    Features come either from a bits array plus a _FeatureSource or from a
    precomputed (T, C, F) array.
    """

    def __init__(self, comp_bits, base_logw, source: _FeatureSource | None, feats=None):
        self.comp_bits = comp_bits  # (T, C) int64 or None
        self.base = base_logw  # scalar 0.0 or broadcastable array
        self.source = source
        if feats is not None:
            self.feats = feats
            self.count, self.breadth = feats.shape[:2]
        else:
            self.count, self.breadth = comp_bits.shape
            self.feats = None
            if comp_bits.size * len(source.basis) <= _FEATURE_CACHE_FLOATS:
                self.feats = source.rows(comp_bits)

    def _features(self, lo, hi):
        if self.feats is not None:
            return self.feats[lo:hi]
        return self.source.rows(self.comp_bits[lo:hi])

    def accumulate(self, beta, grad=None, hess=None, chunk_rows=1 << 20):
        """Add this group's loglik (returned) and optionally grad/hess."""
        t_chunk = max(1, chunk_rows // self.breadth)
        ll = 0.0
        for lo in range(0, self.count, t_chunk):
            hi = min(lo + t_chunk, self.count)
            feats = self._features(lo, hi)  # (t, C, F)
            logits = feats @ beta
            if np.ndim(self.base):
                logits = logits + self.base[lo:hi]
            else:
                logits = logits + self.base
            lse = logsumexp(logits, axis=1)
            ll -= lse.sum()
            if grad is not None:
                w = np.exp(logits - lse[:, None])
                wf = feats * w[:, :, None]
                e = wf.sum(axis=1)  # (t, F)
                grad -= e.sum(axis=0)
                f = feats.shape[-1]
                hess += e.T @ e - wf.reshape(-1, f).T @ feats.reshape(-1, f)
        return ll


class PreparedObjective:
    """Conditional log-likelihood of a dataset as a function of beta."""

    def __init__(self, resp_feats: np.ndarray, groups: list[_Group]):
        self.resp_feats = resp_feats
        self.resp_total = resp_feats.sum(axis=0)
        self.groups = groups
        self.dim = resp_feats.shape[1]

    def value(self, beta: np.ndarray) -> float:
        ll = float(self.resp_total @ beta)
        for g in self.groups:
            ll += g.accumulate(beta)
        return ll

    def value_grad_hess(self, beta: np.ndarray):
        grad = self.resp_total.copy()
        hess = np.zeros((self.dim, self.dim))
        ll = float(self.resp_total @ beta)
        for g in self.groups:
            ll += g.accumulate(beta, grad, hess)
        return ll, grad, hess


def prepare_objective(data: ResponseDataset, basis: list[Graph]) -> PreparedObjective:
    """Exact objective: every record's completions fully enumerated."""
    if len(data) == 0:
        raise DataError("empty dataset")
    source = _FeatureSource(data.n, basis)
    resp_bits = np.array([it.response.bits for it in data.records], dtype=np.int64)
    resp_feats = source.rows(resp_bits)
    groups = []
    by_k: dict[int, list[int]] = {}
    for t, it in enumerate(data.records):
        if it.pg.n_obs > _EXACT_ENUM_LIMIT:
            raise CapabilityError(
                f"record {t} has {it.pg.n_obs} obscured slots; use fit_subsampled"
            )
        by_k.setdefault(it.pg.n_obs, []).append(t)
    for k, idx in sorted(by_k.items()):
        comp = np.empty((len(idx), 1 << k), dtype=np.int64)
        for row, t in enumerate(idx):
            comp[row] = data.records[t].pg.completion_bits()
        groups.append(_Group(comp, 0.0, source))
    return PreparedObjective(resp_feats, groups)


def prepare_subsampled_objective(
    data: ResponseDataset, basis: list[Graph], k_samples: int, rng: np.random.Generator
) -> PreparedObjective:
    """Self-normalized importance-sampling objective.

    Each record gets k_samples uniform completions, drawn once up front and
    reused across Newton iterations (common random numbers), so the surrogate
    objective is deterministic and concave.  Records whose completion count
    does not exceed k_samples are enumerated exhaustively, which reproduces
    the exact derivatives.  The log(2^n_obs / K) offset keeps reported
    log-likelihood values on the exact scale.
    """
    if k_samples < 1:
        raise ValueError(f"need k_samples >= 1, got {k_samples}")
    if len(data) == 0:
        raise DataError("empty dataset")
    source = _FeatureSource(data.n, basis)
    resp_bits = np.array([it.response.bits for it in data.records], dtype=np.int64)
    resp_feats = source.rows(resp_bits)
    exact_idx: dict[int, list[int]] = {}
    sampled_idx: dict[int, list[int]] = {}
    for t, it in enumerate(data.records):
        k = it.pg.n_obs
        if k <= _EXACT_ENUM_LIMIT and (1 << k) <= k_samples:
            exact_idx.setdefault(k, []).append(t)
        else:
            sampled_idx.setdefault(k, []).append(t)
    groups = []
    for k, idx in sorted(exact_idx.items()):
        comp = np.empty((len(idx), 1 << k), dtype=np.int64)
        for row, t in enumerate(idx):
            comp[row] = data.records[t].pg.completion_bits()
        groups.append(_Group(comp, 0.0, source))
    for k, idx in sorted(sampled_idx.items()):
        comp = np.empty((len(idx), k_samples), dtype=np.int64)
        for row, t in enumerate(idx):
            pg = data.records[t].pg
            slots = pg.obscured_slots()
            draws = rng.integers(0, 2, size=(k_samples, len(slots)), dtype=np.int64)
            bits = np.full(k_samples, pg.edges, dtype=np.int64)
            for col, s in enumerate(slots):
                bits |= draws[:, col] << s
            comp[row] = bits
        base = np.full((len(idx), 1), k * np.log(2.0) - np.log(k_samples))
        groups.append(_Group(comp, base, source))
    return PreparedObjective(resp_feats, groups)


# ---------------------------------------------------------------------------
# public likelihood surface


def _basis_objective(model: ErgmModel, data: ResponseDataset) -> PreparedObjective:
    if model.n != data.n:
        raise ValueError(f"model n={model.n} but dataset n={data.n}")
    return prepare_objective(data, list(model.basis))


def loglikelihood(model: ErgmModel, data: ResponseDataset) -> float:
    """Exact conditional log-likelihood sum_t log P(G_t | PG_t, beta)."""
    return _basis_objective(model, data).value(model.beta)


def gradient(model: ErgmModel, data: ResponseDataset) -> np.ndarray:
    _, g, _ = _basis_objective(model, data).value_grad_hess(model.beta)
    return g


def hessian(model: ErgmModel, data: ResponseDataset) -> np.ndarray:
    _, _, h = _basis_objective(model, data).value_grad_hess(model.beta)
    return h


# ---------------------------------------------------------------------------
# Newton fitting


@dataclass(frozen=True)
class FitConfig:
    tol: float = 1e-10  # on the max-abs gradient entry
    max_iter: int = 200
    max_halvings: int = 30
    ridge: float = 1e-8
    beta_cap: float = 50.0  # separation guard
    max_step: float | None = None  # trust region for nearly flat objectives
    init_beta: np.ndarray | None = None
    seed: int = 0  # used only by the subsampled variant


@dataclass(frozen=True)
class FitResult:
    model: ErgmModel
    loglik: float
    iterations: int
    converged: bool
    gradient_norm: float
    message: str = ""
    ridge_retries: int = 0

    def to_json(self) -> dict:
        out = self.model.to_json()
        out.update(
            {
                "loglik": self.loglik,
                "iterations": self.iterations,
                "converged": self.converged,
                "gradient_norm": self.gradient_norm,
                "message": self.message,
            }
        )
        return out


def _newton(obj: PreparedObjective, beta0: np.ndarray, cfg: FitConfig):
    """Damped Newton ascent on a concave objective.

    Returns (beta, ll, iters, converged, gnorm, message, ridge_retries).
    The accepted log-likelihood sequence never decreases beyond float
    evaluation noise; the slack lets the final quadratic-phase step through
    when true gains fall below the rounding error of the objective itself.
    """
    beta = beta0.astype(np.float64).copy()
    ridge_retries = 0
    ll, grad, hess = obj.value_grad_hess(beta)
    for it in range(1, cfg.max_iter + 1):
        gnorm = float(np.abs(grad).max())
        if gnorm <= cfg.tol:
            return beta, ll, it - 1, True, gnorm, "", ridge_retries
        if np.abs(beta).max() > cfg.beta_cap:
            return beta, ll, it - 1, False, gnorm, "separation detected", ridge_retries
        neg_h = -hess
        try:
            step = np.linalg.solve(neg_h, grad)
        except np.linalg.LinAlgError:
            ridge_retries += 1
            step = np.linalg.solve(neg_h + cfg.ridge * np.eye(obj.dim), grad)
        if cfg.max_step is not None:
            smax = float(np.abs(step).max())
            if smax > cfg.max_step:
                step = step * (cfg.max_step / smax)
        accepted = False
        slack = 32.0 * np.finfo(np.float64).eps * (1.0 + abs(ll))
        for attempt in range(2):
            scale = 1.0
            for _ in range(cfg.max_halvings + 1):
                trial = beta + scale * step
                trial_ll = obj.value(trial)
                if np.isfinite(trial_ll) and trial_ll >= ll - slack:
                    accepted = True
                    break
                scale *= 0.5
            if accepted or attempt == 1:
                break
            # Line search exhausted: retry from a ridge-regularized direction.
            ridge_retries += 1
            step = np.linalg.solve(neg_h + cfg.ridge * np.eye(obj.dim), grad)
        if not accepted:
            return beta, ll, it, False, gnorm, "line search stalled", ridge_retries
        beta = trial
        ll, grad, hess = obj.value_grad_hess(beta)
    gnorm = float(np.abs(grad).max())
    return beta, ll, cfg.max_iter, gnorm <= cfg.tol, gnorm, "iteration limit", ridge_retries


def _run_fit(obj: PreparedObjective, n: int, r: int, basis, cfg: FitConfig) -> FitResult:
    beta0 = (
        np.zeros(obj.dim) if cfg.init_beta is None else np.asarray(cfg.init_beta, dtype=float)
    )
    if beta0.shape != (obj.dim,):
        raise ValueError(f"init_beta must have length {obj.dim}")
    beta, ll, iters, ok, gnorm, msg, ridge_retries = _newton(obj, beta0, cfg)
    model = ErgmModel(n, r, tuple(basis), beta)
    return FitResult(model, ll, iters, ok, gnorm, msg, ridge_retries)


def fit_newton(data: ResponseDataset, r: int, config: FitConfig | None = None) -> FitResult:
    """Exact maximum-likelihood fit of order r by damped Newton."""
    cfg = config or FitConfig()
    basis = enumerate_basis(r, data.n)
    obj = prepare_objective(data, basis)
    return _run_fit(obj, data.n, r, basis, cfg)


def fit_subsampled(
    data: ResponseDataset, r: int, k_samples: int, config: FitConfig | None = None
) -> FitResult:
    """Like fit_newton but with k_samples uniform completions per record."""
    cfg = config or FitConfig()
    basis = enumerate_basis(r, data.n)
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0x5B5)))
    obj = prepare_subsampled_objective(data, basis, k_samples, rng)
    return _run_fit(obj, data.n, r, basis, cfg)


# ---------------------------------------------------------------------------
# saturated fit over class indicators (paper-style baseline comparison)


class _ClassObjective:
    """Multinomial prior over isomorphism classes, fitted through the same
    conditional likelihood.  Parameters are per-class log weights on labeled
    graphs with class 0 pinned to zero for identifiability."""

    def __init__(self, data: ResponseDataset):
        if pair_count(data.n) > 15:
            raise CapabilityError("saturated fit supports n <= 6")
        table = labeled_class_table(data.n)
        self.n_classes = int(table.max()) + 1
        self.dim = self.n_classes - 1
        self.resp_cls = np.array(
            [table[it.response.bits] for it in data.records], dtype=np.int64
        )
        self.groups = []  # (comp_cls (T, C) int arrays by n_obs)
        by_k: dict[int, list[int]] = {}
        for t, it in enumerate(data.records):
            by_k.setdefault(it.pg.n_obs, []).append(t)
        for k, idx in sorted(by_k.items()):
            comp = np.empty((len(idx), 1 << k), dtype=np.int64)
            for row, t in enumerate(idx):
                comp[row] = table[data.records[t].pg.completion_bits()]
            self.groups.append(comp)

    def _theta(self, beta):
        return np.concatenate([[0.0], beta])

    def value(self, beta):
        theta = self._theta(beta)
        ll = float(theta[self.resp_cls].sum())
        for comp in self.groups:
            ll -= logsumexp(theta[comp], axis=1).sum()
        return ll

    def value_grad_hess(self, beta):
        theta = self._theta(beta)
        grad_full = np.bincount(self.resp_cls, minlength=self.n_classes).astype(float)
        hess_full = np.zeros((self.n_classes, self.n_classes))
        ll = float(theta[self.resp_cls].sum())
        for comp in self.groups:
            logits = theta[comp]
            lse = logsumexp(logits, axis=1)
            ll -= lse.sum()
            w = np.exp(logits - lse[:, None])
            t_count, c_count = comp.shape
            e = np.zeros((t_count, self.n_classes))
            rows = np.repeat(np.arange(t_count), c_count)
            np.add.at(e, (rows, comp.reshape(-1)), w.reshape(-1))
            grad_full -= e.sum(axis=0)
            hess_full += e.T @ e - np.diag(e.sum(axis=0))
        return ll, grad_full[1:], hess_full[1:, 1:]


def fit_saturated(data: ResponseDataset, config: FitConfig | None = None):
    """Maximum-likelihood multinomial prior over all classes (n <= 6).

    Returns (PriorTable, FitResult-like diagnostics tuple).
    """
    cfg = config or FitConfig(beta_cap=100.0)
    obj = _ClassObjective(data)
    beta0 = np.zeros(obj.dim) if cfg.init_beta is None else np.asarray(cfg.init_beta, float)
    beta, ll, iters, ok, gnorm, msg, _ = _newton(obj, beta0, cfg)
    classes = enumerate_nonisomorphic(data.n)
    theta = np.concatenate([[0.0], beta])
    logw = theta + np.log([c.orbit_size for c in classes])
    probs = np.exp(logw - logsumexp(logw))
    return PriorTable(data.n, probs / probs.sum()), (ll, iters, ok, gnorm, msg)
