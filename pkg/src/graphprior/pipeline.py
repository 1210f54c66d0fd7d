"""From raw response logs to fitted priors.

Covers the record wire format, the four exclusion rules, aggregation into
fitting datasets, cross-validated order selection, story-generalization
matrices, parametric-bootstrap error bands, and the edge-count-only
max-entropy fit used for node counts too large for subgraph enumeration.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Legendre, Polynomial

from .cumulants import cumulants_from_moments, moments_of_prior, scaled_cumulants
from .ergm import (
    ErgmModel,
    FitConfig,
    PreparedObjective,
    PriorTable,
    ResponseDataset,
    ResponseItem,
    _Group,
    _newton,
    fit_newton,
    loglikelihood,
    posterior_sample,
    prior_table,
)
from .errors import DataError, FitError
from .graphs import (
    Graph,
    PartialGraph,
    enumerate_basis,
    graph_from_json,
    graph_to_json,
    pair_count,
    partial_graph_from_json,
    partial_graph_to_json,
)

log = logging.getLogger(__name__)

STORIES = ("class", "work", "park", "city")

EXCLUSION_RULES = ("too_fast", "low_interaction", "changed_too_little", "not_enough_practice")

MIN_SECONDS_PER_RELATION = 3.0
MIN_VALID_ROUNDS = 4
CHANGED_TOO_LITTLE_MIN_OBSCURED = 5  # rule only applies when n_obs exceeds this


@dataclass(frozen=True)
class ResponseRecord:
    """One submitted round with the telemetry the exclusion rules need."""

    session_id: str
    story: str
    chain_id: str
    round_index: int
    n: int
    pg: PartialGraph
    response: Graph
    elapsed_seconds: float
    nodes_moved: int

    def __post_init__(self):
        if self.pg.n != self.n or self.response.n != self.n:
            raise DataError("record node counts disagree")
        if not self.pg.is_completion(self.response):
            raise DataError("response contradicts a shown relation")

    @property
    def f_add(self) -> float:
        """Fraction of obscured slots the participant set to present."""
        if self.pg.n_obs == 0:
            return 0.0
        return (self.response.bits & self.pg.obscured).bit_count() / self.pg.n_obs

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id,
            "story": self.story,
            "chain_id": self.chain_id,
            "round_index": self.round_index,
            "n": self.n,
            "pg": partial_graph_to_json(self.pg),
            "response": graph_to_json(self.response),
            "elapsed_seconds": self.elapsed_seconds,
            "nodes_moved": self.nodes_moved,
        }

    @staticmethod
    def from_json(obj: dict) -> "ResponseRecord":
        try:
            return ResponseRecord(
                session_id=str(obj["session_id"]),
                story=str(obj["story"]),
                chain_id=str(obj["chain_id"]),
                round_index=int(obj["round_index"]),
                n=int(obj["n"]),
                pg=partial_graph_from_json(obj["pg"]),
                response=graph_from_json(obj["response"]),
                elapsed_seconds=float(obj["elapsed_seconds"]),
                nodes_moved=int(obj["nodes_moved"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed response record: {exc}") from exc


def load_records(path) -> list[ResponseRecord]:
    """Read JSON-lines records; service event logs are accepted too, in
    which case only response events are taken."""
    records = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: invalid JSON") from exc
            if "event" in obj:
                if obj["event"] != "response":
                    continue
                obj = obj["record"]
            records.append(ResponseRecord.from_json(obj))
    return records


def dump_records(path, records) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# exclusions


@dataclass(frozen=True)
class ExclusionReport:
    verdicts: tuple[tuple[str, ...], ...]  # triggered rules per input record
    counts: dict[str, int]
    total: int
    kept: int


def interaction_threshold(n: int) -> int:
    """Minimum nodes a participant must move: ceil(n/4) - 1."""
    return math.ceil(n / 4) - 1


def record_rule_violations(rec: ResponseRecord) -> list[str]:
    """Rules 1-3, which look at a single record."""
    out = []
    if rec.elapsed_seconds < MIN_SECONDS_PER_RELATION * rec.pg.shown_count:
        out.append("too_fast")
    if rec.nodes_moved < interaction_threshold(rec.n):
        out.append("low_interaction")
    if rec.pg.n_obs > CHANGED_TOO_LITTLE_MIN_OBSCURED and rec.f_add * rec.n < 1.0:
        out.append("changed_too_little")
    return out


def apply_exclusions(records) -> tuple[list[ResponseRecord], ExclusionReport]:
    """Drop records violating any rule.  Rules 1-3 act per record; rule 4
    then drops every round of sessions left with fewer than 4 valid rounds."""
    records = list(records)
    verdicts = [record_rule_violations(rec) for rec in records]
    survivors_per_session: dict[str, int] = {}
    for rec, v in zip(records, verdicts):
        if not v:
            survivors_per_session[rec.session_id] = survivors_per_session.get(rec.session_id, 0) + 1
    for rec, v in zip(records, verdicts):
        if survivors_per_session.get(rec.session_id, 0) < MIN_VALID_ROUNDS:
            v.append("not_enough_practice")
    counts = {rule: 0 for rule in EXCLUSION_RULES}
    for v in verdicts:
        for rule in v:
            counts[rule] += 1
    kept = [rec for rec, v in zip(records, verdicts) if not v]
    report = ExclusionReport(
        verdicts=tuple(tuple(v) for v in verdicts),
        counts=counts,
        total=len(records),
        kept=len(kept),
    )
    return kept, report


def aggregate(records, story: str, n: int) -> ResponseDataset:
    """Collect records for one (story, n) cell into a fitting dataset."""
    chain_ids: dict[str, int] = {}
    items = []
    for rec in records:
        if rec.story != story or rec.n != n:
            continue
        cid = chain_ids.setdefault(rec.chain_id, len(chain_ids))
        items.append(ResponseItem(rec.pg, rec.response, chain_id=cid, round_index=rec.round_index))
    if not items:
        raise DataError(f"no records for story={story!r}, n={n}")
    return ResponseDataset(n, tuple(items))


# ---------------------------------------------------------------------------
# cross-validated order selection


@dataclass(frozen=True)
class CrossValResult:
    selected_r: int
    mean_avgll: dict[int, float]
    sd_avgll: dict[int, float]
    splits_used: dict[int, int]
    failures: dict[int, int]
    by_chain: bool


def _split_indices(data: ResponseDataset, train_frac: float, rng, by_chain: bool):
    if by_chain:
        chains = sorted({it.chain_id for it in data.records})
        perm = [chains[i] for i in rng.permutation(len(chains))]
        cut = max(1, min(len(chains) - 1, round(train_frac * len(chains))))
        train_chains = set(perm[:cut])
        train = [t for t, it in enumerate(data.records) if it.chain_id in train_chains]
        test = [t for t, it in enumerate(data.records) if it.chain_id not in train_chains]
    else:
        perm = rng.permutation(len(data))
        cut = max(1, min(len(data) - 1, round(train_frac * len(data))))
        train, test = list(perm[:cut]), list(perm[cut:])
    return train, test


def cross_validate(
    data: ResponseDataset,
    r_values,
    splits: int = 64,
    train_frac: float = 0.8,
    seed: int = 0,
    by_chain: bool = False,
    config: FitConfig | None = None,
) -> CrossValResult:
    """Held-out average log-likelihood per model order over random splits.

    Failed fits are discarded and counted.  Ties in the mean break toward
    the smaller order.
    """
    r_values = sorted(set(int(r) for r in r_values))
    if not r_values:
        raise ValueError("need at least one r value")
    if len(data) < 10:
        raise DataError(f"cross-validation needs at least 10 records, got {len(data)}")
    scores: dict[int, list[float]] = {r: [] for r in r_values}
    failures = {r: 0 for r in r_values}
    for s in range(splits):
        rng = np.random.default_rng(np.random.SeedSequence((seed, s)))
        train_idx, test_idx = _split_indices(data, train_frac, rng, by_chain)
        train, test = data.subset(train_idx), data.subset(test_idx)
        for r in r_values:
            try:
                fit = fit_newton(train, r, config)
            except (FitError, np.linalg.LinAlgError):
                failures[r] += 1
                continue
            if not fit.converged:
                failures[r] += 1
                continue
            scores[r].append(loglikelihood(fit.model, test) / len(test))
    mean = {}
    sd = {}
    used = {}
    for r in r_values:
        vals = np.array(scores[r])
        used[r] = len(vals)
        if len(vals) == 0:
            mean[r], sd[r] = -math.inf, math.nan
        else:
            mean[r] = float(vals.mean())
            sd[r] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        if failures[r]:
            log.warning("cross_validate: %d of %d fits at r=%d failed", failures[r], splits, r)
    selected = max(r_values, key=lambda r: (mean[r], -r))
    return CrossValResult(selected, mean, sd, used, failures, by_chain)


# ---------------------------------------------------------------------------
# generalization across cover stories


@dataclass(frozen=True)
class GeneralizationMatrix:
    stories: tuple[str, ...]
    values: np.ndarray  # [test_story, train_story], mean over reps
    reps_used: int
    failures: int
    r: int


def generalization_cell(
    specialized: ErgmModel, pooled: ErgmModel, test: ResponseDataset
) -> float:
    """exp(avg loglik of the specialized model minus the pooled model)."""
    delta = loglikelihood(specialized, test) - loglikelihood(pooled, test)
    return float(math.exp(delta / len(test)))


def generalization_matrix(
    datasets: dict[str, ResponseDataset],
    r: int,
    reps: int = 64,
    seed: int = 0,
    train_frac: float = 0.8,
    config: FitConfig | None = None,
) -> GeneralizationMatrix:
    """Per rep: split every story 80/20, fit one model per story plus one
    pooled model, score exp(avgLL_specialized - avgLL_pooled) on every test
    split.  Reps with any failed fit are discarded and counted."""
    stories = tuple(datasets)
    if len(stories) < 2:
        raise ValueError("need at least two stories")
    node_counts = {d.n for d in datasets.values()}
    if len(node_counts) != 1:
        raise ValueError("datasets must share the node count")
    n = node_counts.pop()
    total = np.zeros((len(stories), len(stories)))
    used = 0
    failures = 0
    for rep in range(reps):
        rng = np.random.default_rng(np.random.SeedSequence((seed, rep)))
        try:
            fits = {}
            tests = {}
            train_all = []
            for story in stories:
                train_idx, test_idx = _split_indices(datasets[story], train_frac, rng, False)
                train = datasets[story].subset(train_idx)
                tests[story] = datasets[story].subset(test_idx)
                train_all.extend(train.records)
                fit = fit_newton(train, r, config)
                if not fit.converged:
                    raise FitError(f"specialized fit for {story} did not converge")
                fits[story] = fit.model
            pooled_fit = fit_newton(ResponseDataset(n, tuple(train_all)), r, config)
            if not pooled_fit.converged:
                raise FitError("pooled fit did not converge")
        except (FitError, np.linalg.LinAlgError):
            failures += 1
            continue
        for i, test_story in enumerate(stories):
            for j, train_story in enumerate(stories):
                total[i, j] += generalization_cell(
                    fits[train_story], pooled_fit.model, tests[test_story]
                )
        used += 1
    if used == 0:
        raise FitError("every repetition failed")
    return GeneralizationMatrix(stories, total / used, used, failures, r)


# ---------------------------------------------------------------------------
# parametric-bootstrap error bands


STATISTICS = ("edge_density", "scaled_cherry", "scaled_triangle")

_EXACT_MOMENT_MAX_NODES = 7
_SAMPLED_MOMENT_DRAWS = 100_000


def _model_statistics(model: ErgmModel, names, rng: np.random.Generator) -> dict[str, float]:
    """Summary statistics of a model's prior.

    Exact class-table moments up to 7 nodes; beyond that the table is large
    enough that moments are estimated from prior draws instead.
    """
    basis = enumerate_basis(3, model.n)
    table = prior_table(model)
    if model.n <= _EXACT_MOMENT_MAX_NODES:
        moments = moments_of_prior(table, basis)
    else:
        draws = rng.choice(len(table.probs), size=_SAMPLED_MOMENT_DRAWS, p=table.probs)
        freq = np.bincount(draws, minlength=len(table.probs)) / _SAMPLED_MOMENT_DRAWS
        moments = moments_of_prior(PriorTable(model.n, freq), basis)
    kappas = scaled_cumulants(cumulants_from_moments(moments), moments)
    def find(pred):
        return next(i for i, g in enumerate(basis) if pred(g))
    idx_edge = find(lambda g: g.edge_count == 1)
    idx_cherry = find(lambda g: g.edge_count == 2 and g.n == 3)
    idx_tri = find(lambda g: g.edge_count == 3 and g.n == 3 and g.bits == 0b111)
    table = {
        "edge_density": moments.values[idx_edge],
        "scaled_cherry": kappas.scaled[idx_cherry],
        "scaled_triangle": kappas.scaled[idx_tri],
    }
    unknown = set(names) - set(table)
    if unknown:
        raise ValueError(f"unknown statistics: {sorted(unknown)}")
    return {k: float(table[k]) for k in names}


def error_bands(
    model: ErgmModel,
    shown: list[PartialGraph],
    statistics=STATISTICS,
    reps: int = 64,
    seed: int = 0,
    config: FitConfig | None = None,
):
    """Parametric bootstrap: resample responses for the given partial graphs
    from the fitted model, refit, and report mean and sd of summary
    statistics across refits.

    Returns (bands, reps_used) with bands[name] = (mean, sd).
    """
    for pg in shown:
        if pg.n != model.n:
            raise ValueError("partial graph node count does not match the model")
    samples: dict[str, list[float]] = {name: [] for name in statistics}
    used = 0
    for rep in range(reps):
        rng = np.random.default_rng(np.random.SeedSequence((seed, rep)))
        items = tuple(
            ResponseItem(pg, posterior_sample(model, pg, rng), round_index=t + 1)
            for t, pg in enumerate(shown)
        )
        try:
            refit = fit_newton(ResponseDataset(model.n, items), model.r, config)
        except (FitError, np.linalg.LinAlgError):
            continue
        if not refit.converged:
            continue
        stats = _model_statistics(refit.model, statistics, rng)
        for name, value in stats.items():
            samples[name].append(value)
        used += 1
    if used == 0:
        raise FitError("every bootstrap refit failed")
    bands = {}
    for name in statistics:
        vals = np.array(samples[name])
        bands[name] = (float(vals.mean()), float(vals.std(ddof=1)) if used > 1 else 0.0)
    return bands, used


# ---------------------------------------------------------------------------
# edge-count-only max-entropy fit


@dataclass(frozen=True)
class EdgeOnlyFit:
    """Max-entropy prior over relation sequences constrained on the first
    moment_order moments of the edge density.

    probs[k] is the prior probability that a graph has k edges:
    probs[k] = C(m, k) exp(sum_j lambdas[j] (k/m)^j) / Z.
    """

    n: int
    moment_order: int
    lambdas: np.ndarray
    probs: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    gradient_norm: float
    empirical_moments: np.ndarray
    fitted_moments: np.ndarray

    def sequence_log_weight(self, k: int) -> float:
        """log weight of a single labeled graph with k edges (up to Z)."""
        m = pair_count(self.n)
        phi = np.array([(k / m) ** j for j in range(1, self.moment_order + 1)])
        return float(phi @ self.lambdas)


def _edge_features(ks: np.ndarray, m: int, order: int) -> np.ndarray:
    """Shifted-Legendre features of the edge density k/m.

    Spans the same polynomials as the raw powers (k/m)^j but stays well
    conditioned, so Newton converges even at order 6 where the power basis
    is near-collinear.
    """
    x = np.asarray(ks, dtype=np.float64) / m
    return np.polynomial.legendre.legvander(2.0 * x - 1.0, order)[..., 1:]


def _legendre_to_power(c: np.ndarray) -> np.ndarray:
    """Coefficients of the degree-1.. terms; the constant folds into Z."""
    series = Legendre(np.concatenate(([0.0], c)), domain=[0.0, 1.0]).convert(kind=Polynomial)
    out = np.zeros(len(c) + 1)
    out[: len(series.coef)] = series.coef
    return out[1:]


def _power_to_legendre(lam: np.ndarray) -> np.ndarray:
    series = Polynomial(np.concatenate(([0.0], lam))).convert(kind=Legendre, domain=[0.0, 1.0])
    out = np.zeros(len(lam) + 1)
    out[: len(series.coef)] = series.coef
    return out[1:]


def fit_edge_only(
    data: ResponseDataset, moment_order: int = 6, config: FitConfig | None = None
) -> EdgeOnlyFit:
    """Fit the edge-count-only prior by the same conditional likelihood.

    Completions collapse onto the number of obscured slots set present, so
    each record contributes n_obs + 1 weighted outcomes and any node count
    is tractable.  Raises FitError when Newton cannot reach the gradient
    tolerance (e.g. infeasible moments from degenerate data).
    """
    # The six-moment dual is nearly flat along high-degree directions, so
    # the optimum can sit far out even when the distribution is tame; a
    # trust region keeps Newton on track and a large cap still catches
    # genuinely unbounded (infeasible) problems via the iteration limit.
    # Gradient tolerance sits above the float noise floor of large datasets
    # (relative moment gaps stay ~ tol / len(data), far inside 1e-8).
    cfg = config or FitConfig(max_step=2.0, beta_cap=1e5, max_iter=500, tol=1e-9)
    if moment_order < 1:
        raise ValueError(f"need moment_order >= 1, got {moment_order}")
    m = pair_count(data.n)
    if moment_order > m:
        raise ValueError(f"moment_order {moment_order} exceeds slot count {m}")
    if len(data) == 0:
        raise DataError("empty dataset")
    resp_counts = np.array([it.response.edge_count for it in data.records])
    resp_feats = _edge_features(resp_counts, m, moment_order)
    by_k: dict[int, list[int]] = {}
    for t, it in enumerate(data.records):
        by_k.setdefault(it.pg.n_obs, []).append(t)
    groups = []
    for k, idx in sorted(by_k.items()):
        adds = np.arange(k + 1)
        shown_edges = np.array([data.records[t].pg.edges.bit_count() for t in idx])
        counts = shown_edges[:, None] + adds[None, :]  # (T, k+1) edge totals
        feats = _edge_features(counts, m, moment_order)
        base = np.log([math.comb(k, a) for a in adds])
        groups.append(_Group(None, np.broadcast_to(base, counts.shape), None, feats=feats))
    obj = PreparedObjective(resp_feats, groups)
    c0 = (
        np.zeros(moment_order)
        if cfg.init_beta is None
        else _power_to_legendre(np.asarray(cfg.init_beta, dtype=np.float64))
    )
    c, ll, iters, ok, gnorm, msg, _ = _newton(obj, c0, cfg)
    if not ok:
        raise FitError(f"edge-only fit did not converge: {msg or 'tolerance not reached'}")
    ks = np.arange(m + 1)
    logw = np.log([math.comb(m, k) for k in ks])
    logw = logw + _edge_features(ks, m, moment_order) @ c
    probs = np.exp(logw - logw.max())
    probs /= probs.sum()
    # Power-basis moment report: the fitted conditional moments differ from
    # the empirical ones by the (linearly transformed) score, zero at the
    # optimum.
    _, grad, _ = obj.value_grad_hess(c)
    mix = np.zeros((moment_order, moment_order))
    for j in range(1, moment_order + 1):
        row = Polynomial.basis(j).convert(kind=Legendre, domain=[0.0, 1.0]).coef
        mix[j - 1, : j] = row[1 : j + 1]
    frac = resp_counts / m
    empirical = np.array([(frac**j).mean() for j in range(1, moment_order + 1)])
    fitted = empirical - (mix @ grad) / len(data)
    return EdgeOnlyFit(
        n=data.n,
        moment_order=moment_order,
        lambdas=_legendre_to_power(c),
        probs=probs,
        loglik=ll,
        iterations=iters,
        converged=ok,
        gradient_norm=gnorm,
        empirical_moments=empirical,
        fitted_moments=fitted,
    )
