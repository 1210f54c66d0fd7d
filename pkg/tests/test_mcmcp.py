"""Chain dynamics: exact transition operators, mixing times, simulation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphprior.ergm import ErgmModel, PriorTable, er_prior, prior_table, uniform_class_prior
from graphprior.errors import CapabilityError, DataError, NonErgodicError
from graphprior.graphs import Graph, canonical_form, class_index, enumerate_nonisomorphic, pair_count
from graphprior.mcmcp import (
    ChainConfig,
    TransitionMatrix,
    build_transition_matrix,
    er_mixing_time,
    frequency_estimator,
    kl_divergence,
    make_peak_prior,
    mixing_time,
    sample_prior_class,
    simulate_chains,
    stationary_gap,
)


def random_prior(n, rng):
    w = rng.dirichlet(np.ones(len(enumerate_nonisomorphic(n))))
    return PriorTable(n, w)


# ---------------------------------------------------------------------------
# transition operator


def test_rows_are_stochastic_and_nonnegative():
    rng = np.random.default_rng(0)
    for n, k in ((4, 2), (5, 4), (5, 9)):
        mat = build_transition_matrix(random_prior(n, rng), k).probs
        assert (mat >= -1e-15).all()
        np.testing.assert_allclose(mat.sum(axis=1), 1.0, atol=1e-12)


def test_stationarity_of_the_prior():
    rng = np.random.default_rng(1)
    for n in (4, 5):
        for k in (1, 3, pair_count(n)):
            prior = random_prior(n, rng)
            mat = build_transition_matrix(prior, k)
            assert stationary_gap(prior, mat) < 1e-12


def test_nothing_obscured_is_the_identity():
    prior = er_prior(4, 0.3)
    mat = build_transition_matrix(prior, 0)
    np.testing.assert_array_equal(mat.probs, np.eye(len(prior.probs)))


def test_everything_obscured_is_rank_one():
    # one round forgets the state entirely: every row equals the prior
    prior = er_prior(4, 0.6)
    mat = build_transition_matrix(prior, pair_count(4))
    np.testing.assert_allclose(mat.probs, np.tile(prior.probs, (len(prior.probs), 1)), atol=1e-12)
    assert mixing_time(mat) == 0.0


def test_transition_rejects_large_n():
    with pytest.raises(CapabilityError):
        build_transition_matrix(uniform_class_prior(7), 1)


def test_transition_matrix_shape_validated():
    with pytest.raises(ValueError):
        TransitionMatrix(4, np.eye(3))


# ---------------------------------------------------------------------------
# mixing times


def test_er_matches_analytic_mixing_time():
    for n in (4, 5):
        m = pair_count(n)
        for k in (1, 2, m // 2, m - 1):
            mat = build_transition_matrix(er_prior(n, 0.4), k)
            assert mixing_time(mat) == pytest.approx(er_mixing_time(k / m), abs=1e-9)


def test_er_mixing_time_independent_of_density():
    n, k = 5, 3
    taus = [mixing_time(build_transition_matrix(er_prior(n, rho), k)) for rho in (0.2, 0.5, 0.8)]
    assert max(taus) - min(taus) < 1e-9


def test_er_mixing_time_validates_b():
    with pytest.raises(ValueError):
        er_mixing_time(0.0)
    with pytest.raises(ValueError):
        er_mixing_time(1.2)
    assert er_mixing_time(1.0) == 0.0
    assert er_mixing_time(0.5) == pytest.approx(1.0 / math.log(2))


def test_reducible_chain_raises():
    # all mass on the empty and complete classes: with one slot obscured both
    # are absorbing, so there is no spectral gap
    n = 4
    classes = enumerate_nonisomorphic(n)
    probs = np.zeros(len(classes))
    probs[0] = 0.5
    probs[-1] = 0.5
    assert classes[0].graph.edge_count == 0
    assert classes[-1].graph.edge_count == pair_count(n)
    mat = build_transition_matrix(PriorTable(n, probs), 1)
    with pytest.raises(NonErgodicError):
        mixing_time(mat)


def test_peak_prior_mass_layout():
    n, d = 6, 5
    m = pair_count(n)
    prior = make_peak_prior(n, d)
    by_count = prior.edge_count_distribution()
    assert by_count[(m - d) // 2] == pytest.approx(0.25, abs=1e-12)
    assert by_count[(m - d) // 2 + d] == pytest.approx(0.25, abs=1e-12)
    assert by_count.sum() == pytest.approx(1.0, abs=1e-12)
    single = make_peak_prior(n, 0)
    assert single.edge_count_distribution()[m // 2] == pytest.approx(0.5, abs=1e-12)


def test_peak_prior_distance_bounds():
    with pytest.raises(ValueError):
        make_peak_prior(5, 11)


# ---------------------------------------------------------------------------
# simulation


def test_simulation_is_deterministic():
    prior = er_prior(4, 0.4)
    cfg = ChainConfig(4, n_obs=2, rounds=10, chains=3, seed=9)
    a = simulate_chains(prior, cfg)
    b = simulate_chains(prior, cfg)
    assert a == b


def test_simulation_shape_and_indexing():
    data = simulate_chains(er_prior(4, 0.4), ChainConfig(4, 2, rounds=7, chains=3, seed=1))
    assert len(data) == 21
    assert {it.chain_id for it in data.records} == {0, 1, 2}
    per_chain = [it.round_index for it in data.records if it.chain_id == 1]
    assert per_chain == list(range(1, 8))
    for it in data.records:
        assert it.pg.n_obs == 2
        assert it.pg.is_completion(it.response)


def test_simulation_accepts_model_and_table():
    model = ErgmModel.with_order(4, 2, np.array([0.5, -0.2, 0.1]))
    cfg = ChainConfig(4, 3, rounds=200, chains=8, seed=3)
    via_model = simulate_chains(model, cfg)
    via_table = simulate_chains(prior_table(model), cfg)
    # different sampling code paths, same stationary behavior
    f_m = frequency_estimator(via_model, burn_in=20)
    f_t = frequency_estimator(via_table, burn_in=20)
    assert kl_divergence(f_m, f_t) < 0.05


def test_fixed_graph_init():
    g = Graph.from_edges(4, [(0, 1), (1, 2)])
    data = simulate_chains(er_prior(4, 0.5), ChainConfig(4, 1, rounds=2, chains=2, seed=0, init=g))
    for it in data.records:
        if it.round_index == 1:
            # round 1 stimulus derives from the init graph
            assert (it.pg.edges & ~it.pg.obscured) == (g.bits & ~it.pg.obscured)


def test_chain_config_validation():
    with pytest.raises(ValueError):
        ChainConfig(4, 7, rounds=1)
    with pytest.raises(ValueError):
        ChainConfig(4, 2, rounds=0)
    with pytest.raises(ValueError):
        ChainConfig(4, 2, rounds=1, init="warm")
    with pytest.raises(ValueError):
        ChainConfig(4, 2, rounds=1, init=Graph(5, 0))


def test_sample_prior_class_hits_expected_frequencies():
    rng = np.random.default_rng(4)
    prior = er_prior(4, 0.5)  # uniform over labeled graphs
    idx = class_index(4)
    draws = 3000
    counts = np.zeros(len(prior.probs))
    for _ in range(draws):
        g = sample_prior_class(prior, rng)
        counts[idx[canonical_form(g).graph.bits]] += 1
    freq = counts / draws
    sigma = np.sqrt(prior.probs * (1 - prior.probs) / draws)
    assert (np.abs(freq - prior.probs) < 4 * sigma + 1e-9).all()


# ---------------------------------------------------------------------------
# estimation from simulated chains


def test_frequency_estimator_counts_classes():
    prior = er_prior(4, 0.5)
    data = simulate_chains(prior, ChainConfig(4, 3, rounds=500, chains=4, seed=5))
    est = frequency_estimator(data)
    assert kl_divergence(prior, est) < 0.02


def test_frequency_estimator_burn_in():
    data = simulate_chains(er_prior(4, 0.4), ChainConfig(4, 2, rounds=10, chains=2, seed=6))
    est = frequency_estimator(data, burn_in=4)
    # 6 rounds x 2 chains survive; mass still normalized
    assert est.probs.sum() == pytest.approx(1.0)
    with pytest.raises(DataError):
        frequency_estimator(data, burn_in=10)


def test_kl_divergence_basics():
    p = er_prior(4, 0.4)
    assert kl_divergence(p, p) == 0.0
    q = er_prior(4, 0.6)
    assert kl_divergence(p, q) > 0
    classes = enumerate_nonisomorphic(4)
    point = np.zeros(len(classes))
    point[0] = 1.0
    assert kl_divergence(p, PriorTable(4, point)) == math.inf
    # and a point mass against a full-support prior is finite
    assert math.isfinite(kl_divergence(PriorTable(4, point), p))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**6 - 1), st.integers(1, 6))
def test_stationarity_property_random_priors(seed, n_obs):
    rng = np.random.default_rng(seed)
    prior = random_prior(4, rng)
    mat = build_transition_matrix(prior, n_obs)
    assert stationary_gap(prior, mat) < 1e-12
    np.testing.assert_allclose(mat.probs.sum(axis=1), 1.0, atol=1e-12)
