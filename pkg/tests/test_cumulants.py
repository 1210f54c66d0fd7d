"""Moment/cumulant machinery: recursion, ER zeros, thinning, scaling."""

import math

import numpy as np
import pytest

from graphprior.cumulants import (
    CumulantVector,
    MomentVector,
    cumulants_from_moments,
    moments_from_cumulants,
    moments_of_prior,
    scaled_cumulants,
    thin_moments,
)
from graphprior.ergm import PriorTable, er_prior
from graphprior.graphs import Graph, enumerate_basis, enumerate_nonisomorphic


def random_prior(n, rng):
    return PriorTable(n, rng.dirichlet(np.ones(len(enumerate_nonisomorphic(n)))))


def kappa_by_name(basis, kappas, n_nodes, n_edges, bits=None):
    for g, k in zip(basis, kappas):
        if g.n == n_nodes and g.edge_count == n_edges and (bits is None or g.bits == bits):
            return k
    raise LookupError


def test_er_moments_are_rho_powers():
    basis = enumerate_basis(3, 5)
    for rho in (0.2, 0.7):
        mom = moments_of_prior(er_prior(5, rho), basis)
        for g, v in zip(mom.basis, mom.values):
            assert v == pytest.approx(rho**g.edge_count, abs=1e-13)


def test_first_cumulant_is_the_edge_density():
    rng = np.random.default_rng(0)
    prior = random_prior(5, rng)
    basis = enumerate_basis(2, 5)
    mom = moments_of_prior(prior, basis)
    kap = cumulants_from_moments(mom)
    e = kappa_by_name(basis, kap.kappas, 2, 1)
    assert e == pytest.approx(kappa_by_name(basis, mom.values, 2, 1), rel=1e-14)


def test_cherry_and_triangle_formulas():
    rng = np.random.default_rng(1)
    prior = random_prior(5, rng)
    basis = enumerate_basis(3, 5)
    mom = moments_of_prior(prior, basis)
    kap = cumulants_from_moments(mom)
    mu = dict(zip(basis, mom.values))
    mu_e = kappa_by_name(basis, mom.values, 2, 1)
    mu_ch = kappa_by_name(basis, mom.values, 3, 2)
    mu_tri = kappa_by_name(basis, mom.values, 3, 3, 0b111)
    assert kappa_by_name(basis, kap.kappas, 3, 2) == pytest.approx(mu_ch - mu_e**2, rel=1e-12)
    assert kappa_by_name(basis, kap.kappas, 3, 3, 0b111) == pytest.approx(
        mu_tri - 3 * mu_e * mu_ch + 2 * mu_e**3, rel=1e-10, abs=1e-13
    )


def test_cherry_formula_symbolically():
    sympy = pytest.importorskip("sympy")
    basis = enumerate_basis(2, 4)
    names = {1: "mu_e", 2: "mu_che"}
    syms = []
    for g in basis:
        if g.edge_count == 2 and g.n == 4:
            syms.append(sympy.Symbol("mu_match"))
        else:
            syms.append(sympy.Symbol(names[g.edge_count]))
    kap = cumulants_from_moments(MomentVector(tuple(basis), tuple(syms)))
    mu_e, mu_che = sympy.Symbol("mu_e"), sympy.Symbol("mu_che")
    got = kappa_by_name(basis, kap.kappas, 3, 2)
    assert sympy.simplify(got - (mu_che - mu_e**2)) == 0


def test_er_cumulants_vanish_beyond_the_edge():
    basis = enumerate_basis(4, 6)
    for rho in (0.3, 0.8):
        kap = cumulants_from_moments(moments_of_prior(er_prior(6, rho), basis))
        for g, k in zip(basis, kap.kappas):
            if g.edge_count >= 2:
                assert abs(k) < 1e-13, (g, k)


def test_moment_cumulant_round_trip():
    rng = np.random.default_rng(2)
    basis = enumerate_basis(3, 5)
    mom = moments_of_prior(random_prior(5, rng), basis)
    back = moments_from_cumulants(cumulants_from_moments(mom))
    np.testing.assert_allclose(back.as_array(), mom.as_array(), atol=1e-14)


def test_thinning_scales_cumulants_homogeneously():
    rng = np.random.default_rng(3)
    basis = enumerate_basis(3, 5)
    mom = moments_of_prior(random_prior(5, rng), basis)
    kap = cumulants_from_moments(mom)
    for x in (0.25, 0.6):
        thinned = cumulants_from_moments(thin_moments(mom, x))
        for g, k0, k1 in zip(basis, kap.kappas, thinned.kappas):
            assert k1 == pytest.approx(x**g.edge_count * k0, rel=1e-11, abs=1e-14)


def test_thinning_leaves_scaled_cumulants_invariant():
    rng = np.random.default_rng(4)
    basis = enumerate_basis(3, 5)
    mom = moments_of_prior(random_prior(5, rng), basis)
    s0 = scaled_cumulants(cumulants_from_moments(mom), mom)
    thinned_mom = thin_moments(mom, 0.35)
    s1 = scaled_cumulants(cumulants_from_moments(thinned_mom), thinned_mom)
    np.testing.assert_allclose(np.array(s1.scaled), np.array(s0.scaled), atol=1e-10)


def test_scaled_cumulants_flag_zero_edge_density():
    classes = enumerate_nonisomorphic(4)
    point = np.zeros(len(classes))
    point[0] = 1.0  # all mass on the empty graph
    basis = enumerate_basis(2, 4)
    mom = moments_of_prior(PriorTable(4, point), basis)
    kap = scaled_cumulants(cumulants_from_moments(mom), mom)
    assert not kap.scaled_valid
    for g, s in zip(basis, kap.scaled):
        if g.edge_count >= 2:
            assert math.isnan(s)


def test_non_downward_closed_basis_rejected():
    triangle = Graph.from_edges(3, [(0, 1), (0, 2), (1, 2)])
    edge = Graph.from_edges(2, [(0, 1)])
    with pytest.raises(ValueError):
        cumulants_from_moments(MomentVector((edge, triangle), (0.5, 0.2)))


def test_moments_of_point_mass_match_densities():
    from graphprior.graphs import injective_density

    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    classes = enumerate_nonisomorphic(4)
    probs = np.zeros(len(classes))
    from graphprior.graphs import canonical_form, class_index

    probs[class_index(4)[canonical_form(g).graph.bits]] = 1.0
    basis = enumerate_basis(2, 4)
    mom = moments_of_prior(PriorTable(4, probs), basis)
    for f, v in zip(basis, mom.values):
        assert v == pytest.approx(injective_density(f, g), abs=1e-15)
