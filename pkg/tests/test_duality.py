"""Duality weights, dual walkers, exact oracles, and moment bounds."""

import math

import numpy as np
import pytest
from scipy.special import gammaln
from scipy.stats import nbinom

from siplab.duality import (DualConfiguration, build_exact_model,
                            duality_check, duality_weight,
                            duality_weight_occ, exact_expectation,
                            expm_expectation, moment_bound, negbin_dual_moment,
                            run_dual, single_site_weight)
from siplab.hydro import field_from_profile, solve
from siplab.jumpkernel import KernelSpec, build_discrete_kernel, discrete_symbol
from siplab.seeding import derive_seed, make_rng
from siplab.simulate import (InitialProfile, ProfileKind,
                             configuration_from_occ)

SPEC = KernelSpec(d=1, beta=1.0)


def test_single_site_weight_closed_forms():
    alpha = 1.7
    assert single_site_weight(0, 5, alpha) == 1.0
    assert single_site_weight(3, 2, alpha) == 0.0
    assert single_site_weight(1, 4, alpha) == pytest.approx(4.0 / alpha, rel=1e-13)
    # d(2, 3) = 3*2 * Gamma(a)/Gamma(a+2) = 6 / (a (a+1))
    assert single_site_weight(2, 3, alpha) == pytest.approx(
        6.0 / (alpha * (alpha + 1.0)), rel=1e-13)


def test_occupancy_recovered_from_single_walker_weight():
    alpha = 0.8
    occ = np.array([3, 0, 5, 1])
    eta = configuration_from_occ(occ, 4)
    for x in range(4):
        xi = DualConfiguration(n=4, d=1, positions=np.array([x]))
        assert alpha * duality_weight(xi, eta, alpha) == pytest.approx(
            float(occ[x]), rel=1e-13)


def test_duality_weight_factorizes():
    alpha = 1.2
    eta = configuration_from_occ(np.array([2, 1, 0, 4]), 4)
    xi = DualConfiguration(n=4, d=1, positions=np.array([0, 3, 3]))
    expected = (single_site_weight(1, 2, alpha)
                * single_site_weight(2, 4, alpha))
    assert duality_weight(xi, eta, alpha) == pytest.approx(expected, rel=1e-13)


def test_negbin_dual_moment_against_pmf_summation():
    """Closed form E[d(m, NB)] = (rho/alpha)^m vs direct pmf summation."""
    alpha, rho = 1.4, 2.3
    p_success = alpha / (alpha + rho)
    for m in (1, 2, 3):
        direct = sum(single_site_weight(m, k, alpha) * nbinom.pmf(k, alpha, p_success)
                     for k in range(400))
        assert direct == pytest.approx((rho / alpha) ** m, rel=1e-10)
    profile = InitialProfile(kind=ProfileKind.CONSTANT, level=rho)
    xi = DualConfiguration(n=8, d=1, positions=np.array([2, 2, 5]))
    assert negbin_dual_moment(xi, profile, alpha) == pytest.approx(
        (rho / alpha) ** 3, rel=1e-13)


def test_dual_configuration_validation():
    with pytest.raises(ValueError):
        DualConfiguration(n=8, d=1, positions=np.arange(5))  # k > 4
    with pytest.raises(ValueError):
        DualConfiguration(n=8, d=1, positions=np.array([9]))


def test_exact_generator_rows_sum_to_zero():
    kernel = build_discrete_kernel(SPEC, 4)
    model = build_exact_model(kernel, N=2, alpha=1.0, beta=1.0)
    row_sums = np.asarray(model.generator.sum(axis=1)).ravel()
    assert np.max(np.abs(row_sums)) < 1e-10
    off_diag = model.generator.toarray() - np.diag(model.generator.diagonal())
    assert np.all(off_diag >= 0)


def test_uniformization_agrees_with_dense_expm():
    kernel = build_discrete_kernel(SPEC, 6)
    model = build_exact_model(kernel, N=3, alpha=1.0, beta=1.0)
    xi = DualConfiguration(n=6, d=1, positions=np.array([1, 4]))
    f = lambda occ: duality_weight_occ(xi, occ, 1.0)
    initial = (1, 1, 1, 0, 0, 0)
    for t in (0.05, 0.2, 1.0):
        e1 = exact_expectation(model, f, initial, t)
        e2 = expm_expectation(model, f, initial, t)
        assert abs(e1 - e2) <= 1e-8


def test_single_dual_walker_mean_matches_spectral_solution():
    """k=1 dual walkers move with generator alpha * L_n: the occupation
    distribution at time t equals the semigroup applied to the start."""
    n, alpha, beta, t = 16, 1.0, 1.0, 0.15
    kernel = build_discrete_kernel(SPEC, n)
    symbol = discrete_symbol(kernel, n)
    start = n // 2
    replicas = 3000
    hist = np.zeros(n)
    for r in range(replicas):
        rng = make_rng(derive_seed(606, r, "walker"))
        xi = DualConfiguration(n=n, d=1, positions=np.array([start]))
        out = run_dual(xi, kernel, alpha, beta, t, rng)
        hist[int(out.positions[0])] += 1
    hist /= replicas
    delta = field_from_profile(
        InitialProfile(kind=ProfileKind.TABULATED,
                       table=tuple(float(i == start) for i in range(n))), n)
    expected = solve(delta, alpha, symbol, t).values
    se = np.sqrt(np.maximum(expected * (1 - expected), 1e-12) / replicas)
    assert np.all(np.abs(hist - expected) <= 5 * se + 1e-9)


def test_duality_check_small_run_passes():
    n = 16
    kernel = build_discrete_kernel(SPEC, n)
    profile = InitialProfile(kind=ProfileKind.CONSTANT, level=1.0)
    xi = DualConfiguration(n=n, d=1, positions=np.array([4, 8]))
    out = duality_check(xi, profile, kernel, alpha=1.0, beta=1.0, t=0.1,
                        replicas=600, seed=11)
    se = math.hypot(out["se_lhs"], out["se_rhs"])
    assert abs(out["lhs"] - out["rhs"]) <= 3.0 * se


def test_moment_bound_closed_forms():
    alpha, r = 1.0, 2.0
    r21 = max(r * r, r)
    assert moment_bound([3], alpha, r) == pytest.approx(r)
    assert moment_bound([1, 2], alpha, r) == pytest.approx(5 * r21)
    assert moment_bound([1, 1], alpha, r) == pytest.approx(
        5 * r21 + 5 * r21 / alpha + r)
    assert moment_bound([0, 1, 2], alpha, r) == pytest.approx(r**3)
    assert moment_bound([1, 1, 2], alpha, r) == pytest.approx(
        r**3 + r**3 / alpha + r**2)
    with pytest.raises(ValueError):
        moment_bound([1, 2, 2], alpha, r)  # coincident final pair
    with pytest.raises(ValueError):
        moment_bound([1, 1, 2, 3], alpha, r)  # coincident first pair


def test_moment_bound_dominates_negbin_product_moments():
    """At stationarity the k-point moments are products of NB moments; the
    bounds must dominate them for distinct points."""
    alpha, rho = 1.3, 1.7
    assert moment_bound([0, 5], alpha, rho) >= rho**2
    assert moment_bound([0, 5, 9], alpha, rho) >= rho**3
    assert moment_bound([0, 5, 9, 12], alpha, rho) >= rho**4
    # coincident points: E[eta^2] = rho(alpha+1)/alpha * rho + rho... use the
    # exact NB second moment rho^2 (alpha+1)/alpha + rho
    second = rho**2 * (alpha + 1) / alpha + rho
    assert moment_bound([4, 4], alpha, rho) >= second
