"""Forward simulator tests: initialization law, conservation, determinism."""

import numpy as np
import pytest
from scipy.stats import chisquare, nbinom

from siplab.jumpkernel import KernelSpec, build_discrete_kernel
from siplab.seeding import derive_seed, make_rng
from siplab.simulate import (Configuration, InitialProfile, ProfileKind,
                             SimParams, UniformStream, advance_to,
                             configuration_from_occ, init_product_negbin,
                             run_snapshots, step)

SPEC = KernelSpec(d=1, beta=1.0)


def bump():
    return InitialProfile(kind=ProfileKind.GAUSSIAN_BUMP, level=1.0,
                          amplitude=2.0, center=0.5, width=0.1)


def test_profile_shapes_and_positivity():
    for profile in (InitialProfile(kind=ProfileKind.CONSTANT, level=1.5),
                    bump(),
                    InitialProfile(kind=ProfileKind.TABULATED,
                                   table=(0.5, 1.0, 2.0, 1.0))):
        vals = profile.grid_values(16)
        assert vals.shape == (16,)
        assert np.all(vals >= 0)


def test_profile_validation():
    with pytest.raises(ValueError):
        InitialProfile(kind=ProfileKind.CONSTANT, level=-1.0)
    with pytest.raises(ValueError):
        InitialProfile(kind=ProfileKind.GAUSSIAN_BUMP, level=0.0,
                       amplitude=1.0, width=0.0)
    with pytest.raises(ValueError):
        InitialProfile(kind=ProfileKind.TABULATED, table=(-0.5, 1.0))


def test_negbin_init_matches_negative_binomial_marginal():
    """Chi-square GOF of site occupancies against the NB(alpha, rho) pmf."""
    alpha, rho = 1.5, 2.0
    profile = InitialProfile(kind=ProfileKind.CONSTANT, level=rho)
    rng = make_rng(999)
    samples = []
    for _ in range(400):
        cfg = init_product_negbin(profile, alpha, 32, 1, rng)
        samples.extend(cfg.occ.tolist())
    samples = np.asarray(samples)
    p_success = alpha / (alpha + rho)  # scipy's convention: P(success)
    cutoff = 18
    counts = np.bincount(np.minimum(samples, cutoff), minlength=cutoff + 1)
    probs = nbinom.pmf(np.arange(cutoff), alpha, p_success)
    probs = np.append(probs, 1.0 - probs.sum())
    stat, pvalue = chisquare(counts, len(samples) * probs)
    assert pvalue > 1e-4
    assert samples.mean() == pytest.approx(rho, rel=0.02)


def test_configuration_consistency_checks():
    cfg = configuration_from_occ(np.array([2, 0, 1, 0]), 4)
    assert cfg.N == 3
    cfg.check_consistent()
    cfg.occ[0] = 5
    with pytest.raises(AssertionError):
        cfg.check_consistent()


def test_step_advances_time_and_conserves_mass():
    kernel = build_discrete_kernel(SPEC, 16)
    params = SimParams(alpha=1.0, beta=1.0, horizon=10.0)
    rng = make_rng(5)
    cfg = init_product_negbin(bump(), 1.0, 16, 1, rng)
    n_particles = cfg.N
    for _ in range(200):
        before = cfg.time
        dt = step(cfg, kernel, params, rng)
        assert dt > 0
        assert cfg.time > before
        assert int(cfg.occ.sum()) == n_particles
    assert cfg.proposals == 200
    cfg.check_consistent()


def test_advance_to_refuses_backward_time():
    kernel = build_discrete_kernel(SPEC, 16)
    params = SimParams(alpha=1.0, beta=1.0, horizon=1.0)
    rng = make_rng(5)
    cfg = init_product_negbin(bump(), 1.0, 16, 1, rng)
    stream = UniformStream(rng)
    advance_to(cfg, kernel, params, stream, 0.5)
    with pytest.raises(ValueError):
        advance_to(cfg, kernel, params, stream, 0.2)


def test_trajectory_determinism_under_fixed_seed():
    kernel = build_discrete_kernel(SPEC, 32)
    params = SimParams(alpha=1.0, beta=1.0, horizon=0.3, snapshot_times=(0.1, 0.3))
    outs = []
    for _ in range(2):
        rng_init = make_rng(derive_seed(77, 0, "init"))
        rng_dyn = make_rng(derive_seed(77, 0, "dyn"))
        cfg = init_product_negbin(bump(), 1.0, 32, 1, rng_init)
        snaps = run_snapshots(cfg, kernel, params, rng_dyn)
        outs.append([(t, s.occ.tolist(), s.time, s.proposals) for t, s in snaps])
    assert outs[0] == outs[1]


def test_accepted_jump_displacements_follow_kernel():
    """One tagged particle at high alpha: accepted displacement frequencies
    match the kernel law (chi-square, exact-law thinning check)."""
    M = 16
    kernel = build_discrete_kernel(SPEC, M)
    # single particle, alpha large so thinning acceptance is nearly uniform
    params = SimParams(alpha=50.0, beta=1.0, horizon=np.inf)
    rng = make_rng(31)
    cfg = configuration_from_occ(np.eye(1, M, 0, dtype=np.int64)[0], M)
    prev = 0
    counts = np.zeros(kernel.support_size, dtype=int)
    lookup = {int(z[0]) % M: i for i, z in enumerate(kernel.displacements)}
    draws = 30_000
    last_site = 0
    for _ in range(draws):
        before = cfg.accepted
        step(cfg, kernel, params, rng)
        if cfg.accepted > before:
            site = int(cfg.parts[0])
            counts[lookup[(site - last_site) % M]] += 1
            last_site = site
    total = counts.sum()
    assert total > draws * 0.9  # alpha = 50: acceptance prob >= 50/51
    stat, pvalue = chisquare(counts, total * kernel.probs)
    assert pvalue > 1e-4


def test_uniform_stream_is_pure_function_of_seed():
    s1 = UniformStream(make_rng(3), chunk=128)
    s2 = UniformStream(make_rng(3), chunk=128)
    assert np.array_equal(s1.buf, s2.buf)
    s1.refresh()
    s2.refresh()
    assert np.array_equal(s1.buf, s2.buf)
