"""Kernel construction, alias sampling, and Fourier-symbol tests."""

import numpy as np
import pytest
from scipy.stats import chisquare

from siplab.jumpkernel import (DiscreteKernel, KernelFamily, KernelSpec,
                               build_discrete_kernel, discrete_symbol,
                               sample_jump_indices, symbol_at_modes,
                               symbol_limit_estimate)
from siplab.seeding import make_rng


def brute_force_weights(M, beta, window, image_folds):
    """Independent re-derivation of the folded power-law table (d = 1)."""
    out = {}
    for z in range(-(M // 2) + 1, M // 2 + 1):
        if z == 0:
            continue
        w = 0.0
        if 0 < abs(z) <= window:
            w += abs(z) ** -(1.0 + beta)
        for m in range(-image_folds, image_folds + 1):
            if m == 0:
                continue
            w += abs(z + m * M) ** -(1.0 + beta)
        out[z] = w
    return out


def test_weights_match_independent_derivation():
    spec = KernelSpec(d=1, beta=1.0)
    M = 8
    kernel = build_discrete_kernel(spec, M)
    expected = brute_force_weights(M, 1.0, window=M // 2 - 1, image_folds=3)
    total = sum(expected.values())
    for z, w in expected.items():
        assert kernel.prob_of([z]) == pytest.approx(w / total, rel=1e-14)
    assert kernel.total_mass == pytest.approx(total, rel=1e-14)


def test_probabilities_normalized_symmetric_positive():
    for beta in (0.5, 1.0, 1.5):
        kernel = build_discrete_kernel(KernelSpec(d=1, beta=beta), 32)
        assert kernel.probs.sum() == pytest.approx(1.0, abs=1e-14)
        assert np.all(kernel.probs > 0)
        for z, p in zip(kernel.displacements, kernel.probs):
            assert kernel.prob_of(-z) == pytest.approx(p, rel=1e-13)


def test_two_dimensional_kernel():
    kernel = build_discrete_kernel(KernelSpec(d=2, beta=1.0), 8)
    assert kernel.displacements.shape[1] == 2
    assert kernel.probs.sum() == pytest.approx(1.0, abs=1e-13)
    assert kernel.prob_of([1, 0]) == kernel.prob_of([0, 1])
    assert kernel.prob_of([1, 0]) == kernel.prob_of([-1, 0])


def test_custom_tabulated_kernel():
    spec = KernelSpec(d=1, beta=1.0, family=KernelFamily.CUSTOM_TABULATED,
                      table={(1,): 1.0, (-1,): 1.0})
    kernel = build_discrete_kernel(spec, 8)
    assert kernel.prob_of([1]) == pytest.approx(0.5)
    assert kernel.prob_of([-1]) == pytest.approx(0.5)
    symbol = discrete_symbol(kernel, 8)
    j = 2
    expected = 8.0 * (np.cos(2 * np.pi * j / 8) - 1.0)
    assert symbol.mode(j) == pytest.approx(expected, rel=1e-13)


def test_asymmetric_custom_table_rejected():
    with pytest.raises(ValueError, match="symmetric"):
        KernelSpec(d=1, beta=1.0, family=KernelFamily.CUSTOM_TABULATED,
                   table={(1,): 1.0})


def test_invalid_specs_rejected():
    with pytest.raises(ValueError):
        KernelSpec(d=3, beta=1.0)
    with pytest.raises(ValueError):
        KernelSpec(d=1, beta=2.0)
    with pytest.raises(ValueError):
        build_discrete_kernel(KernelSpec(d=1, beta=1.0), 7)  # odd M
    with pytest.raises(ValueError):
        build_discrete_kernel(KernelSpec(d=1, beta=1.0, window=4), 8)


def test_alias_sampling_distribution():
    """Chi-square goodness of fit of alias draws against the exact table."""
    kernel = build_discrete_kernel(KernelSpec(d=1, beta=1.0), 16)
    rng = make_rng(12345)
    draws = 200_000
    idx = sample_jump_indices(kernel, rng, draws)
    counts = np.bincount(idx, minlength=kernel.support_size)
    stat, pvalue = chisquare(counts, draws * kernel.probs)
    assert pvalue > 1e-4


def test_symbol_zero_mode_and_sign():
    kernel = build_discrete_kernel(KernelSpec(d=1, beta=1.0), 64)
    symbol = discrete_symbol(kernel, 64)
    assert symbol.mode(0) == 0.0
    assert np.all(symbol.values <= 0.0)


def test_symbol_matches_direct_sum():
    M, beta, j = 32, 1.2, 5
    kernel = build_discrete_kernel(KernelSpec(d=1, beta=beta), M)
    symbol = discrete_symbol(kernel, M)
    direct = float(M**beta * np.dot(
        np.cos(2 * np.pi * j * kernel.displacements[:, 0] / M) - 1.0,
        kernel.probs))
    assert symbol.mode(j) == pytest.approx(direct, rel=1e-12)
    assert symbol_at_modes(KernelSpec(d=1, beta=beta), M, [j])[0] == \
        pytest.approx(direct, rel=1e-12)


def test_symbol_limit_extrapolation():
    spec = KernelSpec(d=1, beta=1.0)
    psi_inf, table = symbol_limit_estimate(spec, 1, [128, 256, 512, 1024])
    increments = [row[2] for row in table[:-1]]
    assert all(a > b for a, b in zip(increments, increments[1:]))
    psi_direct = symbol_at_modes(spec, 4096, [1])[0]
    # the extrapolated value must beat the finest raw ladder value
    assert abs(psi_inf - psi_direct) < abs(table[-1][1] - psi_direct) + 1e-6
    assert psi_inf < 0


def test_kernel_immutable():
    kernel = build_discrete_kernel(KernelSpec(d=1, beta=1.0), 8)
    assert isinstance(kernel, DiscreteKernel)
    with pytest.raises(AttributeError):
        kernel.M = 10
