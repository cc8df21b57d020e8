"""Test functions, fluctuation fields, carre du champ, replica statistics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from siplab.fields import (ReplicaStats, TestFunction, TestFunctionKind,
                           carre_du_champ, cumulative_trapezoid,
                           dynkin_residual, empirical, fluctuation)
from siplab.hydro import DensityField
from siplab.jumpkernel import KernelSpec, build_discrete_kernel, discrete_symbol
from siplab.seeding import make_rng
from siplab.simulate import configuration_from_occ, init_product_negbin
from siplab.simulate import InitialProfile, ProfileKind

SPEC = KernelSpec(d=1, beta=1.0)


def test_fourier_mode_norm_and_generator_action():
    n = 64
    kernel = build_discrete_kernel(SPEC, n)
    symbol = discrete_symbol(kernel, n)
    for mode, phase in [(1, "cos"), (3, "sin")]:
        phi = TestFunction(kind=TestFunctionKind.FOURIER_MODE, mode=mode,
                           phase=phase)
        assert phi.discrete_norm_sq(n) == pytest.approx(1.0, abs=1e-12)
        action = phi.generator_action(symbol)
        # Fourier modes are exact eigenfunctions of the torus generator
        assert np.max(np.abs(action - symbol.mode(mode) * phi.values(n))) <= 1e-9


def test_empirical_measure_and_fluctuation_field():
    n = 8
    occ = np.array([2, 0, 0, 1, 0, 0, 3, 0])
    cfg = configuration_from_occ(occ, n)
    phi = np.arange(n, dtype=float)
    expected = (2 * 0 + 1 * 3 + 3 * 6) / n
    assert empirical(cfg, phi) == pytest.approx(expected)
    mean = DensityField(M=n, d=1, values=np.full(n, occ.mean()), time=0.0)
    y = fluctuation(cfg, phi, mean)
    centered = expected - float(np.full(n, occ.mean()) @ phi) / n
    assert y == pytest.approx(np.sqrt(n) * centered)


def test_fluctuation_time_stamp_mismatch_raises():
    cfg = configuration_from_occ(np.array([1, 0, 0, 0]), 4)
    mean = DensityField(M=4, d=1, values=np.ones(4), time=0.5)
    with pytest.raises(ValueError, match="time-stamp"):
        fluctuation(cfg, np.ones(4), mean)


def test_carre_du_champ_matches_direct_double_sum():
    """Jitted accumulation vs an independent pure-Python double sum."""
    n, alpha = 16, 1.3
    kernel = build_discrete_kernel(SPEC, n)
    rng = make_rng(21)
    profile = InitialProfile(kind=ProfileKind.CONSTANT, level=2.0)
    cfg = init_product_negbin(profile, alpha, n, 1, rng)
    phi = np.cos(2 * np.pi * np.arange(n) / n)
    total = 0.0
    for x in range(n):
        for z, p in zip(kernel.displacements, kernel.probs):
            y = (x + int(z[0])) % n
            total += (p * cfg.occ[x] * (alpha + cfg.occ[y])
                      * (phi[y] - phi[x]) ** 2)
    expected = total * n**1.0 / n
    assert carre_du_champ(cfg, phi, kernel, alpha) == pytest.approx(
        expected, rel=1e-12)


def test_carre_du_champ_nonnegative_and_zero_for_constants():
    n = 16
    kernel = build_discrete_kernel(SPEC, n)
    rng = make_rng(3)
    cfg = init_product_negbin(
        InitialProfile(kind=ProfileKind.CONSTANT, level=1.0), 1.0, n, 1, rng)
    assert carre_du_champ(cfg, np.ones(n), kernel, 1.0) == 0.0
    assert carre_du_champ(cfg, np.arange(n, dtype=float), kernel, 1.0) >= 0.0


def test_cumulative_trapezoid_matches_numpy():
    ts = np.linspace(0.0, 1.0, 17)
    vals = np.sin(3 * ts) + 2
    ours = cumulative_trapezoid(ts, vals)
    assert ours[0] == 0.0
    assert ours[-1] == pytest.approx(float(np.trapezoid(vals, ts)), rel=1e-13)


def test_dynkin_residual_vanishes_for_exact_linear_drift():
    ts = np.linspace(0.0, 2.0, 21)
    drift = np.full_like(ts, 1.5)
    field_vals = 4.0 + 1.5 * ts
    resid = dynkin_residual(ts, field_vals, drift)
    assert np.max(np.abs(resid)) <= 1e-12


def test_replica_stats_matches_numpy():
    rng = np.random.default_rng(8)
    xs = rng.normal(3.0, 2.0, size=500)
    st_ = ReplicaStats()
    for x in xs:
        st_.add(float(x))
    assert st_.mean == pytest.approx(float(xs.mean()), rel=1e-12)
    assert st_.variance == pytest.approx(float(xs.var(ddof=1)), rel=1e-12)
    assert st_.se == pytest.approx(float(xs.std(ddof=1) / np.sqrt(len(xs))),
                                   rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=40),
       st.lists(st.floats(-1e6, 1e6), min_size=0, max_size=40))
def test_replica_stats_merge_is_associative(xs, ys):
    """Merging shard accumulators equals accumulating the concatenation."""
    joint = ReplicaStats()
    for v in xs + ys:
        joint.add(v)
    a, b = ReplicaStats(), ReplicaStats()
    for v in xs:
        a.add(v)
    for v in ys:
        b.add(v)
    a.merge(b)
    assert a.count == joint.count
    assert a.mean == pytest.approx(joint.mean, rel=1e-9, abs=1e-9)
    assert a.variance == pytest.approx(joint.variance, rel=1e-6, abs=1e-6)
