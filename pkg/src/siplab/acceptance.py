"""The package's acceptance suite: nine quantitative end-to-end checks.

Each criterion is a pure function returning an :class:`AcceptanceResult`;
the test suite and the ``check`` CLI subcommand both run them.  Tolerances
are pinned here and nowhere else.
"""

import shutil
import tempfile
from dataclasses import dataclass

import numpy as np

from . import config as _config
from .config import ExperimentConfig, ExperimentKind
from .dirichlet import discrete_form, form_report, mosco_recovery_check
from .duality import (DualConfiguration, build_exact_model, duality_check_batch,
                      duality_weight_occ, exact_expectation, expm_expectation)
from .experiments import run
from .fields import TestFunction, TestFunctionKind
from .hydro import apply_L, apply_L_quadrature, field_from_profile, solve
from .jumpkernel import KernelSpec, build_discrete_kernel, discrete_symbol
from .seeding import derive_seed, make_rng
from .simulate import (InitialProfile, ProfileKind, SimParams, UniformStream,
                       advance_to, configuration_from_occ, init_product_negbin)

MASTER_SEED = 20260824


@dataclass
class AcceptanceResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail}"


def _bump_profile(level=1.0, amplitude=2.0, width=0.1) -> InitialProfile:
    return InitialProfile(kind=ProfileKind.GAUSSIAN_BUMP, level=level,
                          amplitude=amplitude, center=0.5, width=width)


def _cos_mode(mode=1) -> TestFunction:
    return TestFunction(kind=TestFunctionKind.FOURIER_MODE, mode=mode, phase="cos")


def criterion_1_conservation_determinism() -> AcceptanceResult:
    """Particle count invariant over >= 1e6 events; reruns byte-identical."""
    spec = KernelSpec(d=1, beta=1.0)
    n = 64
    kernel = build_discrete_kernel(spec, n)
    params = SimParams(alpha=1.0, beta=1.0, horizon=np.inf)
    rng = make_rng(derive_seed(MASTER_SEED, 0, "conservation"))
    state = init_product_negbin(_bump_profile(), 1.0, n, 1, rng)
    n_particles = state.N
    stream = UniformStream(rng)
    target = 0.0
    conserved = True
    while state.proposals < 1_000_000:
        target += 0.5
        advance_to(state, kernel, params, stream, target)
        if int(state.occ.sum()) != n_particles:
            conserved = False
            break
    state.check_consistent()

    cfg = ExperimentConfig(
        kind=ExperimentKind.HYDRO, kernel=spec, alpha=1.0, horizon=0.05,
        snapshot_times=(0.05,), profile=_bump_profile(),
        test_functions=(_cos_mode(),), replicas=4, n_ladder=(16, 32),
        master_seed=MASTER_SEED)
    dirs = [tempfile.mkdtemp(prefix="siplab-det-") for _ in range(2)]
    try:
        m1 = run(cfg, out_dir=dirs[0])
        m2 = run(cfg, out_dir=dirs[1])
        identical = (m1.files == m2.files and m1.manifest_hash == m2.manifest_hash)
    finally:
        for d in dirs:
            shutil.rmtree(d, ignore_errors=True)
    passed = conserved and identical
    detail = (f"count invariant over {state.proposals} proposals: {conserved}; "
              f"rerun byte-identical (manifest {m1.manifest_hash[:12]}): {identical}")
    return AcceptanceResult("1 conservation & determinism", passed, detail)


def criterion_2_exact_oracle(replicas: int = 100_000) -> AcceptanceResult:
    """Forward MC vs uniformization on M=6, N=3 (t=0.2); oracle cross-check."""
    M, alpha, beta, t = 6, 1.0, 1.0, 0.2
    spec = KernelSpec(d=1, beta=beta)
    kernel = build_discrete_kernel(spec, M)
    model = build_exact_model(kernel, N=3, alpha=alpha, beta=beta)
    initial = (1, 1, 1, 0, 0, 0)
    duals = [
        DualConfiguration(n=M, d=1, positions=np.array([2])),
        DualConfiguration(n=M, d=1, positions=np.array([1, 4])),
        DualConfiguration(n=M, d=1, positions=np.array([3, 3])),
    ]
    exact, cross = [], []
    for xi in duals:
        f = lambda occ, xi=xi: duality_weight_occ(xi, occ, alpha)
        e_uni = exact_expectation(model, f, initial, t)
        e_expm = expm_expectation(model, f, initial, t)
        exact.append(e_uni)
        cross.append(abs(e_uni - e_expm))
    oracle_gap = max(cross)

    params = SimParams(alpha=alpha, beta=beta, horizon=t)
    sums = np.zeros(len(duals))
    sums_sq = np.zeros(len(duals))
    occ0 = np.array(initial, dtype=np.int64)
    for r in range(replicas):
        rng = make_rng(derive_seed(MASTER_SEED, r, "oracle-dyn"))
        state = configuration_from_occ(occ0.copy(), M, 1)
        stream = UniformStream(rng, chunk=2048)
        advance_to(state, kernel, params, stream, t)
        for i, xi in enumerate(duals):
            v = duality_weight_occ(xi, state.occ, alpha)
            sums[i] += v
            sums_sq[i] += v * v
    means = sums / replicas
    ses = np.sqrt((sums_sq / replicas - means**2) / (replicas - 1))
    zs = np.abs(means - np.array(exact)) / ses
    passed = bool(np.all(zs <= 3.0)) and oracle_gap <= 1e-8
    detail = (f"z-scores {np.round(zs, 2).tolist()} (<=3); "
              f"uniformization vs expm gap {oracle_gap:.2e} (<=1e-8)")
    return AcceptanceResult("2 exact-oracle agreement", passed, detail)


def criterion_3_self_duality(replicas: int = 10_000) -> AcceptanceResult:
    """Forward vs dual expectations, k in {1,2}, n = 64, t in {0.1, 0.5}."""
    n, alpha, beta = 64, 1.0, 1.0
    spec = KernelSpec(d=1, beta=beta)
    kernel = build_discrete_kernel(spec, n)
    profile = _bump_profile(level=1.0, amplitude=1.5, width=0.1)
    duals = [
        DualConfiguration(n=n, d=1, positions=np.array([n // 2])),
        DualConfiguration(n=n, d=1, positions=np.array([n // 4, n // 2])),
        DualConfiguration(n=n, d=1, positions=np.array([n // 2, n // 2])),
    ]
    times = [0.1, 0.5]
    report = duality_check_batch(duals, profile, kernel, alpha, beta, times,
                                 replicas, MASTER_SEED)
    zs = {}
    for (i, t), r in report.items():
        se = float(np.hypot(r["se_lhs"], r["se_rhs"]))
        zs[(i, t)] = abs(r["lhs"] - r["rhs"]) / se if se > 0 else 0.0
    passed = all(z <= 3.0 for z in zs.values())
    worst = max(zs.values())
    detail = (f"{len(zs)} identities (k<=2, t={times}), worst |z| = {worst:.2f} "
              f"(<=3) at {replicas} replicas each side")
    return AcceptanceResult("3 self-duality identity", passed, detail)


def criterion_4_hydro_convergence(replicas: int = 300) -> AcceptanceResult:
    """Binned L1 error vs spectral solution decreasing over n = 32,64,128."""
    cfg = ExperimentConfig(
        kind=ExperimentKind.HYDRO, kernel=KernelSpec(d=1, beta=1.0),
        alpha=1.0, horizon=0.2, snapshot_times=(0.2,),
        profile=_bump_profile(), test_functions=(_cos_mode(),),
        replicas=replicas, n_ladder=(32, 64, 128), master_seed=MASTER_SEED)
    out = tempfile.mkdtemp(prefix="siplab-hydro-")
    try:
        manifest = run(cfg, out_dir=out)
    finally:
        shutil.rmtree(out, ignore_errors=True)
    l1 = manifest.results["l1_by_n"][0.2]
    errs = [l1[n] for n in sorted(l1)]
    decreasing = all(a > b for a, b in zip(errs, errs[1:]))
    final_ok = errs[-1] <= 0.05
    ratios = manifest.verdict["variance_ratios"]
    ratio_ok = all(1.4 <= v <= 2.8 for v in ratios.values())
    passed = decreasing and final_ok and ratio_ok
    detail = (f"L1 errors {[f'{e:.3f}' for e in errs]} decreasing={decreasing}, "
              f"final<=5%={final_ok}; variance halving ratios "
              f"{ {k: round(v, 2) for k, v in ratios.items()} } in [1.4,2.8]={ratio_ok}")
    return AcceptanceResult("4 hydrodynamic convergence", passed, detail)


def criterion_5_solver_exactness() -> AcceptanceResult:
    """Mass, max principle, semigroup composition, dual-route operator."""
    n, alpha = 128, 1.3
    spec = KernelSpec(d=1, beta=1.0)
    kernel = build_discrete_kernel(spec, n)
    symbol = discrete_symbol(kernel, n)
    rho0 = field_from_profile(_bump_profile(), n)
    t1, t2 = 0.17, 0.29
    r1 = solve(rho0, alpha, symbol, t1)
    r12 = solve(r1, alpha, symbol, t2)
    r_direct = solve(rho0, alpha, symbol, t1 + t2)
    mass_err = abs(r_direct.mean() - rho0.mean()) / rho0.mean()
    maxp = (rho0.values.min() - r_direct.values.min(),
            r_direct.values.max() - rho0.values.max())
    semigroup_err = float(np.max(np.abs(r12.values - r_direct.values)))
    spectral = apply_L(rho0, symbol)
    quadrature = apply_L_quadrature(rho0, kernel)
    route_err = float(np.max(np.abs(spectral.values - quadrature.values)))
    passed = (mass_err <= 1e-12 and max(maxp) <= 1e-10
              and semigroup_err <= 1e-10 and route_err <= 1e-10)
    detail = (f"mass {mass_err:.1e} (<=1e-12); max-principle excess "
              f"{max(maxp):.1e} (<=1e-10); semigroup {semigroup_err:.1e} "
              f"(<=1e-10); spectral-vs-quadrature {route_err:.1e} (<=1e-10)")
    return AcceptanceResult("5 hydro solver exactness", passed, detail)


def criterion_6_stationary_variance(replicas: int = 500) -> AcceptanceResult:
    """Stationary Var[Y_t(phi)] time-invariant and matching the predictor."""
    cfg = ExperimentConfig(
        kind=ExperimentKind.STATIONARY_FLUCT, kernel=KernelSpec(d=1, beta=1.0),
        alpha=1.0, horizon=0.5, snapshot_times=(0.0, 0.25, 0.5),
        profile=InitialProfile(kind=ProfileKind.CONSTANT, level=1.0),
        test_functions=(_cos_mode(),), replicas=replicas, n_ladder=(128,),
        master_seed=MASTER_SEED)
    out = tempfile.mkdtemp(prefix="siplab-stat-")
    try:
        manifest = run(cfg, out_dir=out)
    finally:
        shutil.rmtree(out, ignore_errors=True)
    rows = manifest.results["rows"]
    # row: n, phi, t, variance, variance_se, predicted, z, m_form, ratio
    variances = [(r[2], r[3], r[4]) for r in rows]
    zs = [r[6] for r in rows]
    ratios = [r[8] for r in rows]
    invariant = True
    for i in range(len(variances)):
        for j in range(i + 1, len(variances)):
            _, vi, si = variances[i]
            _, vj, sj = variances[j]
            if abs(vi - vj) > 3.0 * float(np.hypot(si, sj)):
                invariant = False
    match = all(z <= 3.0 for z in zs)
    passed = invariant and match
    detail = (f"var(t) = {[f'{v:.3f}' for _, v, _ in variances]} invariant={invariant}; "
              f"predictor z = {[f'{z:.2f}' for z in zs]} (<=3); "
              f"ratio to m(rho)-form = {[f'{x:.3f}' for x in ratios]} (reported)")
    return AcceptanceResult("6 stationary fluctuation variance", passed, detail)


def criterion_7_quadratic_variation(replicas: int = 400) -> AcceptanceResult:
    """Mean integrated carre-du-champ vs prediction; Dynkin residual moments."""
    times = tuple(np.round(np.linspace(0.0, 0.25, 26), 10))
    cfg = ExperimentConfig(
        kind=ExperimentKind.NONEQ_FLUCT, kernel=KernelSpec(d=1, beta=1.0),
        alpha=1.0, horizon=0.25, snapshot_times=times,
        profile=_bump_profile(), test_functions=(_cos_mode(),),
        replicas=replicas, n_ladder=(128,), master_seed=MASTER_SEED)
    out = tempfile.mkdtemp(prefix="siplab-qv-")
    try:
        manifest = run(cfg, out_dir=out)
    finally:
        shutil.rmtree(out, ignore_errors=True)
    final = [r for r in manifest.results["rows"] if r[2] == times[-1]][0]
    # row: n, phi, t, qv_mean, qv_se, qv_predicted, qv_rel_error,
    #      dynkin_mean, dynkin_se, dynkin_var, dynkin_var_se, z_mean, z_var
    rel, z_mean, z_var = final[6], final[11], final[12]
    passed = rel <= 0.10 and z_mean <= 3.0 and z_var <= 3.0
    detail = (f"QV mean {final[3]:.4f} vs predicted {final[5]:.4f} "
              f"(rel {rel:.3f} <= 0.10); Dynkin mean z = {z_mean:.2f} (<=3); "
              f"Var[M_t] vs QV z = {z_var:.2f} (<=3)")
    return AcceptanceResult("7 quadratic-variation limit", passed, detail)


def criterion_8_dirichlet_mosco() -> AcceptanceResult:
    """Form convergence <= 1% at n=256, monotone residuals, Parseval identity."""
    spec = KernelSpec(d=1, beta=1.0)
    ladder = [64, 128, 256]
    phis = [_cos_mode(mode=2),
            TestFunction(kind=TestFunctionKind.GAUSSIAN_BUMP, center=0.5, width=0.12)]
    all_ok, bits = True, []
    for phi in phis:
        report = form_report(phi, spec, ladder)
        mosco = mosco_recovery_check(report)
        rel_gaps = [abs(g) / abs(report.form_reference) for g in mosco["gaps"]]
        gap_monotone = all(a > b for a, b in zip(rel_gaps, rel_gaps[1:]))
        final_ok = rel_gaps[-1] <= 0.01
        gen_monotone = (all(a > b for a, b in zip(report.l1_residuals,
                                                  report.l1_residuals[1:]))
                        and all(a > b for a, b in zip(report.sup_residuals,
                                                      report.sup_residuals[1:])))
        gamma_monotone = all(a > b for a, b in zip(report.gamma_residuals,
                                                   report.gamma_residuals[1:]))
        ok = final_ok and gap_monotone and gen_monotone and gamma_monotone
        all_ok = all_ok and ok
        bits.append(f"{phi.label}: gaps {[f'{g:.4f}' for g in rel_gaps]} "
                    f"final<=1%={final_ok} monotone={gap_monotone} "
                    f"gen_monotone={gen_monotone} gamma_monotone={gamma_monotone}")
    parseval_worst = 0.0
    for n in ladder:
        kernel = build_discrete_kernel(spec, n)
        symbol = discrete_symbol(kernel, n)
        phi = _cos_mode(mode=2)
        vals = phi.values(n)
        form = discrete_form(vals, kernel)
        ident = -2.0 * symbol.mode(2) * (float(vals @ vals) / n)
        parseval_worst = max(parseval_worst, abs(form - ident) / abs(ident))
    parseval_ok = parseval_worst <= 1e-10
    passed = all_ok and parseval_ok
    detail = "; ".join(bits) + f"; Parseval residual {parseval_worst:.1e} (<=1e-10)"
    return AcceptanceResult("8 Dirichlet/Mosco checks", passed, detail)


def criterion_9_moment_bounds(replicas: int = 4000) -> AcceptanceResult:
    """MC 1..4-point moments never exceed the a priori bounds by > 3 SE."""
    cfg = ExperimentConfig(
        kind=ExperimentKind.MOMENT_BOUNDS, kernel=KernelSpec(d=1, beta=1.0),
        alpha=1.0, horizon=0.4, snapshot_times=(0.15, 0.4),
        profile=_bump_profile(level=0.4, amplitude=1.2, width=0.08),
        replicas=replicas, n_ladder=(32,), master_seed=MASTER_SEED)
    out = tempfile.mkdtemp(prefix="siplab-mom-")
    try:
        manifest = run(cfg, out_dir=out)
    finally:
        shutil.rmtree(out, ignore_errors=True)
    rows = manifest.results["rows"]
    # row: n, t, points, order, estimate, se, bound, excess, pass
    violations = [r for r in rows if not r[8]]
    worst = max((r[7] / r[5] if r[5] > 0 else 0.0) for r in rows)
    passed = not violations
    detail = (f"{len(rows)} moment/bound comparisons over the (x,t) grid, "
              f"violations: {len(violations)}; worst excess/SE = {worst:.2f} (<=3)")
    return AcceptanceResult("9 moment bounds", passed, detail)


ALL_CRITERIA = [
    criterion_1_conservation_determinism,
    criterion_2_exact_oracle,
    criterion_3_self_duality,
    criterion_4_hydro_convergence,
    criterion_5_solver_exactness,
    criterion_6_stationary_variance,
    criterion_7_quadratic_variation,
    criterion_8_dirichlet_mosco,
    criterion_9_moment_bounds,
]


def run_all(printer=print) -> bool:
    """Run every criterion, print one line each; True iff all passed."""
    ok = True
    for criterion in ALL_CRITERIA:
        result = criterion()
        printer(result.line())
        ok = ok and result.passed
    return ok
