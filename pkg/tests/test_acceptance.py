"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

The prostate-trial criteria need the public trial file with cause of death
(columns rx, dtime, status, pf, age, hg, hx).  Point ``PROSTATE_CSV`` at it
or place it at ``tests/data/prostate.csv``; without it those tests fail.
"""
import os
import time
from pathlib import Path

import numpy as np
import pytest

from fourway.boot import BootstrapPlan, bootstrap_curves
from fourway.decomp import COMPONENTS, add_combined, combined_closed_form, components_idform, rmst_scale
from fourway.hazards import ModelSpec
from fourway.pipeline import estimate
from fourway.sim import ScenarioSpec, closed_form_truth, monte_carlo_truth, observed_cohort, preset, with_seed
from fourway.verify import enumerate_individuals, random_hazards, random_identity_checks

PROSTATE = Path(os.environ.get("PROSTATE_CSV", Path(__file__).parent / "data" / "prostate.csv"))


@pytest.fixture
def report(capsys):
    def _report(number, name, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}  {name}: {detail}")
        assert ok, detail
    return _report


def test_c1_exhaustive_enumeration(report):
    t0 = time.perf_counter()
    res = enumerate_individuals(3)
    dt = time.perf_counter() - t0
    report(1, "exhaustive individual-level enumeration", res.ok and res.total == 256 and dt < 1.0,
           f"{res.passed}/{res.total} cases pass in {dt:.2f}s (limit 1s)")


def test_c2_dual_form_identity(report):
    checks = {c.name: c for c in random_identity_checks(trials=1000, seed=2024, max_K=8)}
    forms, combos = checks["risk-form vs hazard-form"], checks["NDE/NIE/TDE closed forms"]
    ok = forms.ok and combos.ok and forms.max_gap < 1e-12 and combos.max_gap < 1e-12
    report(2, "dual-form estimand identity", ok,
           f"1000 tabulations, max |riskform-idform| = {forms.max_gap:.2e}, "
           f"max closed-form combos gap = {combos.max_gap:.2e} (limit 1e-12)")


@pytest.mark.slow
def test_c3_oracle_convergence(report):
    lines, ok = [], True
    for name in ("scenario1", "scenario2", "scenario3"):
        spec = preset(name, n=10**6, seed=31)
        t0 = time.perf_counter()
        mc = monte_carlo_truth(spec)
        dt = time.perf_counter() - t0
        err = np.max(np.abs(mc.risk - closed_form_truth(spec).risk))
        ok &= err < 0.005 and dt < 60
        lines.append(f"{name} max err {err:.4f} in {dt:.1f}s")
    report(3, "Monte-Carlo truth vs closed form (n=1e6)", ok, "; ".join(lines) + " (limits 0.005, 60s)")


def test_c4_scenario3_collapse(report):
    n = 10**6
    details, ok = [], True
    for stratified in (False, True):
        spec = preset("scenario3", n=n, seed=17, stratified=stratified)
        cf = closed_form_truth(spec)
        exact = all(np.all(cf.get(c) == 0.0) for c in ("INT_med", "PIE"))
        mc = monte_carlo_truth(spec)
        mc_max = max(np.max(np.abs(mc.get(c))) for c in ("INT_med", "PIE"))
        ok &= exact and mc_max < 3 / np.sqrt(n)
        details.append(f"{'stratified' if stratified else 'single stratum'}: closed form exactly 0 = {exact}, "
                       f"MC max |mean| = {mc_max:.2e}")
    report(4, "scenario-3 collapse", ok, "; ".join(details) + f" (limit 3/sqrt(n) = {3 / np.sqrt(n):.1e})")


def recovery_spec(seed=0):
    return preset("scenario1", n=10_000, seed=seed, stratified=True, censor_hazard=0.033)


def test_c5_estimator_recovery(report):
    spec = recovery_spec(0)
    t0 = time.perf_counter()
    cohort = observed_cohort(spec)
    censored = np.mean((cohort.event == 0) & (cohort.time_index <= spec.K))
    est = estimate(cohort, ModelSpec(time_df=3, covariates=("w",)))
    dt = time.perf_counter() - t0
    truth = closed_form_truth(spec)
    K = est.K
    err = np.abs(est.curve.risk - truth.risk[:, :K])
    worst = np.unravel_index(np.argmax(err), err.shape)
    report(5, "estimator recovery", bool(err.max() < 0.02 and dt < 120 and K == spec.K),
           f"n=10000, {censored:.1%} randomly censored, max |estimate - truth| = {err.max():.4f} "
           f"({COMPONENTS[worst[0]]} at k={worst[1] + 1}) over k=1..{K}, {dt:.2f}s (limits 0.02, 120s)")


def test_c5_supporting_bias_across_seeds():
    # the single-seed check above is a draw from a sampling distribution;
    # across seeds the estimator should be centred on the truth
    truth = closed_form_truth(recovery_spec()).risk
    ests = np.stack([estimate(observed_cohort(recovery_spec(s)), ModelSpec(time_df=3, covariates=("w",))).curve.risk
                     for s in range(1, 13)])
    bias = ests.mean(0) - truth
    se = ests.std(0, ddof=1) / np.sqrt(len(ests))
    assert np.all(np.abs(bias) < 4 * se + 2e-3)


def null_spec(n, seed):
    base = preset("scenario1")
    hy = np.stack([base.hazard_y[:, 0], base.hazard_y[:, 0]], axis=1)
    hd = np.stack([base.hazard_d[:, 0], base.hazard_d[:, 0]], axis=1)
    return ScenarioSpec(base.grid, hy, hd, n=n, seed=seed, name="null")


@pytest.mark.slow
def test_c6_null_coverage(report):
    reps, k_mid = 50, 5
    spec_model = ModelSpec(time_df=3)
    covered = 0
    t0 = time.perf_counter()
    for r in range(reps):
        cohort = observed_cohort(null_spec(2000, 1000 + r))
        K = estimate(cohort, spec_model).K
        res = bootstrap_curves(cohort, spec_model, BootstrapPlan(200, seed=r, level=0.95), K=K)
        lo, hi = res.lower["risk"][0, k_mid - 1], res.upper["risk"][0, k_mid - 1]
        covered += lo <= 0.0 <= hi
    rate = covered / reps
    report(6, "null coverage of the TE band", rate >= 0.90,
           f"{covered}/{reps} = {rate:.0%} of 95% percentile bands cover 0 at k={k_mid} "
           f"(n=2000, B=200, {time.perf_counter() - t0:.0f}s; limit 90%)")


def test_c7a_rmst_identity_random_and_simulated(report):
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(1000):
        hy, hd, grid = random_hazards(rng, 8)
        rm = rmst_scale(add_combined(components_idform(hy, hd)), grid)
        worst = max(worst, np.max(np.abs(rm[0] - rm[1:5].sum(0))))
    cohort = observed_cohort(preset("scenario2", n=5000, seed=3))
    rm = estimate(cohort, ModelSpec()).curve.rmst
    sim_gap = np.max(np.abs(rm[0] - rm[1:5].sum(0)))
    report("7a", "RMST additivity (random inputs and a simulated run)", worst < 1e-10 and sim_gap < 1e-10,
           f"max gap {worst:.2e} over 1000 random inputs, {sim_gap:.2e} on the simulated run (limit 1e-10)")


MISSING = (f"prostate trial file with cause of death not found at {PROSTATE} (set PROSTATE_CSV); "
           "criterion cannot be evaluated")


def prostate_estimate():
    from fourway.prostate import COVARIATES, load

    cohort, dropped = load(PROSTATE)
    return estimate(cohort, ModelSpec(time_df=3, covariates=COVARIATES)), cohort, dropped


def test_c7b_rmst_identity_prostate(report):
    if not PROSTATE.exists():
        report("7b", "RMST additivity on the prostate run", False, MISSING)
    est, _, _ = prostate_estimate()
    rm = est.curve.rmst
    gap = np.max(np.abs(rm[0] - rm[1:5].sum(0)))
    report("7b", "RMST additivity on the prostate run", gap < 1e-10, f"max gap {gap:.2e} (limit 1e-10)")


def test_c8_prostate_qualitative(report):
    if not PROSTATE.exists():
        report(8, "prostate trial qualitative replication", False, MISSING)
    est, cohort, dropped = prostate_estimate()
    c = est.curve
    t = c.grid[1:c.K + 1]
    cde = c.get("CDE")
    window = (t >= 12) & (t <= 60)
    peak_i = int(np.argmin(cde))
    peak = -cde[peak_i]
    pie = c.get("PIE")
    ok = (np.all(cde[window] < 0) and 0.04 <= peak <= 0.12 and 24 <= t[peak_i] <= 48
          and np.all(pie[t >= 12] <= 0))
    report(8, "prostate trial qualitative replication", ok,
           f"n={cohort.n} ({dropped} dropped), CDE<0 on 12-60m: {bool(np.all(cde[window] < 0))}, "
           f"peak |CDE| = {peak:.3f} at {t[peak_i]:.0f}m, max PIE after 12m = {pie[t >= 12].max():.4f}")
