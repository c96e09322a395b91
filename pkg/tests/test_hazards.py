from dataclasses import replace

import numpy as np
import pytest

from fourway.dataio import Cohort, EventCode, ValidationError, expand_person_periods
from fourway.decomp import decompose
from fourway.glm import predict_prob
from fourway.hazards import (HazardFitError, ModelSpec, design_matrix, fit_cause_specific,
                             hazard_surface)
from fourway.sim import ScenarioSpec, observed_cohort, preset


def constant_scenario(n=10_000, K=8, seed=3):
    hy = np.array([np.full(K, 0.05), np.full(K, 0.10)])
    hd = np.full((2, K), 0.02)
    return ScenarioSpec(np.arange(K + 1.0), hy, hd, n=n, seed=seed)


@pytest.fixture(scope="module")
def strat_cohort():
    return observed_cohort(preset("scenario1", n=3000, seed=11, stratified=True))


def test_column_count_df1_no_interaction(strat_cohort):
    spec = ModelSpec(time_df=1, covariates=("w",), treatment_time_interaction=False)
    fits = fit_cause_specific(strat_cohort, spec)
    h = 1
    assert len(fits.fit_y.coefficients) == 2 + h + 1
    assert len(fits.fit_d.coefficients) == 2 + h + 1


def test_no_competing_events_errors():
    c = Cohort(np.arange(4.0), [1, 2, 3, 4], [1, 2, 3, 2], [1, 1, 0, 1], [0, 1, 0, 1], np.zeros((4, 0)))
    with pytest.raises(HazardFitError, match="cannot fit hazard for cause with no events"):
        fit_cause_specific(c, ModelSpec(time_df=1))


def test_unknown_covariate(strat_cohort):
    with pytest.raises(ValidationError, match="not in cohort"):
        fit_cause_specific(strat_cohort, ModelSpec(covariates=("age",)))


def test_recovers_constant_hazards():
    cohort = observed_cohort(constant_scenario())
    fits = fit_cause_specific(cohort, ModelSpec(time_df=1))
    surf = hazard_surface(fits, cohort, K=8)
    assert np.max(np.abs(surf.target[0, 0] - 0.05)) < 0.01
    assert np.max(np.abs(surf.target[0, 1] - 0.10)) < 0.01
    assert np.max(np.abs(surf.competing[0] - 0.02)) < 0.01


def test_zero_treatment_effect_gives_equal_arms(strat_cohort):
    spec = ModelSpec(time_df=2, covariates=("w",), treatment_time_interaction=False)
    fits = fit_cause_specific(strat_cohort, spec)
    for m in (fits.target, fits.competing):
        m.fit.coefficients[m.fit.labels.index("treatment")] = 0.0
    surf = hazard_surface(fits, strat_cohort)
    assert np.array_equal(surf.target[:, 0], surf.target[:, 1])
    assert np.array_equal(surf.competing[:, 0], surf.competing[:, 1])


def test_zero_treatment_coefficients_null_decomposition(strat_cohort):
    spec = ModelSpec(time_df=3, covariates=("w",))
    fits = fit_cause_specific(strat_cohort, spec)
    for m in (fits.target, fits.competing):
        for j, lab in enumerate(m.fit.labels):
            if lab.startswith("treatment"):
                m.fit.coefficients[j] = 0.0
    surf = hazard_surface(fits, strat_cohort)
    curve = decompose(surf.target, surf.competing, strat_cohort.grid)
    assert np.all(curve.risk == 0.0) and np.all(curve.rmst == 0.0)


def test_single_subject_shape(strat_cohort):
    fits = fit_cause_specific(strat_cohort, ModelSpec(covariates=("w",)))
    one = strat_cohort.subset([0])
    surf = hazard_surface(fits, one, K=2)
    assert surf.target.size + surf.competing.size == 8
    assert surf.shape == (1, 2, 2)


def test_factual_consistency(strat_cohort):
    spec = ModelSpec(covariates=("w",))
    fits = fit_cause_specific(strat_cohort, spec)
    surf = hazard_surface(fits, strat_cohort)
    tab = expand_person_periods(strat_cohort, EventCode.TARGET)
    treated = np.flatnonzero(tab.treatment == 1)[:50]
    X = design_matrix(spec, fits.target.basis, tab.treatment[treated], tab.covariates[treated],
                      tab.time[treated])
    expected = predict_prob(fits.fit_y, X)
    got = surf.target[tab.subject[treated], 1, tab.interval[treated] - 1]
    assert np.array_equal(got, expected)


def test_surface_in_open_unit_interval(strat_cohort):
    surf = hazard_surface(fit_cause_specific(strat_cohort, ModelSpec(covariates=("w",))), strat_cohort)
    for h in (surf.target, surf.competing):
        assert np.all((h > 0) & (h < 1))


def test_permutation_equivariance(strat_cohort):
    spec = ModelSpec(covariates=("w",))
    fits = fit_cause_specific(strat_cohort, spec)
    perm = np.random.default_rng(0).permutation(strat_cohort.n)
    a = hazard_surface(fits, strat_cohort)
    b = hazard_surface(fits, strat_cohort.subset(perm))
    assert np.array_equal(a.target[perm], b.target)
    assert np.array_equal(a.competing[perm], b.competing)


def test_affine_time_invariance(strat_cohort):
    spec = ModelSpec(time_df=3, covariates=("w",))
    shifted = replace(strat_cohort, grid=strat_cohort.grid * 30.0 + 7.0)
    shifted.validate()
    a = hazard_surface(fit_cause_specific(strat_cohort, spec), strat_cohort)
    b = hazard_surface(fit_cause_specific(shifted, spec), shifted)
    assert np.max(np.abs(a.target - b.target)) < 1e-8
    assert np.max(np.abs(a.competing - b.competing)) < 1e-8


def test_cause_overrides(strat_cohort):
    spec = ModelSpec.from_dict({"time_df": 3, "covariates": ["w"], "competing": {"time_df": 1,
                                "treatment_time_interaction": False}})
    fits = fit_cause_specific(strat_cohort, spec)
    assert len(fits.fit_y.coefficients) == 3 + 3 + 3
    assert len(fits.fit_d.coefficients) == 4
    assert ModelSpec.from_dict(spec.to_dict()) == spec


def test_weights_match_duplicated_cohort(strat_cohort):
    sub = strat_cohort.subset(np.arange(600))
    w = np.random.default_rng(1).integers(0, 3, size=sub.n)
    spec = ModelSpec(covariates=("w",))
    a = fit_cause_specific(sub, spec, weights=w)
    b = fit_cause_specific(sub.subset(np.repeat(np.arange(sub.n), w)), spec)
    assert a.target.basis.knots == b.target.basis.knots
    assert np.max(np.abs(a.fit_y.coefficients - b.fit_y.coefficients)) < 1e-8
    assert np.max(np.abs(a.fit_d.coefficients - b.fit_d.coefficients)) < 1e-8
