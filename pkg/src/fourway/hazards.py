"""Cause-specific discrete-time hazard models and counterfactual hazard surfaces."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .dataio import Cohort, EventCode, RiskSetTable, ValidationError, expand_person_periods
from .glm import DesignMatrix, FitError, LogisticFit, fit_logistic, predict_prob
from .splines import SplineBasis, make_knots

CAUSES = {"target": EventCode.TARGET, "competing": EventCode.COMPETING}


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of the two hazard regressions.

    ``overrides`` maps ``"target"`` or ``"competing"`` to field values that
    replace the shared ones for that cause.
    """

    time_df: int = 3
    covariates: tuple[str, ...] = ()
    treatment_time_interaction: bool = True
    ridge: float = 0.0
    overrides: Mapping[str, Mapping[str, object]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if int(self.time_df) < 1:
            raise ValueError("time_df must be >= 1")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")
        unknown = set(self.overrides) - set(CAUSES)
        if unknown:
            raise ValueError(f"overrides for unknown cause(s): {sorted(unknown)}")
        for cause, fields in self.overrides.items():
            bad = set(fields) - {"time_df", "covariates", "treatment_time_interaction", "ridge"}
            if bad:
                raise ValueError(f"unknown override field(s) for {cause}: {sorted(bad)}")

    def for_cause(self, cause) -> "ModelSpec":
        name = cause if isinstance(cause, str) else EventCode(cause).name.lower()
        return replace(self, overrides={}, **dict(self.overrides.get(name, {})))

    @classmethod
    def from_dict(cls, d: Mapping[str, object]) -> "ModelSpec":
        d = dict(d)
        overrides = {c: dict(d.pop(c)) for c in list(d) if c in CAUSES}
        known = {"time_df", "covariates", "treatment_time_interaction", "ridge"}
        bad = set(d) - known
        if bad:
            raise ValueError(f"unknown model field(s): {sorted(bad)}")
        return cls(overrides=overrides, **d)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["covariates"] = list(self.covariates)
        overrides = out.pop("overrides")
        for cause, fields in overrides.items():
            out[cause] = {k: list(v) if k == "covariates" else v for k, v in fields.items()}
        return out


def design_labels(spec: ModelSpec, basis: SplineBasis) -> list[str]:
    labels = ["(intercept)", "treatment", *spec.covariates, *basis.column_names()]
    if spec.treatment_time_interaction:
        labels += [f"treatment:{c}" for c in basis.column_names()]
    return labels


def design_matrix(spec: ModelSpec, basis: SplineBasis, treatment, covariates, time) -> np.ndarray:
    """Design rows: intercept, treatment, covariates, time basis, treatment x time basis."""
    treatment = np.asarray(treatment, dtype=float)
    B = basis.transform(time)
    cols = [np.ones(len(treatment)), treatment, *np.asarray(covariates, dtype=float).T, *B.T]
    if spec.treatment_time_interaction:
        cols += list((B * treatment[:, None]).T)
    return np.column_stack(cols)


@dataclass
class CauseModel:
    cause: EventCode
    spec: ModelSpec
    basis: SplineBasis
    fit: LogisticFit

    def report(self) -> dict:
        return {"cause": self.cause.name.lower(), "knots": list(self.basis.knots),
                "model": self.spec.to_dict(), **self.fit.report()}


@dataclass
class HazardFits:
    target: CauseModel
    competing: CauseModel

    @property
    def fit_y(self) -> LogisticFit:
        return self.target.fit

    @property
    def fit_d(self) -> LogisticFit:
        return self.competing.fit

    def report(self) -> dict:
        return {"target": self.target.report(), "competing": self.competing.report()}


class HazardFitError(FitError):
    def __init__(self, cause, err):
        self.cause = cause
        self.err = err
        super().__init__(f"{EventCode(cause).name.lower()} hazard: {err}")


def shared_knots(cohort: Cohort, df: int, weights=None) -> tuple[float, ...]:
    """Knots from the pooled event times of both causes (subjects with positive weight)."""
    keep = cohort.event != EventCode.CENSORED
    if weights is not None:
        keep &= np.asarray(weights) > 0
    times = cohort.grid[cohort.time_index[keep]]
    if df == 1:
        lo, hi = (times.min(), times.max()) if times.size else (cohort.grid[1], cohort.grid[-1])
        return (float(lo), float(hi)) if hi > lo else (float(cohort.grid[0]), float(cohort.grid[-1]))
    try:
        return make_knots(times, df)
    except ValueError as err:
        raise ValidationError(f"cannot place time-spline knots: {err}") from None


def fit_cause_specific(cohort: Cohort, spec: ModelSpec, *, weights=None,
                       tables: Mapping[EventCode, RiskSetTable] | None = None) -> HazardFits:
    """Fit one logistic hazard model per cause on its own risk-set table.

    ``weights`` are subject multiplicities (bootstrap resampling); row
    weights are inherited by each subject's person-periods.
    """
    models = {}
    knot_cache = {}
    for name, cause in CAUSES.items():
        cspec = spec.for_cause(name)
        missing = [c for c in cspec.covariates if c not in cohort.covariate_names]
        if missing:
            raise ValidationError(f"model covariate(s) not in cohort: {missing}")
        table = tables[cause] if tables is not None else expand_person_periods(cohort, cause)
        w = None if weights is None else np.asarray(weights, dtype=float)[table.subject]
        n_events = table.outcome.sum() if w is None else float(np.sum(w * table.outcome))
        if n_events == 0:
            raise HazardFitError(cause, "cannot fit hazard for cause with no events")
        if cspec.time_df not in knot_cache:
            knot_cache[cspec.time_df] = shared_knots(cohort, cspec.time_df, weights)
        basis = SplineBasis(knot_cache[cspec.time_df])
        cov = table.covariates[:, [cohort.covariate_names.index(c) for c in cspec.covariates]]
        X = DesignMatrix(design_matrix(cspec, basis, table.treatment, cov, table.time),
                         design_labels(cspec, basis))
        try:
            fit = fit_logistic(X, table.outcome, cspec.ridge, weights=w)
        except FitError as err:
            raise HazardFitError(cause, err) from err
        models[name] = CauseModel(cause, cspec, basis, fit)
    return HazardFits(models["target"], models["competing"])


@dataclass
class HazardSurface:
    """Counterfactual hazards per subject, arm (0 = reference, 1 = treated) and interval."""

    target: np.ndarray
    competing: np.ndarray

    @property
    def shape(self):
        return self.target.shape


def _surface_one(model: CauseModel, covariates: np.ndarray, times: np.ndarray) -> np.ndarray:
    n, K = len(covariates), len(times)
    out = np.empty((n, 2, K))
    for arm in (0, 1):
        trt = np.full(n * K, arm, dtype=float)
        cov = np.repeat(covariates, K, axis=0)
        t = np.tile(times, n)
        X = design_matrix(model.spec, model.basis, trt, cov, t)
        out[:, arm, :] = predict_prob(model.fit, X).reshape(n, K)
    return out


def hazard_surface(fits: HazardFits, cohort: Cohort, K: int | None = None) -> HazardSurface:
    """Evaluate both hazard models for every subject under both arms at every interval.

    Each subject keeps their own covariates; only the treatment column is
    set to each arm in turn.  Subjects sharing a covariate pattern share a
    computation.
    """
    K = cohort.K if K is None else K
    times = cohort.grid[1:K + 1]
    out = {}
    for name in CAUSES:
        model = getattr(fits, name)
        cov = cohort.select_covariates(model.spec.covariates)
        patterns, inverse = np.unique(cov, axis=0, return_inverse=True)
        out[name] = _surface_one(model, patterns, times)[inverse.reshape(-1)]
    return HazardSurface(out["target"], out["competing"])
