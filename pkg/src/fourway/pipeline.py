"""End-to-end estimation: expand, fit, evaluate surfaces, decompose."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import Cohort, EventCode, expand_person_periods
from .decomp import DecompositionCurve, decompose
from .hazards import HazardFits, HazardSurface, ModelSpec, fit_cause_specific, hazard_surface


@dataclass
class Estimate:
    curve: DecompositionCurve
    fits: HazardFits
    surface: HazardSurface
    K: int


def last_at_risk_interval(tables) -> int:
    return int(max(t.interval.max() for t in tables.values() if len(t)))


def estimate(cohort: Cohort, spec: ModelSpec, weights=None, tables=None, K: int | None = None) -> Estimate:
    """Point estimates of all effects, standardized over the cohort's covariates.

    By default curves stop at the last interval with anyone at risk; later
    grid intervals carry no information.  ``weights`` are subject
    multiplicities.
    """
    if tables is None:
        tables = {c: expand_person_periods(cohort, c) for c in (EventCode.TARGET, EventCode.COMPETING)}
    w = np.ones(cohort.n) if weights is None else np.asarray(weights, dtype=float)
    if K is None:
        K = int(max(t.interval[w[t.subject] > 0].max() for t in tables.values() if len(t)))
    fits = fit_cause_specific(cohort, spec, weights=weights, tables=tables)
    surface = hazard_surface(fits, cohort, K)
    # subjects sharing covariates share component curves: standardize per pattern
    names = sorted(set(fits.target.spec.covariates) | set(fits.competing.spec.covariates))
    cov = cohort.select_covariates(names)
    _, first, inverse = np.unique(cov, axis=0, return_index=True, return_inverse=True)
    counts = np.bincount(inverse.reshape(-1), weights=w, minlength=len(first))
    keep = counts > 0
    curve = decompose(surface.target[first[keep]], surface.competing[first[keep]],
                      cohort.grid[:K + 1], counts[keep])
    return Estimate(curve, fits, surface, K)
