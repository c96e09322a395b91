"""Nonparametric percentile bootstrap bands for the decomposition curves."""
from __future__ import annotations

import concurrent.futures as cf
from dataclasses import dataclass, field

import numpy as np

from .dataio import Cohort, EventCode, ValidationError, expand_person_periods
from .glm import FitError
from .hazards import ModelSpec
from .pipeline import estimate

MAX_FAILED_FRACTION = 0.2


class BootstrapError(RuntimeError):
    pass


@dataclass(frozen=True)
class BootstrapPlan:
    replicates: int = 200
    seed: int = 0
    level: float = 0.95
    method: str = "percentile"

    def __post_init__(self):
        if int(self.replicates) < 1:
            raise ValueError("need at least one bootstrap replicate")
        if not 0.0 < self.level < 1.0:
            raise ValueError("confidence level must lie in (0, 1)")
        if self.method != "percentile":
            raise ValueError("only the percentile method is available")


@dataclass
class BootstrapResult:
    lower: dict
    upper: dict
    replicates: np.ndarray  # (B_ok, 2 scales, 8 components, K)
    failures: list = field(default_factory=list)

    @property
    def skipped(self) -> int:
        return len(self.failures)


def replicate_weights(n: int, seed: int, index: int) -> np.ndarray:
    """Subject multiplicities of replicate ``index`` (whole subjects resampled)."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(index,))))
    return np.bincount(rng.integers(0, n, size=n), minlength=n)


def _run_replicates(cohort, spec, seed, K, indices):
    tables = {c: expand_person_periods(cohort, c) for c in (EventCode.TARGET, EventCode.COMPETING)}
    out = []
    for b in indices:
        w = replicate_weights(cohort.n, seed, b)
        try:
            curve = estimate(cohort, spec, weights=w, tables=tables, K=K).curve
        except (FitError, ValidationError) as err:
            out.append((b, None, str(err)))
            continue
        out.append((b, np.stack([curve.risk, curve.rmst]), None))
    return out


def bootstrap_curves(cohort: Cohort, spec: ModelSpec, plan: BootstrapPlan, *, K: int | None = None,
                     workers: int = 1) -> BootstrapResult:
    """Percentile bands from refitting the whole pipeline on resampled subjects.

    Knots are re-placed in every replicate.  Replicates whose hazard fits
    fail are skipped and reported; more than 20% failures is an error.
    Replicate ``b`` always uses the same random stream, so results do not
    depend on ``workers``.
    """
    if cohort.n == 0:
        raise ValidationError("empty cohort")
    if K is None:
        K = estimate(cohort, spec).K
    B = int(plan.replicates)
    if workers <= 1:
        results = _run_replicates(cohort, spec, plan.seed, K, range(B))
    else:
        chunks = [range(i, B, workers) for i in range(workers)]
        with cf.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_replicates, cohort, spec, plan.seed, K, c) for c in chunks]
            results = [r for f in futures for r in f.result()]
    results.sort(key=lambda r: r[0])
    failures = [(b, msg) for b, arr, msg in results if arr is None]
    if len(failures) > MAX_FAILED_FRACTION * B:
        raise BootstrapError(f"{len(failures)} of {B} bootstrap replicates failed; estimates too fragile "
                             f"(first failure: {failures[0][1]})")
    reps = np.stack([arr for _, arr, _ in results if arr is not None])
    alpha = (1.0 - plan.level) / 2.0
    lo = np.quantile(reps, alpha, axis=0)
    hi = np.quantile(reps, 1.0 - alpha, axis=0)
    return BootstrapResult({"risk": lo[0], "rmst": lo[1]}, {"risk": hi[0], "rmst": hi[1]}, reps, failures)
