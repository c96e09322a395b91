"""Potential-outcome simulator and individual-level counterfactual oracle.

Each individual gets four controlled event times, drawn independently:
the target time under each arm and the competing time under each arm.
Joint processes combine a target time under one arm with a competing
time under another; the competing event wins ties.

Random numbers follow a fixed layout: individuals are grouped in blocks of
:data:`BLOCK` consecutive indices, each block draws from its own
``SeedSequence(seed, spawn_key=(block,))`` stream, and every individual
consumes the same seven uniforms in the same order.  An individual's draws
therefore depend only on ``(seed, index)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .dataio import Cohort, EventCode
from .decomp import (FOUR_WAY, REF, TRT, DecompositionCurve, components_idform,
                     curve_from_components)

NEVER = np.iinfo(np.int32).max
BLOCK = 4096
# uniforms per individual: stratum, T_Y(a*), T_Y(a), T_D(a*), T_D(a), arm, censoring
_U_STRATUM, _U_TY, _U_TD, _U_ARM, _U_CENS = 0, 1, 3, 5, 6
_N_UNIFORMS = 7


@dataclass
class ScenarioSpec:
    """A simulation scenario on the grid ``t_0..t_K``.

    ``hazard_y`` and ``hazard_d`` have shape ``(S, 2, K)``: stratum, arm
    (0 = reference, 1 = treated), interval.  A single stratum may be given
    as ``(2, K)``.  ``stratum_probs`` is the law of the stratifying binary
    covariate; ``censor_hazard`` is an optional independent per-interval
    censoring hazard.
    """

    grid: np.ndarray
    hazard_y: np.ndarray
    hazard_d: np.ndarray
    n: int = 10_000
    seed: int = 0
    p_treat: float = 0.5
    stratum_probs: np.ndarray = field(default_factory=lambda: np.array([1.0]))
    censor_hazard: np.ndarray | None = None
    name: str = "custom"

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        hy = np.asarray(self.hazard_y, dtype=float)
        hd = np.asarray(self.hazard_d, dtype=float)
        self.hazard_y = hy[None] if hy.ndim == 2 else hy
        self.hazard_d = hd[None] if hd.ndim == 2 else hd
        self.stratum_probs = np.atleast_1d(np.asarray(self.stratum_probs, dtype=float))
        if self.censor_hazard is not None:
            ch = np.asarray(self.censor_hazard, dtype=float)
            self.censor_hazard = np.full(self.K, float(ch)) if ch.ndim == 0 else ch
        self.validate()

    @property
    def K(self) -> int:
        return len(self.grid) - 1

    @property
    def n_strata(self) -> int:
        return self.hazard_y.shape[0]

    def validate(self) -> None:
        if len(self.grid) < 2 or np.any(np.diff(self.grid) <= 0):
            raise ValueError("scenario grid must be strictly increasing with at least two points")
        shape = (self.n_strata, 2, self.K)
        for name, h in (("hazard_y", self.hazard_y), ("hazard_d", self.hazard_d)):
            if h.shape != shape:
                raise ValueError(f"{name} has shape {h.shape}, expected {shape}")
            if np.any(~np.isfinite(h)) or np.any((h < 0) | (h > 1)):
                raise ValueError(f"{name} values must lie in [0, 1]")
        if len(self.stratum_probs) != self.n_strata:
            raise ValueError("one stratum probability per stratum required")
        if np.any(self.stratum_probs < 0) or not np.isclose(self.stratum_probs.sum(), 1.0):
            raise ValueError("stratum probabilities must be nonnegative and sum to one")
        if self.n_strata > 2:
            raise ValueError("at most two strata (one binary covariate) are supported")
        if not 0.0 <= self.p_treat <= 1.0:
            raise ValueError("treatment probability must lie in [0, 1]")
        if self.censor_hazard is not None:
            c = self.censor_hazard
            if c.shape != (self.K,) or np.any((c < 0) | (c > 1)):
                raise ValueError("censor_hazard must hold K values in [0, 1]")
        if int(self.n) < 1:
            raise ValueError("scenario needs n >= 1")


def _logit_linear(intercept, slope, t):
    return expit(intercept + slope * t)


# logit-linear hazard parameters (intercept, slope in t) per arm (reference, treated)
_PRESET_Y = ((-1.2, 0.12), (-2.4, 0.20))
_PRESET_D = {
    "scenario1": ((-2.2, 0.12), (-3.2, 0.12)),  # treatment delays the competing event
    "scenario2": ((-4.0, 0.35), (-2.0, 0.20)),  # treatment accelerates the competing event
    "scenario3": ((-2.2, 0.12), (-2.2, 0.12)),  # competing event unaffected by treatment
}
# logit shift of both hazards in stratum w = 1 when stratified
_STRATUM_SHIFT_Y = 0.5
_STRATUM_SHIFT_D = -0.5
PRESETS = tuple(_PRESET_D)


def preset(name: str, *, n: int = 10_000, seed: int = 0, K: int = 10, stratified: bool = False,
           censor_hazard: float | None = None, p_treat: float = 0.5) -> ScenarioSpec:
    """Qualitative replicas of the three illustrative scenarios.

    Hazards are logit-linear in time on the grid ``0, 1, ..., K``; the
    target-event hazards are shared across scenarios.  With
    ``stratified=True`` a binary covariate (probability 1/2) shifts both
    logit hazards.  Definitions are pinned by the package version.
    """
    if name not in _PRESET_D:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    t = np.arange(1, K + 1, dtype=float)
    shifts = (0.0, 1.0) if stratified else (0.0,)
    hy = np.array([[_logit_linear(b0 + _STRATUM_SHIFT_Y * w, b1, t) for b0, b1 in _PRESET_Y]
                   for w in shifts])
    hd = np.array([[_logit_linear(b0 + _STRATUM_SHIFT_D * w, b1, t) for b0, b1 in _PRESET_D[name]]
                   for w in shifts])
    probs = np.full(len(shifts), 1.0 / len(shifts))
    return ScenarioSpec(np.arange(K + 1, dtype=float), hy, hd, n=n, seed=seed, p_treat=p_treat,
                        stratum_probs=probs, censor_hazard=censor_hazard,
                        name=name + ("-stratified" if stratified else ""))


class ControlledTimes(NamedTuple):
    """Controlled event times (interval index, or :data:`NEVER`).

    Fields may be scalars or equally shaped integer arrays.
    """

    ty_trt: object
    ty_ref: object
    td_trt: object
    td_ref: object


def _time_from_uniform(u, hazards):
    """Invert the discrete law with mass ``lambda_s prod_{j<s}(1-lambda_j)`` at ``s``."""
    cdf = 1.0 - np.cumprod(1.0 - np.asarray(hazards, dtype=float))
    t = np.searchsorted(cdf, u, side="right") + 1
    return np.where(t > len(cdf), NEVER, t).astype(np.int64)


def draw_controlled_times(hazard_y, hazard_d, rng, size=None) -> ControlledTimes:
    """Draw the four controlled times independently for one stratum.

    ``hazard_y`` and ``hazard_d`` have shape ``(2, K)`` (reference, treated).
    """
    hy = np.asarray(hazard_y, dtype=float)
    hd = np.asarray(hazard_d, dtype=float)
    u = rng.random((4,) if size is None else (size, 4))
    out = [_time_from_uniform(u[..., 0], hy[TRT]), _time_from_uniform(u[..., 1], hy[REF]),
           _time_from_uniform(u[..., 2], hd[TRT]), _time_from_uniform(u[..., 3], hd[REF])]
    if size is None:
        out = [int(v) for v in out]
    return ControlledTimes(*out)


def joint_outcome(t_y, t_d, k):
    """``(Y_k, D_k)`` of the joint process built from a target and a competing time."""
    t_y = np.asarray(t_y)
    t_d = np.asarray(t_d)
    d_first = t_d <= t_y
    d = (d_first & (t_d <= k)).astype(np.int64)
    y = (~d_first & (t_y <= k)).astype(np.int64)
    if d.ndim == 0:
        return int(y), int(d)
    return y, d


def individual_decomposition(times: ControlledTimes, k):
    """Individual TE and four components at time index ``k``.

    Evaluates the contrast form (differences of joint-process target
    indicators) and the product form (controlled target indicators times
    joint-process competing indicators); raises if they disagree.  Returns
    an array with the components on the first axis in :data:`FOUR_WAY`
    order.
    """
    ty_a, ty_r, td_a, td_r = (np.asarray(v) for v in times)
    k = np.asarray(k)
    yc_a = (ty_a <= k).astype(np.int64)
    yc_r = (ty_r <= k).astype(np.int64)
    y_aa, d_aa = joint_outcome(ty_a, td_a, k)
    y_ar, d_ar = joint_outcome(ty_a, td_r, k)
    y_ra, d_ra = joint_outcome(ty_r, td_a, k)
    y_rr, d_rr = joint_outcome(ty_r, td_r, k)

    te = np.asarray(y_aa - y_rr)
    contrast = np.stack([
        te,
        yc_a - yc_r,
        (y_ar - y_rr) - (yc_a - yc_r),
        (y_aa - y_ra) - (y_ar - y_rr),
        np.asarray(y_ra - y_rr),
    ])
    product = np.stack([
        te,
        yc_a - yc_r,
        -(yc_a * d_ar - yc_r * d_rr),
        -(yc_a * d_aa - yc_r * d_ra) + (yc_a * d_ar - yc_r * d_rr),
        -yc_r * (d_ra - d_rr),
    ])
    if not np.array_equal(contrast, product):
        bad = np.argwhere(contrast != product)[0]
        raise AssertionError(f"contrast and product forms disagree (component {FOUR_WAY[bad[0]]})")
    if not np.array_equal(contrast[1:].sum(axis=0), te):
        raise AssertionError("components do not sum to the total effect")
    return contrast


def observe(times: ControlledTimes, arm, censor=NEVER):
    """Observed ``(time_index, event)`` under the arm actually received.

    The factual record follows the arm's own joint process.  Censoring at
    an index no later than the event wins (censoring is checked first
    within an interval); a competing event wins a tie with the target event.
    Returns scalars for scalar input, arrays otherwise.
    """
    arm = np.asarray(arm)
    ty = np.where(arm == TRT, times.ty_trt, times.ty_ref)
    td = np.where(arm == TRT, times.td_trt, times.td_ref)
    censor = np.asarray(censor)
    event_time = np.minimum(ty, td)
    event = np.where(td <= ty, int(EventCode.COMPETING), int(EventCode.TARGET))
    censored = censor <= event_time
    time_index = np.where(censored, censor, event_time)
    event = np.where(censored, int(EventCode.CENSORED), event)
    if time_index.ndim == 0:
        return int(time_index), EventCode(int(event))
    return time_index.astype(np.int64), event.astype(np.int64)


@dataclass
class Draws:
    """Everything drawn for a simulated population."""

    stratum: np.ndarray
    times: ControlledTimes
    arm: np.ndarray
    censor: np.ndarray


def _block_uniforms(seed: int, block: int, size: int) -> np.ndarray:
    ss = np.random.SeedSequence(int(seed), spawn_key=(block,))
    return np.random.Generator(np.random.PCG64(ss)).random((size, _N_UNIFORMS))


def _draws_from_uniforms(spec: ScenarioSpec, u: np.ndarray) -> Draws:
    cum = np.cumsum(spec.stratum_probs)
    stratum = np.minimum(np.searchsorted(cum, u[:, _U_STRATUM], side="right"), spec.n_strata - 1)
    fields = {name: np.empty(len(u), dtype=np.int64) for name in ControlledTimes._fields}
    for s in range(spec.n_strata):
        m = stratum == s
        hy, hd = spec.hazard_y[s], spec.hazard_d[s]
        fields["ty_ref"][m] = _time_from_uniform(u[m, _U_TY], hy[REF])
        fields["ty_trt"][m] = _time_from_uniform(u[m, _U_TY + 1], hy[TRT])
        fields["td_ref"][m] = _time_from_uniform(u[m, _U_TD], hd[REF])
        fields["td_trt"][m] = _time_from_uniform(u[m, _U_TD + 1], hd[TRT])
    arm = (u[:, _U_ARM] < spec.p_treat).astype(np.int64)
    if spec.censor_hazard is None:
        censor = np.full(len(u), NEVER, dtype=np.int64)
    else:
        censor = _time_from_uniform(u[:, _U_CENS], spec.censor_hazard)
    return Draws(stratum, ControlledTimes(**fields), arm, censor)


def iter_draws(spec: ScenarioSpec, n: int | None = None):
    """Yield :class:`Draws` block by block for individuals ``0..n-1``."""
    n = spec.n if n is None else int(n)
    for block, start in enumerate(range(0, n, BLOCK)):
        size = min(BLOCK, n - start)
        yield _draws_from_uniforms(spec, _block_uniforms(spec.seed, block, size))


def simulate_draws(spec: ScenarioSpec, n: int | None = None) -> Draws:
    parts = list(iter_draws(spec, n))
    return Draws(np.concatenate([p.stratum for p in parts]),
                 ControlledTimes(*(np.concatenate([getattr(p.times, f) for p in parts])
                                   for f in ControlledTimes._fields)),
                 np.concatenate([p.arm for p in parts]),
                 np.concatenate([p.censor for p in parts]))


def observed_cohort(spec: ScenarioSpec, draws: Draws | None = None) -> Cohort:
    """Observed-data cohort implied by the draws under consistency.

    Individuals still event-free and uncensored at ``t_K`` are recorded as
    censored at an extra grid point ``t_{K+1}``, which keeps them in both
    risk sets through ``K``.  With two strata the stratum enters as the
    covariate ``w``.
    """
    d = simulate_draws(spec) if draws is None else draws
    time_index, event = observe(d.times, d.arm, d.censor)
    never = time_index == NEVER
    grid = spec.grid
    if np.any(never):
        # an extra grid point after t_K holds administrative censoring, so
        # these subjects stay in both risk sets through K
        step = grid[-1] - grid[-2]
        grid = np.append(grid, grid[-1] + step)
        time_index = np.where(never, spec.K + 1, time_index)
    n = len(time_index)
    cov = d.stratum.astype(float)[:, None] if spec.n_strata > 1 else np.zeros((n, 0))
    names = ("w",) if spec.n_strata > 1 else ()
    return Cohort(grid, np.arange(1, n + 1), time_index, event, d.arm, cov, names)


def monte_carlo_truth(spec: ScenarioSpec, n: int | None = None) -> DecompositionCurve:
    """Average individual decomposition over simulated individuals."""
    n = spec.n if n is None else int(n)
    K = spec.K
    ks = np.arange(1, K + 1)
    total = np.zeros((len(FOUR_WAY), K), dtype=np.int64)
    for d in iter_draws(spec, n):
        t = ControlledTimes(*(np.asarray(v)[:, None] for v in d.times))
        total += individual_decomposition(t, ks).sum(axis=1)
    # integer sums make the mean exact and order independent
    return curve_from_components(total / n, spec.grid)


def closed_form_truth(spec: ScenarioSpec) -> DecompositionCurve:
    """Plug-in decomposition on the true hazards, averaged over strata."""
    per_stratum = components_idform(spec.hazard_y, spec.hazard_d)
    four = np.tensordot(spec.stratum_probs, per_stratum, axes=(0, 0))
    return curve_from_components(four, spec.grid)


def with_seed(spec: ScenarioSpec, seed: int, n: int | None = None) -> ScenarioSpec:
    return replace(spec, seed=seed, n=spec.n if n is None else n)
