"""Net risks, interception probabilities and the four-way decomposition.

Hazard arrays carry the treatment arm on the second-to-last axis (index 0
is the reference arm ``a*``, index 1 the treated arm ``a``) and intervals
``s = 1..K`` on the last axis.  Component arrays carry the components on
the second-to-last axis in the order of :data:`FOUR_WAY` and ``k = 1..K``
on the last axis.

Two independent routes give the same components: :func:`components_riskform`
works from net risks and interception probabilities, :func:`components_idform`
from products of hazards.  Agreement between them is checked whenever
Python runs without ``-O``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

FOUR_WAY = ("TE", "CDE", "INT_ref", "INT_med", "PIE")
COMBINED = ("NDE", "NIE", "TDE")
COMPONENTS = FOUR_WAY + COMBINED
SCALES = ("risk", "rmst")

REF, TRT = 0, 1
FORM_TOL = 1e-12


class IdentityError(AssertionError):
    """Two algebraically equal expressions disagree numerically."""


def net_risk_curve(hazards) -> np.ndarray:
    """Net risks ``F_0..F_K`` for hazards ``lambda_1..lambda_K`` on the last axis.

    ``F_k = sum_{s<=k} lambda_s prod_{j<s} (1 - lambda_j)``; the product form
    ``1 - prod_{s<=k} (1 - lambda_s)`` is evaluated alongside and must agree.
    """
    h = np.asarray(hazards, dtype=float)
    surv = np.cumprod(1.0 - h, axis=-1)
    surv_prev = np.concatenate([np.ones(h.shape[:-1] + (1,)), surv[..., :-1]], axis=-1)
    summed = np.cumsum(h * surv_prev, axis=-1)
    if __debug__:
        gap = np.max(np.abs(summed - (1.0 - surv)), initial=0.0)
        if gap > FORM_TOL:
            raise IdentityError(f"net risk sum and product forms differ by {gap:.3g}")
    return np.concatenate([np.zeros(h.shape[:-1] + (1,)), summed], axis=-1)


def net_risk(hazards, k: int) -> float:
    h = np.asarray(hazards, dtype=float)
    if not 0 <= k <= h.shape[-1]:
        raise ValueError(f"k={k} outside 0..{h.shape[-1]}")
    return net_risk_curve(h)[..., k]


def interception_curve(FY, FD) -> np.ndarray:
    """``E_k`` for ``k = 1..K`` from net-risk curves ``F_0..F_K``.

    ``E_k = sum_{s<=k} f_s / F_{Y;k} * F_{D;s}`` with ``f_s`` the net point
    probability of the target event; ``E_k = 0`` where ``F_{Y;k} = 0``.
    """
    FY = np.asarray(FY, dtype=float)
    FD = np.asarray(FD, dtype=float)
    f = np.diff(FY, axis=-1)
    num = np.cumsum(f * FD[..., 1:], axis=-1)
    denom = FY[..., 1:]
    out = np.zeros(np.broadcast(num, denom).shape)
    np.divide(num, denom, out=out, where=denom > 0)
    return out


def interception_prob(FY, FD, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    return interception_curve(FY, FD)[..., k - 1]


def components_riskform(hy, hd) -> np.ndarray:
    """TE and the four components from net risks and interception probabilities."""
    FY = net_risk_curve(hy)
    FD = net_risk_curve(hd)
    fy_a, fy_r = FY[..., TRT, 1:], FY[..., REF, 1:]

    def E(ay, ad):
        return interception_curve(FY[..., ay, :], FD[..., ad, :])

    E_aa, E_ar, E_ra, E_rr = E(TRT, TRT), E(TRT, REF), E(REF, TRT), E(REF, REF)
    cde = fy_a - fy_r
    te = cde - (fy_a * E_aa - fy_r * E_rr)
    int_ref = -(fy_a * E_ar - fy_r * E_rr)
    int_med = -(fy_a * (E_aa - E_ar) - fy_r * (E_ra - E_rr))
    pie = -fy_r * (E_ra - E_rr)
    return np.stack([te, cde, int_ref, int_med, pie], axis=-2)


def _hazard_terms(hy, hd):
    hy = np.asarray(hy, dtype=float)
    hd = np.asarray(hd, dtype=float)
    hy_prev = np.concatenate([np.zeros(hy.shape[:-1] + (1,)), hy[..., :-1]], axis=-1)
    # lambda_{Y;s} prod_{j<=s} (1 - lambda_{Y;j-1}), and prod_{j<=s} (1 - lambda_{D;j})
    py = hy * np.cumprod(1.0 - hy_prev, axis=-1)
    sd = np.cumprod(1.0 - hd, axis=-1)
    return py, sd


def components_idform(hy, hd) -> np.ndarray:
    """TE and the four components as product sums over hazards."""
    py, sd = _hazard_terms(hy, hd)
    py_a, py_r = py[..., TRT, :], py[..., REF, :]
    sd_a, sd_r = sd[..., TRT, :], sd[..., REF, :]
    te = np.cumsum(py_a * sd_a - py_r * sd_r, axis=-1)
    cde = np.cumsum(py_a - py_r, axis=-1)
    int_ref = -np.cumsum(py_a * (1.0 - sd_r) - py_r * (1.0 - sd_r), axis=-1)
    int_med = np.cumsum(py_a * (sd_a - sd_r) - py_r * (sd_a - sd_r), axis=-1)
    pie = np.cumsum(py_r * (sd_a - sd_r), axis=-1)
    return np.stack([te, cde, int_ref, int_med, pie], axis=-2)


def combined_closed_form(hy, hd) -> np.ndarray:
    """NDE, NIE and TDE as direct product sums over hazards."""
    py, sd = _hazard_terms(hy, hd)
    py_a, py_r = py[..., TRT, :], py[..., REF, :]
    sd_a, sd_r = sd[..., TRT, :], sd[..., REF, :]
    nde = np.cumsum(py_a * sd_r - py_r * sd_r, axis=-1)
    nie = np.cumsum(py_a * sd_a - py_a * sd_r, axis=-1)
    tde = np.cumsum(py_a * sd_a - py_r * sd_a, axis=-1)
    return np.stack([nde, nie, tde], axis=-2)


def add_combined(four) -> np.ndarray:
    """Append NDE = CDE+INT_ref, NIE = INT_med+PIE, TDE = CDE+INT_ref+INT_med."""
    four = np.asarray(four, dtype=float)
    _, cde, ref, med, pie = (four[..., i, :] for i in range(5))
    nde = cde + ref
    combos = np.stack([nde, med + pie, nde + med], axis=-2)
    return np.concatenate([four, combos], axis=-2)


def standardize(values, weights=None) -> np.ndarray:
    """Mean over the leading (subject) axis with compensated summation.

    ``weights`` are subject multiplicities; the default is the empirical
    covariate distribution (every subject weight one).
    """
    v = np.asarray(values, dtype=float)
    if v.shape[0] == 0:
        raise ValueError("cannot standardize over zero subjects")
    if weights is None:
        w = np.ones(v.shape[0])
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (v.shape[0],) or np.any(w < 0) or not w.sum() > 0:
            raise ValueError("weights must be nonnegative with positive total, one per subject")
    flat = v.reshape(v.shape[0], -1)
    prod = flat * w[:, None]
    total = math.fsum(w)
    out = np.array([math.fsum(prod[:, j]) for j in range(flat.shape[1])]) / total
    return out.reshape(v.shape[1:])


def rmst_scale(curve, grid) -> np.ndarray:
    """Risk-scale effect at ``k = 1..K`` to the event-free-time scale.

    ``R_k = -sum_{s<=k} (t_s - t_{s-1}) * c_s``; the truncation time is ``t_k``.
    """
    c = np.asarray(curve, dtype=float)
    delta = np.diff(np.asarray(grid, dtype=float))
    if delta.shape[0] != c.shape[-1]:
        raise ValueError(f"grid has {delta.shape[0]} intervals, curve has {c.shape[-1]}")
    return -np.cumsum(c * delta, axis=-1)


@dataclass
class DecompositionCurve:
    """Population curves of all eight effects on both scales.

    ``risk`` and ``rmst`` have shape ``(8, K)`` with rows ordered as
    :data:`COMPONENTS`; column ``k - 1`` is time index ``k``.  ``lower`` and
    ``upper`` map a scale to band arrays of the same shape, when present.
    """

    grid: np.ndarray
    risk: np.ndarray
    rmst: np.ndarray
    lower: dict = field(default_factory=dict)
    upper: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.risk.shape[-1]

    def get(self, component: str, scale: str = "risk") -> np.ndarray:
        return getattr(self, scale)[COMPONENTS.index(component)]

    def to_long(self) -> pd.DataFrame:
        rows = []
        for k in range(1, self.K + 1):
            for scale in SCALES:
                est = getattr(self, scale)
                lo, up = self.lower.get(scale), self.upper.get(scale)
                for i, name in enumerate(COMPONENTS):
                    rows.append({
                        "k": k, "t_k": float(self.grid[k]), "component": name, "scale": scale,
                        "estimate": float(est[i, k - 1]),
                        "lower": float(lo[i, k - 1]) if lo is not None else None,
                        "upper": float(up[i, k - 1]) if up is not None else None,
                    })
        return pd.DataFrame(rows, columns=["k", "t_k", "component", "scale", "estimate", "lower", "upper"])

    def to_wide(self) -> pd.DataFrame:
        frames = []
        for scale in SCALES:
            df = pd.DataFrame(getattr(self, scale).T, columns=list(COMPONENTS))
            df.insert(0, "scale", scale)
            df.insert(0, "t_k", self.grid[1:])
            df.insert(0, "k", np.arange(1, self.K + 1))
            frames.append(df)
        return pd.concat(frames, ignore_index=True)


def curve_from_components(four, grid) -> DecompositionCurve:
    """Build a curve from population-level four-way components ``(5, K)``."""
    eight = add_combined(four)
    return DecompositionCurve(np.asarray(grid, dtype=float), eight, rmst_scale(eight, grid))


def check_forms(hy, hd, tol: float = FORM_TOL) -> float:
    """Max absolute gap between the two component routes; raises above ``tol``."""
    gap = float(np.max(np.abs(components_riskform(hy, hd) - components_idform(hy, hd)), initial=0.0))
    if gap > tol:
        raise IdentityError(f"risk-form and hazard-form components differ by {gap:.3g}")
    return gap


def check_combined(hy, hd, tol: float = FORM_TOL) -> float:
    """Max gap between summed components and the closed-form NDE/NIE/TDE."""
    summed = add_combined(components_idform(hy, hd))[..., 5:, :]
    gap = float(np.max(np.abs(summed - combined_closed_form(hy, hd)), initial=0.0))
    if gap > tol:
        raise IdentityError(f"combined effects differ from their closed forms by {gap:.3g}")
    return gap


def decompose(hy, hd, grid, weights=None) -> DecompositionCurve:
    """Standardized decomposition from per-subject hazard surfaces.

    Parameters
    ----------
    hy, hd : array, shape (n, 2, K)
        Target and competing-event hazards per subject and arm.
    grid : array, shape (K + 1,)
    weights : array, shape (n,), optional
        Subject multiplicities (defaults to one each).
    """
    per_subject = components_idform(hy, hd)
    if __debug__:
        check_forms(hy, hd)
        check_combined(hy, hd)
    return curve_from_components(standardize(per_subject, weights), grid)
