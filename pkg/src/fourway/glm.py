"""Logistic regression by iteratively reweighted least squares."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, xlogy

SCORE_TOL = 1e-8
DEVIANCE_RTOL = 1e-10
MAX_ITER = 100
PROB_CLAMP = 1e-12


class FitError(RuntimeError):
    """A logistic fit could not be produced."""


class RankDeficientError(FitError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"rank-deficient design; offending column(s): {', '.join(map(str, self.columns))}")


class SeparationError(FitError):
    def __init__(self, detail=""):
        msg = "separation detected: fitted probabilities reach 0 or 1 with unbounded coefficients"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg + "; refit with a ridge penalty (--ridge)")


@dataclass
class DesignMatrix:
    values: np.ndarray
    labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("design matrix must be two-dimensional")
        if not self.labels:
            self.labels = [f"x{j}" for j in range(self.values.shape[1])]
        if len(self.labels) != self.values.shape[1]:
            raise ValueError("label count does not match design columns")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("design matrix has non-finite entries")
        if not np.any(np.all(self.values == 1.0, axis=0)):
            raise ValueError("design matrix needs an intercept column")

    @property
    def intercept_index(self) -> int:
        return int(np.flatnonzero(np.all(self.values == 1.0, axis=0))[0])


@dataclass
class LogisticFit:
    coefficients: np.ndarray
    converged: bool
    iterations: int
    deviance: float
    max_score: float
    labels: list[str] = field(default_factory=list)
    ridge: float = 0.0

    def report(self) -> dict:
        return {
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "deviance": float(self.deviance),
            "max_abs_score": float(self.max_score),
            "ridge": float(self.ridge),
            "coefficients": {lab: float(b) for lab, b in zip(self.labels, self.coefficients)},
        }


def _penalty_mask(p, intercept):
    mask = np.ones(p)
    mask[intercept] = 0.0
    return mask


def penalized_loglik(beta, X, y, ridge=0.0, weights=None, intercept=0):
    """Binomial log-likelihood minus ``ridge/2 * ||beta||^2`` (intercept excluded)."""
    eta = X @ beta
    w = np.ones(len(y)) if weights is None else weights
    ll = np.sum(w * (y * eta - np.logaddexp(0.0, eta)))
    mask = _penalty_mask(len(beta), intercept)
    return ll - 0.5 * ridge * np.sum(mask * beta ** 2)


def score(beta, X, y, ridge=0.0, weights=None, intercept=0):
    """Gradient of :func:`penalized_loglik`."""
    w = np.ones(len(y)) if weights is None else weights
    p = expit(X @ beta)
    return X.T @ (w * (y - p)) - ridge * _penalty_mask(len(beta), intercept) * beta


def _deviance(y, p, w):
    m = w > 0  # zero-weight rows must not turn 0 * inf into nan
    y, p, w = y[m], p[m], w[m]
    return 2.0 * np.sum(w * (xlogy(y, y) - xlogy(y, p) + xlogy(1 - y, 1 - y) - xlogy(1 - y, 1 - p)))


def _check_rank(X, labels):
    from scipy.linalg import qr

    _, r, piv = qr(X, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    tol = d.max() * max(X.shape) * np.finfo(float).eps if d.size else 0.0
    rank = int(np.sum(d > tol))
    if rank < X.shape[1]:
        raise RankDeficientError([labels[j] for j in sorted(piv[rank:])])


def fit_logistic(X, y, ridge: float = 0.0, *, weights=None, labels=None,
                 tol: float = SCORE_TOL, max_iter: int = MAX_ITER) -> LogisticFit:
    """Maximise the (ridge-penalised) binomial log-likelihood.

    Newton/IRLS with step-halving on the penalised deviance.  Stops when
    the max absolute score drops below ``tol`` or the relative deviance
    change drops below 1e-10, at most ``max_iter`` iterations.  The
    intercept is never penalised.

    Parameters
    ----------
    X : DesignMatrix or ndarray
    y : array of 0/1
    ridge : float
        Penalty weight on non-intercept coefficients.
    weights : array, optional
        Frequency weights (row multiplicities).

    Raises
    ------
    RankDeficientError
        The design (restricted to rows with positive weight) is rank deficient.
    SeparationError
        Without a ridge penalty, fitted probabilities run off to 0 or 1.
    """
    if not isinstance(X, DesignMatrix):
        X = DesignMatrix(X, labels or [])
    labels = X.labels
    Xv = X.values
    y = np.asarray(y, dtype=float)
    n, p = Xv.shape
    if len(y) != n:
        raise ValueError("X and y lengths differ")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("y must be binary")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    active = w > 0
    if active.sum() < p:
        raise FitError(f"fewer rows ({int(active.sum())}) than parameters ({p})")
    intercept = X.intercept_index
    mask = _penalty_mask(p, intercept)
    if ridge == 0:
        _check_rank(Xv[active], labels)

    beta = np.zeros(p)
    ybar = np.sum(w * y) / np.sum(w)
    beta[intercept] = np.log(np.clip(ybar, 1e-6, 1 - 1e-6) / (1 - np.clip(ybar, 1e-6, 1 - 1e-6)))

    def objective(b):
        pr = expit(Xv @ b)
        return _deviance(y, pr, w) + ridge * np.sum(mask * b ** 2), pr

    dev, pr = objective(beta)
    it = 0
    prev_rel = np.inf
    while it < max_iter:
        grad = Xv.T @ (w * (y - pr)) - ridge * mask * beta
        if np.max(np.abs(grad)) < tol:
            break
        it += 1
        info = (Xv * (w * pr * (1 - pr))[:, None]).T @ Xv + np.diag(ridge * mask)
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(info, grad, rcond=None)[0]
        t = 1.0
        for _ in range(40):
            new_beta = beta + t * step
            new_dev, new_pr = objective(new_beta)
            if np.isfinite(new_dev) and new_dev <= dev * (1 + 1e-12) + 1e-300:
                break
            t *= 0.5
        else:
            break
        rel = abs(dev - new_dev) / max(abs(new_dev), 1e-300)
        beta, dev, pr = new_beta, new_dev, new_pr
        # after a full Newton step the score check usually ends the loop;
        # a second stalled step means rounding keeps the score above tol
        if rel < DEVIANCE_RTOL and (t < 1.0 or prev_rel < DEVIANCE_RTOL):
            break
        prev_rel = rel
    grad = Xv.T @ (w * (y - pr)) - ridge * mask * beta
    max_score = float(np.max(np.abs(grad)))
    converged = max_score < tol

    if ridge == 0:
        _check_separation(Xv, y, beta, pr, w, active)
    return LogisticFit(beta, converged, it, float(dev), max_score, list(labels), float(ridge))


def _check_separation(Xv, y, beta, pr, w, active):
    # boundary probabilities plus a Newton step that still pushes the
    # coefficients outward indicate a likelihood maximised at infinity
    eta = Xv[active] @ beta
    if np.max(np.abs(eta)) < 20:
        return
    Xa, ya, wa, pa = Xv[active], y[active], w[active], pr[active]
    info = (Xa * (wa * pa * (1 - pa))[:, None]).T @ Xa
    grad = Xa.T @ (wa * (ya - pa))
    step = np.linalg.lstsq(info, grad, rcond=None)[0]
    if np.max(np.abs(step)) > 0.1:
        n_edge = int(np.sum((pa < 1e-8) | (pa > 1 - 1e-8)))
        raise SeparationError(f"{n_edge} row(s) with fitted probability within 1e-8 of 0 or 1")


def predict_prob(fit: LogisticFit, x) -> np.ndarray | float:
    """Inverse logit of the linear predictor, clamped to [1e-12, 1 - 1e-12].

    ``x`` is a length-p vector or an ``(m, p)`` matrix.
    """
    x = np.asarray(x, dtype=float)
    p = len(fit.coefficients)
    if x.shape[-1] != p:
        raise ValueError(f"expected {p} covariate values, got {x.shape[-1]}")
    prob = np.clip(expit(x @ fit.coefficients), PROB_CLAMP, 1 - PROB_CLAMP)
    return float(prob) if prob.ndim == 0 else prob
