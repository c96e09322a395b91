"""Restricted (natural) cubic spline basis, Harrell parameterisation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SplineBasis:
    """Restricted cubic spline basis on fixed knots.

    Produces ``len(knots) - 1`` columns: ``x`` itself followed by the
    restricted cubic terms, each scaled by ``(knots[-1] - knots[0])**2``.
    The basis is linear below the first and above the last knot.
    """

    knots: tuple[float, ...]

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        if k.ndim != 1 or len(k) < 2:
            raise ValueError("need at least two knots")
        if np.any(np.diff(k) <= 0):
            raise ValueError("knots must be strictly increasing")
        object.__setattr__(self, "knots", tuple(float(v) for v in k))

    @property
    def n_columns(self) -> int:
        return len(self.knots) - 1

    def column_names(self, prefix: str = "time") -> list[str]:
        return [prefix] + [f"{prefix}_rcs{j}" for j in range(1, self.n_columns)]

    def transform(self, x) -> np.ndarray:
        """Basis matrix of shape ``(len(x), n_columns)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        k = np.asarray(self.knots)
        m = len(k)
        out = np.empty((len(x), m - 1))
        out[:, 0] = x
        if m == 2:
            return out
        scale = (k[-1] - k[0]) ** 2
        tail_last = np.maximum(x - k[-1], 0.0) ** 3
        tail_prev = np.maximum(x - k[-2], 0.0) ** 3
        span = k[-1] - k[-2]
        for j in range(m - 2):
            out[:, j + 1] = (np.maximum(x - k[j], 0.0) ** 3
                             - tail_prev * (k[-1] - k[j]) / span
                             + tail_last * (k[-2] - k[j]) / span) / scale
        return out


def make_knots(values, df: int) -> tuple[float, ...]:
    """Place ``df + 1`` knots at equally spaced quantiles of the distinct values.

    Quantiles use linear interpolation between order statistics (the
    numpy default), so the outer knots are the min and max of the distinct
    values.  At least ``df + 1`` distinct values are required.
    """
    if df < 1:
        raise ValueError("df must be >= 1")
    distinct = np.unique(np.asarray(values, dtype=float))
    if len(distinct) < df + 1:
        raise ValueError(f"too few distinct values ({len(distinct)}) for df={df}; need {df + 1}")
    probs = np.linspace(0.0, 1.0, df + 1)
    return tuple(float(q) for q in np.quantile(distinct, probs))


def basis_row(basis: SplineBasis, x: float) -> np.ndarray:
    return basis.transform([x])[0]
