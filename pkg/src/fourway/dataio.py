"""Cohort ingestion and person-period expansion.

Within an interval the checks happen in the order censoring, competing
event, target event.  A subject censored at interval ``s`` is therefore
out of both risk sets at ``s``; a competing event at ``s`` removes ``s``
from the target risk set.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np
import pandas as pd


class ValidationError(ValueError):
    """Input data violates a cohort invariant."""


class EventCode(enum.IntEnum):
    CENSORED = 0
    TARGET = 1
    COMPETING = 2


DEFAULT_EVENT_CODES = {"0": EventCode.CENSORED, "1": EventCode.TARGET, "2": EventCode.COMPETING}
DEFAULT_SCHEMA = {"id": "id", "time": "time", "event": "event", "treatment": "treatment"}


@dataclass(frozen=True)
class SubjectRecord:
    id: object
    time_index: int
    event: EventCode
    treatment: int
    covariates: tuple[float, ...]


@dataclass
class Cohort:
    """Subject-level observed data on a shared time grid.

    Stored column-wise.  ``grid`` holds ``t_0 < ... < t_K``; ``time_index``
    is the index ``k >= 1`` of the first event or censoring; treatment is 1
    for the treated arm and 0 for the reference arm.
    """

    grid: np.ndarray
    ids: np.ndarray
    time_index: np.ndarray
    event: np.ndarray
    treatment: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.ids = np.asarray(self.ids)
        self.time_index = np.asarray(self.time_index, dtype=np.int64)
        self.event = np.asarray(self.event, dtype=np.int64)
        self.treatment = np.asarray(self.treatment, dtype=np.int64)
        n = len(self.time_index)
        cov = np.asarray(self.covariates, dtype=float)
        if cov.size == 0:
            cov = np.zeros((n, len(self.covariate_names)))
        self.covariates = cov.reshape(n, -1) if n else cov.reshape(0, len(self.covariate_names))
        self.covariate_names = tuple(self.covariate_names)
        self.validate()

    @property
    def K(self) -> int:
        return len(self.grid) - 1

    @property
    def n(self) -> int:
        return len(self.time_index)

    def validate(self) -> None:
        if self.grid.ndim != 1 or len(self.grid) < 2:
            raise ValidationError("grid needs at least two time points")
        if not np.all(np.isfinite(self.grid)) or np.any(np.diff(self.grid) <= 0):
            raise ValidationError("non-monotone grid: time points must be strictly increasing")
        if self.n == 0:
            raise ValidationError("empty cohort")
        for name, arr in (("ids", self.ids), ("event", self.event), ("treatment", self.treatment)):
            if len(arr) != self.n:
                raise ValidationError(f"column {name} has length {len(arr)}, expected {self.n}")
        if self.covariates.shape[1] != len(self.covariate_names):
            raise ValidationError("covariate matrix width does not match covariate names")
        bad = np.flatnonzero((self.time_index < 1) | (self.time_index > self.K))
        if bad.size:
            i = bad[0]
            raise ValidationError(
                f"record {self.ids[i]!r}: time index {self.time_index[i]} outside 1..{self.K}")
        bad = np.flatnonzero(~np.isin(self.event, [int(c) for c in EventCode]))
        if bad.size:
            raise ValidationError(f"record {self.ids[bad[0]]!r}: unknown event code {self.event[bad[0]]}")
        bad = np.flatnonzero(~np.isin(self.treatment, [0, 1]))
        if bad.size:
            raise ValidationError(
                f"record {self.ids[bad[0]]!r}: non-binary treatment {self.treatment[bad[0]]}")
        if not np.all(np.isfinite(self.covariates)):
            i = np.flatnonzero(~np.all(np.isfinite(self.covariates), axis=1))[0]
            raise ValidationError(f"record {self.ids[i]!r}: missing covariate values")

    def records(self) -> Iterator[SubjectRecord]:
        for i in range(self.n):
            yield SubjectRecord(self.ids[i], int(self.time_index[i]), EventCode(self.event[i]),
                                int(self.treatment[i]), tuple(self.covariates[i]))

    def subset(self, idx) -> "Cohort":
        idx = np.asarray(idx)
        return Cohort(self.grid, self.ids[idx], self.time_index[idx], self.event[idx],
                      self.treatment[idx], self.covariates[idx], self.covariate_names)

    def select_covariates(self, names: Sequence[str]) -> np.ndarray:
        missing = [c for c in names if c not in self.covariate_names]
        if missing:
            raise ValidationError(f"covariates not in cohort: {missing}")
        cols = [self.covariate_names.index(c) for c in names]
        return self.covariates[:, cols]

    def event_times(self) -> np.ndarray:
        """Grid time values of all observed (non-censored) events."""
        has_event = self.event != EventCode.CENSORED
        return self.grid[self.time_index[has_event]]


@dataclass
class RiskSetTable:
    """Person-period rows for one cause: one row per subject per at-risk interval."""

    cause: EventCode
    subject: np.ndarray
    interval: np.ndarray
    outcome: np.ndarray
    treatment: np.ndarray
    covariates: np.ndarray
    time: np.ndarray
    covariate_names: tuple[str, ...] = field(default=())

    def __len__(self):
        return len(self.subject)

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({"subject": self.subject, "interval": self.interval,
                           "outcome": self.outcome, "treatment": self.treatment,
                           "time": self.time})
        for j, name in enumerate(self.covariate_names):
            df[name] = self.covariates[:, j]
        return df


def expand_person_periods(cohort: Cohort, cause: EventCode) -> RiskSetTable:
    """Expand a cohort into the risk-set table of one cause.

    ``subject`` holds positional indices into the cohort.
    """
    cause = EventCode(cause)
    if cause == EventCode.CENSORED:
        raise ValueError("cause must be TARGET or COMPETING")
    k = cohort.time_index
    ev = cohort.event
    # last at-risk interval: censoring at k removes k from both sets,
    # a competing event at k removes k from the target set only
    last = k.copy()
    last[ev == EventCode.CENSORED] -= 1
    if cause == EventCode.TARGET:
        last[ev == EventCode.COMPETING] -= 1
    counts = np.maximum(last, 0)
    subject = np.repeat(np.arange(cohort.n), counts)
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    interval = np.arange(len(subject)) - starts + 1
    outcome = ((ev[subject] == cause) & (interval == k[subject])).astype(np.int64)
    return RiskSetTable(cause, subject, interval, outcome, cohort.treatment[subject],
                        cohort.covariates[subject], cohort.grid[interval], cohort.covariate_names)


def bin_times(times, grid) -> np.ndarray:
    """Map continuous times to the smallest k >= 1 with t <= t_k."""
    grid = np.asarray(grid, dtype=float)
    times = np.asarray(times, dtype=float)
    k = np.searchsorted(grid, times, side="left")
    return np.maximum(k, 1)


def default_grid(times, events, origin: float = 0.0) -> np.ndarray:
    """Unique observed event times, preceded by the time origin."""
    times = np.asarray(times, dtype=float)
    ev_times = np.unique(times[np.asarray(events) != EventCode.CENSORED])
    if ev_times.size == 0:
        raise ValidationError("cannot build a default grid without observed events")
    t0 = min(origin, ev_times[0] - 1.0)
    grid = np.concatenate([[t0], ev_times])
    if times.max() > grid[-1]:
        # censorings after the last event still need an interval
        grid = np.append(grid, times.max())
    return grid


def load_csv(path, schema: Mapping[str, object] | None = None, *, covariates: Sequence[str] = (),
             grid=None, time_kind: str = "index",
             event_codes: Mapping[str, EventCode] | None = None,
             treatment_codes: Mapping[str, int] | None = None) -> Cohort:
    """Read a subject-level CSV into a validated :class:`Cohort`.

    Parameters
    ----------
    path : path-like
        UTF-8, comma separated, header row required.
    schema : mapping, optional
        Logical name -> column name for ``id``, ``time``, ``event``,
        ``treatment``.  A ``covariates`` entry (list or comma separated
        string) lists covariate columns.
    covariates : sequence of str
        Covariate columns, used when the schema does not name any.
    grid : sequence of float or ``"events"``, optional
        Time grid ``t_0..t_K``.  With ``time_kind="index"`` the time column
        holds the interval index and the grid defaults to ``0..K``.  With
        ``time_kind="continuous"`` times are binned onto the grid, which
        defaults to the unique observed event times.
    event_codes, treatment_codes : mapping, optional
        Raw cell text -> code.  Defaults: events ``0/1/2`` for censored,
        target, competing; treatment ``0/1``.
    """
    cols = dict(DEFAULT_SCHEMA)
    cov_cols = list(covariates)
    for key, val in (schema or {}).items():
        if key == "covariates":
            cov_cols = [c.strip() for c in val.split(",") if c.strip()] if isinstance(val, str) else list(val)
        else:
            cols[key] = val
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"input file not found: {path}")
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    needed = [cols[k] for k in ("id", "time", "event", "treatment")] + cov_cols
    missing = [c for c in needed if c not in raw.columns]
    if missing:
        raise ValidationError(f"missing column(s): {', '.join(missing)}")
    if len(raw) == 0:
        raise ValidationError("empty cohort")
    ids = raw[cols["id"]].to_numpy()

    codes = {str(k): EventCode(v) if not isinstance(v, str) else EventCode[v.upper()]
             for k, v in (event_codes or DEFAULT_EVENT_CODES).items()}
    event = np.empty(len(raw), dtype=np.int64)
    for i, v in enumerate(raw[cols["event"]].str.strip()):
        if v not in codes:
            raise ValidationError(f"record {ids[i]!r}: unknown event code {v!r}")
        event[i] = codes[v]

    trt_codes = {str(k): int(v) for k, v in (treatment_codes or {"0": 0, "1": 1}).items()}
    treatment = np.empty(len(raw), dtype=np.int64)
    for i, v in enumerate(raw[cols["treatment"]].str.strip()):
        if v not in trt_codes or trt_codes[v] not in (0, 1):
            raise ValidationError(f"record {ids[i]!r}: non-binary treatment {v!r}")
        treatment[i] = trt_codes[v]

    cov = np.empty((len(raw), len(cov_cols)))
    for j, c in enumerate(cov_cols):
        for i, v in enumerate(raw[c].str.strip()):
            try:
                cov[i, j] = float(v) if v.upper() not in ("", "NA", "NAN") else np.nan
            except ValueError:
                raise ValidationError(f"record {ids[i]!r}: non-numeric covariate {c}={v!r}") from None
            if not np.isfinite(cov[i, j]):
                raise ValidationError(f"record {ids[i]!r}: missing covariate values ({c})")

    tcol = raw[cols["time"]].str.strip()
    try:
        times = tcol.astype(float).to_numpy()
    except ValueError:
        raise ValidationError("time column contains non-numeric values") from None
    if not np.all(np.isfinite(times)):
        raise ValidationError("time column contains missing values")

    if time_kind == "index":
        if np.any(times != np.round(times)):
            raise ValidationError("time column must hold integer interval indices (use time_kind='continuous')")
        k = times.astype(np.int64)
        if grid is None or (isinstance(grid, str) and grid == "index"):
            grid_arr = np.arange(max(int(k.max()), 1) + 1, dtype=float)
        else:
            grid_arr = np.asarray(grid, dtype=float)
    elif time_kind == "continuous":
        if grid is None or (isinstance(grid, str) and grid == "events"):
            grid_arr = default_grid(times, event)
        else:
            grid_arr = np.asarray(grid, dtype=float)
        if np.any(np.diff(grid_arr) <= 0):
            raise ValidationError("non-monotone grid: time points must be strictly increasing")
        if times.max() > grid_arr[-1]:
            raise ValidationError(f"time {times.max()} beyond the last grid point {grid_arr[-1]}")
        k = bin_times(times, grid_arr)
    else:
        raise ValueError(f"unknown time_kind {time_kind!r}")
    return Cohort(grid_arr, ids, k, event, treatment, cov, tuple(cov_cols))


def write_csv(cohort: Cohort, path, *, float_format=repr) -> None:
    """Write a cohort in index form (time column = interval index)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "time", "event", "treatment", *cohort.covariate_names])
        for i in range(cohort.n):
            w.writerow([cohort.ids[i], int(cohort.time_index[i]), int(cohort.event[i]),
                        int(cohort.treatment[i]), *(float_format(float(x)) for x in cohort.covariates[i])])
