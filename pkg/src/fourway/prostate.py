"""Preparation of the public prostate-cancer trial file (Hmisc ``prostate``).

The raw file has one row per patient with ``rx`` (arm), ``dtime`` (months
of follow-up), ``status`` (alive or cause of death) and baseline columns.
:func:`prepare` keeps high-dose DES and placebo, codes prostate-cancer
death as the target event and any other death as competing, and builds the
covariates used in the worked example: normal daily activity, age group,
low hemoglobin and prior cardiovascular disease.
"""
from __future__ import annotations

import numpy as np
import pandas as pd

from .dataio import Cohort, EventCode, ValidationError

TREATED_ARM = "5.0 mg estrogen"
CONTROL_ARM = "placebo"
TARGET_STATUS = "dead - prostatic ca"
COVARIATES = ("normal_activity", "age_60_74", "age_75_plus", "hg_below_12", "hx")


def prepare(raw: pd.DataFrame) -> tuple[Cohort, int]:
    """Cohort on a monthly grid; returns it with the number of dropped rows.

    Follow-up of ``dtime`` completed months falls in interval ``dtime + 1``,
    so the grid is ``0, 1, ..., max(dtime) + 1`` months.  Rows lacking any
    covariate used here are dropped, and the count is reported.
    """
    need = ["rx", "dtime", "status", "pf", "age", "hg", "hx"]
    missing = [c for c in need if c not in raw.columns]
    if missing:
        raise ValidationError(f"prostate file lacks column(s): {', '.join(missing)}")
    df = raw[raw["rx"].astype(str).str.strip().isin([TREATED_ARM, CONTROL_ARM])].copy()
    for c in ("dtime", "age", "hg", "hx"):
        df[c] = pd.to_numeric(df[c], errors="coerce")
    complete = df[need].notna().all(axis=1) & (df["pf"].astype(str).str.strip() != "")
    dropped = int((~complete).sum())
    df = df[complete]

    status = df["status"].astype(str).str.strip()
    event = np.where(status == TARGET_STATUS, EventCode.TARGET,
                     np.where(status.str.startswith("dead"), EventCode.COMPETING, EventCode.CENSORED))
    unknown = ~(status.str.startswith("dead") | (status == "alive"))
    if unknown.any():
        raise ValidationError(f"unrecognised status {status[unknown].iloc[0]!r}")

    age = df["age"].to_numpy(float)
    cov = np.column_stack([
        (df["pf"].astype(str).str.strip() == "normal activity").to_numpy(float),
        ((age >= 60) & (age < 75)).astype(float),
        (age >= 75).astype(float),
        (df["hg"].to_numpy(float) < 12).astype(float),
        df["hx"].to_numpy(float),
    ])
    time_index = df["dtime"].to_numpy(np.int64) + 1
    ids = df["patno"].to_numpy() if "patno" in df.columns else np.arange(len(df))
    cohort = Cohort(np.arange(time_index.max() + 1, dtype=float), ids, time_index, event,
                    (df["rx"].astype(str).str.strip() == TREATED_ARM).to_numpy(np.int64), cov, COVARIATES)
    return cohort, dropped


def load(path) -> tuple[Cohort, int]:
    return prepare(pd.read_csv(path, keep_default_na=True))


def main(argv=None) -> int:
    """``python -m fourway.prostate RAW.csv OUT.csv``: write the prepared cohort."""
    import argparse

    from .dataio import write_csv

    ap = argparse.ArgumentParser(prog="python -m fourway.prostate", description=__doc__.splitlines()[0])
    ap.add_argument("raw")
    ap.add_argument("out")
    args = ap.parse_args(argv)
    cohort, dropped = load(args.raw)
    write_csv(cohort, args.out)
    print(f"wrote {cohort.n} subjects to {args.out} ({dropped} incomplete rows dropped)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
