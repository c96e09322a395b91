"""Built-in identity and enumeration checks behind ``fourway verify``."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .decomp import (add_combined, combined_closed_form, components_idform, components_riskform,
                     rmst_scale)
from .sim import NEVER, ControlledTimes, individual_decomposition


@dataclass
class CheckResult:
    name: str
    passed: int
    total: int
    max_gap: float = 0.0
    tol: float = 0.0
    failure: dict | None = None

    @property
    def ok(self) -> bool:
        return self.passed == self.total


@dataclass
class VerifyReport:
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def table(self) -> str:
        lines = [f"{'check':<34}{'passed':>14}{'max gap':>12}{'tol':>10}"]
        for c in self.checks:
            lines.append(f"{c.name:<34}{f'{c.passed}/{c.total}':>14}{c.max_gap:>12.3g}{c.tol:>10.0e}")
        return "\n".join(lines)


def enumerate_individuals(K: int = 3) -> CheckResult:
    """All combinations of the four controlled times in ``{1..K, never}``, all ``k``.

    A case passes when, at every ``k``, the contrast and product forms
    agree, every component lies in {-1, 0, 1} and the components sum to TE.
    """
    values = list(range(1, K + 1)) + [NEVER]
    passed = total = 0
    failure = None
    for combo in itertools.product(values, repeat=4):
        total += 1
        times = ControlledTimes(*combo)
        try:
            for k in range(1, K + 1):
                comp = individual_decomposition(times, k)
                if not (np.all(np.isin(comp, (-1, 0, 1))) and comp[1:].sum() == comp[0]):
                    raise AssertionError("range or additivity violated")
        except AssertionError as err:
            if failure is None:
                failure = {"times": [int(v) for v in combo], "k": k, "error": str(err)}
            continue
        passed += 1
    return CheckResult("enumeration (K=%d)" % K, passed, total, failure=failure)


def random_hazards(rng, max_K=8, lo=0.001, hi=0.999):
    K = int(rng.integers(1, max_K + 1))
    grid = np.concatenate([[0.0], np.cumsum(rng.uniform(0.1, 2.0, K))])
    return rng.uniform(lo, hi, (2, K)), rng.uniform(lo, hi, (2, K)), grid


def random_identity_checks(trials: int = 1000, seed: int = 0, max_K: int = 8, tol: float = 1e-12):
    """Dual-form, combined-effect, additivity and event-free-time identities on random hazards."""
    rng = np.random.default_rng(seed)
    names = ("risk-form vs hazard-form", "NDE/NIE/TDE closed forms", "additivity (risk)",
             "additivity (rmst)", "rmst linearity")
    gaps = {n: 0.0 for n in names}
    passed = {n: 0 for n in names}
    failure = {n: None for n in names}
    for _ in range(trials):
        hy, hd, grid = random_hazards(rng, max_K)
        rf, idf = components_riskform(hy, hd), components_idform(hy, hd)
        eight = add_combined(idf)
        rm = rmst_scale(eight, grid)
        trial_gaps = {
            names[0]: np.max(np.abs(rf - idf)),
            names[1]: np.max(np.abs(eight[5:] - combined_closed_form(hy, hd))),
            names[2]: np.max(np.abs(eight[0] - eight[1:5].sum(axis=0))),
            names[3]: np.max(np.abs(rm[0] - rm[1:5].sum(axis=0))),
            names[4]: np.max(np.abs(rm[0] - rmst_scale(rf[0], grid))),
        }
        for n, g in trial_gaps.items():
            gaps[n] = max(gaps[n], float(g))
            if g < tol:
                passed[n] += 1
            elif failure[n] is None:
                failure[n] = {"hazard_y": hy.tolist(), "hazard_d": hd.tolist(), "grid": grid.tolist(),
                              "gap": float(g)}
    return [CheckResult(n, passed[n], trials, gaps[n], tol, failure[n]) for n in names]


def run_all(trials: int = 1000, seed: int = 0) -> VerifyReport:
    return VerifyReport([enumerate_individuals(3), *random_identity_checks(trials, seed)])
