"""TOML/JSON run configuration: data schema, model spec, scenario."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import tomli

from .dataio import EventCode, ValidationError
from .hazards import ModelSpec
from .sim import ScenarioSpec, preset


class ConfigError(ValidationError):
    pass


def load_config(path) -> tuple[dict, str]:
    """Parse a TOML (or ``.json``) config file; returns the mapping and raw text."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text) if path.suffix == ".json" else tomli.loads(text)
    except (tomli.TOMLDecodeError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot parse config {path}: {err}") from None
    return data, text


def config_digest(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()


def model_spec(cfg: dict) -> ModelSpec:
    try:
        return ModelSpec.from_dict(cfg.get("model", {}))
    except (TypeError, ValueError) as err:
        raise ConfigError(f"invalid [model] section: {err}") from None


def data_options(cfg: dict) -> dict:
    """Keyword arguments for :func:`fourway.dataio.load_csv` from ``[data]``."""
    d = dict(cfg.get("data", {}))
    opts = {"schema": dict(d.pop("schema", {})), "time_kind": d.pop("time_kind", "index")}
    if "grid" in d:
        opts["grid"] = d.pop("grid")
    codes = d.pop("event_codes", None)
    if codes is not None:
        opts["event_codes"] = {str(raw): EventCode[name.upper()] for name, raw in codes.items()}
    trt = d.pop("treatment_codes", None)
    if trt is not None:
        opts["treatment_codes"] = {str(raw): {"treated": 1, "control": 0}[name] for name, raw in trt.items()}
    if d:
        raise ConfigError(f"unknown [data] field(s): {sorted(d)}")
    return opts


def scenario_spec(cfg: dict, *, n=None, seed=None) -> ScenarioSpec:
    """Scenario from ``[scenario]``: a preset name or tabulated hazards.

    Tabulated form: ``grid`` plus ``hazard_y_ref``, ``hazard_y_trt``,
    ``hazard_d_ref``, ``hazard_d_trt`` (length K each), or a list of
    ``[[scenario.strata]]`` tables holding those four plus ``prob``.
    """
    sc = dict(cfg.get("scenario", {}))
    if not sc:
        raise ConfigError("config has no [scenario] section")
    n = int(sc.get("n", 10_000) if n is None else n)
    seed = int(sc.get("seed", 0) if seed is None else seed)
    if n < 1:
        raise ConfigError("scenario needs n >= 1")
    try:
        if "preset" in sc:
            return preset(sc["preset"], n=n, seed=seed, K=int(sc.get("K", 10)),
                          stratified=bool(sc.get("stratified", False)),
                          censor_hazard=sc.get("censor_hazard"), p_treat=float(sc.get("p_treat", 0.5)))
        strata = sc.get("strata") or [sc]
        hy = [[s["hazard_y_ref"], s["hazard_y_trt"]] for s in strata]
        hd = [[s["hazard_d_ref"], s["hazard_d_trt"]] for s in strata]
        probs = [s.get("prob", 1.0) for s in strata]
        return ScenarioSpec(np.asarray(sc["grid"], dtype=float), np.array(hy, dtype=float),
                            np.array(hd, dtype=float), n=n, seed=seed,
                            p_treat=float(sc.get("p_treat", 0.5)), stratum_probs=probs,
                            censor_hazard=sc.get("censor_hazard"), name=str(sc.get("name", "custom")))
    except KeyError as err:
        raise ConfigError(f"[scenario] is missing {err}") from None
    except (TypeError, ValueError) as err:
        raise ConfigError(f"invalid [scenario]: {err}") from None
