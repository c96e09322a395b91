"""Command-line entry point: ``fourway decompose | simulate | verify``."""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .boot import BootstrapError, BootstrapPlan, bootstrap_curves
from .config import ConfigError, config_digest, data_options, load_config, model_spec, scenario_spec
from .dataio import ValidationError, load_csv, write_csv
from .glm import FitError
from .pipeline import estimate
from .sim import closed_form_truth, monte_carlo_truth, observed_cohort, simulate_draws
from .verify import run_all

EXIT_OK, EXIT_IDENTITY, EXIT_VALIDATION, EXIT_FIT = 0, 1, 2, 3


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    return repr(float(x))


def write_frame(df, path) -> None:
    """RFC-4180 CSV (CRLF line ends) with round-trippable floats."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(df.columns)
        for row in df.itertuples(index=False):
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) or v is None else v for v in row])


def write_manifest(path, manifest: dict) -> dict:
    body = {k: v for k, v in manifest.items() if k != "created"}
    manifest = dict(manifest)
    manifest["manifest_sha256"] = hashlib.sha256(
        json.dumps(body, sort_keys=True, default=str).encode()).hexdigest()
    manifest["created"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return manifest


def _parse_grid(text):
    if text is None:
        return None
    if text.strip() in ("events", "index"):
        return text.strip()
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"--grid must be 'events' or comma-separated numbers, got {text!r}") from None


def _parse_schema(pairs):
    out = {}
    for p in pairs or []:
        if "=" not in p:
            raise ValidationError(f"--schema expects key=column, got {p!r}")
        key, col = p.split("=", 1)
        out[key.strip()] = col.strip()
    return out


def cmd_decompose(args) -> int:
    cfg, cfg_text = load_config(args.config)
    spec = model_spec(cfg)
    if args.ridge is not None:
        spec = type(spec).from_dict({**spec.to_dict(), "ridge": args.ridge})
    opts = data_options(cfg)
    opts["schema"].update(_parse_schema(args.schema))
    if args.grid is not None:
        opts["grid"] = _parse_grid(args.grid)
        # an explicit grid or "events" holds times, so input times are binned onto it
        opts["time_kind"] = "index" if opts["grid"] == "index" else "continuous"
    covariates = sorted(set(spec.for_cause("target").covariates) | set(spec.for_cause("competing").covariates))
    if "covariates" not in opts["schema"]:
        opts["covariates"] = covariates
    cohort = load_csv(args.input, **opts)

    boot_cfg = cfg.get("bootstrap", {})
    B = args.boot if args.boot is not None else int(boot_cfg.get("replicates", 0))
    seed = args.seed if args.seed is not None else int(boot_cfg.get("seed", 0))
    level = args.level if args.level is not None else float(boot_cfg.get("level", 0.95))

    est = estimate(cohort, spec)
    curve = est.curve
    boot_info = {"replicates": B, "seed": seed, "level": level, "skipped": 0, "failures": []}
    if B > 0:
        res = bootstrap_curves(cohort, spec, BootstrapPlan(B, seed, level), K=est.K, workers=args.workers)
        curve.lower, curve.upper = res.lower, res.upper
        boot_info.update(skipped=res.skipped, failures=[{"replicate": b, "error": m} for b, m in res.failures])

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_frame(curve.to_long(), out / "components.csv")
    write_manifest(out / "manifest.json", {
        "tool": "fourway", "version": __version__, "command": "decompose",
        "config": cfg, "config_text": cfg_text, "config_sha256": config_digest(cfg),
        "model": spec.to_dict(),
        "input": {"file": Path(args.input).name, "sha256": _sha256(args.input)},
        "n_subjects": cohort.n, "grid": cohort.grid.tolist(), "K_reported": est.K,
        "fits": est.fits.report(), "bootstrap": boot_info,
        "outputs": {"components.csv": _sha256(out / "components.csv")},
    })
    print(f"wrote {out / 'components.csv'} ({est.K} time points, bootstrap B={B}, skipped={boot_info['skipped']})")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.preset is not None:
        cfg = {"scenario": {"preset": args.preset}}
        cfg_text = ""
        if args.config is not None:
            cfg, cfg_text = load_config(args.config)
            cfg.setdefault("scenario", {})["preset"] = args.preset
    else:
        if args.config is None:
            raise ConfigError("simulate needs --config or --preset")
        cfg, cfg_text = load_config(args.config)
    spec = scenario_spec(cfg, n=args.n, seed=args.seed)
    draws = simulate_draws(spec)
    cohort = observed_cohort(spec, draws)
    truth = monte_carlo_truth(spec)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(cohort, out / "cohort.csv")
    write_frame(truth.to_wide(), out / "truth.csv")
    write_frame(closed_form_truth(spec).to_wide(), out / "truth_closed_form.csv")
    write_manifest(out / "manifest.json", {
        "tool": "fourway", "version": __version__, "command": "simulate",
        "config": cfg, "config_text": cfg_text, "config_sha256": config_digest(cfg),
        "scenario": {"name": spec.name, "n": spec.n, "seed": spec.seed, "p_treat": spec.p_treat,
                     "grid": spec.grid.tolist(), "stratum_probs": spec.stratum_probs.tolist(),
                     "hazard_y": spec.hazard_y.tolist(), "hazard_d": spec.hazard_d.tolist(),
                     "censor_hazard": None if spec.censor_hazard is None else spec.censor_hazard.tolist()},
        "outputs": {name: _sha256(out / name) for name in ("cohort.csv", "truth.csv", "truth_closed_form.csv")},
    })
    print(f"wrote {out / 'cohort.csv'} and {out / 'truth.csv'} (n={spec.n}, seed={spec.seed})")
    return EXIT_OK


def cmd_verify(args) -> int:
    report = run_all(args.trials, args.seed)
    print(report.table())
    enum = report.checks[0]
    print(f"{enum.passed}/{enum.total} enumeration cases pass")
    if report.ok:
        return EXIT_OK
    for c in report.checks:
        if not c.ok:
            print(f"FAILED {c.name}: {json.dumps(c.failure)}", file=sys.stderr)
    return EXIT_IDENTITY


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fourway", description=(
        "Four-way decomposition of a treatment's total effect on a target event "
        "with a competing event, from discrete-time data."))
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("decompose", help="estimate the decomposition from a subject-level CSV")
    d.add_argument("--input", required=True, help="subject-level CSV")
    d.add_argument("--config", required=True, help="TOML config with [model] and optional [data]")
    d.add_argument("--grid", help="'events' or comma-separated time grid t_0,...,t_K")
    d.add_argument("--boot", type=int, help="bootstrap replicates (0 = point estimates only)")
    d.add_argument("--seed", type=int, help="bootstrap seed")
    d.add_argument("--level", type=float, help="confidence level (default 0.95)")
    d.add_argument("--ridge", type=float, help="ridge penalty for both hazard models")
    d.add_argument("--schema", action="append", metavar="KEY=COLUMN",
                   help="column mapping, e.g. --schema time=dtime (repeatable)")
    d.add_argument("--workers", type=int, default=1, help="bootstrap worker processes")
    d.add_argument("--out-dir", default=".", help="output directory")
    d.set_defaults(func=cmd_decompose)

    s = sub.add_parser("simulate", help="simulate potential outcomes, observed cohort and truth")
    s.add_argument("--config", help="TOML config with a [scenario] section")
    s.add_argument("--preset", choices=["scenario1", "scenario2", "scenario3"])
    s.add_argument("--n", type=int, help="number of individuals (overrides config)")
    s.add_argument("--seed", type=int, help="random seed (overrides config)")
    s.add_argument("--out-dir", default=".", help="output directory")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="run the built-in identity and enumeration checks")
    v.add_argument("--trials", type=int, default=1000, help="random hazard tabulations")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ConfigError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FitError, BootstrapError) as err:
        print(f"fit failure: {err}", file=sys.stderr)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
