"""Command line entry point: ``tomosel <subcommand> <config.json>``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig
from .estimator import CoefficientDesign, ConfigurationError, IndexSets, sigma_hat
from .obsmodel import direction_key, draw_samples
from .properties import property_suite, write_checks_csv
from .riskharness import RiskSetup, empirical_error, oracle_report
from .selector import build_family, default_grid, reconstruct, select, write_cost_table

log = logging.getLogger("tomosel")

SAMPLES = "samples.csv"
COEFFICIENTS = "coefficients.csv"
ESTIMATE = "estimate.json"
SELECTION = "selection.json"
COSTS = "costs.csv"
RASTER = "reconstruction.pgm"
RASTER_META = "reconstruction.json"
RISK = "risk_report.json"
RISK_TABLE = "risk_per_lambda.csv"
CHECKS = "checks.csv"
VERIFY = "verify.json"
REPORT = "report.json"
REPORT_META = "report.meta.json"


class DependencyError(RuntimeError):
    """An upstream artifact needed by a subcommand is missing."""


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _need(path: Path, producer: str) -> Path:
    if not path.exists():
        raise DependencyError(f"missing {path.name} in {path.parent}; run '{producer}' first")
    return path


def _design(cfg: RunConfig) -> CoefficientDesign:
    design = CoefficientDesign(IndexSets(cfg["m"], cfg["dimension"]), cfg.q, cfg["x_star"])
    design.check_preconditions()
    return design


def write_pgm(path: Path, raster: np.ndarray) -> dict:
    """8-bit binary PGM, min-max scaled; row 0 is the top (largest x2)."""
    lo, hi = float(raster.min()), float(raster.max())
    span = hi - lo
    scaled = np.zeros_like(raster) if span == 0 else (raster - lo) / span * 255
    img = np.rint(scaled).astype(np.uint8).T[::-1]
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
    return {"min": lo, "max": hi, "resolution": int(raster.shape[0])}


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


def read_samples(path: Path, design: CoefficientDesign) -> np.ndarray:
    """Rebuild the ``(K, q)`` observation table from a samples CSV."""
    table = np.full((design.n_directions, design.q), np.nan)
    row_of = {k: i for i, k in enumerate(design.table.keys)}
    d = design.d
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            key = direction_key([int(rec[f"j{i + 1}"]) for i in range(d)])
            if key not in row_of:
                raise ValueError(f"samples index {key} is outside the configured box")
            table[row_of[key], int(rec["l"]) - 1] = float(rec["y"])
    if np.isnan(table).any():
        raise ValueError("samples file does not cover every direction and offset")
    return table


def read_coefficients(path: Path, design: CoefficientDesign) -> np.ndarray:
    th = np.zeros(design.sets.r_n, dtype=complex)
    seen = np.zeros(design.sets.r_n, dtype=bool)
    d = design.d
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            pos = design.sets.position([int(rec[f"j{i + 1}"]) for i in range(d)])
            th[pos] = complex(float(rec["re_theta_hat"]), float(rec["im_theta_hat"]))
            seen[pos] = True
    if not seen.all():
        raise ValueError("coefficient file does not cover the truncation box")
    return th


# subcommands -------------------------------------------------------------------


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    design = _design(cfg)
    noise = cfg.primary_noise
    ss = draw_samples(cfg.phantom, design.indices, design.q, noise, cfg["seed"])
    ss.to_csv(out / SAMPLES)
    log.info("wrote %d observations to %s", ss.n_total, out / SAMPLES)
    return 0


def cmd_estimate(cfg: RunConfig, out: Path) -> int:
    design = _design(cfg)
    y = read_samples(_need(out / SAMPLES, "simulate"), design)
    est = design.estimates(y)
    est.to_csv(out / COEFFICIENTS)
    sig_est = float(sigma_hat(est.theta_hat, design)) if design.sets.T_mask.any() else None
    used = cfg.primary_noise.sigma if cfg["sigma_mode"] == "known" else sig_est
    _dump(
        out / ESTIMATE,
        {
            "seed": cfg["seed"],
            "q": design.q,
            "m": design.sets.m,
            "n_directions": design.n_directions,
            "n_total": design.n_total,
            "varpi_star": design.varpi_star,
            "sigma_mode": cfg["sigma_mode"],
            "sigma_hat": sig_est,
            "sigma_used": used,
            "noise": cfg.primary_noise.to_dict(),
        },
    )
    return 0


def cmd_select(cfg: RunConfig, out: Path) -> int:
    design = _design(cfg)
    th = read_coefficients(_need(out / COEFFICIENTS, "estimate"), design)
    meta = json.loads(_need(out / ESTIMATE, "estimate").read_text())
    sig = float(meta["sigma_used"])
    g = cfg["grid"]
    k, e = default_grid(design.n_total, g["k0"])
    family = build_family(
        design.sets,
        g["k_star"] if g["k_star"] is not None else k,
        g["epsilon"] if g["epsilon"] is not None else e,
        float(cfg["noise"]["sigma_hi"]),
        design.varpi,
        g["cap_plateau"],
    )
    lam, cb = select(family, th, cfg["delta"], sig, design.coef_varpi, design.q)
    write_cost_table(out / COSTS, family, th, cfg["delta"], sig, design.coef_varpi, design.q)
    raster = reconstruct(lam, th, design.sets, design.x_star, cfg["raster_resolution"])
    _dump(out / RASTER_META, write_pgm(out / RASTER, raster))
    # simulation runs know the truth, so the choice can be scored against the family
    setup = RiskSetup(cfg.phantom, design.sets.m, design.q, cfg["delta"], check=False)
    er = empirical_error(family.matrix, th, setup.theta, setup.tail_energy)
    best = int(np.argmin(er))
    chosen = family.weights.index(lam)
    _dump(
        out / SELECTION,
        {
            "seed": cfg["seed"],
            "sigma_used": sig,
            "delta": cfg["delta"],
            "grid_point": {"beta": lam.source.beta, "ell": lam.source.ell},
            "cost": {"quad": cb.quad, "cross": cb.cross, "penalty": cb.penalty, "total": cb.total},
            "family": family.summary(),
            "empirical_error": float(er[chosen]),
            "oracle_empirical_error": float(er[best]),
            "oracle_grid_point": {"beta": family.weights[best].source.beta, "ell": family.weights[best].source.ell},
        },
    )
    return 0


def cmd_risk(cfg: RunConfig, out: Path) -> int:
    setup = cfg.risk_setup()
    rep = oracle_report(setup, cfg.noise_family, cfg["replications"], cfg["seed"], cfg["n_jobs"])
    (out / RISK).write_text(rep.to_json() + "\n")
    rep.per_lambda_csv(out / RISK_TABLE)
    return 0


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    setup = cfg.risk_setup()
    results = property_suite(
        cfg.phantom,
        setup,
        list(cfg.noise_family.models),
        cfg["moment_replications"],
        cfg["replications"],
        cfg["seed"],
        cfg["q_star"],
    )
    required = cfg["required_checks"]
    for r in results:
        r.required = r.required and (required == "all" or r.name.split("[")[0] in required or r.name in required)
    write_checks_csv(out / CHECKS, results)
    failed = [r.name for r in results if r.required and not r.passed]
    _dump(
        out / VERIFY,
        {
            "seed": cfg["seed"],
            "checks": {r.name: {"passed": r.passed, "statistic": r.statistic, "bound": r.bound} for r in results},
            "failed_required": failed,
        },
    )
    for r in results:
        log.info("%-28s %s  %s", r.name, "pass" if r.passed else "FAIL", r.detail)
    return 1 if failed else 0


def cmd_report(cfg: RunConfig, out: Path) -> int:
    sources = {"estimate": (ESTIMATE, "estimate"), "selection": (SELECTION, "select"), "risk": (RISK, "risk"), "verify": (VERIFY, "verify")}
    merged = {"config": cfg.tree, "seed": cfg["seed"]}
    for key, (name, producer) in sources.items():
        merged[key] = json.loads(_need(out / name, producer).read_text())
    _dump(out / REPORT, merged)
    _dump(out / REPORT_META, {"created": datetime.now(timezone.utc).isoformat(), "config": cfg.source})
    return 1 if merged["verify"]["failed_required"] else 0


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "select": cmd_select,
    "risk": cmd_risk,
    "verify": cmd_verify,
    "report": cmd_report,
}


def run_subcommand(name: str, config_path) -> int:
    cfg = RunConfig.load(config_path)
    out = cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    return COMMANDS[name](cfg, out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tomosel", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or name).strip().splitlines()[0] if fn.__doc__ else None)
        sp.add_argument("config", help="path to the JSON run configuration")
    sub.add_parser("defaults", help="print the default configuration")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "defaults":
        print(RunConfig.default().to_json())
        return 0
    try:
        return run_subcommand(args.command, args.config)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except DependencyError as e:
        print(f"dependency error: {e}", file=sys.stderr)
        return 3
    except (ConfigurationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
