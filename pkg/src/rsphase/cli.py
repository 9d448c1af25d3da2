"""Command-line entry points.

One subcommand per pipeline stage; every run writes a JSON manifest
(effective config, seed, package versions) next to its outputs so results
can be reproduced.  Exit codes: 0 success, 2 config error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np
import scipy

import rsphase
from rsphase import flow
from rsphase.ensemble import (
    ed_compare,
    norg_unpaired_mc,
    realization_rng,
    rsrg_ensemble,
    sweep_ensemble,
    two_atom_scan_set,
)
from rsphase.fidelity import FidelityParams, optimize_f_paired, write_fidelity_csv
from rsphase.lattice import LatticeParams, sample_chain
from rsphase.rsrg import CrossingPairingError, run_rsrg
from rsphase.spinsim import ConvergenceError
from rsphase.sweep import (
    FitRangeError,
    StiffIntegrationError,
    SweepParams,
    log_omega_grid,
    lz_fit,
)

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_NUMERICAL_ERRORS = (
    flow.InstabilityError,
    ConvergenceError,
    StiffIntegrationError,
    FitRangeError,
    CrossingPairingError,
    FloatingPointError,
    np.linalg.LinAlgError,
)


class ConfigError(ValueError):
    pass


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must be a JSON object with per-command sections")
    return cfg


def _section(cfg: dict, name: str) -> dict:
    sec = cfg.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    return dict(sec)


def _lattice_params(cfg: dict, seed: int, overrides: dict | None = None) -> LatticeParams:
    sec = _section(cfg, "lattice")
    sec.update(overrides or {})
    sec.setdefault("n_sites", 100)
    sec.setdefault("interaction_range", 5.0)
    if "n_atoms" not in sec and "p_fill" not in sec:
        sec["n_atoms"] = 30
    sec["seed"] = seed
    try:
        return LatticeParams(**sec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad lattice parameters: {exc}") from exc


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, config: dict, seed: int, workers: int) -> None:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "workers": workers,
        "versions": {
            "rsphase": rsphase.__version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _effective(cfg: dict, command: str, extra: dict) -> dict:
    eff = dict(cfg)
    sec = dict(eff.get(command, {}))
    sec.update(extra)
    eff[command] = sec
    return eff


def cmd_sample(args, cfg: dict) -> int:
    params = _lattice_params(cfg, args.seed)
    out = _out_dir(args)
    chain = sample_chain(params, realization_rng(args.seed, 0))
    (out / "chain.json").write_text(chain.to_json() + "\n", encoding="utf-8")
    _write_manifest(out, "sample", _effective(cfg, "sample", {"lattice": params.to_dict()}),
                    args.seed, args.workers)
    return 0


def cmd_rsrg(args, cfg: dict) -> int:
    sec = _section(cfg, "rsrg")
    n_real = int(args.realizations or sec.get("realizations", 1000))
    params = _lattice_params(cfg, args.seed)
    out = _out_dir(args)
    res = rsrg_ensemble(params, n_real, seed=args.seed, workers=args.workers)
    # Interpolate pooled nesting fractions onto the survival grid so the
    # file matches the flow-curve schema for overlay plotting.
    lx = np.log(res.fraction_bin_centers)
    fr = np.full((len(res.lm_over_L), 3), np.nan)
    good = np.isfinite(res.fractions[:, 0])
    if good.sum() >= 2:
        for k in range(3):
            fr[:, k] = np.interp(
                np.log(res.lm_over_L), lx[good], res.fractions[good, k],
                left=np.nan, right=np.nan,
            )
    with open(out / "rsrg_curve.csv", "w", newline="", encoding="utf-8") as fh:
        flow.write_flow_csv(
            fh, res.lm_over_L, res.survival_rg,
            np.full(len(res.lm_over_L), np.nan), fr, stride=1,
        )
    with open(out / "rsrg_norg_curve.csv", "w", newline="", encoding="utf-8") as fh:
        flow.write_flow_csv(
            fh, res.lm_over_L, res.survival_norg,
            np.full(len(res.lm_over_L), np.nan), stride=1,
        )
    if n_real == 1:
        chain = sample_chain(params, realization_rng(args.seed, 0))
        report = run_rsrg(chain, params.interaction_range)
        with open(out / "bonds.csv", "w", newline="", encoding="utf-8") as fh:
            report.write_csv(fh)
    _write_manifest(
        out, "rsrg",
        _effective(cfg, "rsrg", {"realizations": n_real, "lattice": params.to_dict()}),
        args.seed, args.workers,
    )
    return 0


def cmd_norg(args, cfg: dict) -> int:
    sec = _section(cfg, "norg")
    n_real = int(args.realizations or sec.get("realizations", 2000))
    params = _lattice_params(cfg, args.seed)
    out = _out_dir(args)
    frac = norg_unpaired_mc(params, n_real, seed=args.seed)
    summary = {"unpaired_fraction": frac, "realizations": n_real}
    (out / "norg_summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    _write_manifest(
        out, "norg",
        _effective(cfg, "norg", {"realizations": n_real, "lattice": params.to_dict()}),
        args.seed, args.workers,
    )
    return 0


def _flow_kwargs(sec: dict) -> dict:
    kw = {
        "p_fill": float(sec.get("p_fill", 0.3)),
        "interaction_range": float(sec.get("interaction_range", 5.0)),
        "lm_max_over_L": float(sec.get("lm_max_over_L", 10.0)),
        "lambda_max": float(sec.get("lambda_max", flow.LAMBDA_MAX_DEFAULT)),
        "dlnlm": float(sec.get("dlnlm", flow.DLNLM_DEFAULT)),
        "n_conv": int(sec.get("n_conv", flow.N_CONV_DEFAULT)),
    }
    return kw


def cmd_flow(args, cfg: dict) -> int:
    sec = _section(cfg, "flow")
    kw = _flow_kwargs(sec)
    out = _out_dir(args)
    hist = flow.run_flow(**kw)
    with open(out / "flow_curve.csv", "w", newline="", encoding="utf-8") as fh:
        flow.write_flow_csv(fh, hist.lm_over_L, hist.survival, hist.q0)
    summary = {
        "final_survival": float(hist.survival[-1]),
        "final_normalization": hist.final.normalization(),
    }
    (out / "flow_summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    _write_manifest(out, "flow", _effective(cfg, "flow", kw), args.seed, args.workers)
    return 0


def cmd_jointflow(args, cfg: dict) -> int:
    sec = _section(cfg, "jointflow")
    kw = _flow_kwargs(sec)
    kw["n_max"] = int(sec.get("n_max", flow.N_MAX_NESTING_DEFAULT))
    out = _out_dir(args)
    hist = flow.run_joint_flow(**kw)
    with open(out / "jointflow_curve.csv", "w", newline="", encoding="utf-8") as fh:
        flow.write_flow_csv(fh, hist.lm_over_L, hist.survival, hist.q0, hist.fractions)
    summary = {
        "final_survival": float(hist.survival[-1]),
        "no_rg_unpaired": flow.no_rg_unpaired(hist, kw["lm_max_over_L"]),
    }
    (out / "jointflow_summary.json").write_text(
        json.dumps(summary, indent=2) + "\n", encoding="utf-8"
    )
    _write_manifest(out, "jointflow", _effective(cfg, "jointflow", kw), args.seed, args.workers)
    return 0


def cmd_ed_compare(args, cfg: dict) -> int:
    sec = _section(cfg, "ed_compare")
    n_real = int(args.realizations or sec.get("realizations", 500))
    params = _lattice_params(
        cfg, args.seed,
        overrides={
            "n_sites": int(sec.get("n_sites", 27)),
            "n_atoms": int(sec.get("n_atoms", 8)),
        },
    )
    out = _out_dir(args)
    res = ed_compare(params, n_real, seed=args.seed, workers=args.workers)
    with open(out / "ed_compare.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["realization", "complete", "matches_rg"])
        for idx, complete, matches in res.rows:
            w.writerow([idx, int(complete), int(matches)])
    summary = {
        "realizations": res.n_realizations,
        "complete_rate": res.complete_rate,
        "match_rate": res.match_rate,
    }
    (out / "ed_compare_summary.json").write_text(
        json.dumps(summary, indent=2) + "\n", encoding="utf-8"
    )
    _write_manifest(
        out, "ed_compare",
        _effective(cfg, "ed_compare", {"realizations": n_real, "lattice": params.to_dict()}),
        args.seed, args.workers,
    )
    return 0


def _write_sweep_csv(out: Path, rows: list[tuple[int, object]]) -> None:
    with open(out / "sweep_records.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "bond_i", "bond_j", "j_eff", "omega_break", "censored_flag"])
        for idx, rec in rows:
            w.writerow([
                idx, rec.bond[0], rec.bond[1], repr(rec.j_eff),
                "" if rec.omega_break is None else repr(rec.omega_break),
                rec.censored or "",
            ])


def cmd_sweep(args, cfg: dict) -> int:
    sec = _section(cfg, "sweep")
    out = _out_dir(args)
    sweep_params = SweepParams(
        omega=1.0,
        epsilon0=float(sec.get("epsilon0", 1.0)),
        phi0=float(sec.get("phi0", np.pi / 6)),
        tolerance=float(sec.get("tolerance", 1e-10)),
    )
    grid = log_omega_grid(
        lo=float(sec.get("omega_lo", 1e-3)),
        hi=float(sec.get("omega_hi", 10.0)),
        per_decade=int(sec.get("per_decade", 16)),
    )
    if args.two_atom:
        seps = sec.get("separations", [2, 4, 6, 8, 10, 12, 15, 18, 21, 25, 30])
        records = two_atom_scan_set(
            [int(d) for d in seps],
            float(sec.get("interaction_range", 5.0)),
            sweep_params, grid,
            scan_tolerance=float(sec.get("scan_tolerance", 1e-4)),
        )
        rows = [(0, r) for r in records]
        eff_extra = {"mode": "two_atom", "separations": list(seps)}
    else:
        n_real = int(args.realizations or sec.get("realizations", 100))
        params = _lattice_params(
            cfg, args.seed,
            overrides={
                "n_sites": int(sec.get("n_sites", 60)),
                "n_atoms": int(sec.get("n_atoms", 8)),
            },
        )
        if args.full_scale:
            params = _lattice_params(cfg, args.seed, overrides={"n_sites": 100, "n_atoms": 12})
            n_real = 1000
        results = sweep_ensemble(
            params, sweep_params, grid, n_real, seed=args.seed,
            scan_tolerance=float(sec.get("scan_tolerance", 5e-3)),
            workers=args.workers,
        )
        rows = [(idx, rec) for idx, res in results for rec in res.records]
        eff_extra = {"mode": "ensemble", "realizations": n_real, "lattice": params.to_dict()}
    _write_sweep_csv(out, rows)
    records = [rec for _, rec in rows]
    try:
        fit = lz_fit(records)
        fit_summary = {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "rms_residual": fit.rms_residual,
            "n_used": fit.n_used,
        }
    except FitRangeError as exc:
        fit_summary = {"error": str(exc)}
    summary = {
        "n_records": len(records),
        "n_censored": sum(1 for r in records if r.censored is not None),
        "fit": fit_summary,
    }
    (out / "sweep_summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    eff_extra["omega_grid"] = {"lo": float(grid[0]), "hi": float(grid[-1]), "n": len(grid)}
    _write_manifest(out, "sweep", _effective(cfg, "sweep", eff_extra), args.seed, args.workers)
    return 0


def cmd_fidelity(args, cfg: dict) -> int:
    sec = _section(cfg, "fidelity")
    params = FidelityParams(
        cooperativity=float(sec.get("cooperativity", 1e4)),
        j0=float(sec.get("j0", 1.0)),
        filling=float(sec.get("filling", 0.12)),
        interaction_range=float(sec.get("interaction_range", 5.0)),
        threshold_const=float(sec.get("threshold_const", 1.0)),
    )
    out = _out_dir(args)
    hist = flow.run_flow(
        params.filling, params.interaction_range,
        lm_max_over_L=float(sec.get("lm_max_over_L", 12.0)),
    )
    curve = (hist.lm_over_L, hist.survival)
    omega_grid = log_omega_grid(
        lo=float(sec.get("omega_lo", 1e-4)),
        hi=float(sec.get("omega_hi", 10.0)),
        per_decade=int(sec.get("per_decade", 40)),
    )
    omega_star, f_star = optimize_f_paired(params, curve, omega_grid)
    with open(out / "fidelity_curve.csv", "w", newline="", encoding="utf-8") as fh:
        write_fidelity_csv(fh, params, curve, omega_grid)
    summary = {"omega_star": omega_star, "f_paired_star": f_star}
    (out / "fidelity_summary.json").write_text(
        json.dumps(summary, indent=2) + "\n", encoding="utf-8"
    )
    _write_manifest(
        out, "fidelity",
        _effective(cfg, "fidelity", {
            "cooperativity": params.cooperativity, "filling": params.filling,
            "interaction_range": params.interaction_range,
        }),
        args.seed, args.workers,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rsphase",
        description="Random-singlet chain pipelines: sampling, decimation RG, "
        "flow equations, exact-diagonalization checks, sweep dynamics, fidelity.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="JSON config with per-command sections")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("sample", help="draw one chain realization")
    common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("rsrg", help="decimation RG Monte Carlo curves")
    common(p)
    p.add_argument("--realizations", type=int, default=None)
    p.set_defaults(func=cmd_rsrg)

    p = sub.add_parser("norg", help="greedy no-RG unpaired fraction")
    common(p)
    p.add_argument("--realizations", type=int, default=None)
    p.set_defaults(func=cmd_norg)

    p = sub.add_parser("flow", help="scalar flow-equation survival curve")
    common(p)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("jointflow", help="nesting-resolved flow-equation curves")
    common(p)
    p.set_defaults(func=cmd_jointflow)

    p = sub.add_parser("ed-compare", help="exact ground-state pairing vs the RG")
    common(p)
    p.add_argument("--realizations", type=int, default=None)
    p.set_defaults(func=cmd_ed_compare)

    p = sub.add_parser("sweep", help="adiabatic-sweep bond-breaking scans")
    common(p)
    p.add_argument("--realizations", type=int, default=None)
    p.add_argument("--two-atom", action="store_true", help="isolated-pair scans")
    p.add_argument("--full-scale", action="store_true",
                   help="1000 realizations of 12 atoms on 100 sites")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fidelity", help="preparation-fidelity optimization")
    common(p)
    p.set_defaults(func=cmd_fidelity)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, TypeError) as exc:
        # bad parameter values surface as config errors
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
