"""Command-line surface: simulate, analyze, replicate, diagnose.

Exit codes: 0 success, 1 runtime failure, 2 usage/configuration error. Every
randomized command requires an explicit --seed so published outputs are
regenerable. Options may also come from a JSON config file; explicit flags
win over file values.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ._rng import derive_seed
from .bootstrap import bootstrap_all
from .diagnostics import (positivity_summary, weight_comparison_frame,
                          weight_distribution_table)
from .errors import ConfigError, TvmsmError
from .harness import StudyConfig, replicate, score_against_reference, write_tables
from .msm import MsmSpec
from .panel import read_panel_csv, write_panel_csv
from .pipeline import ALL_METHODS, estimate_effect, normalize_method, weight_set
from .ppta import run as ppta_run
from .ppta import write_ppta_outputs
from .propensity import fit_sequential
from .simgen import SimConfig, compute_dgcop_states, dgcop_frame, e_true_frame, generate

FULL_SCALE = dict(r=250, k=1500, b=100)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tvmsm",
        description="Causal contrasts for time-varying binary exposures: "
                    "inverse-probability, stabilized, and overlap weighting, "
                    "plus stochastic pruning to the consistent overlap subset.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", type=Path, default=None,
                       help="JSON file of option values; explicit flags override")

    p = sub.add_parser("simulate", help="generate a synthetic panel with known truth")
    add_config(p)
    p.add_argument("--mode", choices=("homogeneous", "heterogeneous"), default=None)
    p.add_argument("--d", type=int, default=None, help="number of exposure periods")
    p.add_argument("--n", type=int, default=None, help="number of units")
    p.add_argument("--seed", type=int, default=None, required=False)
    p.add_argument("--delta-star", type=float, default=None, dest="delta_star")
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--no-side-files", action="store_true",
                   help="skip the true-propensity and overlap-group side files")

    p = sub.add_parser("analyze", help="estimate exposure contrasts from a panel CSV")
    add_config(p)
    p.add_argument("--input", type=Path, default=None)
    p.add_argument("--pw", type=int, default=None, help="baseline covariate count")
    p.add_argument("--px", type=int, default=None, help="period covariate count")
    p.add_argument("--d", type=int, default=None, help="number of exposure periods")
    p.add_argument("--link", choices=("identity", "log"), default=None)
    p.add_argument("--outcome-kind", choices=("continuous", "count"), default=None,
                   dest="outcome_kind")
    p.add_argument("--methods", type=str, default=None,
                   help="comma-separated subset of ipw,sw,ow,ppta")
    p.add_argument("--k", type=int, default=None, help="pruning iterations")
    p.add_argument("--b", type=int, default=None, help="bootstrap resamples")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--min-cos", type=int, default=None, dest="min_cos")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--percentile", action="store_true",
                   help="also report percentile bootstrap intervals")
    p.add_argument("--dump-resamples", action="store_true", dest="dump_resamples",
                   help="write per-resample bootstrap estimates per method")
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("replicate", help="run the simulation study and score it")
    add_config(p)
    p.add_argument("--mode", choices=("homogeneous", "heterogeneous"), default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--r", type=int, default=None, help="replicate datasets")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--b", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--min-cos", type=int, default=None, dest="min_cos")
    p.add_argument("--n-oracle", type=int, default=None, dest="n_oracle")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--full", action="store_true",
                   help=f"benchmark scale ({FULL_SCALE['r']} replicates, "
                        f"K={FULL_SCALE['k']}, B={FULL_SCALE['b']})")
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("diagnose", help="weight and positivity diagnostics for a panel CSV")
    add_config(p)
    p.add_argument("--input", type=Path, default=None)
    p.add_argument("--pw", type=int, default=None)
    p.add_argument("--px", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--e-true", type=Path, default=None, dest="e_true",
                   help="true-propensity side file; adds overlap-group counts")
    p.add_argument("--out", type=Path, default=None)
    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    """File values fill in anything the command line left unset."""
    merged = {k: v for k, v in vars(args).items() if k not in ("config", "command")}
    if args.config is not None:
        try:
            file_vals = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(file_vals, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, val in file_vals.items():
            k = key.replace("-", "_")
            if k not in merged:
                raise ConfigError(f"unknown config key {key!r}")
            if merged[k] in (None, False):
                merged[k] = val
    return merged


def _require(opts: dict, *names) -> None:
    missing = [n for n in names if opts.get(n) in (None, "")]
    if missing:
        raise ConfigError("missing required option(s): "
                          + ", ".join(f"--{n.replace('_', '-')}" for n in missing))


def _cmd_simulate(opts: dict) -> int:
    _require(opts, "seed", "out")
    cfg = SimConfig(
        n=opts["n"] if opts["n"] is not None else 5000,
        D=opts["d"] if opts["d"] is not None else 3,
        effect_mode=opts["mode"] or "homogeneous",
        seed=int(opts["seed"]),
        delta_star=opts["delta_star"] if opts["delta_star"] is not None else 0.5,
    )
    sim = generate(cfg)
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_panel_csv(sim.panel, out / "panel.csv")
    if not opts["no_side_files"]:
        e_true_frame(sim).to_csv(out / "e_true.csv", index=False,
                                 float_format="%.17g")
        if sim.dgcop is not None:
            dgcop_frame(sim).to_csv(out / "dgcop.csv", index=False)
    means = sim.panel.exposure.mean(axis=0)
    print(f"wrote {out / 'panel.csv'} (n={cfg.n}, D={cfg.D}, mode={cfg.effect_mode})")
    print("mean exposure by period:",
          " ".join(f"t_{d + 1}={m:.3f}" for d, m in enumerate(means)))
    if sim.dgcop is not None:
        print(f"overlap-group share: {sim.dgcop.mean():.3f}")
    return 0


def _cmd_analyze(opts: dict) -> int:
    _require(opts, "input", "pw", "px", "d", "seed", "out")
    methods_raw = opts["methods"] if opts["methods"] is not None else ",".join(ALL_METHODS)
    methods = tuple(normalize_method(m) for m in methods_raw.split(",") if m.strip())
    if not methods:
        raise ConfigError("method list is empty")
    ds = read_panel_csv(opts["input"], pW=int(opts["pw"]), pX=int(opts["px"]),
                        D=int(opts["d"]), outcome_kind=opts["outcome_kind"])
    link = opts["link"] or ("log" if ds.outcome_kind == "count" else "identity")
    spec = MsmSpec(link=link)
    seed = int(opts["seed"])
    K = opts["k"] if opts["k"] is not None else 1000
    B = opts["b"] if opts["b"] is not None else 100
    min_cos = opts["min_cos"] if opts["min_cos"] is not None else 10
    n_jobs = opts["threads"] if opts["threads"] is not None else 1
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)

    seq = fit_sequential(ds, mode="mle")
    points = {}
    prun = None
    for m in methods:
        if m == "PPTA":
            prun = ppta_run(ds, K=K, spec=spec, seed=derive_seed(seed, 1),
                            min_cos=min_cos)
            points[m] = prun.to_effect_estimate()
        else:
            points[m] = estimate_effect(ds, m, spec, seq=seq)
    boots = bootstrap_all(ds, methods, spec, B=B, seed=derive_seed(seed, 2),
                          K=K, min_cos=min_cos, points=points,
                          percentile=opts["percentile"], n_jobs=n_jobs)

    sets = {m: weight_set(ds, m, seq=seq) for m in methods if m != "PPTA"}
    for m in methods:
        res = boots[m]
        record = res.point.to_record()
        record["bootstrap_B"] = res.B
        record["bootstrap_failures"] = res.n_failed
        if res.percentile_ci95 is not None:
            record["percentile_ci_low"], record["percentile_ci_high"] = res.percentile_ci95
        (out / f"estimate_{m.lower()}.json").write_text(json.dumps(record, indent=2))
        if opts["dump_resamples"]:
            res.estimates_frame().to_csv(out / f"resamples_{m.lower()}.csv",
                                         index=False)
        est = res.point
        lo, hi = est.ci95
        print(f"{m}: delta={est.delta:.4g} [{lo:.4g}, {hi:.4g}] ({est.estimand}, {link} link)")
        if m != "PPTA":
            import pandas as pd
            pd.DataFrame({"id": np.arange(1, ds.n + 1),
                          "weight": sets[m].values}).to_csv(
                out / f"weights_{m.lower()}.csv", index=False)
    weight_distribution_table(sets, ppta=prun).to_csv(out / "weight_summary.csv")
    if prun is not None:
        write_ppta_outputs(prun, out)
    print(f"outputs in {out}")
    return 0


def _cmd_replicate(opts: dict) -> int:
    _require(opts, "seed", "out")
    scale = dict(r=100, k=500, b=50)
    if opts["full"]:
        scale = dict(FULL_SCALE)
    study = StudyConfig(
        mode=opts["mode"] or "homogeneous",
        D=opts["d"] if opts["d"] is not None else 3,
        R=opts["r"] if opts["r"] is not None else scale["r"],
        n=opts["n"] if opts["n"] is not None else 5000,
        K=opts["k"] if opts["k"] is not None else scale["k"],
        B=opts["b"] if opts["b"] is not None else scale["b"],
        seed=int(opts["seed"]),
        min_cos=opts["min_cos"] if opts["min_cos"] is not None else 3,
        n_jobs=opts["threads"] if opts["threads"] is not None else 1,
        n_oracle=opts["n_oracle"] if opts["n_oracle"] is not None else 2_000_000,
    )
    report = replicate(study)
    paths = write_tables(report, opts["out"])
    table = 1 if study.mode == "homogeneous" else 2
    print(report.to_frame().to_string(index=False))
    print(report.cos_frame().to_string(index=False))
    comparison = score_against_reference(report, table)
    print(comparison.to_string(index=False))
    print("wrote:", ", ".join(str(p) for p in paths.values()))
    if report.failures:
        print(f"note: {len(report.failures)} replicate(s) failed and were dropped",
              file=sys.stderr)
    return 0


def _cmd_diagnose(opts: dict) -> int:
    _require(opts, "input", "pw", "px", "d", "out")
    ds = read_panel_csv(opts["input"], pW=int(opts["pw"]), pX=int(opts["px"]),
                        D=int(opts["d"]))
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    seq = fit_sequential(ds, mode="mle")
    sets = {m: weight_set(ds, m, seq=seq) for m in ("IPW", "SW", "OW")}
    weight_distribution_table(sets).to_csv(out / "weight_summary.csv")
    states = None
    if opts["e_true"] is not None:
        import pandas as pd
        e_df = pd.read_csv(opts["e_true"])
        cols = [f"e_{d}" for d in range(1, ds.n_periods + 1)]
        missing = [c for c in cols if c not in e_df.columns]
        if missing or len(e_df) != ds.n:
            raise ConfigError("true-propensity side file does not match the panel")
        states = compute_dgcop_states(e_df[cols].to_numpy(float), ds.exposure)
    weight_comparison_frame(ds, seq, dgcop_states=states).to_csv(
        out / "weight_comparison.csv", index=False)
    positivity_summary(seq).to_csv(out / "positivity.csv", index=False)
    print(f"outputs in {out}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "analyze": _cmd_analyze,
    "replicate": _cmd_replicate,
    "diagnose": _cmd_diagnose,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        opts = _merge_config(args)
        return _COMMANDS[args.command](opts)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except TvmsmError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
