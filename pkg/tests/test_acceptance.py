"""Acceptance suite: the package's exit criteria, run at full stated scale.

Each criterion prints one PASS/FAIL line per clause before asserting, so a
red run still reports every measured value. The replication studies are
session fixtures and take roughly two hours total on a single core; set
TVMSM_SKIP_HEAVY=1 to skip them during development (criteria 1-5 skip,
6-7 still run).
"""
import json
import os

import numpy as np
import pytest

from tvmsm import (MsmSpec, SimConfig, StudyConfig, bootstrap_all, fit_sequential,
                   fit_weighted, generate, ipw, overlap, ppta_run, replicate,
                   stabilized, true_estimands, validate)
from tvmsm.cli import main as cli_main
from tvmsm.harness import write_tables
from tvmsm.propensity import build_design
from tvmsm.weights import _numerator_design

SKIP_HEAVY = pytest.mark.skipif(os.environ.get("TVMSM_SKIP_HEAVY") == "1",
                                reason="heavy replication studies disabled")

SEED_HOM3 = 20240311
SEED_HOM5 = 20240312
SEED_HET3 = 20240313
SEED_COS3 = 20240314
SEED_EQUIV = 20240315
N_JOBS = max(1, os.cpu_count() or 1)


def check(criterion: str, clauses: list[tuple[str, bool, str]]):
    failed = []
    for name, ok, detail in clauses:
        print(f"ACCEPTANCE {criterion} [{name}]: {'PASS' if ok else 'FAIL'} ({detail})")
        if not ok:
            failed.append(f"{name}: {detail}")
    assert not failed, f"criterion {criterion} failed clauses: {failed}"


@pytest.fixture(scope="session")
def hom3_report(tmp_path_factory):
    study = StudyConfig(mode="homogeneous", D=3, R=100, n=5000, K=500, B=50,
                        seed=SEED_HOM3, min_cos=3, n_jobs=N_JOBS)
    report = replicate(study)
    write_tables(report, tmp_path_factory.mktemp("hom3"))
    return report


@pytest.fixture(scope="session")
def hom5_report(tmp_path_factory):
    study = StudyConfig(mode="homogeneous", D=5, R=100, n=5000, K=500, B=50,
                        seed=SEED_HOM5, min_cos=3, n_jobs=N_JOBS)
    report = replicate(study)
    write_tables(report, tmp_path_factory.mktemp("hom5"))
    return report


@pytest.fixture(scope="session")
def het3_report():
    study = StudyConfig(mode="heterogeneous", D=3, R=100, n=5000, K=500, B=2,
                        seed=SEED_HET3, min_cos=3, n_jobs=N_JOBS)
    return replicate(study)


@pytest.fixture(scope="session")
def cos3_report():
    # the subset-size diagnostics need the benchmark K; B is irrelevant to them
    study = StudyConfig(mode="homogeneous", D=3, R=50, n=5000, K=1500, B=2,
                        seed=SEED_COS3, min_cos=3, n_jobs=N_JOBS)
    return replicate(study)


@SKIP_HEAVY
def test_criterion_1_homogeneous_d3(hom3_report):
    cells = hom3_report.cells
    ow, ipw_c = cells["OW"], cells["IPW"]
    check("1 (homogeneous D=3, R=100, K=500, B=50)", [
        ("OW bias within 0.015 of -0.019", abs(ow.bias - (-0.019)) <= 0.015,
         f"bias={ow.bias:+.4f}, mc_se={ow.bias_mc_se:.4f}"),
        ("OW empirical SD within 0.015 of 0.042", abs(ow.emp_sd - 0.042) <= 0.015,
         f"emp_sd={ow.emp_sd:.4f}"),
        ("IPW empirical SD within 0.05 of 0.132", abs(ipw_c.emp_sd - 0.132) <= 0.05,
         f"emp_sd={ipw_c.emp_sd:.4f}"),
        ("OW bootstrap coverage in [0.85, 0.97]", 0.85 <= ow.coverage <= 0.97,
         f"coverage={ow.coverage:.3f} (reference 0.907)"),
    ])


@SKIP_HEAVY
def test_criterion_2_homogeneous_d5_orderings(hom5_report):
    c = hom5_report.cells
    gap = 0.10
    clauses = []
    for lo in ("IPW", "SW"):
        for hi in ("OW", "PPTA"):
            clauses.append((
                f"{lo} coverage at least {gap} below {hi}",
                c[lo].coverage <= c[hi].coverage - gap,
                f"{lo}={c[lo].coverage:.3f}, {hi}={c[hi].coverage:.3f}"))
    ratio = c["IPW"].emp_sd / c["OW"].emp_sd
    clauses.append(("IPW empirical SD more than twice OW's", ratio > 2.0,
                    f"IPW={c['IPW'].emp_sd:.4f}, OW={c['OW'].emp_sd:.4f}, "
                    f"ratio={ratio:.2f}"))
    check("2 (homogeneous D=5 orderings)", clauses)


@SKIP_HEAVY
def test_criterion_3_heterogeneous_d3(het3_report):
    report = het3_report
    ato_a = report.truth.ato
    second = true_estimands(SimConfig(n=5000, D=3, effect_mode="heterogeneous",
                                      seed=0), n_oracle=2_000_000, seed=77_001)
    check("3 (heterogeneous D=3)", [
        ("overlap-contrast oracle stable across seeds (0.005)",
         abs(ato_a - second.ato) <= 0.005,
         f"oracle_a={ato_a:.4f}, oracle_b={second.ato:.4f}"),
        ("own overlap-contrast oracle within 0.02 of 0.370",
         abs(ato_a - 0.370) <= 0.02, f"oracle={ato_a:.4f}"),
        ("OW bias vs own oracle within 0.015",
         abs(report.cells["OW"].bias) <= 0.015,
         f"bias={report.cells['OW'].bias:+.4f}, "
         f"mc_se={report.cells['OW'].bias_mc_se:.4f}"),
        ("PPTA bias vs own oracle within 0.015",
         abs(report.cells["PPTA"].bias) <= 0.015,
         f"bias={report.cells['PPTA'].bias:+.4f}, "
         f"mc_se={report.cells['PPTA'].bias_mc_se:.4f}"),
        ("overlap-group share within 0.03 of 0.31",
         abs(report.dgcop_share - 0.31) <= 0.03,
         f"share={report.dgcop_share:.4f}"),
    ])


@SKIP_HEAVY
def test_criterion_4_pruning_diagnostics(cos3_report):
    report = cos3_report
    check("4 (pruning diagnostics D=3, K=1500, R=50)", [
        ("mean subset size in [110, 140]",
         110 <= report.cos_size_mean <= 140,
         f"mean={report.cos_size_mean:.1f} (reference 125.3), "
         f"sd={report.cos_size_sd:.1f}"),
        ("ever-used fraction in [0.63, 0.71]",
         0.63 <= report.ever_used_mean <= 0.71,
         f"ever_used={report.ever_used_mean:.4f} (reference 0.671)"),
    ])


def test_criterion_5_pruning_matches_overlap_weights():
    clauses = []
    # frozen propensity: inclusion frequency is Binomial(K, overlap weight);
    # tolerance is 4 binomial SEs plus a 5/K small-count floor (normal
    # approximation is meaningless when K*ow is a fraction of a count)
    sim = generate(SimConfig(n=400, D=3, seed=SEED_EQUIV))
    seq = fit_sequential(sim.panel)
    K = 20_000
    draws = [np.tile(f.alpha_mle, (K, 1)) for f in seq.fits]
    run = ppta_run(sim.panel, K=K, spec=MsmSpec(), seed=SEED_EQUIV + 1,
                   min_cos=3, draws=draws)
    ow = overlap(seq, sim.panel).values
    tol = 4 * np.sqrt(ow * (1 - ow) / K) + 5.0 / K
    worst = np.max(np.abs(run.marginal_inclusion - ow) - tol)
    clauses.append(("inclusion frequency within 4 binomial SEs of overlap "
                    "weight for every unit (K=20000)", bool(worst <= 0),
                    f"max excess over tolerance={worst:+.2e}"))

    if os.environ.get("TVMSM_SKIP_HEAVY") != "1":
        # live posterior draws: 20 replicates, K=1500
        diffs = []
        for r in range(20):
            sim_r = generate(SimConfig(n=5000, D=3, seed=SEED_EQUIV + 100 + r))
            seq_r = fit_sequential(sim_r.panel)
            est_ow = fit_weighted(sim_r.panel, overlap(seq_r, sim_r.panel).values,
                                  MsmSpec(), method="OW")
            run_r = ppta_run(sim_r.panel, K=1500, spec=MsmSpec(),
                             seed=SEED_EQUIV + 200 + r, min_cos=3)
            diffs.append(abs(run_r.delta_hat - est_ow.delta))
        clauses.append(("mean |pruning - overlap-weight| estimate gap below "
                        "0.01 over 20 replicates (K=1500)",
                        float(np.mean(diffs)) < 0.01,
                        f"mean gap={np.mean(diffs):.5f}, max={np.max(diffs):.5f}"))
    check("5 (pruning/overlap-weight correspondence)", clauses)


def test_criterion_6_estimator_core_properties():
    clauses = []
    # IRLS score at every returned logistic MLE, across modes and horizons
    worst_logit = 0.0
    datasets = [generate(SimConfig(n=5000, D=D, effect_mode=mode,
                                   seed=SEED_EQUIV + 300 + i)).panel
                for i, (D, mode) in enumerate(
                    [(3, "homogeneous"), (5, "homogeneous"), (3, "heterogeneous")])]
    from scipy.special import expit as _expit
    for ds in datasets:
        seq = fit_sequential(ds)
        for d, fit in enumerate(seq.fits, start=1):
            for design in (build_design(ds, d), _numerator_design(ds, d)):
                from tvmsm import fit_mle
                f = fit_mle(design)
                score = design.matrix.T @ (design.response
                                           - _expit(design.matrix @ f.alpha_mle))
                worst_logit = max(worst_logit, float(np.max(np.abs(score))))
    clauses.append(("logistic IRLS score below 1e-6 at every returned MLE",
                    worst_logit < 1e-6, f"worst score={worst_logit:.2e}"))

    # Poisson IRLS score, relative to the weighted-response scale
    rng = np.random.default_rng(SEED_EQUIV)
    n = 3000
    T = rng.integers(0, 2, (n, 3))
    off = rng.uniform(0.5, 3.0, n)
    y = rng.poisson(np.exp(-0.2 + 0.15 * T.sum(1)) * off).astype(float)
    W = rng.standard_normal((n, 2))
    X = rng.standard_normal((n, 3, 2))
    ds_cnt = validate(W, X, T, y, offset=off, outcome_kind="count")
    w = rng.uniform(0.1, 4.0, n)
    est = fit_weighted(ds_cnt, w, MsmSpec(link="log"))
    Xm = np.column_stack([np.ones(n), ds_cnt.cumulative_exposure])
    mu = np.exp(Xm @ (est.beta0, est.beta) + np.log(off))
    score = Xm.T @ (w * (y - mu))
    rel = np.max(np.abs(score)) / (1.0 + np.max(np.abs(Xm.T @ (w * y))))
    clauses.append(("Poisson IRLS relative score below 1e-6", rel < 1e-6,
                    f"relative score={rel:.2e}"))

    # weighted-LS scale invariance to 1e-10
    ds0 = datasets[0]
    wls_w = rng.uniform(0.05, 8.0, ds0.n)
    a = fit_weighted(ds0, wls_w, MsmSpec())
    b = fit_weighted(ds0, 197.3 * wls_w, MsmSpec())
    dev = max(abs(a.beta0 - b.beta0), abs(a.beta - b.beta))
    clauses.append(("weighted-LS scale invariance to 1e-10", dev < 1e-10,
                    f"max coefficient change={dev:.2e}"))

    # stabilized-weight mean near one under a correctly specified model
    means = []
    for s in range(5):
        sim = generate(SimConfig(n=5000, D=3, seed=SEED_EQUIV + 400 + s))
        means.append(stabilized(fit_sequential(sim.panel), sim.panel).values.mean())
    pooled = float(np.mean(means))
    clauses.append(("stabilized-weight sample mean in [0.9, 1.1]",
                    0.9 <= pooled <= 1.1,
                    f"pooled mean={pooled:.4f}, per-dataset="
                    + ",".join(f"{m:.3f}" for m in means)))

    # weight range guarantees
    ok_range = True
    detail = ""
    for ds in datasets:
        seq = fit_sequential(ds)
        w_ipw = ipw(seq, ds).values
        w_ow = overlap(seq, ds).values
        if not (np.all(w_ipw >= 1.0) and np.all((w_ow > 0) & (w_ow < 1))):
            ok_range = False
            detail = f"ipw_min={w_ipw.min()}, ow_range=({w_ow.min()},{w_ow.max()})"
    clauses.append(("IPW >= 1 and OW in (0,1) universally", ok_range,
                    detail or "holds on all datasets checked"))

    # full determinism under fixed seeds regardless of worker count
    study = StudyConfig(mode="homogeneous", D=3, R=2, n=300, K=40, B=4,
                        seed=SEED_EQUIV, min_cos=3, n_jobs=1)
    rep1 = replicate(study)
    rep2 = replicate(StudyConfig(**{**study.__dict__, "n_jobs": 2}))
    d1, d2 = rep1.to_json_dict(), rep2.to_json_dict()
    d1["study"].pop("n_jobs")
    d2["study"].pop("n_jobs")
    boots1 = bootstrap_all(datasets[0], ("IPW", "OW"), MsmSpec(), B=6,
                           seed=SEED_EQUIV, n_jobs=1)
    boots2 = bootstrap_all(datasets[0], ("IPW", "OW"), MsmSpec(), B=6,
                           seed=SEED_EQUIV, n_jobs=2)
    same_boot = all(np.array_equal(boots1[m].estimates, boots2[m].estimates)
                    for m in ("IPW", "OW"))
    clauses.append(("identical results for any worker count",
                    d1 == d2 and same_boot, "replication report and bootstrap"))
    check("6 (estimator core properties)", clauses)


def test_criterion_7_rate_pipeline_and_output_formats(tmp_path):
    clauses = []
    # generate-and-refit: rate ratio exp(0.1) recovered within 0.01 at n=1e5
    rng = np.random.default_rng(SEED_EQUIV + 7)
    n = 100_000
    T = rng.integers(0, 2, (n, 3))
    offset = rng.uniform(0.5, 4.0, n)
    y = np.round(np.exp(0.1 * T.sum(axis=1)) * offset * 2.0)
    ds = validate(rng.standard_normal((n, 2)), rng.standard_normal((n, 3, 2)),
                  T, y, offset=offset, outcome_kind="count")
    est = fit_weighted(ds, np.ones(n), MsmSpec(link="log"))
    clauses.append(("log-link refit recovers rate ratio exp(0.1) within 0.01",
                    abs(est.delta - np.exp(0.1)) <= 0.01,
                    f"delta={est.delta:.4f} vs {np.exp(0.1):.4f}"))

    # effect-table format: per-method JSON with a ratio-scale point and interval
    rng2 = np.random.default_rng(SEED_EQUIV + 8)
    n2, D2 = 1200, 4
    W = rng2.standard_normal((n2, 2))
    X = rng2.standard_normal((n2, D2, 2))
    from scipy.special import expit as _expit
    T2 = (rng2.random((n2, D2)) < _expit(0.8 * W[:, [0] * D2]
                                         + 0.8 * X[:, :, 0])).astype(int)
    off2 = rng2.uniform(0.5, 3.0, n2)
    y2 = rng2.poisson(np.exp(-0.5 + 0.1 * T2.sum(1) + 0.2 * W[:, 0]) * off2)
    from tvmsm import write_panel_csv
    panel = validate(W, X, T2, y2.astype(float), offset=off2, outcome_kind="count")
    csv_path = tmp_path / "rates.csv"
    write_panel_csv(panel, csv_path)
    out = tmp_path / "analysis"
    code = cli_main(["analyze", "--input", str(csv_path), "--pw", "2", "--px", "2",
                     "--d", str(D2), "--link", "log", "--k", "150", "--b", "20",
                     "--min-cos", "3", "--seed", "11", "--out", str(out)])
    records = {}
    if code == 0:
        for m in ("ipw", "sw", "ow", "ppta"):
            records[m] = json.loads((out / f"estimate_{m}.json").read_text())
    shape_ok = code == 0 and all(
        r["link"] == "log" and r["delta"] > 0
        and 0 < r["ci_low"] < r["delta"] < r["ci_high"]
        for r in records.values())
    clauses.append(("per-method ratio-scale estimate with 95% interval",
                    shape_ok,
                    ", ".join(f"{m}={r['delta']:.2f} [{r['ci_low']:.2f}, "
                              f"{r['ci_high']:.2f}]" for m, r in records.items())
                    or f"exit code {code}"))

    # weight-distribution table format: fixed rows, one column per scheme
    import pandas as pd
    summary = pd.read_csv(out / "weight_summary.csv", index_col=0)
    fmt_ok = (list(summary.index) == ["p75", "p95", "p99", "max",
                                      "top_1pct_share", "pct_data_used"]
              and list(summary.columns) == ["IPW", "SW", "OW", "PPTA"]
              and summary.loc["pct_data_used", "IPW"] == 100.0
              and summary.loc["pct_data_used", "PPTA"] <= 100.0)
    clauses.append(("weight-distribution table rows and columns", fmt_ok,
                    f"rows={list(summary.index)}"))
    check("7 (rate pipeline and output formats)", clauses)
