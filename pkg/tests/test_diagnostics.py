import numpy as np
import pandas as pd
import pytest

from tvmsm import MsmSpec, SimConfig, fit_sequential, generate, ipw, overlap, ppta_run
from tvmsm.diagnostics import (positivity_summary, weight_comparison_frame,
                               weight_distribution_table)
from tvmsm.weights import stabilized

from conftest import make_panel
from test_weights import seq_with_probs


def test_distribution_table_layout(small_ds):
    seq = fit_sequential(small_ds)
    sets = {"IPW": ipw(seq, small_ds), "SW": stabilized(seq, small_ds),
            "OW": overlap(seq, small_ds)}
    run = ppta_run(small_ds, K=30, spec=MsmSpec(), seed=1, min_cos=3)
    table = weight_distribution_table(sets, ppta=run)
    assert list(table.index) == ["p75", "p95", "p99", "max", "top_1pct_share",
                                 "pct_data_used"]
    assert list(table.columns) == ["IPW", "SW", "OW", "PPTA"]
    assert table.loc["pct_data_used", "IPW"] == 100.0
    assert table.loc["pct_data_used", "PPTA"] == pytest.approx(
        100.0 * run.ever_used_fraction)
    assert table.loc["max", "OW"] < 1.0
    assert table.loc["p75", "IPW"] >= 1.0


def test_comparison_frame_constant_probabilities():
    D = 3
    T = np.array([[1, 0, 1], [0, 1, 0], [1, 1, 1]], dtype=np.int8)
    ds = make_panel(T)
    seq = seq_with_probs(np.full((3, D), 0.5))
    frame = weight_comparison_frame(ds, seq)
    assert np.allclose(frame["log_ipw"], D * np.log(2))
    assert np.allclose(frame["ow"], 0.5 ** D)
    assert frame["dgcop_count"].isna().all()


def test_comparison_frame_with_group_counts(small_ds):
    seq = fit_sequential(small_ds)
    states = np.zeros((small_ds.n, small_ds.n_periods), dtype=np.int8)
    states[:, 0] = 1
    frame = weight_comparison_frame(small_ds, seq, dgcop_states=states)
    assert (frame["dgcop_count"] == 1).all()
    assert len(frame) == small_ds.n


def test_weighting_asymmetry_between_schemes():
    # per-period the two weights are comonotone (both grow as the observed arm
    # gets improbable), so their ranks are negatively associated, low-IPW units
    # cannot carry high OW, and the heaviest IPW units are nevertheless
    # under-represented in the data-generated overlap group
    from scipy.stats import spearmanr
    hits_group, hits_low = 0, 0
    R = 20
    for r in range(R):
        sim = generate(SimConfig(n=2000, D=3, effect_mode="heterogeneous",
                                 seed=7000 + r))
        seq = fit_sequential(sim.panel)
        w_ipw = ipw(seq, sim.panel).values
        w_ow = overlap(seq, sim.panel).values
        e = seq.propensity_matrix()
        assert np.all(w_ipw >= 1.0)
        assert np.all(w_ow <= np.maximum(e, 1 - e).prod(axis=1) + 1e-12)
        n = sim.panel.n
        top = np.argsort(w_ipw)[-max(1, n // 100):]
        hits_group += sim.dgcop[top].mean() < sim.dgcop.mean()
        bottom = np.argsort(w_ipw)[:n // 10]
        hits_low += np.median(w_ow[bottom]) < np.median(w_ow)
        if r == 0:
            assert spearmanr(w_ow, 1.0 / w_ipw).statistic < 0.2  # not strongly positive
    assert hits_group > R / 2
    assert hits_low > R / 2


def test_positivity_summary(small_ds):
    seq = fit_sequential(small_ds)
    table = positivity_summary(seq)
    assert list(table["d"]) == [1, 2, 3]
    assert (table["min"] >= 0).all() and (table["max"] <= 1).all()
    assert (table["p01"] <= table["p99"]).all()
    # inject a saturated fit and confirm it is flagged
    seq.fits[0].e_mle[:] = 1e-12
    flagged = positivity_summary(seq)
    assert flagged.loc[0, "n_clamped"] == small_ds.n
    assert flagged.loc[0, "n_below"] == small_ds.n


def test_distribution_table_accepts_raw_arrays():
    table = weight_distribution_table({"IPW": np.arange(1.0, 101.0)})
    assert table.loc["p99", "IPW"] == 99.0
    assert isinstance(table, pd.DataFrame)
