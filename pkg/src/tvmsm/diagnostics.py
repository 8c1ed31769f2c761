"""Diagnostics exports: weight distributions, weight comparisons, positivity.

These produce plot-ready tables; rendering is left to external tools.
"""
from __future__ import annotations

import numpy as np
import pandas as pd

from .panel import PanelDataset
from .ppta import PptaRun
from .propensity import PROB_CLAMP, SequentialPS
from .weights import WeightSet, ipw, overlap, weight_summary

_ROWS = ("p75", "p95", "p99", "max", "top_1pct_share", "pct_data_used")


def weight_distribution_table(weight_sets: dict[str, WeightSet | np.ndarray],
                              ppta: PptaRun | None = None) -> pd.DataFrame:
    """Percentile table across schemes, one column per scheme.

    For weighting schemes ``pct_data_used`` is 100 by definition; the
    ``top_1pct_share`` row shows how much of the total weight the heaviest 1%
    of units carry. A pruning run contributes its marginal inclusion
    probabilities as a column, with ``pct_data_used`` equal to the share of
    units ever selected.
    """
    cols: dict[str, list[float]] = {}
    for name, ws in weight_sets.items():
        s = weight_summary(ws)
        cols[name] = [s.p75, s.p95, s.p99, s.maximum, s.top_1pct_share,
                      s.pct_data_used]
    if ppta is not None:
        s = weight_summary(ppta.marginal_inclusion)
        cols["PPTA"] = [s.p75, s.p95, s.p99, s.maximum, s.top_1pct_share,
                        100.0 * ppta.ever_used_fraction]
    return pd.DataFrame(cols, index=list(_ROWS))


def weight_comparison_frame(ds: PanelDataset, seq: SequentialPS,
                            dgcop_states: np.ndarray | None = None) -> pd.DataFrame:
    """Per-unit log inverse-probability weight vs overlap weight.

    Ready for scatter plotting; when per-period overlap-group indicators are
    supplied, the count of periods each unit spends in the overlap group is
    attached for coloring.
    """
    log_ipw = np.log(ipw(seq, ds).values)
    ow = overlap(seq, ds).values
    frame = pd.DataFrame({
        "id": np.arange(1, ds.n + 1),
        "log_ipw": log_ipw,
        "ow": ow,
    })
    if dgcop_states is not None:
        frame["dgcop_count"] = np.asarray(dgcop_states).sum(axis=1)
    else:
        frame["dgcop_count"] = pd.NA
    return frame


def positivity_summary(seq: SequentialPS, near: float = 0.01) -> pd.DataFrame:
    """Per-period extremeness of the fitted assignment probabilities.

    Near-violations of positivity show up as probabilities piling against 0
    or 1; ``n_clamped`` counts values that hit the numerical clamp itself.
    """
    rows = []
    for d, fit in enumerate(seq.fits, start=1):
        e = fit.e_mle
        rows.append({
            "d": d,
            "min": float(e.min()),
            "p01": float(np.quantile(e, 0.01)),
            "p99": float(np.quantile(e, 0.99)),
            "max": float(e.max()),
            "n_below": int((e < near).sum()),
            "n_above": int((e > 1 - near).sum()),
            "n_clamped": int(((e <= PROB_CLAMP) | (e >= 1 - PROB_CLAMP)).sum()),
        })
    return pd.DataFrame(rows)
