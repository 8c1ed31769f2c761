"""Unit weights derived from a fitted sequential propensity model.

Three schemes: inverse-probability weights (product over periods of inverse
observed-arm probabilities), stabilized weights (same denominator with an
exposure-history-only numerator model), and overlap weights (product of
opposite-arm probabilities). No truncation is applied anywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FitError
from .panel import PanelDataset
from .propensity import PSDesign, SequentialPS, fit_mle

SCHEMES = ("IPW", "SW", "OW")


@dataclass(frozen=True)
class WeightSet:
    scheme: str
    values: np.ndarray
    ps_source: SequentialPS


@dataclass(frozen=True)
class WeightSummary:
    """Distribution summary in the style of a weight-diagnostics table.

    Percentiles use the nearest-rank definition so results are reproducible
    exactly. ``pct_data_used`` is 100 by convention for weighting schemes;
    ``top_1pct_share`` reports how concentrated the weight actually is.
    """

    p75: float
    p95: float
    p99: float
    maximum: float
    top_1pct_share: float
    pct_data_used: float = 100.0


def _observed_arm_probs(ps: SequentialPS, ds: PanelDataset) -> np.ndarray:
    e = ps.propensity_matrix()
    return np.where(ds.exposure == 1, e, 1.0 - e)


def ipw(ps: SequentialPS, ds: PanelDataset) -> WeightSet:
    """w_i = prod_d [T/e + (1-T)/(1-e)]; always >= 1."""
    values = (1.0 / _observed_arm_probs(ps, ds)).prod(axis=1)
    return WeightSet(scheme="IPW", values=values, ps_source=ps)


def overlap(ps: SequentialPS, ds: PanelDataset) -> WeightSet:
    """w_i = prod_d [T(1-e) + (1-T)e], the opposite-arm probability product."""
    e = ps.propensity_matrix()
    opposite = np.where(ds.exposure == 1, 1.0 - e, e)
    return WeightSet(scheme="OW", values=opposite.prod(axis=1), ps_source=ps)


def _numerator_design(ds: PanelDataset, d: int) -> PSDesign:
    # intercept plus up to two exposure lags; lags before period 1 are dropped
    n = ds.n
    cols = [np.ones((n, 1))]
    names = ["intercept"]
    if d >= 2:
        cols.append(ds.exposure[:, d - 2][:, None].astype(float))
        names.append(f"t_{d - 1}")
    if d >= 3:
        cols.append(ds.exposure[:, d - 3][:, None].astype(float))
        names.append(f"t_{d - 2}")
    return PSDesign(d=d, matrix=np.ascontiguousarray(np.hstack(cols)),
                    response=ds.exposure[:, d - 1].astype(float),
                    columns=tuple(names))


def stabilized(ps: SequentialPS, ds: PanelDataset) -> WeightSet:
    """IPW with an exposure-history-only numerator.

    Per period, the numerator is a logistic regression of T_d on an intercept
    and the previous two exposures; sw_i multiplies numerator/denominator
    observed-arm probabilities across periods. With a correctly specified
    denominator the sample mean is close to one.
    """
    denom = _observed_arm_probs(ps, ds)
    values = np.ones(ds.n)
    for d in range(1, ds.n_periods + 1):
        design = _numerator_design(ds, d)
        try:
            num_fit = fit_mle(design)
        except FitError as exc:
            raise type(exc)(f"stabilized-weight numerator, time {d}: {exc}") from exc
        p = num_fit.e_mle
        num = np.where(ds.exposure[:, d - 1] == 1, p, 1.0 - p)
        values = values * (num / denom[:, d - 1])
    return WeightSet(scheme="SW", values=values, ps_source=ps)


def nearest_rank(values: np.ndarray, q: float) -> float:
    """Smallest value with at least a q fraction of the sample at or below it."""
    srt = np.sort(np.asarray(values))
    k = max(1, math.ceil(q * srt.size))
    return float(srt[k - 1])


def weight_summary(ws: WeightSet | np.ndarray) -> WeightSummary:
    values = ws.values if isinstance(ws, WeightSet) else np.asarray(ws, dtype=float)
    if values.size == 0:
        raise ValueError("cannot summarize an empty weight vector")
    srt = np.sort(values)
    top = max(1, math.ceil(0.01 * srt.size))
    total = srt.sum()
    share = float(srt[-top:].sum() / total) if total > 0 else float("nan")
    return WeightSummary(
        p75=nearest_rank(srt, 0.75),
        p95=nearest_rank(srt, 0.95),
        p99=nearest_rank(srt, 0.99),
        maximum=float(srt[-1]),
        top_1pct_share=share,
    )
