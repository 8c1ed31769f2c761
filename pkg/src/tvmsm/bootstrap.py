"""Nonparametric bootstrap over units, re-running the full pipeline per resample.

Each resample redraws n unit rows with replacement and repeats everything:
propensity refit, weight construction or pruning rerun, outcome-model fit.
Intervals are normal-approximation (point +/- 1.96 SE) on the fitted scale,
mapped to the contrast scale; percentile intervals are available for
comparison only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from ._rng import derive_seed, rng_for
from .errors import BootstrapUnstableError, FitError
from .msm import EffectEstimate, MsmSpec
from .panel import PanelDataset
from .pipeline import estimate_effect, normalize_method
from .ppta import DEFAULT_MIN_COS
from .propensity import DEFAULT_BURN_IN, DEFAULT_THIN, fit_sequential

DEFAULT_B = 100
MAX_FAILURE_SHARE = 0.2


@dataclass(frozen=True)
class BootstrapResult:
    B: int
    estimates: np.ndarray     # surviving per-resample estimates on `scale`
    scale: str                # "delta" (identity link) or "beta" (log link)
    se: float
    point: EffectEstimate     # original-data estimate with se and ci95 attached
    n_failed: int
    percentile_ci95: tuple[float, float] | None = None

    @property
    def ci95(self) -> tuple[float, float]:
        return self.point.ci95

    def estimates_frame(self):
        """Surviving per-resample estimates as a table (for optional CSV dumps)."""
        import pandas as pd
        return pd.DataFrame({"resample": np.arange(1, len(self.estimates) + 1),
                             "estimate": self.estimates,
                             "scale": self.scale})


def resample_indices(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, n, size=n)


def resample(ds: PanelDataset, rng: np.random.Generator) -> PanelDataset:
    """Draw n units i.i.d. with replacement; whole unit rows move together."""
    return ds.subset(resample_indices(ds.n, rng))


def _on_scale(est: EffectEstimate) -> float:
    return est.delta if est.link == "identity" else est.beta


def _one_resample(ds: PanelDataset, methods: tuple[str, ...], spec: MsmSpec,
                  seed: int, b: int, K: int | None, min_cos: int,
                  burn_in: int, thin: int) -> dict[str, float | None]:
    """Estimates for resample b; None marks a failed fit.

    Resample b draws its indices from stream (seed, b, 0) and any stochastic
    estimation from (seed, b, 1), independent of which methods are requested,
    so all methods see identical resampled datasets.
    """
    dsb = resample(ds, rng_for(seed, b, 0))
    out: dict[str, float | None] = {}
    seq_b = None
    weight_methods = [m for m in methods if m != "PPTA"]
    if weight_methods:
        try:
            seq_b = fit_sequential(dsb, mode="mle")
        except (FitError, np.linalg.LinAlgError):
            seq_b = None
            for m in weight_methods:
                out[m] = None
    for m in methods:
        if m in out:
            continue
        try:
            est = estimate_effect(dsb, m, spec, seed=derive_seed(seed, b, 1),
                                  K=K, min_cos=min_cos, burn_in=burn_in,
                                  thin=thin, seq=seq_b if m != "PPTA" else None)
            out[m] = _on_scale(est)
        except (FitError, np.linalg.LinAlgError):
            out[m] = None
    return out


def _finish(method: str, spec: MsmSpec, B: int, values: list[float | None],
            point: EffectEstimate, percentile: bool) -> BootstrapResult:
    estimates = [v for v in values if v is not None]
    n_failed = B - len(estimates)
    if n_failed > MAX_FAILURE_SHARE * B or len(estimates) < 2:
        raise BootstrapUnstableError(
            f"bootstrap unstable: {n_failed} of {B} resamples failed for {method}")
    arr = np.asarray(estimates)
    se = float(arr.std(ddof=1))
    point = point.with_uncertainty(se)
    pci = None
    if percentile:
        lo, hi = np.quantile(arr, [0.025, 0.975])
        if spec.link == "log":
            lo, hi = np.exp(lo), np.exp(hi)
        pci = (float(lo), float(hi))
    return BootstrapResult(B=B, estimates=arr,
                           scale="delta" if spec.link == "identity" else "beta",
                           se=se, point=point, n_failed=n_failed,
                           percentile_ci95=pci)


def bootstrap_all(ds: PanelDataset, methods, spec: MsmSpec, B: int, seed: int,
                  K: int | None = None, min_cos: int = DEFAULT_MIN_COS,
                  burn_in: int = DEFAULT_BURN_IN, thin: int = DEFAULT_THIN,
                  points: dict[str, EffectEstimate] | None = None,
                  percentile: bool = False,
                  n_jobs: int = 1) -> dict[str, BootstrapResult]:
    """Bootstrap one or more methods over shared resamples.

    Seed layout: the original-data point estimate (when not passed in) uses
    (seed, 0); resample b uses (seed, b, 0) and (seed, b, 1). Results are
    identical for any ``n_jobs``. Failed resamples are dropped and counted;
    more than 20% failures for a method raises
    :class:`BootstrapUnstableError`.
    """
    methods = tuple(normalize_method(m) for m in methods)
    if B < 2:
        raise ValueError("B must be >= 2")
    points = dict(points or {})
    for m in methods:
        if m not in points:
            points[m] = estimate_effect(ds, m, spec, seed=derive_seed(seed, 0),
                                        K=K, min_cos=min_cos, burn_in=burn_in,
                                        thin=thin)
    rows = Parallel(n_jobs=n_jobs)(
        delayed(_one_resample)(ds, methods, spec, seed, b, K, min_cos,
                               burn_in, thin)
        for b in range(1, B + 1))
    return {m: _finish(m, spec, B, [row[m] for row in rows], points[m], percentile)
            for m in methods}


def bootstrap_effect(ds: PanelDataset, method: str, spec: MsmSpec, B: int,
                     seed: int, K: int | None = None,
                     min_cos: int = DEFAULT_MIN_COS,
                     burn_in: int = DEFAULT_BURN_IN, thin: int = DEFAULT_THIN,
                     point: EffectEstimate | None = None,
                     percentile: bool = False,
                     n_jobs: int = 1) -> BootstrapResult:
    """Bootstrap SE and normal-approximation interval for one method."""
    method = normalize_method(method)
    points = None if point is None else {method: point}
    return bootstrap_all(ds, (method,), spec, B=B, seed=seed, K=K,
                         min_cos=min_cos, burn_in=burn_in, thin=thin,
                         points=points, percentile=percentile,
                         n_jobs=n_jobs)[method]
