"""Single-dataset estimation: fit the propensity model, weight, fit the outcome model.

This is the unit of work that the bootstrap repeats on every resample and
that the replication harness runs per simulated dataset.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .msm import EffectEstimate, MsmSpec, fit_weighted
from .panel import PanelDataset
from .ppta import DEFAULT_MIN_COS, PptaRun
from .ppta import run as ppta_run
from .propensity import DEFAULT_BURN_IN, DEFAULT_THIN, SequentialPS, fit_sequential
from .weights import WeightSet, ipw, overlap, stabilized

WEIGHT_BUILDERS = {"IPW": ipw, "SW": stabilized, "OW": overlap}
ALL_METHODS = ("IPW", "SW", "OW", "PPTA")


def normalize_method(method: str) -> str:
    m = method.strip().upper()
    if m not in (*ALL_METHODS, "UNWEIGHTED"):
        raise ConfigError(f"unknown method {method!r}; expected one of "
                          f"{ALL_METHODS + ('UNWEIGHTED',)}")
    return m


def weight_set(ds: PanelDataset, scheme: str,
               seq: SequentialPS | None = None) -> WeightSet:
    scheme = normalize_method(scheme)
    if scheme not in WEIGHT_BUILDERS:
        raise ConfigError(f"{scheme} is not a weighting scheme")
    if seq is None:
        seq = fit_sequential(ds, mode="mle")
    return WEIGHT_BUILDERS[scheme](seq, ds)


def estimate_effect(ds: PanelDataset, method: str, spec: MsmSpec,
                    seed: int | None = None, K: int | None = None,
                    min_cos: int = DEFAULT_MIN_COS,
                    burn_in: int = DEFAULT_BURN_IN, thin: int = DEFAULT_THIN,
                    seq: SequentialPS | None = None,
                    ppta_result: list[PptaRun] | None = None) -> EffectEstimate:
    """Point estimate of the exposure contrast for one method.

    For the weighting methods a maximum-likelihood sequential fit (reusable
    via ``seq``) feeds the weight construction; the pruning method needs
    ``K`` and ``seed``. Passing a list as ``ppta_result`` appends the full
    :class:`PptaRun` for callers that want the pruning diagnostics too.
    """
    method = normalize_method(method)
    if method == "UNWEIGHTED":
        return fit_weighted(ds, np.ones(ds.n), spec, method=method)
    if method == "PPTA":
        if K is None or seed is None:
            raise ConfigError("PPTA estimation requires K and seed")
        run = ppta_run(ds, K=K, spec=spec, seed=seed, min_cos=min_cos,
                       burn_in=burn_in, thin=thin)
        if ppta_result is not None:
            ppta_result.append(run)
        return run.to_effect_estimate()
    ws = weight_set(ds, method, seq=seq)
    return fit_weighted(ds, ws.values, spec, method=method)
