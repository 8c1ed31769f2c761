"""Stochastic pruning to the consistent overlap subset (COS).

For each of K posterior coefficient draws, a hypothetical exposure is drawn
per unit and period from the implied propensity; a unit's overlap state at a
period is 1 when that draw lands on the arm opposite the observed one. Units
in the opposite arm at every period form the COS for that iteration, and the
outcome model fitted on the COS yields one exposure-contrast sample. The
point estimate averages the feasible iterations, and each unit's share of
iterations spent in the COS is its marginal inclusion probability.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.special import expit

from ._rng import derive_seed, rng_for
from .errors import FitError, InfeasibleSubsetError
from .msm import EffectEstimate, MsmSpec, fit_on_subset
from .panel import PanelDataset
from .propensity import (DEFAULT_BURN_IN, DEFAULT_THIN, PROB_CLAMP,
                         build_design, fit_sequential)

log = logging.getLogger(__name__)

DEFAULT_MIN_COS = 10
_BLOCK = 128  # iterations per vectorized block; has no effect on results


@dataclass(frozen=True)
class OverlapDraw:
    """One iteration's overlap states and membership (optionally its estimate)."""

    k: int
    s: np.ndarray          # (n, D) uint8 overlap states
    cos: np.ndarray        # indices of units with all-ones rows of s
    delta_k: float | None = None
    feasible: bool = False


@dataclass
class PptaRun:
    """Aggregated output of K pruning iterations."""

    K: int
    link: str
    min_cos: int
    deltas: np.ndarray             # (K,) contrast per iteration, NaN when infeasible
    beta0s: np.ndarray             # (K,) intercept per iteration, NaN when infeasible
    cos_sizes: np.ndarray          # (K,) int
    feasible: np.ndarray           # (K,) bool
    marginal_inclusion: np.ndarray  # (n,) fraction of iterations in the COS
    delta_hat: float               # mean of feasible deltas
    cos_size_mean: float
    cos_size_sd: float
    ever_used_fraction: float      # share of units with positive inclusion
    skipped: int                   # infeasible iteration count
    insufficient_overlap: bool     # more than half the iterations infeasible
    draws: list[OverlapDraw] | None = None

    @property
    def n_feasible(self) -> int:
        return int(self.feasible.sum())

    def deltas_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "k": np.arange(1, self.K + 1),
            "feasible": self.feasible.astype(int),
            "cos_size": self.cos_sizes,
            "delta": self.deltas,
        })

    def inclusion_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "id": np.arange(1, self.marginal_inclusion.size + 1),
            "marginal_inclusion": self.marginal_inclusion,
            "ever_in_cos": (self.marginal_inclusion > 0).astype(int),
        })

    def to_effect_estimate(self, method: str = "PPTA",
                           estimand: str = "ATO") -> EffectEstimate:
        if self.n_feasible == 0:
            raise FitError("no feasible pruning iterations; cannot form an estimate")
        if self.link == "identity":
            beta0 = float(np.nanmean(self.beta0s))
            beta = self.delta_hat
        else:
            beta0 = float(np.log(np.nanmean(np.exp(self.beta0s))))
            beta = float(np.log(self.delta_hat))
        return EffectEstimate(method=method, estimand=estimand, link=self.link,
                              beta0=beta0, beta=beta, delta=self.delta_hat)


def write_ppta_outputs(run: PptaRun, outdir) -> None:
    from pathlib import Path
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    run.deltas_frame().to_csv(outdir / "ppta_deltas.csv", index=False)
    run.inclusion_frame().to_csv(outdir / "inclusion.csv", index=False)


def draw_overlap_states(e_k: np.ndarray, exposure: np.ndarray,
                        rng: np.random.Generator, k: int = 0) -> OverlapDraw:
    """Draw hypothetical assignments at probabilities ``e_k`` and flag opposites.

    ``s[i, d] = 1`` exactly when the Bernoulli(e_k[i, d]) draw differs from the
    observed exposure; the COS collects units opposite at every period.
    """
    e_k = np.asarray(e_k, dtype=float)
    if np.any((e_k <= 0) | (e_k >= 1)):
        raise ValueError("assignment probabilities must lie strictly inside (0, 1)")
    assigned = rng.random(e_k.shape) < e_k
    s = (assigned != (np.asarray(exposure) == 1)).astype(np.uint8)
    cos = np.flatnonzero(s.all(axis=1))
    return OverlapDraw(k=k, s=s, cos=cos)


def run(ds: PanelDataset, K: int, spec: MsmSpec, seed: int,
        min_cos: int = DEFAULT_MIN_COS, burn_in: int = DEFAULT_BURN_IN,
        thin: int = DEFAULT_THIN, draws: list[np.ndarray] | None = None,
        keep_draws: bool = False) -> PptaRun:
    """Full pruning estimator: posterior sampling, COS draws, per-iteration fits.

    Seed layout: (seed, 0) drives the per-period Metropolis chains and
    (seed, 1) the assignment draws, so iterations are reproducible and could
    be processed in any order. ``draws`` may supply precomputed coefficient
    draw matrices (one (K, p_d) array per period) to bypass the sampler, e.g.
    to study a propensity model frozen at the MLE.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if min_cos < 3:
        raise ValueError("min_cos must be >= 3 (the subset fit needs a contrast)")
    n, D = ds.n, ds.n_periods
    designs = [build_design(ds, d) for d in range(1, D + 1)]
    if draws is None:
        seq = fit_sequential(ds, mode="posterior", K=K, seed=derive_seed(seed, 0),
                             burn_in=burn_in, thin=thin)
        draws = [fit.posterior_draws for fit in seq.fits]
    else:
        if len(draws) != D:
            raise ValueError(f"need one draw matrix per period, got {len(draws)}")
        draws = [np.asarray(a, dtype=float) for a in draws]
        for d, (a, design) in enumerate(zip(draws, designs), start=1):
            if a.shape != (K, design.p):
                raise ValueError(f"draw matrix for period {d} has shape {a.shape}, "
                                 f"expected ({K}, {design.p})")

    state_rng = rng_for(seed, 1)
    exposure_is_one = ds.exposure == 1
    deltas = np.full(K, np.nan)
    beta0s = np.full(K, np.nan)
    cos_sizes = np.zeros(K, dtype=np.int64)
    feasible = np.zeros(K, dtype=bool)
    inclusion_counts = np.zeros(n, dtype=np.int64)
    kept: list[OverlapDraw] | None = [] if keep_draws else None

    for k0 in range(0, K, _BLOCK):
        k1 = min(K, k0 + _BLOCK)
        e_block = np.empty((k1 - k0, n, D))
        for j, design in enumerate(designs):
            e_block[:, :, j] = expit(draws[j][k0:k1] @ design.matrix.T)
        np.clip(e_block, PROB_CLAMP, 1 - PROB_CLAMP, out=e_block)
        assigned = state_rng.random((k1 - k0, n, D)) < e_block
        s_block = assigned != exposure_is_one[None, :, :]
        member = s_block.all(axis=2)
        inclusion_counts += member.sum(axis=0)
        for k in range(k0, k1):
            mask = member[k - k0]
            cos = np.flatnonzero(mask)
            cos_sizes[k] = cos.size
            est = None
            if cos.size >= min_cos:
                try:
                    est = fit_on_subset(ds, cos, spec, method="PPTA",
                                        estimand="ATO", min_size=min_cos)
                except InfeasibleSubsetError:
                    est = None
            if est is not None:
                deltas[k] = est.delta
                beta0s[k] = est.beta0
                feasible[k] = True
            if keep_draws:
                kept.append(OverlapDraw(k=k, s=s_block[k - k0].astype(np.uint8),
                                        cos=cos, delta_k=deltas[k] if feasible[k] else None,
                                        feasible=bool(feasible[k])))

    skipped = int((~feasible).sum())
    insufficient = skipped > K / 2
    if insufficient:
        log.warning("insufficient overlap: %d of %d pruning iterations had no "
                    "usable subset", skipped, K)
    marginal = inclusion_counts / K
    return PptaRun(
        K=K,
        link=spec.link,
        min_cos=min_cos,
        deltas=deltas,
        beta0s=beta0s,
        cos_sizes=cos_sizes,
        feasible=feasible,
        marginal_inclusion=marginal,
        delta_hat=float(np.nanmean(deltas)) if feasible.any() else float("nan"),
        cos_size_mean=float(cos_sizes.mean()),
        cos_size_sd=float(cos_sizes.std(ddof=1)) if K > 1 else 0.0,
        ever_used_fraction=float((marginal > 0).mean()),
        skipped=skipped,
        insufficient_overlap=insufficient,
        draws=kept,
    )


def point_and_spread(run: PptaRun) -> tuple[float, float]:
    """Mean and descriptive SD of the feasible per-iteration contrasts.

    The SD summarizes the pruning distribution only; interval estimation uses
    the bootstrap.
    """
    if run.n_feasible < 2:
        raise ValueError("need at least 2 feasible iterations for a spread")
    vals = run.deltas[run.feasible]
    return float(vals.mean()), float(vals.std(ddof=1))
