"""Outcome models: weighted GLM of the end-of-study outcome on cumulative exposure.

The observed-data model regresses Y on [1, sum_d T_d] with per-unit weights,
either by weighted least squares (identity link, continuous outcomes) or by
weighted Poisson IRLS with an optional log person-time offset (log link,
count outcomes). The exposure contrast ``delta`` is the slope on the identity
scale and the exponentiated slope (a rate ratio) on the log scale.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import FitError, InfeasibleSubsetError, NoContrastError
from .panel import PanelDataset

Z975 = 1.959963984540054

LINKS = ("identity", "log")
METHODS = ("IPW", "SW", "OW", "PPTA", "UNWEIGHTED")
_DEFAULT_ESTIMAND = {"IPW": "ATE", "SW": "ATE", "OW": "ATO", "PPTA": "ATO",
                     "UNWEIGHTED": "ATE"}


@dataclass(frozen=True)
class MsmSpec:
    """Outcome-model specification. The regressor is always cumulative exposure."""

    link: str = "identity"
    offset_used: bool = True  # apply the log person-time offset when present

    def __post_init__(self):
        if self.link not in LINKS:
            raise ValueError(f"unknown link {self.link!r}")


@dataclass(frozen=True)
class EffectEstimate:
    method: str
    estimand: str
    link: str
    beta0: float
    beta: float
    delta: float            # beta for identity link, exp(beta) for log link
    se: float | None = None          # on the fitted (beta) scale
    ci95: tuple[float, float] | None = None  # on the delta scale

    def with_uncertainty(self, se: float) -> "EffectEstimate":
        lo, hi = self.beta - Z975 * se, self.beta + Z975 * se
        if self.link == "log":
            lo, hi = np.exp(lo), np.exp(hi)
        return replace(self, se=float(se), ci95=(float(lo), float(hi)))

    def to_record(self) -> dict:
        return {
            "method": self.method,
            "estimand": self.estimand,
            "link": self.link,
            "beta0": self.beta0,
            "beta": self.beta,
            "delta": self.delta,
            "se": self.se,
            "ci_low": None if self.ci95 is None else self.ci95[0],
            "ci_high": None if self.ci95 is None else self.ci95[1],
        }


def _check_weights(w: np.ndarray, n: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"weight vector has shape {w.shape}, expected ({n},)")
    if not np.isfinite(w).all():
        raise ValueError("weights contain NaN or infinite values")
    if (w < 0).any():
        raise ValueError("weights must be non-negative")
    if not (w > 0).any():
        raise ValueError("weights are all zero")
    return w


def _check_contrast(s: np.ndarray, w: np.ndarray) -> None:
    used = s[w > 0]
    if used.min() == used.max():
        raise NoContrastError(
            "no contrast: cumulative exposure is constant among positively "
            "weighted units")


def _check_link(ds: PanelDataset, spec: MsmSpec) -> None:
    if spec.link == "identity" and ds.outcome_kind != "continuous":
        raise FitError("identity link requires a continuous outcome")
    if spec.link == "log" and ds.outcome_kind != "count":
        raise FitError("log link requires a count outcome")


def _wls(y: np.ndarray, s: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    sw = w.sum()
    sws = w @ s
    A = np.array([[sw, sws], [sws, w @ (s * s)]])
    b = np.array([w @ y, w @ (s * y)])
    beta0, beta = np.linalg.solve(A, b)
    return float(beta0), float(beta)


def _poisson_irls(y: np.ndarray, s: np.ndarray, w: np.ndarray,
                  log_offset: np.ndarray, tol: float = 1e-10,
                  max_iter: int = 100) -> tuple[float, float]:
    X = np.column_stack([np.ones_like(s), s])
    wy = w * y
    Xtwy = X.T @ wy
    scale = 1.0 + np.max(np.abs(Xtwy))
    total = wy.sum()
    if total <= 0:
        raise FitError("log link requires some positive weighted counts")
    beta = np.array([np.log(total / (w @ np.exp(log_offset))), 0.0])

    def loglik(b):
        eta = X @ b + log_offset
        return float(wy @ eta - w @ np.exp(np.clip(eta, -700, 700)))

    ll = loglik(beta)
    for _ in range(max_iter):
        eta = X @ beta + log_offset
        mu = np.exp(np.clip(eta, -700, 700))
        score = Xtwy - X.T @ (w * mu)
        if np.max(np.abs(score)) < tol * scale:
            return float(beta[0]), float(beta[1])
        H = X.T @ (X * (w * mu)[:, None])
        try:
            step = np.linalg.solve(H, score)
        except np.linalg.LinAlgError as exc:
            raise FitError("singular information matrix in Poisson IRLS") from exc
        # slack scales with |ll|: the weighted sum carries rounding noise
        slack = 1e-9 * (1.0 + abs(ll))
        for _ in range(40):
            cand = beta + step
            ll_cand = loglik(cand)
            if ll_cand >= ll - slack:
                break
            step = step / 2
        beta, ll = cand, ll_cand
    raise FitError(f"Poisson IRLS did not converge in {max_iter} iterations")


def fit_weighted(ds: PanelDataset, w, spec: MsmSpec,
                 method: str = "UNWEIGHTED",
                 estimand: str | None = None) -> EffectEstimate:
    """Weighted outcome-model fit; returns coefficients and the exposure contrast.

    Requires at least two distinct cumulative-exposure values among units
    with positive weight, otherwise raises :class:`NoContrastError`.
    """
    _check_link(ds, spec)
    w = _check_weights(w, ds.n)
    s = ds.cumulative_exposure
    _check_contrast(s, w)
    if spec.link == "identity":
        beta0, beta = _wls(ds.outcome, s, w)
        delta = beta
    else:
        log_offset = (np.log(ds.offset) if (ds.offset is not None and spec.offset_used)
                      else np.zeros(ds.n))
        beta0, beta = _poisson_irls(ds.outcome, s, w, log_offset)
        delta = float(np.exp(beta))
    if estimand is None:
        estimand = _DEFAULT_ESTIMAND.get(method, "ATE")
    return EffectEstimate(method=method, estimand=estimand, link=spec.link,
                          beta0=beta0, beta=beta, delta=delta)


def fit_on_subset(ds: PanelDataset, members, spec: MsmSpec,
                  method: str = "UNWEIGHTED",
                  estimand: str | None = None,
                  min_size: int = 3) -> EffectEstimate:
    """Unweighted fit restricted to a unit subset.

    Equivalent to :func:`fit_weighted` with 0/1 weights. Subsets smaller than
    ``min_size`` or without an exposure contrast raise
    :class:`InfeasibleSubsetError` so callers can decide a skip policy.
    """
    members = np.asarray(list(members) if isinstance(members, set) else members,
                         dtype=np.intp)
    if members.size < min_size:
        raise InfeasibleSubsetError(
            f"infeasible subset: {members.size} units < minimum {min_size}")
    sub = ds.subset(members)
    try:
        return fit_weighted(sub, np.ones(sub.n), spec, method=method,
                            estimand=estimand)
    except NoContrastError as exc:
        raise InfeasibleSubsetError(f"infeasible subset: {exc}") from exc
