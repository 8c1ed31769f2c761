"""Sequential propensity-score models for period-specific exposure assignment.

The exposure at period d is modelled by logistic regression on the baseline
covariates, the current and one-period-lagged covariates, and one- and
two-period exposure lags (lag terms are dropped, not zero-filled, when the
lag precedes the first period, so early-period models have fewer columns).
Fitting is by Newton/IRLS maximum likelihood; Bayesian posterior draws under
a flat coefficient prior come from a random-walk Metropolis chain started at
the MLE with Fisher-scaled proposals.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, LinAlgError
from scipy.special import expit

from ._rng import rng_for
from .errors import FitError, RankDeficiencyError, SeparationError
from .panel import PanelDataset

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-12          # fitted probabilities kept inside [clamp, 1-clamp]
COEF_NORM_LIMIT = 1e3       # ||alpha|| beyond this is treated as quasi-separation
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100
DEFAULT_BURN_IN = 1000
DEFAULT_THIN = 1
ACCEPTANCE_BAND = (0.1, 0.6)


@dataclass(frozen=True)
class PSDesign:
    """Regressors and response for one period's exposure model (d is 1-based)."""

    d: int
    matrix: np.ndarray    # (n, p_d)
    response: np.ndarray  # (n,) float in {0., 1.}
    columns: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def p(self) -> int:
        return self.matrix.shape[1]


@dataclass
class PSFit:
    """One period's fitted exposure model."""

    alpha_mle: np.ndarray          # (p,)
    fisher_cov: np.ndarray         # (p, p) inverse Fisher information at the MLE
    e_mle: np.ndarray              # (n,) fitted probabilities, clamped
    posterior_draws: np.ndarray | None = None  # (K, p)
    acceptance_rate: float | None = None
    ll_trace: list[float] = field(default_factory=list, repr=False)


@dataclass
class SequentialPS:
    """Per-period fits for d = 1..D, all derived from the same dataset."""

    fits: list[PSFit]

    @property
    def n_periods(self) -> int:
        return len(self.fits)

    def propensity_matrix(self) -> np.ndarray:
        """(n, D) matrix of MLE-fitted exposure probabilities."""
        return np.column_stack([f.e_mle for f in self.fits])


def design_width(pW: int, pX: int, d: int) -> int:
    return 1 + pW + pX * min(d, 2) + min(d - 1, 2)


def build_design(ds: PanelDataset, d: int) -> PSDesign:
    """Design for period d: [intercept | W | X_d | X_{d-1} | T_{d-1} | T_{d-2}]."""
    if not 1 <= d <= ds.n_periods:
        raise ValueError(f"period {d} outside 1..{ds.n_periods}")
    n = ds.n
    cols: list[np.ndarray] = [np.ones((n, 1))]
    names = ["intercept"]
    cols.append(ds.baseline)
    names += [f"w_{j + 1}" for j in range(ds.n_baseline)]
    cols.append(ds.timevarying[:, d - 1, :])
    names += [f"x_{d}_{j + 1}" for j in range(ds.n_timevarying)]
    if d >= 2:
        cols.append(ds.timevarying[:, d - 2, :])
        names += [f"x_{d - 1}_{j + 1}" for j in range(ds.n_timevarying)]
        cols.append(ds.exposure[:, d - 2][:, None].astype(float))
        names.append(f"t_{d - 1}")
    if d >= 3:
        cols.append(ds.exposure[:, d - 3][:, None].astype(float))
        names.append(f"t_{d - 2}")
    matrix = np.ascontiguousarray(np.hstack(cols))
    return PSDesign(d=d, matrix=matrix, response=ds.exposure[:, d - 1].astype(float),
                    columns=tuple(names))


def _log1pexp_sum(eta: np.ndarray, buf: np.ndarray | None = None,
                  buf2: np.ndarray | None = None) -> float:
    """sum_i log(1 + exp(eta_i)), overflow safe."""
    if buf is None:
        buf = np.empty_like(eta)
    if buf2 is None:
        buf2 = np.empty_like(eta)
    np.abs(eta, out=buf)
    np.negative(buf, out=buf)
    np.exp(buf, out=buf)
    np.log1p(buf, out=buf)
    np.maximum(eta, 0.0, out=buf2)
    return float(buf.sum() + buf2.sum())


def _clamped(p: np.ndarray) -> np.ndarray:
    n_low = int((p < PROB_CLAMP).sum())
    n_high = int((p > 1 - PROB_CLAMP).sum())
    if n_low or n_high:
        log.debug("clamping %d fitted probabilities to [%g, %g]",
                  n_low + n_high, PROB_CLAMP, 1 - PROB_CLAMP)
    return np.clip(p, PROB_CLAMP, 1 - PROB_CLAMP)


def fit_mle(design: PSDesign, tol: float = DEFAULT_TOL,
            max_iter: int = DEFAULT_MAX_ITER) -> PSFit:
    """Logistic MLE by Newton/IRLS with step halving.

    Iterates until every score component is below ``tol``. Raises
    :class:`SeparationError` when no MLE exists (single-class response,
    diverging coefficients, or no convergence) and
    :class:`RankDeficiencyError` for collinear designs.
    """
    X, y = design.matrix, design.response
    n, p = X.shape
    ones = y.sum()
    if ones == 0 or ones == n:
        raise SeparationError("response takes a single class; no MLE exists")

    Xty = X.T @ y
    alpha = np.zeros(p)
    ll = -n * np.log(2.0)
    trace = [ll]
    converged = False
    for _ in range(max_iter):
        mu = expit(X @ alpha)
        score = Xty - X.T @ mu
        if np.max(np.abs(score)) < tol:
            converged = True
            break
        w = np.clip(mu * (1 - mu), 1e-12, None)
        H = X.T @ (X * w[:, None])
        try:
            step = cho_solve(cho_factor(H, lower=True), score)
        except LinAlgError as exc:
            raise RankDeficiencyError("design matrix is rank deficient") from exc
        # slack scales with |ll| because the n-term sum carries rounding noise;
        # genuine overshoots decrease the log likelihood by far more
        slack = 1e-9 * (1.0 + abs(ll))
        for _ in range(40):
            cand = alpha + step
            ll_cand = Xty @ cand - _log1pexp_sum(X @ cand)
            if ll_cand >= ll - slack:
                break
            step = step / 2
        alpha, ll = cand, ll_cand
        trace.append(ll)
        if np.linalg.norm(alpha) > COEF_NORM_LIMIT:
            raise SeparationError(
                "quasi-separation: coefficient norm exceeded "
                f"{COEF_NORM_LIMIT:g} during IRLS")
    if not converged:
        raise SeparationError(f"quasi-separation: IRLS did not converge in {max_iter} iterations")

    mu = expit(X @ alpha)
    w = np.clip(mu * (1 - mu), 1e-12, None)
    H = X.T @ (X * w[:, None])
    try:
        fisher_cov = cho_solve(cho_factor(H, lower=True), np.eye(p))
    except LinAlgError as exc:
        raise RankDeficiencyError("Fisher information is singular at the MLE") from exc
    return PSFit(alpha_mle=alpha, fisher_cov=fisher_cov, e_mle=_clamped(mu),
                 ll_trace=trace)


def predict_ps(alpha: np.ndarray, design: PSDesign) -> np.ndarray:
    """Inverse-logit of the linear predictor, clamped for downstream safety."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (design.p,):
        raise ValueError(f"alpha has length {alpha.shape}, design expects {design.p}")
    return _clamped(expit(design.matrix @ alpha))


def _metropolis_draws(X: np.ndarray, response: np.ndarray, alpha0: np.ndarray,
                      proposal_chol: np.ndarray, K: int, burn_in: int, thin: int,
                      rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Random-walk Metropolis on the flat-prior logistic posterior.

    Proposal steps and the acceptance uniforms are drawn up front, in that
    order, so the chain is a pure function of the generator state.
    """
    total = burn_in + K * thin
    steps = rng.standard_normal((total, alpha0.size)) @ proposal_chol.T
    logu = np.log(rng.random(total))
    Xty = X.T @ response
    buf = np.empty(X.shape[0])
    buf2 = np.empty(X.shape[0])
    alpha = alpha0.copy()
    ll = Xty @ alpha - _log1pexp_sum(X @ alpha, buf, buf2)
    draws = np.empty((K, alpha0.size))
    accepted = 0
    j = 0
    for t in range(total):
        cand = alpha + steps[t]
        ll_cand = Xty @ cand - _log1pexp_sum(X @ cand, buf, buf2)
        if ll_cand - ll > logu[t]:
            alpha, ll = cand, ll_cand
            accepted += 1
        if t >= burn_in and (t - burn_in) % thin == thin - 1:
            draws[j] = alpha
            j += 1
    return draws, accepted / total


def sample_posterior(design: PSDesign, K: int, seed: int,
                     burn_in: int = DEFAULT_BURN_IN, thin: int = DEFAULT_THIN,
                     mle: PSFit | None = None,
                     rng: np.random.Generator | None = None) -> PSFit:
    """K flat-prior posterior draws of the coefficients, plus the MLE fit.

    The chain starts at the MLE with proposal covariance c^2 times the
    inverse Fisher information, c = 2.38/sqrt(p); the first ``burn_in``
    iterations are discarded and every ``thin``-th retained until K draws
    are kept. An acceptance rate outside [0.1, 0.6] triggers a warning.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    fit = mle if mle is not None else fit_mle(design)
    c = 2.38 / np.sqrt(design.p)
    chol = c * cholesky(fit.fisher_cov, lower=True)
    if rng is None:
        rng = rng_for(seed)
    draws, rate = _metropolis_draws(design.matrix, design.response, fit.alpha_mle,
                                    chol, K, burn_in, thin, rng)
    if not ACCEPTANCE_BAND[0] <= rate <= ACCEPTANCE_BAND[1]:
        word = "Low" if rate < ACCEPTANCE_BAND[0] else "High"
        warnings.warn(f"{word} Metropolis acceptance rate {rate:.3f} at period "
                      f"{design.d}", RuntimeWarning, stacklevel=2)
    return PSFit(alpha_mle=fit.alpha_mle, fisher_cov=fit.fisher_cov,
                 e_mle=fit.e_mle, posterior_draws=draws, acceptance_rate=rate,
                 ll_trace=fit.ll_trace)


def posterior_draws_frame(seq: SequentialPS, d: int):
    """Posterior coefficient draws for period d as a table, one row per draw."""
    import pandas as pd
    fit = seq.fits[d - 1]
    if fit.posterior_draws is None:
        raise ValueError(f"period {d} carries no posterior draws")
    frame = pd.DataFrame(fit.posterior_draws,
                         columns=[f"a{j}" for j in range(fit.posterior_draws.shape[1])])
    frame.insert(0, "k", np.arange(1, len(frame) + 1))
    return frame


def export_posterior_draws(seq: SequentialPS, outdir) -> None:
    """Debugging dump: one CSV of coefficient draws per period."""
    from pathlib import Path
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for d in range(1, seq.n_periods + 1):
        posterior_draws_frame(seq, d).to_csv(outdir / f"posterior_draws_d{d}.csv",
                                             index=False)


def fit_sequential(ds: PanelDataset, mode: str = "mle", K: int | None = None,
                   seed: int | None = None, burn_in: int = DEFAULT_BURN_IN,
                   thin: int = DEFAULT_THIN, tol: float = DEFAULT_TOL) -> SequentialPS:
    """Fit the exposure model independently at every period.

    ``mode="posterior"`` additionally attaches K Metropolis draws per period;
    each period's chain uses its own stream derived from (seed, d), so fits
    could run in any order or in parallel with identical results.
    """
    if mode not in ("mle", "posterior"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "posterior":
        if K is None or seed is None:
            raise ValueError("posterior mode requires K and seed")
    fits = []
    for d in range(1, ds.n_periods + 1):
        design = build_design(ds, d)
        try:
            fit = fit_mle(design, tol=tol)
            if mode == "posterior":
                fit = sample_posterior(design, K, seed=0, burn_in=burn_in,
                                       thin=thin, mle=fit, rng=rng_for(seed, d))
        except FitError as exc:
            raise type(exc)(f"time {d}: {exc}") from exc
        fits.append(fit)
    return SequentialPS(fits=fits)
