"""Causal effect estimation for time-varying binary exposures.

Marginal structural outcome models with cumulative-exposure dose response,
fitted by inverse-probability, stabilized, or overlap weighting, or by
stochastic pruning to the consistent overlap subset with posterior-predictive
assignment draws. Includes a simulation generator with known truth, a
bootstrap engine, and a replication harness for the benchmark study.
"""

from .bootstrap import (BootstrapResult, bootstrap_all, bootstrap_effect,
                        resample, resample_indices)
from .errors import (BootstrapUnstableError, ConfigError, FitError,
                     InfeasibleSubsetError, NoContrastError,
                     PanelValidationError, RankDeficiencyError,
                     SeparationError, TvmsmError)
from .harness import ReplicationReport, StudyConfig, replicate, score_against_reference
from .msm import EffectEstimate, MsmSpec, fit_on_subset, fit_weighted
from .panel import (ExposurePattern, PanelDataset, pattern_census,
                    read_panel_csv, validate, write_panel_csv)
from .pipeline import estimate_effect, weight_set
from .ppta import (OverlapDraw, PptaRun, draw_overlap_states, point_and_spread,
                   write_ppta_outputs)
from .ppta import run as ppta_run
from .propensity import (PSDesign, PSFit, SequentialPS, build_design,
                         export_posterior_draws, fit_mle, fit_sequential,
                         posterior_draws_frame, predict_ps, sample_posterior)
from .simgen import (SimConfig, SimulatedDataset, TrueEstimands, compute_dgcop,
                     compute_dgcop_states, generate, true_estimands)
from .weights import WeightSet, WeightSummary, ipw, overlap, stabilized, weight_summary

__version__ = "0.1.0"

__all__ = [
    "BootstrapResult", "bootstrap_all", "bootstrap_effect", "resample",
    "resample_indices", "BootstrapUnstableError", "ConfigError", "FitError",
    "InfeasibleSubsetError", "NoContrastError", "PanelValidationError",
    "RankDeficiencyError", "SeparationError", "TvmsmError",
    "ReplicationReport", "StudyConfig", "replicate", "score_against_reference",
    "EffectEstimate", "MsmSpec", "fit_on_subset", "fit_weighted",
    "ExposurePattern", "PanelDataset", "pattern_census", "read_panel_csv",
    "validate", "write_panel_csv", "estimate_effect", "weight_set",
    "OverlapDraw", "PptaRun", "draw_overlap_states", "point_and_spread",
    "write_ppta_outputs", "ppta_run", "PSDesign", "PSFit", "SequentialPS",
    "build_design", "export_posterior_draws", "fit_mle", "fit_sequential",
    "posterior_draws_frame", "predict_ps", "sample_posterior",
    "SimConfig", "SimulatedDataset", "TrueEstimands",
    "compute_dgcop", "compute_dgcop_states", "generate", "true_estimands",
    "WeightSet", "WeightSummary", "ipw", "overlap", "stabilized",
    "weight_summary",
]
