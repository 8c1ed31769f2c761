"""Miniature replication study: all four estimators with bootstrap intervals.

A desk-scale version of the full harness run (a handful of replicates, small
K and B) to show the report structure: per-method bias against its own target
value, empirical SD across replicates, mean bootstrap SE, and coverage. Scale
R/K/B up (or use the command line's `replicate --full`) for benchmark-quality
numbers.
"""
from tvmsm import StudyConfig, replicate, score_against_reference

study = StudyConfig(mode="heterogeneous", D=3, R=6, n=2000, K=150, B=8,
                    seed=2024, min_cos=3, n_oracle=200_000)
report = replicate(study)

print(f"targets: population contrast {report.truth.ate:.3f}, "
      f"overlap contrast {report.truth.ato:.3f}, "
      f"overlap-group share {report.truth.dgcop_share:.3f}")
print(f"completed replicates: {report.n_completed}\n")
print(report.to_frame().to_string(index=False))
print("\npruning diagnostics:")
print(report.cos_frame().to_string(index=False))
print("\ncomparison against the published reference values "
      "(MC noise is large at this scale):")
print(score_against_reference(report, 2).to_string(index=False))
