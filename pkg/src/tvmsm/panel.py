"""Panel data model for longitudinal binary-exposure studies.

A panel holds n units observed over D exposure periods: fixed baseline
covariates, period-specific covariates, a binary exposure per period, and a
single end-of-study outcome (optionally a count with a person-time offset).
Datasets are validated once and treated as immutable afterwards, so they can
be shared freely across parallel workers; unit rows are stored contiguously
so that bootstrap resampling is a plain row gather.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import PanelValidationError

OUTCOME_KINDS = ("continuous", "count")


@dataclass(frozen=True)
class PanelDataset:
    """Validated rectangular panel. Build via :func:`validate` or the CSV reader."""

    baseline: np.ndarray       # (n, pW) float
    timevarying: np.ndarray    # (n, D, pX) float
    exposure: np.ndarray       # (n, D) int8, values in {0, 1}
    outcome: np.ndarray        # (n,) float
    outcome_kind: str = "continuous"
    offset: np.ndarray | None = None  # (n,) strictly positive, count outcomes only

    @property
    def n(self) -> int:
        return self.exposure.shape[0]

    @property
    def n_periods(self) -> int:
        return self.exposure.shape[1]

    @property
    def n_baseline(self) -> int:
        return self.baseline.shape[1]

    @property
    def n_timevarying(self) -> int:
        return self.timevarying.shape[2]

    @property
    def cumulative_exposure(self) -> np.ndarray:
        """Per-unit count of exposed periods (the outcome-model regressor)."""
        return self.exposure.sum(axis=1).astype(float)

    def subset(self, indices) -> "PanelDataset":
        """Row gather; duplicate indices allowed (bootstrap resamples)."""
        idx = np.asarray(indices, dtype=np.intp)
        return PanelDataset(
            baseline=self.baseline[idx],
            timevarying=self.timevarying[idx],
            exposure=self.exposure[idx],
            outcome=self.outcome[idx],
            outcome_kind=self.outcome_kind,
            offset=None if self.offset is None else self.offset[idx],
        )


@dataclass(frozen=True)
class ExposurePattern:
    """A complete exposure history and its number of exposed periods."""

    bits: tuple[int, ...]
    total: int = field(default=-1)

    def __post_init__(self):
        ones = sum(self.bits)
        if self.total == -1:
            object.__setattr__(self, "total", ones)
        elif self.total != ones:
            raise ValueError("total does not match the number of ones in bits")


def _lock(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def validate(baseline, timevarying, exposure, outcome, offset=None,
             outcome_kind: str = "continuous") -> PanelDataset:
    """Check a candidate panel and return an immutable dataset.

    Raises :class:`PanelValidationError` naming the first violated invariant.
    """
    baseline = np.asarray(baseline, dtype=float)
    timevarying = np.asarray(timevarying, dtype=float)
    exposure_raw = np.asarray(exposure)
    outcome = np.asarray(outcome, dtype=float)

    if outcome_kind not in OUTCOME_KINDS:
        raise PanelValidationError(f"unknown outcome kind {outcome_kind!r}")
    if baseline.ndim != 2:
        raise PanelValidationError("baseline must be an n x pW matrix")
    if timevarying.ndim != 3:
        raise PanelValidationError("timevarying must be an n x D x pX array")
    if exposure_raw.ndim != 2:
        raise PanelValidationError("exposure must be an n x D matrix")
    if outcome.ndim != 1:
        raise PanelValidationError("outcome must be a length-n vector")

    n, D = exposure_raw.shape
    if n < 1:
        raise PanelValidationError("need at least one unit")
    if D < 1:
        raise PanelValidationError("need at least one exposure period")
    if baseline.shape[0] != n or timevarying.shape[0] != n or outcome.shape[0] != n:
        raise PanelValidationError(
            f"inconsistent unit counts: exposure has {n}, baseline {baseline.shape[0]}, "
            f"timevarying {timevarying.shape[0]}, outcome {outcome.shape[0]}")
    if timevarying.shape[1] != D:
        raise PanelValidationError(
            f"timevarying covers {timevarying.shape[1]} periods but exposure covers {D}")

    for name, arr in (("baseline", baseline), ("timevarying", timevarying),
                      ("outcome", outcome)):
        if not np.isfinite(arr).all():
            raise PanelValidationError(f"{name} contains NaN or infinite values")

    bad = ~np.isin(exposure_raw, (0, 1)) | ~np.isfinite(exposure_raw.astype(float))
    if bad.any():
        unit, period = np.argwhere(bad)[0]
        raise PanelValidationError(
            f"non-binary exposure at (unit {unit}, time {period + 1})")
    exposure_arr = exposure_raw.astype(np.int8)

    if offset is not None:
        offset = np.asarray(offset, dtype=float)
        if offset.shape != (n,):
            raise PanelValidationError("offset must be a length-n vector")
        if not np.isfinite(offset).all():
            raise PanelValidationError("offset contains NaN or infinite values")
        if (offset <= 0).any():
            unit = int(np.flatnonzero(offset <= 0)[0])
            raise PanelValidationError(f"non-positive offset at unit {unit}")
        if outcome_kind != "count":
            raise PanelValidationError("offset is only meaningful for count outcomes")

    if outcome_kind == "count" and (outcome < 0).any():
        unit = int(np.flatnonzero(outcome < 0)[0])
        raise PanelValidationError(f"negative count outcome at unit {unit}")

    return PanelDataset(
        baseline=_lock(baseline),
        timevarying=_lock(timevarying),
        exposure=_lock(exposure_arr),
        outcome=_lock(outcome),
        outcome_kind=outcome_kind,
        offset=None if offset is None else _lock(offset),
    )


def pattern_census(ds: PanelDataset) -> list[tuple[ExposurePattern, int]]:
    """Distinct exposure patterns with unit counts, in lexicographic order."""
    rows, counts = np.unique(ds.exposure, axis=0, return_counts=True)
    return [(ExposurePattern(tuple(int(b) for b in row)), int(c))
            for row, c in zip(rows, counts)]


# Wide CSV schema: id, w_1..w_pW, then per period d: x_<d>_1..x_<d>_pX, t_<d>,
# then y and optionally offset.

def panel_columns(pW: int, pX: int, D: int, with_offset: bool) -> list[str]:
    cols = ["id"] + [f"w_{j}" for j in range(1, pW + 1)]
    for d in range(1, D + 1):
        cols += [f"x_{d}_{j}" for j in range(1, pX + 1)]
        cols.append(f"t_{d}")
    cols.append("y")
    if with_offset:
        cols.append("offset")
    return cols


def to_frame(ds: PanelDataset) -> pd.DataFrame:
    n, D = ds.n, ds.n_periods
    data: dict[str, np.ndarray] = {"id": np.arange(1, n + 1)}
    for j in range(ds.n_baseline):
        data[f"w_{j + 1}"] = ds.baseline[:, j]
    for d in range(D):
        for j in range(ds.n_timevarying):
            data[f"x_{d + 1}_{j + 1}"] = ds.timevarying[:, d, j]
        data[f"t_{d + 1}"] = ds.exposure[:, d]
    data["y"] = ds.outcome
    if ds.offset is not None:
        data["offset"] = ds.offset
    return pd.DataFrame(data)


def write_panel_csv(ds: PanelDataset, path) -> None:
    # %.17g keeps float64 round-trips bit exact
    to_frame(ds).to_csv(path, index=False, float_format="%.17g")


def read_panel_csv(path, pW: int, pX: int, D: int,
                   outcome_kind: str | None = None) -> PanelDataset:
    """Load a wide panel CSV against declared dimensions.

    The header must match the schema exactly (offset column optional). When
    ``outcome_kind`` is not given, the outcome is treated as a count when an
    offset column is present and as continuous otherwise.
    """
    path = Path(path)
    # round_trip parsing keeps write->read exact for %.17g-formatted floats
    df = pd.read_csv(path, float_precision="round_trip")
    with_offset = "offset" in df.columns
    expected = panel_columns(pW, pX, D, with_offset)
    if list(df.columns) != expected:
        missing = [c for c in expected if c not in df.columns]
        extra = [c for c in df.columns if c not in expected]
        detail = []
        if missing:
            detail.append(f"missing {missing}")
        if extra:
            detail.append(f"unexpected {extra}")
        if not detail:
            detail.append("column order differs from the declared schema")
        raise PanelValidationError(
            f"CSV header does not match declared dimensions (pW={pW}, pX={pX}, D={D}): "
            + "; ".join(detail))
    n = len(df)
    if n == 0:
        raise PanelValidationError("CSV contains no data rows")
    baseline = df[[f"w_{j}" for j in range(1, pW + 1)]].to_numpy(float)
    timevarying = np.empty((n, D, pX))
    exposure = np.empty((n, D))
    for d in range(1, D + 1):
        timevarying[:, d - 1, :] = df[[f"x_{d}_{j}" for j in range(1, pX + 1)]].to_numpy(float)
        exposure[:, d - 1] = df[f"t_{d}"].to_numpy()
    offset = df["offset"].to_numpy(float) if with_offset else None
    if outcome_kind is None:
        outcome_kind = "count" if with_offset else "continuous"
    return validate(baseline, timevarying, exposure, df["y"].to_numpy(float),
                    offset=offset, outcome_kind=outcome_kind)
