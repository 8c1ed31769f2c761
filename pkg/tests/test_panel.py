import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tvmsm import (ExposurePattern, PanelValidationError, pattern_census,
                   read_panel_csv, validate, write_panel_csv)
from tvmsm.panel import panel_columns, to_frame

from conftest import make_panel


def test_minimal_wellformed_panel():
    ds = validate(baseline=[[0.1], [0.2]], timevarying=[[[1.0]], [[2.0]]],
                  exposure=[[0], [1]], outcome=[1.0, 2.0])
    assert ds.n == 2 and ds.n_periods == 1
    assert ds.exposure.dtype == np.int8
    assert ds.cumulative_exposure.tolist() == [0.0, 1.0]


def test_nonbinary_exposure_rejected():
    with pytest.raises(PanelValidationError, match=r"non-binary exposure at \(unit 0, time 2\)"):
        validate(baseline=np.zeros((1, 1)), timevarying=np.zeros((1, 2, 1)),
                 exposure=[[0, 2]], outcome=[1.0])


def test_nonpositive_offset_rejected():
    with pytest.raises(PanelValidationError, match="non-positive offset"):
        validate(baseline=np.zeros((2, 1)), timevarying=np.zeros((2, 1, 1)),
                 exposure=[[0], [1]], outcome=[1.0, 2.0], offset=[1.0, 0.0],
                 outcome_kind="count")


def test_nan_rejected():
    with pytest.raises(PanelValidationError, match="outcome contains NaN"):
        validate(baseline=np.zeros((1, 1)), timevarying=np.zeros((1, 1, 1)),
                 exposure=[[0]], outcome=[np.nan])


def test_dimension_mismatch_rejected():
    with pytest.raises(PanelValidationError, match="inconsistent unit counts"):
        validate(baseline=np.zeros((3, 1)), timevarying=np.zeros((2, 1, 1)),
                 exposure=[[0], [1]], outcome=[1.0, 2.0])
    with pytest.raises(PanelValidationError, match="periods"):
        validate(baseline=np.zeros((2, 1)), timevarying=np.zeros((2, 3, 1)),
                 exposure=[[0, 1], [1, 0]], outcome=[1.0, 2.0])


def test_offset_requires_count_outcome():
    with pytest.raises(PanelValidationError, match="count outcomes"):
        make_panel([[0], [1]], offset=[1.0, 2.0], outcome_kind="continuous")


def test_negative_count_rejected():
    with pytest.raises(PanelValidationError, match="negative count"):
        make_panel([[0], [1]], y=[-1.0, 2.0], outcome_kind="count")


def test_arrays_are_readonly(small_ds):
    with pytest.raises(ValueError):
        small_ds.exposure[0, 0] = 1


def test_subset_gathers_whole_rows(small_ds):
    sub = small_ds.subset([3, 3, 0])
    assert sub.n == 3
    assert np.array_equal(sub.exposure[0], small_ds.exposure[3])
    assert np.array_equal(sub.exposure[1], small_ds.exposure[3])
    assert np.array_equal(sub.baseline[2], small_ds.baseline[0])


def test_exposure_pattern_checks_total():
    p = ExposurePattern((1, 0, 1))
    assert p.total == 2
    with pytest.raises(ValueError):
        ExposurePattern((1, 0), total=2)


def test_pattern_census_counts():
    ds = make_panel([[0, 0], [0, 0], [1, 1]])
    census = pattern_census(ds)
    assert [(p.bits, c) for p, c in census] == [((0, 0), 2), ((1, 1), 1)]


def test_pattern_census_single_pattern():
    ds = make_panel(np.ones((7, 2), dtype=int))
    census = pattern_census(ds)
    assert len(census) == 1
    assert census[0][1] == 7


def test_pattern_census_against_tally_oracle():
    rng = np.random.default_rng(7)
    T = rng.integers(0, 2, size=(4096, 4))
    ds = make_panel(T)
    census = pattern_census(ds)
    # independent oracle: dictionary tally of row tuples
    tally = {}
    for row in T:
        tally[tuple(row)] = tally.get(tuple(row), 0) + 1
    assert len(census) == 16
    assert sum(c for _, c in census) == 4096
    assert {p.bits: c for p, c in census} == tally
    assert [p.bits for p, _ in census] == sorted(p.bits for p, _ in census)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 40), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_pattern_census_properties(n, D, seed):
    rng = np.random.default_rng(seed)
    ds = make_panel(rng.integers(0, 2, size=(n, D)))
    census = pattern_census(ds)
    assert sum(c for _, c in census) == n
    assert len(census) <= min(n, 2 ** D)


def test_csv_roundtrip_bit_exact(tmp_path, small_ds):
    path = tmp_path / "panel.csv"
    write_panel_csv(small_ds, path)
    back = read_panel_csv(path, pW=small_ds.n_baseline, pX=small_ds.n_timevarying,
                          D=small_ds.n_periods)
    assert np.array_equal(back.baseline, small_ds.baseline)
    assert np.array_equal(back.timevarying, small_ds.timevarying)
    assert np.array_equal(back.exposure, small_ds.exposure)
    assert np.array_equal(back.outcome, small_ds.outcome)
    assert back.outcome_kind == "continuous"


def test_csv_roundtrip_with_offset(tmp_path):
    ds = make_panel([[0, 1], [1, 0], [1, 1]], y=[3, 0, 5],
                    offset=[0.5, 1.25, 2.0], outcome_kind="count")
    path = tmp_path / "panel.csv"
    write_panel_csv(ds, path)
    back = read_panel_csv(path, pW=2, pX=2, D=2)
    assert back.outcome_kind == "count"  # inferred from the offset column
    assert np.array_equal(back.offset, ds.offset)


def test_csv_header_mismatch(tmp_path, small_ds):
    path = tmp_path / "panel.csv"
    write_panel_csv(small_ds, path)
    with pytest.raises(PanelValidationError, match="does not match declared dimensions"):
        read_panel_csv(path, pW=2, pX=small_ds.n_timevarying, D=small_ds.n_periods)


def test_schema_column_order():
    assert panel_columns(2, 1, 2, True) == [
        "id", "w_1", "w_2", "x_1_1", "t_1", "x_2_1", "t_2", "y", "offset"]


def test_frame_matches_schema(small_ds):
    frame = to_frame(small_ds)
    assert list(frame.columns) == panel_columns(
        small_ds.n_baseline, small_ds.n_timevarying, small_ds.n_periods, False)
