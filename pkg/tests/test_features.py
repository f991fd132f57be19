import datetime as dt

import numpy as np
import pytest
from hypothesis import given, strategies as st

from trafficcast.features import (CALENDAR_COLUMNS, FEATURE_COLUMNS, apply_scaler, build_matrix,
                                  calendar_matrix, explode_date, fit_scaler,
                                  inverse_transform_rows, transform_rows)
from trafficcast.timeseries import DailySeries, SeriesError, VehicleClass

import oracles


def test_known_date():
    row = explode_date(dt.date(2016, 6, 1))
    assert (row.year, row.month, row.day) == (2016, 6, 1)
    assert row.day_of_week == 2          # Wednesday
    assert row.day_of_year == 153        # leap year
    assert row.week == 22
    assert not row.is_weekend
    assert row.dow_onehot == (0, 0, 1, 0, 0, 0, 0)


def test_iso_week_year_boundary():
    # 2021-01-03 is a Sunday still in ISO week 53 of 2020
    assert explode_date(dt.date(2021, 1, 3)).week == 53
    assert explode_date(dt.date(2019, 12, 30)).week == 1


def test_week_start_shifts_numbering_only():
    sunday = dt.date(2016, 6, 5)
    assert explode_date(sunday).day_of_week == 6
    shifted = explode_date(sunday, week_start=6)
    assert shifted.day_of_week == 0
    assert shifted.is_weekend
    assert shifted.dow_onehot[0] == 1


@pytest.mark.parametrize("seed", range(4))
def test_calendar_against_oracle(seed):
    rng = np.random.default_rng(seed)
    lo, hi = dt.date(2000, 1, 1).toordinal(), dt.date(2100, 12, 31).toordinal()
    for o in rng.integers(lo, hi + 1, size=2500):
        d = dt.date.fromordinal(int(o))
        r = explode_date(d)
        wd = oracles.weekday_monday0(d.year, d.month, d.day)
        assert r.day_of_week == wd
        assert r.day_of_year == oracles.day_of_year(d.year, d.month, d.day)
        assert r.week == oracles.iso_week(d.year, d.month, d.day)
        assert r.is_weekend == (wd >= 5)
        assert sum(r.dow_onehot) == 1 and r.dow_onehot[wd] == 1


def test_build_matrix_shape_and_targets():
    s = DailySeries(4, VehicleClass.TC1, dt.date(2020, 2, 27), [5.0, 6.0, 7.0, 8.0])
    m = build_matrix(s)
    assert m.rows.shape == (4, len(FEATURE_COLUMNS))
    assert m.column_names == FEATURE_COLUMNS
    assert m.targets.tolist() == [5, 6, 7, 8]
    assert m.dates[2] == dt.date(2020, 2, 29)
    assert m.station_code == 4
    day = list(CALENDAR_COLUMNS).index("DAY")
    assert m.rows[:, day].tolist() == [27, 28, 29, 1]


def test_build_matrix_rejects_gaps():
    s = DailySeries(4, VehicleClass.TC1, dt.date(2020, 1, 1), [5.0, np.nan, 7.0])
    with pytest.raises(SeriesError):
        build_matrix(s)


def test_minmax_scaler():
    X = np.array([[0.0, 5.0], [10.0, 5.0], [5.0, 5.0]])
    p = fit_scaler(X)
    np.testing.assert_array_equal(transform_rows(X, p), [[0, 0], [1, 0], [0.5, 0]])
    # unseen values may fall outside [0, 1]
    assert transform_rows(np.array([[20.0, 7.0]]), p)[0, 0] == 2.0


def test_standardize_uses_population_std():
    X = np.array([[1.0], [3.0]])
    p = fit_scaler(X, "standardize")
    assert p.spread[0] == 1.0
    np.testing.assert_array_equal(transform_rows(X, p), [[-1], [1]])


def test_scaler_errors():
    with pytest.raises(ValueError):
        fit_scaler(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        fit_scaler(np.ones((2, 2)), "robust")


@given(st.lists(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3), min_size=2, max_size=20),
       st.sampled_from(["minmax01", "standardize"]))
def test_scaler_round_trip(rows, mode):
    X = np.array(rows)
    p = fit_scaler(X, mode)
    Z = transform_rows(X, p)
    back = inverse_transform_rows(Z, p)
    scale = np.maximum(1.0, np.abs(X).max(axis=0))
    assert np.all(np.abs(back - X) <= 1e-9 * scale)
    if mode == "minmax01":
        assert Z.min() >= 0 and Z.max() <= 1 + 1e-12


def test_apply_scaler_keeps_matrix_metadata():
    dates = [dt.date(2020, 1, 1) + dt.timedelta(days=k) for k in range(10)]
    s = DailySeries(1, VehicleClass.TC3, dates[0], np.arange(10.0))
    m = build_matrix(s)
    scaled = apply_scaler(m, fit_scaler(m))
    assert scaled.dates == m.dates and scaled.targets is m.targets
    np.testing.assert_array_equal(calendar_matrix(dates), m.rows)
