"""Panel ingestion, aggregation, smoothing, differencing, phases, Box-Cox."""

import datetime
import io
import math

import numpy as np
import pytest

from conftest import EPOCH, make_panel, weekly_dates

from gnarlib.errors import DataIntegrityError, InvalidInputError
from gnarlib.panel import (
    DataCorrectionWarning,
    PhaseSpec,
    TimeSeriesPanel,
    boxcox_profile,
    difference,
    ingest_long_csv,
    read_wide_csv,
    rolling_average,
    split_phases,
    weekly_from_cumulative,
    write_wide_csv,
)


def daily_panel(values, labels=("a",), start=EPOCH):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    dates = tuple(start + datetime.timedelta(days=k) for k in range(values.shape[1]))
    return TimeSeriesPanel(labels=tuple(labels), dates=dates, values=values)


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------

def test_ingest_dense():
    csv = "date,node,value\n2020-01-06,b,1\n2020-01-06,a,2\n" \
          "2020-01-13,a,3\n2020-01-13,b,4\n2020-01-20,a,5\n2020-01-20,b,6\n"
    p = ingest_long_csv(io.StringIO(csv))
    assert p.labels == ("a", "b")
    assert p.n_times == 3
    assert p.values[0, 0] == 2.0 and p.values[1, 2] == 6.0


def test_ingest_missing_cell():
    csv = "date,node,value\n2020-01-06,a,1\n2020-01-06,b,2\n2020-01-13,a,3\n"
    p = ingest_long_csv(io.StringIO(csv))
    assert math.isnan(p.values[1, 1])
    assert np.isnan(p.values).sum() == 1


def test_ingest_conflicting_duplicate():
    csv = "date,node,value\n2020-01-06,a,1\n2020-01-06,a,2\n"
    with pytest.raises(DataIntegrityError, match="2020-01-06"):
        ingest_long_csv(io.StringIO(csv))


def test_ingest_exact_duplicate_tolerated():
    csv = "date,node,value\n2020-01-06,a,1\n2020-01-06,a,1\n"
    p = ingest_long_csv(io.StringIO(csv))
    assert p.values[0, 0] == 1.0


# ---------------------------------------------------------------------------
# weekly aggregation
# ---------------------------------------------------------------------------

def test_weekly_two_flat_weeks():
    p = daily_panel([0] * 7 + [7] * 7)
    w = weekly_from_cumulative(p)
    assert w.n_times == 2
    assert list(w.values[0]) == [0.0, 7.0]


def test_weekly_constant_cumulative_gives_zeros():
    p = daily_panel([5.0] * 15)
    w = weekly_from_cumulative(p)
    assert list(w.values[0]) == [5.0, 0.0, 0.0]


def test_weekly_hand_sum():
    # one week of daily increments then flat
    p = daily_panel([0, 1, 3, 6, 10, 15, 21, 28, 28, 28, 28, 28, 28, 28])
    w = weekly_from_cumulative(p)
    assert list(w.values[0]) == [0.0, 28.0]


def test_weekly_total_matches_final_minus_initial():
    rng = np.random.default_rng(0)
    cum = np.cumsum(rng.integers(0, 20, size=29).astype(float))
    p = daily_panel(cum)
    w = weekly_from_cumulative(p)
    # first entry is the baseline value; the incidences after it telescope
    assert w.values[0, 1:].sum() == pytest.approx(cum[28] - cum[0])


def test_weekly_decrease_warns_and_keeps_value():
    p = daily_panel([0] * 7 + [10] * 7 + [3] * 7)
    with pytest.warns(DataCorrectionWarning):
        w = weekly_from_cumulative(p)
    assert list(w.values[0]) == [0.0, 10.0, -7.0]


# ---------------------------------------------------------------------------
# rolling average
# ---------------------------------------------------------------------------

def test_rolling_window_one_is_identity():
    p = make_panel([[1.0, 2.0, 3.0, 4.0]])
    out = rolling_average(p, 1, (p.dates[0], p.dates[-1]))
    assert np.array_equal(out.values, p.values)


def test_rolling_constant_series_unchanged():
    p = make_panel([[3.0] * 6])
    out = rolling_average(p, 4, (p.dates[0], p.dates[-1]))
    assert np.allclose(out.values, 3.0)


def test_rolling_hand_example():
    p = make_panel([[0.0, 4.0, 8.0, 4.0, 0.0]])
    out = rolling_average(p, 3, (p.dates[0], p.dates[-1]))
    assert list(out.values[0]) == pytest.approx([2.0, 4.0, 16.0 / 3.0, 4.0, 2.0])


def test_rolling_outside_interval_untouched():
    p = make_panel([[0.0, 4.0, 8.0, 4.0, 0.0]])
    out = rolling_average(p, 3, (p.dates[1], p.dates[3]))
    assert out.values[0, 0] == 0.0 and out.values[0, 4] == 0.0
    assert out.values[0, 2] == pytest.approx(16.0 / 3.0)


def test_rolling_window_exceeds_interval():
    p = make_panel([[1.0, 2.0, 3.0]])
    with pytest.raises(InvalidInputError):
        rolling_average(p, 4, (p.dates[0], p.dates[-1]))


def test_rolling_propagates_missing():
    p = make_panel([[1.0, np.nan, 3.0, 4.0, 5.0]])
    out = rolling_average(p, 3, (p.dates[0], p.dates[-1]))
    assert math.isnan(out.values[0, 0])  # window touches the NaN
    assert math.isnan(out.values[0, 2])
    assert not math.isnan(out.values[0, 4])


# ---------------------------------------------------------------------------
# difference
# ---------------------------------------------------------------------------

def test_difference_constant_is_zero():
    p = make_panel([[2.0] * 5])
    d = difference(p, 1)
    assert np.allclose(d.values, 0.0)


def test_difference_hand_example():
    p = make_panel([[1.0, 3.0, 2.0, 5.0]])
    d = difference(p, 1)
    assert list(d.values[0]) == [2.0, -1.0, 3.0]
    assert d.dates == p.dates[1:]


def test_difference_missing_propagates():
    p = make_panel([[1.0, 2.0, np.nan, 4.0, 5.0]])
    d = difference(p, 1)
    assert math.isnan(d.values[0, 1]) and math.isnan(d.values[0, 2])
    assert d.values[0, 3] == 1.0


def test_difference_twice_shrinks_by_two():
    p = make_panel([np.arange(10.0)])
    dd = difference(difference(p, 1), 1)
    assert dd.n_times == 8
    assert np.allclose(dd.values, 0.0)


def test_difference_lag_too_large():
    p = make_panel([[1.0, 2.0]])
    with pytest.raises(InvalidInputError):
        difference(p, 2)


# ---------------------------------------------------------------------------
# phases
# ---------------------------------------------------------------------------

def test_phases_identity_when_covering():
    p = make_panel([np.arange(5.0)])
    spec = PhaseSpec(name="all", intervals=((p.dates[0], p.dates[-1]),))
    out = split_phases(p, spec)
    assert out.dates == p.dates
    assert np.array_equal(out.values, p.values)


def test_phases_gap_becomes_missing_columns():
    p = make_panel([np.arange(8.0)])
    spec = PhaseSpec(name="two", intervals=(
        (p.dates[0], p.dates[2]), (p.dates[5], p.dates[7])))
    out = split_phases(p, spec)
    assert out.n_times == 8
    assert np.isnan(out.values[0, 3]) and np.isnan(out.values[0, 4])
    assert out.values[0, 5] == 5.0


def test_phases_never_leak_values_outside_intervals():
    rng = np.random.default_rng(1)
    p = make_panel(rng.normal(size=(3, 20)))
    spec = PhaseSpec(name="x", intervals=(
        (p.dates[2], p.dates[6]), (p.dates[10], p.dates[12])))
    out = split_phases(p, spec)
    for j, d in enumerate(out.dates):
        inside = spec.contains(d)
        if inside:
            orig = p.dates.index(d)
            assert np.array_equal(out.values[:, j], p.values[:, orig])
        else:
            assert np.isnan(out.values[:, j]).all()


def test_phases_restricted_counts_45_weeks():
    # two intervals shaped like the restricted reporting phases: 25 weekly
    # observations, a gap, then 20 more
    start = datetime.date(2020, 2, 27)
    p = make_panel(np.ones((2, 152)), start=start)
    spec = PhaseSpec(name="restricted", intervals=(
        (datetime.date(2020, 2, 27), datetime.date(2020, 8, 13)),
        (datetime.date(2020, 12, 26), datetime.date(2021, 5, 14)),
    ))
    out = split_phases(p, spec)
    observed_weeks = int((~np.isnan(out.values[0])).sum())
    assert observed_weeks == 45


def test_phases_empty_intersection():
    p = make_panel([[1.0, 2.0]])
    far = (datetime.date(1990, 1, 1), datetime.date(1990, 2, 1))
    with pytest.raises(InvalidInputError):
        split_phases(p, PhaseSpec(name="no", intervals=(far,)))


# ---------------------------------------------------------------------------
# Box-Cox
# ---------------------------------------------------------------------------

def test_boxcox_gaussian_data_prefers_identity():
    # a sizeable coefficient of variation is needed for the profile to be
    # informative about the exponent at all
    rng = np.random.default_rng(2)
    x = rng.normal(10.0, 2.0, size=2000)
    x = x[x > 0.2]
    prof = boxcox_profile(x, np.linspace(-2, 3, 101))
    assert prof.lambda_hat == pytest.approx(1.0, abs=0.25)
    assert prof.shift == 0.0


def test_boxcox_lognormal_data_prefers_log():
    rng = np.random.default_rng(3)
    x = np.exp(rng.normal(0.0, 1.0, size=400))
    prof = boxcox_profile(x, np.linspace(-2, 3, 101))
    assert prof.lambda_hat == pytest.approx(0.0, abs=0.25)


def test_boxcox_identity_lambda_matches_manual_loglik():
    rng = np.random.default_rng(4)
    x = rng.uniform(1.0, 5.0, size=200)
    prof = boxcox_profile(x, [1.0])
    # at lambda = 1 the transform is x - 1: profile loglik reduces to the
    # Gaussian profile of the untransformed data (zero Jacobian term)
    manual = -0.5 * x.size * math.log(np.var(x))
    assert prof.loglik[0] == pytest.approx(manual, rel=1e-12)


def test_boxcox_shift_reported_for_nonpositive_data():
    x = np.array([-2.0, 0.0, 1.0, 3.0, 5.0])
    prof = boxcox_profile(x, np.linspace(0, 2, 21))
    assert prof.shift == 3.0


def test_boxcox_argmax_invariant():
    rng = np.random.default_rng(5)
    x = rng.uniform(0.5, 2.0, size=100)
    prof = boxcox_profile(x, np.linspace(-2, 3, 51))
    assert prof.loglik[prof.lambda_grid.index(prof.lambda_hat)] == max(prof.loglik)


# ---------------------------------------------------------------------------
# panel invariants and I/O
# ---------------------------------------------------------------------------

def test_panel_validation():
    with pytest.raises(InvalidInputError):
        TimeSeriesPanel(labels=("a", "a"), dates=weekly_dates(2),
                        values=np.zeros((2, 2)))
    with pytest.raises(InvalidInputError):
        TimeSeriesPanel(labels=("a",), dates=(EPOCH, EPOCH),
                        values=np.zeros((1, 2)))
    with pytest.raises(InvalidInputError):
        TimeSeriesPanel(labels=("a",), dates=weekly_dates(3),
                        values=np.zeros((1, 2)))


def test_panel_values_immutable():
    p = make_panel([[1.0, 2.0]])
    with pytest.raises(ValueError):
        p.values[0, 0] = 9.0


def test_wide_csv_roundtrip(tmp_path):
    p = make_panel([[1.0, np.nan, 3.5], [0.25, -1.0, np.nan]], labels=("a", "b"))
    path = tmp_path / "panel.csv"
    write_wide_csv(p, path, meta_lines=["check=1"])
    q = read_wide_csv(str(path))
    assert q.labels == p.labels
    assert q.dates == p.dates
    assert np.array_equal(np.isnan(q.values), np.isnan(p.values))
    assert np.allclose(q.values[~np.isnan(q.values)], p.values[~np.isnan(p.values)])
