import math

import numpy as np
import pytest

from enclosure_lab.asymptotics import T0, leading_series
from enclosure_lab.errors import ReconstructionError
from enclosure_lab.numerics.logvalue import LogValue
from enclosure_lab.reconstruct import (
    FitModel,
    LimitClass,
    LogSeries,
    SignClass,
    classify_sign,
    fit_shortest_length,
    series_from_csv,
    series_to_csv,
    window_errors,
)
from enclosure_lab.stationary import find_pairs

TAUS = np.linspace(10.0, 40.0, 13)


@pytest.fixture(scope="module")
def cfg1_leading(cfg1):
    return leading_series(T0(cfg1, find_pairs(cfg1)), TAUS)


def test_exact_series_recovers_l0(cfg1_leading):
    result = fit_shortest_length(cfg1_leading, model=FitModel.SLOPE_PLUS_LOG)
    assert result.l0_hat == pytest.approx(2.0, abs=1e-6)
    assert result.sign_class == SignClass.MINUS
    assert result.T0_hat == pytest.approx(-1.0 / 24.0, rel=1e-6)
    assert result.window == (10.0, 40.0)
    assert result.n_samples == TAUS.size


def test_pure_slope_is_biased_by_the_prefactor(cfg1_leading):
    result = fit_shortest_length(cfg1_leading, model=FitModel.PURE_SLOPE)
    # the τ⁻⁴ factor adds 2/τ̄ to the apparent l₀
    assert 2.0 < result.l0_hat < 2.2
    assert result.T0_hat is None


def test_window_errors_shrink(cfg1_leading):
    errors = window_errors(cfg1_leading, 2.0, [20.0, 30.0, 40.0])
    assert errors[0] > errors[-1]


def test_gamma0_rescales_the_estimate():
    taus = np.arange(8.0, 40.0, 4.0)
    gamma0 = 4.0
    # log|I| = -2τl₀/√γ₀ with l₀ = 3
    values = [LogValue(1, -2.0 * tau * 3.0 / math.sqrt(gamma0)) for tau in taus]
    series = LogSeries.from_values(taus, values, gamma0=gamma0)
    assert fit_shortest_length(series, model=FitModel.PURE_SLOPE).l0_hat == pytest.approx(3.0)


def test_csv_round_trip_keeps_tiny_values(cfg1_leading):
    text = series_to_csv(cfg1_leading)
    assert text.startswith("tau,sign,log_mag\n")
    parsed = series_from_csv(text)
    assert parsed.samples == cfg1_leading.samples


def test_csv_errors():
    with pytest.raises(ReconstructionError, match="header"):
        series_from_csv("t,s,l\n1,1,0\n")
    with pytest.raises(ReconstructionError, match="malformed series row 2"):
        series_from_csv("tau,sign,log_mag\n1,plus,0\n")
    with pytest.raises(ReconstructionError, match="strictly increasing"):
        series_from_csv("tau,sign,log_mag\n2,1,0\n1,1,0\n")


def test_fit_needs_enough_samples_of_one_sign():
    short = LogSeries.from_values([1.0, 2.0, 3.0], [LogValue(1, -1.0)] * 3)
    with pytest.raises(ReconstructionError, match="at least 4"):
        fit_shortest_length(short)
    mixed = LogSeries.from_values(
        [1.0, 2.0, 3.0, 4.0], [LogValue(1, -1.0), LogValue(-1, -2.0)] * 2
    )
    with pytest.raises(ReconstructionError, match="mixed"):
        fit_shortest_length(mixed)


def test_classify_sign(cfg1_leading):
    assert classify_sign(cfg1_leading, 5.0) == LimitClass.MINUS_INFINITY
    assert classify_sign(cfg1_leading, 3.0) == LimitClass.ZERO
    flipped = LogSeries.from_values(
        cfg1_leading.taus, [-sample.value for sample in cfg1_leading.samples]
    )
    assert classify_sign(flipped, 5.0) == LimitClass.PLUS_INFINITY


def test_classify_sign_late_sign_change():
    taus = [10.0, 20.0, 30.0, 40.0]
    values = [LogValue(1, -20.0), LogValue(1, -40.0), LogValue(-1, -60.0), LogValue(1, -80.0)]
    series = LogSeries.from_values(taus, values)
    assert classify_sign(series, 5.0) == LimitClass.INDETERMINATE
