"""
The inverse step: l₀ from the logarithmic decay of indicator samples.

    (√γ₀ / 2τ) log|I_τ| → -l₀   and   log|I_τ| = log(πγ₀|𝒯₀|) - 4 log τ - 2τl₀/√γ₀ + o(1)

Series are kept as (τ, sign, log|value|) so samples far below double precision
can be fitted. CSV files use the header ``tau,sign,log_mag``.
"""

import csv
import io
import math
from dataclasses import dataclass
from enum import StrEnum
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from mcp.server.fastmcp.utilities.logging import get_logger
from scipy.stats import linregress

from .errors import ReconstructionError
from .numerics.logvalue import LogValue

LOG = get_logger(__name__)

CSV_HEADER = ("tau", "sign", "log_mag")
MIN_SAMPLES = 4
PREFACTOR_POWER = -4.0


class FitModel(StrEnum):
    PURE_SLOPE = "pure_slope"
    SLOPE_PLUS_LOG = "slope_plus_log"


class LimitClass(StrEnum):
    ZERO = "zero"
    PLUS_INFINITY = "plus_infinity"
    MINUS_INFINITY = "minus_infinity"
    INDETERMINATE = "indeterminate"


class SignClass(StrEnum):
    PLUS = "plus"
    MINUS = "minus"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class SeriesSample:
    tau: float
    value: LogValue


@dataclass(frozen=True)
class LogSeries:
    samples: Tuple[SeriesSample, ...]
    gamma0: float = 1.0
    source: str = "external"

    def __post_init__(self):
        taus = [sample.tau for sample in self.samples]
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ReconstructionError(f"τ values must be strictly increasing, got {taus}")

    @classmethod
    def from_values(
        cls,
        taus: Sequence[float],
        values: Sequence[LogValue],
        gamma0: float = 1.0,
        source: str = "external",
    ) -> "LogSeries":
        samples = tuple(SeriesSample(float(t), v) for t, v in zip(taus, values))
        return cls(samples=samples, gamma0=gamma0, source=source)

    @property
    def taus(self) -> np.ndarray:
        return np.array([sample.tau for sample in self.samples])

    @property
    def signs(self) -> np.ndarray:
        return np.array([sample.value.sign for sample in self.samples])

    @property
    def log_mags(self) -> np.ndarray:
        return np.array([sample.value.log_mag for sample in self.samples])

    def window(
        self, tau_min: Optional[float] = None, tau_max: Optional[float] = None
    ) -> "LogSeries":
        lo = -math.inf if tau_min is None else tau_min
        hi = math.inf if tau_max is None else tau_max
        kept = tuple(s for s in self.samples if lo <= s.tau <= hi)
        return LogSeries(samples=kept, gamma0=self.gamma0, source=self.source)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class ReconstructionResult:
    l0_hat: float
    stderr: float
    sign_class: SignClass
    window: Tuple[float, float]
    model: FitModel
    n_samples: int
    T0_hat: Optional[float] = None


def series_to_csv(series: LogSeries) -> str:
    """
    Render a series as CSV with shortest round-trip float text.

    Example:
        "tau,sign,log_mag\\n8.0,-1,-40.25...\\n"
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for sample in series.samples:
        writer.writerow([repr(sample.tau), sample.value.sign, repr(sample.value.log_mag)])
    return buffer.getvalue()


def series_from_csv(text: str, gamma0: float = 1.0, source: str = "external") -> LogSeries:
    """
    Parse ``tau,sign,log_mag`` CSV text.

    Raises:
        ReconstructionError: On a wrong header or malformed rows.
    """
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row]
    if not rows or tuple(cell.strip() for cell in rows[0]) != CSV_HEADER:
        raise ReconstructionError(f"series CSV must start with the header {','.join(CSV_HEADER)}")
    samples = []
    for number, row in enumerate(rows[1:], start=2):
        try:
            tau, sign, log_mag = float(row[0]), int(row[1]), float(row[2])
            value = LogValue(sign, log_mag)
        except (ValueError, IndexError) as exc:
            raise ReconstructionError(f"malformed series row {number}: {row}") from exc
        samples.append(SeriesSample(tau=tau, value=value))
    return LogSeries(samples=tuple(samples), gamma0=gamma0, source=source)


def _consistent_sign(series: LogSeries) -> int:
    signs = set(int(s) for s in series.signs)
    if len(signs) != 1 or 0 in signs:
        raise ReconstructionError(f"mixed or zero signs in the fit window: {sorted(signs)}")
    return signs.pop()


def fit_shortest_length(
    series: LogSeries,
    model: FitModel = FitModel.SLOPE_PLUS_LOG,
    tau_min: Optional[float] = None,
    tau_max: Optional[float] = None,
) -> ReconstructionResult:
    """
    Estimate l₀ from the slope of log|I_τ| against τ.

    pure_slope regresses log|I_τ| on τ; slope_plus_log first adds back the known
    τ⁻⁴ prefactor (log-τ coefficient fixed at -4), which removes its bias.

    Args:
        series (LogSeries): Indicator samples.
        model (FitModel): pure_slope or slope_plus_log (default).
        tau_min (float, optional): Window start.
        tau_max (float, optional): Window end.

    Returns:
        ReconstructionResult: l0_hat = -slope·√γ₀/2 with its standard error.

    Raises:
        ReconstructionError: Fewer than 4 samples or mixed signs in the window.

    Example:
        Exact leading-term series of cfg1 over τ ∈ [10, 40] -> l0_hat = 2
    """
    model = FitModel(model)
    window = series.window(tau_min, tau_max)
    if len(window) < MIN_SAMPLES:
        raise ReconstructionError(
            f"need at least {MIN_SAMPLES} samples in the window, got {len(window)}"
        )
    sign = _consistent_sign(window)
    taus, logs = window.taus, window.log_mags
    if model == FitModel.SLOPE_PLUS_LOG:
        logs = logs - PREFACTOR_POWER * np.log(taus)

    fit = linregress(taus, logs)
    root = math.sqrt(series.gamma0)
    l0_hat = -fit.slope * root / 2.0
    stderr = abs(fit.stderr) * root / 2.0 if math.isfinite(fit.stderr) else math.inf
    if not l0_hat > 0.0:
        raise ReconstructionError(f"fitted slope {fit.slope:.6g} gives a non-positive l₀")

    T0_hat = None
    if model == FitModel.SLOPE_PLUS_LOG:
        T0_hat = sign * math.exp(fit.intercept) / (math.pi * series.gamma0)
    LOG.info(f"{model.value}: l0_hat = {l0_hat:.10g} ± {stderr:.2e} over {len(window)} samples")
    return ReconstructionResult(
        l0_hat=l0_hat,
        stderr=stderr,
        sign_class=SignClass.PLUS if sign > 0 else SignClass.MINUS,
        window=(float(taus[0]), float(taus[-1])),
        model=model,
        n_samples=len(window),
        T0_hat=T0_hat,
    )


def classify_sign(
    series: LogSeries,
    T: float,
    result: Optional[ReconstructionResult] = None,
    model: FitModel = FitModel.SLOPE_PLUS_LOG,
) -> LimitClass:
    """
    Read the limit of e^{τT} I_τ off a series.

    T is compared with 2·l0_hat/√γ₀; ties within the fit standard error are
    indeterminate, as are series whose late half changes sign. These thresholds
    are heuristics: the decay rate gives no finite-τ guarantee.

    Args:
        series (LogSeries): Indicator samples.
        T (float): Exponent T > 0.
        result (ReconstructionResult, optional): A fit to reuse.
        model (FitModel): Fit model when ``result`` is not given.

    Returns:
        LimitClass: zero, plus_infinity, minus_infinity or indeterminate.

    Example:
        cfg1 forward series, T = 5 -> minus_infinity
    """
    late = series.samples[len(series.samples) // 2 :]
    late_signs = {sample.value.sign for sample in late}
    if len(late_signs) != 1 or 0 in late_signs:
        LOG.warning("Late-window samples change sign; classification indeterminate")
        return LimitClass.INDETERMINATE
    if result is None:
        try:
            result = fit_shortest_length(series, model=model)
        except ReconstructionError as exc:
            LOG.warning(f"Fit failed: {exc}")
            return LimitClass.INDETERMINATE

    root = math.sqrt(series.gamma0)
    threshold = 2.0 * result.l0_hat / root
    tolerance = 2.0 * result.stderr / root
    if abs(T - threshold) <= tolerance:
        return LimitClass.INDETERMINATE
    if T < threshold:
        return LimitClass.ZERO
    return LimitClass.PLUS_INFINITY if late_signs.pop() > 0 else LimitClass.MINUS_INFINITY


def window_errors(
    series: LogSeries, l0: float, tau_maxima: Iterable[float], model: FitModel = FitModel.PURE_SLOPE
) -> Tuple[float, ...]:
    """|l0_hat - l₀| for windows [first τ, τ_max] of growing length."""
    errors = []
    for tau_max in tau_maxima:
        fit = fit_shortest_length(series, model=model, tau_max=tau_max)
        errors.append(abs(fit.l0_hat - l0))
    return tuple(errors)
