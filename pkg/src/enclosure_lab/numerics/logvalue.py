"""
Signed values stored as (sign, natural log of magnitude).

Indicator values decay like e^{-2τl₀/√γ₀}; with τl₀ around 80 and beyond the raw
numbers leave double precision, so every exponentially small quantity in the lab
is carried in this form. Addition is done with scipy's signed ``logsumexp``.
"""

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import logsumexp


@dataclass(frozen=True)
class LogValue:
    sign: int
    log_mag: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign}")
        if self.sign == 0 and self.log_mag != -math.inf:
            object.__setattr__(self, "log_mag", -math.inf)
        if self.sign != 0 and math.isnan(self.log_mag):
            raise ValueError("log magnitude is NaN")

    @classmethod
    def zero(cls) -> "LogValue":
        return cls(0, -math.inf)

    @classmethod
    def from_float(cls, value: float, log_shift: float = 0.0) -> "LogValue":
        """
        Build value·e^{log_shift} without forming the product.

        Args:
            value (float): Finite real number.
            log_shift (float): Natural-log scale factor applied to ``value``.

        Returns:
            LogValue: The scaled value.
        """
        if value == 0.0:
            return cls.zero()
        return cls(1 if value > 0 else -1, math.log(abs(value)) + log_shift)

    def to_float(self) -> float:
        """Materialise the value; underflows to 0.0 and overflows to ±inf."""
        if self.sign == 0:
            return 0.0
        try:
            return self.sign * math.exp(self.log_mag)
        except OverflowError:
            return self.sign * math.inf

    def shifted(self, log_factor: float) -> "LogValue":
        """Multiply by e^{log_factor}."""
        if self.sign == 0:
            return self
        return LogValue(self.sign, self.log_mag + log_factor)

    def __neg__(self) -> "LogValue":
        return LogValue(-self.sign, self.log_mag)

    def __mul__(self, other: "LogValue") -> "LogValue":
        if self.sign == 0 or other.sign == 0:
            return LogValue.zero()
        return LogValue(self.sign * other.sign, self.log_mag + other.log_mag)

    def __truediv__(self, other: "LogValue") -> "LogValue":
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero LogValue")
        if self.sign == 0:
            return self
        return LogValue(self.sign * other.sign, self.log_mag - other.log_mag)

    def __add__(self, other: "LogValue") -> "LogValue":
        return log_sum([self, other])

    def __sub__(self, other: "LogValue") -> "LogValue":
        return log_sum([self, -other])

    def ratio_to(self, other: "LogValue") -> float:
        """self / other as a plain float (both magnitudes may be tiny)."""
        return (self / other).to_float()


def log_sum(values: Iterable[LogValue]) -> LogValue:
    """
    Signed sum in the log domain.

    Args:
        values (Iterable[LogValue]): Terms to add.

    Returns:
        LogValue: The sum; exact cancellation gives the zero value.

    Example:
        log_sum([LogValue.from_float(2.0), LogValue.from_float(-0.5)]) -> 1.5
    """
    terms = [value for value in values if value.sign != 0]
    if not terms:
        return LogValue.zero()
    logs = np.array([term.log_mag for term in terms])
    signs = np.array([float(term.sign) for term in terms])
    total, sign = logsumexp(logs, b=signs, return_sign=True)
    if sign == 0 or not np.isfinite(total):
        return LogValue.zero()
    return LogValue(int(sign), float(total))
