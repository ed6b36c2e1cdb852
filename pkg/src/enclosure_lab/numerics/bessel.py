"""
Exponent-scaled modified spherical Bessel functions.

    î_n(z) = e^{-z} i_n(z),   k̂_n(z) = e^{+z} k_n(z),   k_0(z) = (π/2) e^{-z} / z

i_n is generated by Miller's downward recurrence normalised against î_0, k_n by
the upward recurrence; both are stable in the direction used. Derivatives are
returned with the same scaling, so products such as î_n k̂_n never see e^{±z}.
"""

from dataclasses import dataclass

import numpy as np
from mcp.server.fastmcp.utilities.logging import get_logger

from ..errors import ConvergenceError

LOG = get_logger(__name__)

MAX_ORDER = 4000
_RESCALE = 1e200


@dataclass(frozen=True)
class ScaledBessel:
    """Tables indexed [n, j] for orders 0..n_max at the arguments z[j]."""

    z: np.ndarray
    i_hat: np.ndarray
    k_hat: np.ndarray
    di_hat: np.ndarray
    dk_hat: np.ndarray

    @property
    def n_max(self) -> int:
        return self.i_hat.shape[0] - 1


def _miller_start(n_max: int, z_max: float) -> int:
    # i_N / i_{n_max} falls below 1e-17 well before this index
    return int(np.sqrt(n_max * n_max + 80.0 * z_max)) + 20


def scaled_i(n_max: int, z: np.ndarray) -> np.ndarray:
    """
    e^{-z} i_n(z) for n = 0..n_max by downward recurrence.

    Args:
        n_max (int): Highest order.
        z (np.ndarray): Positive arguments, any shape flattened to 1-D.

    Returns:
        np.ndarray: Array of shape (n_max + 1, len(z)).
    """
    z = np.atleast_1d(np.asarray(z, dtype=float)).ravel()
    start = _miller_start(n_max, float(z.max()))
    table = np.zeros((start + 2, z.size))
    table[start] = 1e-30
    for n in range(start, 0, -1):
        table[n - 1] = table[n + 1] + (2 * n + 1) / z * table[n]
        large = np.abs(table[n - 1]) > _RESCALE
        if np.any(large):
            table[:, large] /= _RESCALE

    # î_0 = (1 - e^{-2z}) / (2z)
    exact_zero = -np.expm1(-2.0 * z) / (2.0 * z)
    return table[: n_max + 1] * (exact_zero / table[0])


def scaled_k(n_max: int, z: np.ndarray) -> np.ndarray:
    """
    e^{+z} k_n(z) for n = 0..n_max by upward recurrence.

    Args:
        n_max (int): Highest order.
        z (np.ndarray): Positive arguments.

    Returns:
        np.ndarray: Array of shape (n_max + 1, len(z)).
    """
    z = np.atleast_1d(np.asarray(z, dtype=float)).ravel()
    table = np.empty((max(n_max, 1) + 1, z.size))
    table[0] = 0.5 * np.pi / z
    table[1] = 0.5 * np.pi * (1.0 + z) / (z * z)
    for n in range(1, n_max):
        table[n + 1] = table[n - 1] + (2 * n + 1) / z * table[n]
    if not np.all(np.isfinite(table)):
        raise ConvergenceError(
            f"k_n overflowed for n_max={n_max} at z_min={float(z.min()):.3g}"
        )
    return table[: n_max + 1]


def scaled_bessel(n_max: int, z) -> ScaledBessel:
    """
    Scaled i_n, k_n and their derivatives for n = 0..n_max.

    Args:
        n_max (int): Highest order, at most MAX_ORDER.
        z (float | np.ndarray): Positive argument(s).

    Returns:
        ScaledBessel: Tables of shape (n_max + 1, len(z)).

    Example:
        scaled_bessel(0, 2.0).k_hat[0, 0] -> π/4
    """
    if n_max < 0 or n_max > MAX_ORDER:
        raise ValueError(f"order {n_max} outside the recurrence range [0, {MAX_ORDER}]")
    z = np.atleast_1d(np.asarray(z, dtype=float)).ravel()
    if np.any(z <= 0.0):
        raise ValueError("scaled Bessel functions need z > 0")

    top = n_max + 1
    i_hat = scaled_i(top, z)
    k_hat = scaled_k(top, z)
    orders = np.arange(n_max + 1)[:, None]

    di_hat = np.empty((n_max + 1, z.size))
    dk_hat = np.empty((n_max + 1, z.size))
    di_hat[0] = i_hat[1]
    dk_hat[0] = -k_hat[1]
    if n_max >= 1:
        di_hat[1:] = i_hat[:n_max] - (orders[1:] + 1) / z * i_hat[1 : n_max + 1]
        dk_hat[1:] = -k_hat[:n_max] - (orders[1:] + 1) / z * k_hat[1 : n_max + 1]

    LOG.debug(f"Scaled Bessel tables up to n={n_max} on {z.size} arguments")
    return ScaledBessel(
        z=z,
        i_hat=i_hat[: n_max + 1],
        k_hat=k_hat[: n_max + 1],
        di_hat=di_hat,
        dk_hat=dk_hat,
    )


def wronskian_defect(tables: ScaledBessel) -> np.ndarray:
    """
    Relative defect of i_n k_n' - i_n' k_n = -π / (2z²), per order and argument.
    """
    target = -0.5 * np.pi / tables.z**2
    lhs = tables.i_hat * tables.dk_hat - tables.di_hat * tables.k_hat
    return np.abs(lhs - target) / np.abs(target)
