from typing import Callable

import numpy as np


def finite_difference_hessian(
    fn: Callable[[np.ndarray], float],
    point,
    step: float,
) -> np.ndarray:
    """
    Central-difference Hessian of a scalar function.

    Diagonal entries use the three-point rule, off-diagonal entries the
    four-point cross rule; both have O(step²) truncation error.

    Args:
        fn (Callable[[np.ndarray], float]): Function of an n-vector.
        point: Expansion point.
        step (float): Difference step in every coordinate.

    Returns:
        np.ndarray: Symmetric n×n matrix.

    Example:
        finite_difference_hessian(lambda x: x @ x, np.zeros(2), 1e-3) -> 2·I
    """
    x0 = np.asarray(point, dtype=float)
    n = x0.size
    basis = np.eye(n) * step
    f0 = fn(x0)
    hess = np.empty((n, n))
    for i in range(n):
        hess[i, i] = (fn(x0 + basis[i]) - 2.0 * f0 + fn(x0 - basis[i])) / step**2
        for j in range(i):
            value = (
                fn(x0 + basis[i] + basis[j])
                - fn(x0 + basis[i] - basis[j])
                - fn(x0 - basis[i] + basis[j])
                + fn(x0 - basis[i] - basis[j])
            ) / (4.0 * step**2)
            hess[i, j] = hess[j, i] = value
    return hess


def richardson_hessian(
    fn: Callable[[np.ndarray], float],
    point,
    step: float,
) -> np.ndarray:
    """
    finite_difference_hessian at steps h and h/2 combined as (4·H(h/2) - H(h))/3.

    The O(step²) terms cancel, leaving O(step⁴) truncation error.
    """
    coarse = finite_difference_hessian(fn, point, step)
    fine = finite_difference_hessian(fn, point, 0.5 * step)
    return (4.0 * fine - coarse) / 3.0
