"""Gauss–Legendre rules on intervals, graded panels and periodic trapezoid rules."""

from typing import Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss


def gauss_legendre(n: int, lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    n-point Gauss–Legendre nodes and weights mapped to [lo, hi].

    Args:
        n (int): Number of nodes.
        lo (float): Left end.
        hi (float): Right end.

    Returns:
        Tuple[np.ndarray, np.ndarray]: Nodes and positive weights.
    """
    nodes, weights = leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (nodes + 1.0), half * weights


def graded_gauss_legendre(
    lo: float,
    hi: float,
    width: float,
    nodes_per_panel: int,
    toward_hi: bool = True,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Composite Gauss–Legendre rule with panels doubling away from one end.

    Panels are [e - width, e], [e - 2 width, e - width], [e - 4 width, e - 2 width], ...
    measured from the clustered end e, so integrands like e^{-(e - x)/width} are
    resolved uniformly in their decay scale.

    Args:
        lo (float): Left end.
        hi (float): Right end.
        width (float): Decay length at the clustered end.
        nodes_per_panel (int): Gauss–Legendre nodes in each panel.
        toward_hi (bool): Cluster toward ``hi`` (default) or toward ``lo``.

    Returns:
        Tuple[np.ndarray, np.ndarray]: Nodes (ascending) and weights.

    Example:
        graded_gauss_legendre(0.0, 1.0, 0.05, 8) resolves e^{-(1-x)/0.05}
    """
    length = hi - lo
    width = min(max(width, 1e-12 * length), length)
    offsets = [0.0, width]
    while offsets[-1] < length:
        offsets.append(min(2.0 * offsets[-1], length))

    nodes, weights = [], []
    for near, far in zip(offsets[:-1], offsets[1:]):
        x, w = gauss_legendre(nodes_per_panel, near, far)
        nodes.append(x)
        weights.append(w)
    offset_nodes = np.concatenate(nodes)
    offset_weights = np.concatenate(weights)

    if toward_hi:
        points = hi - offset_nodes
    else:
        points = lo + offset_nodes
    order = np.argsort(points)
    return points[order], offset_weights[order]


def periodic_trapezoid(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Equispaced nodes on [0, 2π) with equal weights 2π/n."""
    nodes = 2.0 * np.pi * np.arange(n) / n
    return nodes, np.full(n, 2.0 * np.pi / n)
