"""
Closest points between two quadric surfaces by multi-start minimisation.

Starts come from a scrambled Sobol sequence over the chart product; each start is
run through BFGS, re-charted away from poles, then polished with a trust-region
Newton step using the exact chart Hessian of ½|x - y|².
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from mcp.server.fastmcp.utilities.logging import get_logger
from scipy.optimize import minimize
from scipy.stats import qmc

from ..errors import ConvergenceError
from .surfaces import Sphere, Surface

LOG = get_logger(__name__)

DEFAULT_STARTS = 32
THETA_RANGE = (0.1 * math.pi, 0.9 * math.pi)


@dataclass(frozen=True, eq=False)
class SurfaceContact:
    """A local minimiser of |x - y| with x on surface_a and y on surface_b."""

    point_a: np.ndarray
    point_b: np.ndarray
    distance: float
    grad_norm: float


def _half_square(surface_a: Surface, surface_b: Surface, charts: Tuple[int, int]):
    chart_a, chart_b = charts

    def value_and_grad(z):
        da = surface_a.chart_derivatives(z[:2], chart_a, strict=False)
        db = surface_b.chart_derivatives(z[2:], chart_b, strict=False)
        diff = da[0] - db[0]
        grad = np.concatenate([da[1:3] @ diff, -(db[1:3] @ diff)])
        return 0.5 * float(diff @ diff), grad

    def hessian(z):
        da = surface_a.chart_derivatives(z[:2], chart_a, strict=False)
        db = surface_b.chart_derivatives(z[2:], chart_b, strict=False)
        diff = da[0] - db[0]
        ja, jb = da[1:3], db[1:3]
        second_a = np.array([[da[3] @ diff, da[4] @ diff], [da[4] @ diff, da[5] @ diff]])
        second_b = np.array([[db[3] @ diff, db[4] @ diff], [db[4] @ diff, db[5] @ diff]])
        hess = np.empty((4, 4))
        hess[:2, :2] = ja @ ja.T + second_a
        hess[:2, 2:] = -ja @ jb.T
        hess[2:, :2] = -jb @ ja.T
        hess[2:, 2:] = jb @ jb.T - second_b
        return hess

    return value_and_grad, hessian


def _polish(surface_a: Surface, surface_b: Surface, z0: np.ndarray, charts, scale: float):
    value_and_grad, _ = _half_square(surface_a, surface_b, charts)
    coarse = minimize(
        value_and_grad,
        z0,
        jac=True,
        method="BFGS",
        options={"gtol": 1e-8 * scale * scale, "maxiter": 400},
    )
    z = coarse.x
    point_a = surface_a.chart_derivatives(z[:2], charts[0], strict=False)[0]
    point_b = surface_b.chart_derivatives(z[2:], charts[1], strict=False)[0]

    chart_a, params_a = surface_a.best_chart(point_a)
    chart_b, params_b = surface_b.best_chart(point_b)
    best = (chart_a, chart_b)
    value_and_grad, hessian = _half_square(surface_a, surface_b, best)
    fine = minimize(
        value_and_grad,
        np.array([*params_a, *params_b]),
        jac=True,
        hess=hessian,
        method="trust-exact",
        options={"gtol": 1e-15 * scale * scale, "maxiter": 100},
    )
    z = fine.x
    da = surface_a.chart_derivatives(z[:2], best[0], strict=False)
    db = surface_b.chart_derivatives(z[2:], best[1], strict=False)
    distance = float(np.linalg.norm(da[0] - db[0]))
    _, grad = value_and_grad(z)
    grad_norm = float(np.linalg.norm(grad)) / max(distance, 1e-300)
    return SurfaceContact(da[0], db[0], distance, grad_norm)


def surface_contacts(
    surface_a: Surface,
    surface_b: Surface,
    n_starts: int = DEFAULT_STARTS,
    scale: Optional[float] = None,
    grad_tol: float = 1e-10,
    merge_tol: float = 1e-6,
    seed: int = 0,
) -> List[SurfaceContact]:
    """
    Local minimisers of |x - y| over surface_a × surface_b.

    Args:
        surface_a (Surface): First surface (the cavity).
        surface_b (Surface): Second surface (the probe).
        n_starts (int): Number of low-discrepancy starts.
        scale (float, optional): Length scale for tolerances; defaults to the
            larger surface size.
        grad_tol (float): Accept a start when |∇L₀| ≤ grad_tol·scale.
        merge_tol (float): Contacts closer than merge_tol·scale in (x, y) merge.
        seed (int): Sobol scrambling seed.

    Returns:
        List[SurfaceContact]: Distinct minimisers sorted by distance, then by x.
    """
    scale = scale or max(surface_a.size, surface_b.size)
    starts = qmc.Sobol(d=4, scramble=True, seed=seed).random(n_starts)
    contacts: List[SurfaceContact] = []
    for index, unit in enumerate(starts):
        charts = (index % 2, (index // 2) % 2)
        z0 = np.array(
            [
                THETA_RANGE[0] + (THETA_RANGE[1] - THETA_RANGE[0]) * unit[0],
                2.0 * math.pi * unit[1],
                THETA_RANGE[0] + (THETA_RANGE[1] - THETA_RANGE[0]) * unit[2],
                2.0 * math.pi * unit[3],
            ]
        )
        try:
            contact = _polish(surface_a, surface_b, z0, charts, scale)
        except (ValueError, np.linalg.LinAlgError) as exc:
            LOG.debug(f"Start {index} failed: {exc}")
            continue
        if not math.isfinite(contact.grad_norm) or contact.grad_norm > grad_tol * scale:
            LOG.debug(f"Start {index} stopped with |∇L₀| = {contact.grad_norm:.3e}")
            continue
        contacts.append(contact)

    if not contacts:
        raise ConvergenceError("no minimisation start converged")

    contacts.sort(key=lambda c: (c.distance, *c.point_a))
    distinct: List[SurfaceContact] = []
    for contact in contacts:
        duplicate = any(
            np.linalg.norm(contact.point_a - kept.point_a)
            + np.linalg.norm(contact.point_b - kept.point_b)
            <= merge_tol * scale
            for kept in distinct
        )
        if not duplicate:
            distinct.append(contact)
    LOG.debug(f"{len(contacts)} converged starts, {len(distinct)} distinct minimisers")
    return distinct


def minimum_gap(surface_a: Surface, surface_b: Surface, n_starts: int = 8) -> float:
    """
    Signed separation of two convex solids: the surface distance, or -1 when one
    solid reaches into the other.
    """
    if isinstance(surface_a, Sphere) and isinstance(surface_b, Sphere):
        offset = np.linalg.norm(surface_a.center_array - surface_b.center_array)
        gap = float(offset) - surface_a.radius - surface_b.radius
        return gap if gap > 0.0 else -1.0
    if surface_a.contains(surface_b.center_array) or surface_b.contains(surface_a.center_array):
        return -1.0
    # intersecting surfaces give zero-distance minimisers on the intersection curve
    for inner, outer in ((surface_a, surface_b), (surface_b, surface_a)):
        if any(outer.implicit(point) < 0.0 for point in inner.sample()):
            return -1.0
    try:
        contacts = surface_contacts(surface_a, surface_b, n_starts=n_starts, grad_tol=1e-6)
    except ConvergenceError:
        return -1.0
    closest = contacts[0]
    if surface_b.contains(closest.point_a) or surface_a.contains(closest.point_b):
        return -1.0
    return closest.distance


def two_leg_minimum(
    cavity: Surface,
    probe: Surface,
    n_starts: int = 16,
    seed: int = 1,
) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """
    Minimum of L(x, y, ỹ) = |x - y| + |x - ỹ| over ∂D × ∂B × ∂B.

    Returns:
        Tuple[float, np.ndarray, np.ndarray, np.ndarray]: (l₁, x, y, ỹ).
    """

    def value_and_grad(z, charts):
        dx = cavity.chart_derivatives(z[0:2], charts[0], strict=False)
        dy = probe.chart_derivatives(z[2:4], charts[1], strict=False)
        dz = probe.chart_derivatives(z[4:6], charts[1], strict=False)
        first, second = dx[0] - dy[0], dx[0] - dz[0]
        r1, r2 = np.linalg.norm(first), np.linalg.norm(second)
        unit1, unit2 = first / r1, second / r2
        grad = np.concatenate(
            [dx[1:3] @ (unit1 + unit2), -(dy[1:3] @ unit1), -(dz[1:3] @ unit2)]
        )
        return float(r1 + r2), grad

    scale = max(cavity.size, probe.size)
    starts = qmc.Sobol(d=6, scramble=True, seed=seed).random(n_starts)
    best = None
    for index, unit in enumerate(starts):
        charts = (index % 2, (index // 2) % 2)
        z0 = np.empty(6)
        z0[0::2] = THETA_RANGE[0] + (THETA_RANGE[1] - THETA_RANGE[0]) * unit[0::2]
        z0[1::2] = 2.0 * math.pi * unit[1::2]
        result = minimize(
            value_and_grad,
            z0,
            args=(charts,),
            jac=True,
            method="BFGS",
            options={"gtol": 1e-12 * scale, "maxiter": 1000},
        )
        if best is None or result.fun < best[0]:
            best = (float(result.fun), result.x, charts)

    if best is None:
        raise ConvergenceError("three-point minimisation produced no result")
    value, z, charts = best
    x = cavity.chart_derivatives(z[0:2], charts[0], strict=False)[0]
    y = probe.chart_derivatives(z[2:4], charts[1], strict=False)[0]
    y_tilde = probe.chart_derivatives(z[4:6], charts[1], strict=False)[0]
    return value, x, y, y_tilde
