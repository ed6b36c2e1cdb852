from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from ..errors import GeometryError
from .surfaces import Sphere, Surface

QuadraticForm2 = np.ndarray

ALIGNMENT_TOL = 1e-8
FD_RELATIVE_STEP = 1e-4


@dataclass(frozen=True, eq=False)
class Frame:
    """Right-handed orthonormal frame {e1, e2, ν} anchored at a cavity point."""

    origin: np.ndarray
    normal: np.ndarray
    e1: np.ndarray
    e2: np.ndarray

    def orthonormality_defect(self) -> float:
        basis = np.column_stack([self.e1, self.e2, self.normal])
        defect = np.linalg.norm(basis.T @ basis - np.eye(3))
        handedness = np.linalg.norm(np.cross(self.e1, self.e2) - self.normal)
        return float(max(defect, handedness))


def frame_from_normal(origin, normal) -> Frame:
    """
    Complete a unit normal to a right-handed frame.

    Args:
        origin: Anchor point.
        normal: Direction of ν (normalised here).

    Returns:
        Frame: e1 is built from the coordinate axis least aligned with ν, e2 = ν × e1.
    """
    nu = np.asarray(normal, dtype=float)
    nu = nu / np.linalg.norm(nu)
    helper = np.eye(3)[int(np.argmin(np.abs(nu)))]
    e1 = helper - (helper @ nu) * nu
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(nu, e1)
    return Frame(origin=np.asarray(origin, dtype=float), normal=nu, e1=e1, e2=e2)


def symmetric2(matrix) -> QuadraticForm2:
    m = np.asarray(matrix, dtype=float).reshape(2, 2)
    return 0.5 * (m + m.T)


def mean_curvature(form: QuadraticForm2) -> float:
    return 0.5 * float(np.trace(form))


def gauss_curvature(form: QuadraticForm2) -> float:
    return float(np.linalg.det(form))


def _second_differences(height: Callable[[Tuple[float, float]], float], step: float) -> np.ndarray:
    h0 = height((0.0, 0.0))
    d11 = (height((step, 0.0)) - 2.0 * h0 + height((-step, 0.0))) / step**2
    d22 = (height((0.0, step)) - 2.0 * h0 + height((0.0, -step))) / step**2
    d12 = (
        height((step, step))
        - height((step, -step))
        - height((-step, step))
        + height((-step, -step))
    ) / (4.0 * step**2)
    return np.array([[d11, d12], [d12, d22]])


def graph_hessian(surface: Surface, origin, frame: Frame, normal) -> QuadraticForm2:
    """
    Hessian at σ = 0 of the graph height t(σ) with origin + σ·e - t(σ)·normal on the
    surface, by central differences with one Richardson extrapolation level.

    The step is 1e-4 of the local radius of curvature.
    """
    shape = surface.tangent_shape_matrix(origin, frame.e1, frame.e2)
    curvature = float(np.max(np.abs(np.linalg.eigvalsh(shape))))
    radius = 1.0 / curvature if curvature > 0.0 else surface.size
    step = FD_RELATIVE_STEP * radius

    def height(sigma):
        return surface.graph_height(origin, frame.e1, frame.e2, normal, sigma)

    coarse = _second_differences(height, step)
    fine = _second_differences(height, 0.5 * step)
    return symmetric2((4.0 * fine - coarse) / 3.0)


def graph_matrices(
    cavity_surface: Surface,
    probe_surface: Surface,
    pair: Tuple[np.ndarray, np.ndarray],
    frame: Frame,
) -> Tuple[QuadraticForm2, QuadraticForm2]:
    """
    Second-order graph coefficients G (cavity) and H (probe) at a stationary pair.

    s(σ) = x₀ + σ₁e₁ + σ₂e₂ - g(σ)ν and b(u) = x₀ + u₁e₁ + u₂e₂ + (l₀ + h(u))ν;
    G = Hess g(0), H = Hess h(0). Spheres use the closed form I/R.

    Args:
        cavity_surface (Surface): ∂D^α.
        probe_surface (Surface): ∂B.
        pair (Tuple[np.ndarray, np.ndarray]): (x₀, y₀).
        frame (Frame): Frame at x₀ with ν along y₀ - x₀.

    Returns:
        Tuple[QuadraticForm2, QuadraticForm2]: (G, H).

    Example:
        Unit cavity sphere facing a ball of radius 2 -> G = I, H = 0.5·I
    """
    x0 = np.asarray(pair[0], dtype=float)
    y0 = np.asarray(pair[1], dtype=float)
    direction = (y0 - x0) / np.linalg.norm(y0 - x0)
    if float(frame.normal @ direction) < 1.0 - ALIGNMENT_TOL:
        raise GeometryError("frame normal is not aligned with y₀ - x₀")

    if isinstance(cavity_surface, Sphere):
        g_matrix = np.eye(2) / cavity_surface.radius
    else:
        g_matrix = graph_hessian(cavity_surface, x0, frame, frame.normal)

    if isinstance(probe_surface, Sphere):
        h_matrix = np.eye(2) / probe_surface.radius
    else:
        # ∂B seen from y₀: its outward normal is -ν, so heights grow along +ν
        h_matrix = graph_hessian(probe_surface, y0, frame, -frame.normal)

    return symmetric2(g_matrix), symmetric2(h_matrix)
