"""
Parametric quadric surfaces: spheres and rotated ellipsoids.

Every surface is the level set |Q(p - c)|² = 1 with Q = diag(1/A)·Rᵀ, charted by
spherical angles of the unit vector u in p = c + R·diag(A)·u. Two charts with
different pole axes overlap, so every point has a chart away from its poles:

    chart 0: u = (sinθ cosφ, sinθ sinφ, cosθ)     poles on ±z
    chart 1: u = (cosθ, sinθ cosφ, sinθ sinφ)     poles on ±x

Normals point outward from the enclosed solid, so convex bodies have positive
principal curvatures.
"""

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from ..errors import GeometryError

Vec3 = Tuple[float, float, float]
Matrix3 = Tuple[Vec3, Vec3, Vec3]

IDENTITY3: Matrix3 = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
CHARTS = (0, 1)
POLE_MARGIN = 0.35


def as_vec3(values) -> Vec3:
    x, y, z = (float(v) for v in values)
    if not all(math.isfinite(v) for v in (x, y, z)):
        raise GeometryError(f"non-finite vector {values}")
    return (x, y, z)


def _unit_and_derivatives(theta: float, phi: float, chart: int):
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(phi), math.cos(phi)
    base = np.array(
        [
            [st * cp, st * sp, ct],  # u
            [ct * cp, ct * sp, -st],  # u_θ
            [-st * sp, st * cp, 0.0],  # u_φ
            [-st * cp, -st * sp, -ct],  # u_θθ
            [-ct * sp, ct * cp, 0.0],  # u_θφ
            [-st * cp, -st * sp, 0.0],  # u_φφ
        ]
    )
    if chart == 0:
        return base
    if chart == 1:
        return base[:, [2, 0, 1]]
    raise GeometryError(f"unknown chart {chart}")


def _unit_to_params(u: np.ndarray, chart: int) -> Tuple[float, float]:
    if chart == 1:
        u = u[[1, 2, 0]]
    elif chart != 0:
        raise GeometryError(f"unknown chart {chart}")
    theta = math.acos(max(-1.0, min(1.0, float(u[2]))))
    phi = math.atan2(float(u[1]), float(u[0]))
    return theta, phi


@dataclass(frozen=True)
class _Quadric:
    """Shared implementation; subclasses fix the centre, semiaxes and rotation."""

    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    @property
    def axes_array(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def rotation_array(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def map_matrix(self) -> np.ndarray:
        """M with p = c + M u."""
        return self.rotation_array * self.axes_array[None, :]

    @property
    def q_matrix(self) -> np.ndarray:
        """Q with |Q(p - c)| = 1 on the surface."""
        return self.rotation_array.T / self.axes_array[:, None]

    @property
    def size(self) -> float:
        return float(self.axes_array.max())

    def _check_params(self, params) -> Tuple[float, float]:
        theta, phi = (float(p) for p in params)
        if not (math.isfinite(theta) and math.isfinite(phi)):
            raise GeometryError(f"non-finite chart parameters {params}")
        if theta < 0.0 or theta > math.pi:
            raise GeometryError(f"polar angle {theta} outside the chart domain [0, π]")
        return theta, phi

    def chart_derivatives(self, params, chart: int = 0, strict: bool = True) -> np.ndarray:
        """
        Point and first/second parameter derivatives, rows
        (p, p_θ, p_φ, p_θθ, p_θφ, p_φφ).

        With strict=False θ may leave [0, π]; the formulas stay valid and the
        point is still on the surface. Optimisers use this form.
        """
        if strict:
            theta, phi = self._check_params(params)
        else:
            theta, phi = (float(p) for p in params)
        unit = _unit_and_derivatives(theta, phi, chart)
        rows = unit @ self.map_matrix.T
        rows[0] += self.center_array
        return rows

    def sample(self, n: int = 24) -> np.ndarray:
        """Points on an n × 2n latitude-longitude grid of chart 0, poles included."""
        theta = np.linspace(0.0, math.pi, n)[:, None]
        phi = np.linspace(0.0, 2.0 * math.pi, 2 * n, endpoint=False)[None, :]
        unit = np.stack(
            [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta) + 0.0 * phi],
            axis=-1,
        ).reshape(-1, 3)
        return self.center_array + unit @ self.map_matrix.T

    def implicit(self, point) -> float:
        q = self.q_matrix @ (np.asarray(point, dtype=float) - self.center_array)
        return float(q @ q - 1.0)

    def contains(self, point) -> bool:
        return self.implicit(point) < 0.0

    def normal_at(self, point) -> np.ndarray:
        """Outward unit normal at a surface point."""
        q = self.q_matrix
        gradient = q.T @ (q @ (np.asarray(point, dtype=float) - self.center_array))
        return gradient / np.linalg.norm(gradient)

    def point_and_normal(self, params, chart: int = 0) -> Tuple[np.ndarray, np.ndarray]:
        """
        Surface point and outward unit normal at chart parameters.

        Args:
            params: (θ, φ) with θ in [0, π].
            chart (int): 0 (poles on ±z) or 1 (poles on ±x).

        Returns:
            Tuple[np.ndarray, np.ndarray]: The point and its outward normal.

        Example:
            Sphere((0, 0, 4), 1).point_and_normal((π, 0)) -> (0, 0, 3), (0, 0, -1)
        """
        theta, phi = self._check_params(params)
        unit = _unit_and_derivatives(theta, phi, chart)[0]
        point = self.center_array + self.map_matrix @ unit
        normal = self.rotation_array @ (unit / self.axes_array)
        return point, normal / np.linalg.norm(normal)

    def params_of(self, point, chart: int = 0) -> Tuple[float, float]:
        """Chart parameters of a point (projected radially onto the surface)."""
        u = self.q_matrix @ (np.asarray(point, dtype=float) - self.center_array)
        return _unit_to_params(u / np.linalg.norm(u), chart)

    def best_chart(self, point) -> Tuple[int, Tuple[float, float]]:
        """Chart keeping the point farthest from that chart's poles."""
        candidates = []
        for chart in CHARTS:
            theta, phi = self.params_of(point, chart)
            candidates.append((min(theta, math.pi - theta), chart, (theta, phi)))
        _, chart, params = max(candidates)
        return chart, params

    def tangent_shape_matrix(self, point, e1, e2) -> np.ndarray:
        """
        Second fundamental form w.r.t. the outward normal, in the basis {e1, e2}.

        For the level set F = |Q(p - c)|² - 1 this is Tᵀ Hess(F) T / |∇F|.
        """
        q = self.q_matrix
        gradient = 2.0 * q.T @ (q @ (np.asarray(point, dtype=float) - self.center_array))
        hessian = 2.0 * q.T @ q
        basis = np.column_stack([e1, e2])
        shape = basis.T @ hessian @ basis / np.linalg.norm(gradient)
        return 0.5 * (shape + shape.T)

    def principal_curvatures(self, params, chart: int = 0) -> Tuple[float, float]:
        """
        Principal curvatures (κ₁ ≤ κ₂) w.r.t. the outward normal.

        Args:
            params: (θ, φ) chart parameters.
            chart (int): Chart index.

        Returns:
            Tuple[float, float]: Both positive for these convex solids.

        Example:
            Ellipsoid semiaxes (2, 1, 1) at (2, 0, 0) -> (2.0, 2.0)
        """
        from .frames import frame_from_normal

        point, normal = self.point_and_normal(params, chart)
        frame = frame_from_normal(point, normal)
        kappa = np.linalg.eigvalsh(self.tangent_shape_matrix(point, frame.e1, frame.e2))
        return float(kappa[0]), float(kappa[1])

    def graph_height(self, origin, e1, e2, normal, sigma) -> float:
        """
        Height t with origin + σ₁e₁ + σ₂e₂ - t·normal on the surface.

        The line meets the quadric in two points; the root nearest the tangent
        plane is returned.
        """
        base = (
            np.asarray(origin, dtype=float)
            + sigma[0] * np.asarray(e1)
            + sigma[1] * np.asarray(e2)
        )
        q0 = self.q_matrix @ (base - self.center_array)
        qn = self.q_matrix @ np.asarray(normal, dtype=float)
        a = qn @ qn
        b = q0 @ qn
        c = q0 @ q0 - 1.0
        disc = b * b - a * c
        if disc < 0.0:
            raise GeometryError(f"graph chart does not reach σ={tuple(sigma)}")
        root = math.sqrt(disc)
        denom = b + math.copysign(root, b) if b != 0.0 else root
        if denom == 0.0:
            return 0.0
        return float(c / denom)


@dataclass(frozen=True)
class Sphere(_Quadric):
    center: Vec3
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec3(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise GeometryError(f"sphere radius must be positive, got {self.radius}")

    @property
    def axes_array(self) -> np.ndarray:
        return np.full(3, float(self.radius))

    @property
    def rotation_array(self) -> np.ndarray:
        return np.eye(3)

    def principal_curvatures(self, params, chart: int = 0) -> Tuple[float, float]:
        self._check_params(params)
        return 1.0 / self.radius, 1.0 / self.radius

    def tangent_shape_matrix(self, point, e1, e2) -> np.ndarray:
        return np.eye(2) / self.radius


@dataclass(frozen=True)
class Ellipsoid(_Quadric):
    center: Vec3
    semiaxes: Vec3
    rotation: Matrix3 = IDENTITY3

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec3(self.center))
        object.__setattr__(self, "semiaxes", as_vec3(self.semiaxes))
        rotation = tuple(as_vec3(row) for row in self.rotation)
        if len(rotation) != 3:
            raise GeometryError("rotation must be a 3×3 matrix")
        object.__setattr__(self, "rotation", rotation)
        if min(self.semiaxes) <= 0.0:
            raise GeometryError(f"semiaxes must be positive, got {self.semiaxes}")
        r = np.asarray(rotation)
        if np.linalg.norm(r.T @ r - np.eye(3)) > 1e-12:
            raise GeometryError("rotation is not orthonormal (‖RᵀR - I‖ > 1e-12)")

    @property
    def axes_array(self) -> np.ndarray:
        return np.asarray(self.semiaxes, dtype=float)

    @property
    def rotation_array(self) -> np.ndarray:
        return np.asarray(self.rotation, dtype=float)


Surface = Union[Sphere, Ellipsoid]


def affine_extrema(surface: Surface, value: float, gradient) -> Tuple[float, float]:
    """
    Exact min and max over the surface of value + gradient·(p - centre).

    On p = c + M u with |u| = 1 the linear part ranges over ±|Mᵀ gradient|.
    """
    spread = float(np.linalg.norm(surface.map_matrix.T @ np.asarray(gradient, dtype=float)))
    return value - spread, value + spread
