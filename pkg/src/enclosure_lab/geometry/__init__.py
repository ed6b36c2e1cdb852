from .frames import (
    Frame,
    QuadraticForm2,
    frame_from_normal,
    gauss_curvature,
    graph_matrices,
    mean_curvature,
)
from .surfaces import Ellipsoid, Sphere, Surface, Vec3, affine_extrema

__all__ = [
    "Ellipsoid",
    "Frame",
    "QuadraticForm2",
    "Sphere",
    "Surface",
    "Vec3",
    "affine_extrema",
    "frame_from_normal",
    "gauss_curvature",
    "graph_matrices",
    "mean_curvature",
]
