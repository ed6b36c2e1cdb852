"""
Minimisers of L₀(x, y) = |x - y| over ∂D × ∂B and the Hessians built from them.

In the local coordinates at a minimiser (x₀, y₀), with ν = (y₀ - x₀)/l₀,

    cavity   s(σ) = x₀ + σ₁e₁ + σ₂e₂ - g(σ)ν,      G = Hess g(0)
    probe    b(u) = x₀ + u₁e₁ + u₂e₂ + (l₀ + h(u))ν,  H = Hess h(0)

and with S_g = I + l₀G, S_h = I + l₀H the two length functions have

    Hess L̃₀(0, 0)    = (1/l₀) [[S_g, -I], [-I, S_h]]
    Hess L̃(0, 0, 0) = (1/l₀) [[2S_g, -I, -I], [-I, S_h, 0], [-I, 0, S_h]]
"""

import math
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional

import numpy as np
from mcp.server.fastmcp.utilities.logging import get_logger

from .errors import ConvergenceError, GeometryError
from .geometry import Frame, QuadraticForm2, frame_from_normal, graph_matrices
from .geometry.distance import surface_contacts, two_leg_minimum
from .geometry.surfaces import Surface
from .numerics.differences import richardson_hessian
from .scene import Cavity, CavityKind, Scene

LOG = get_logger(__name__)

MERGE_TOL = 1e-9
DEDUP_TOL = 1e-6
EQUAL_LENGTH_TOL = 1e-7
ALIGNMENT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class StationaryPair:
    cavity_id: str
    kind: CavityKind
    x0: np.ndarray
    y0: np.ndarray
    frame: Frame
    G: QuadraticForm2
    H: QuadraticForm2
    l0_local: float
    hess_L0: np.ndarray
    hess_L: np.ndarray
    min_eig_L0: float
    amplitude: Optional[float] = None

    @property
    def s_g(self) -> np.ndarray:
        return np.eye(2) + self.l0_local * self.G

    @property
    def s_h(self) -> np.ndarray:
        return np.eye(2) + self.l0_local * self.H

    def with_amplitude(self, amplitude: float) -> "StationaryPair":
        return replace(self, amplitude=amplitude)


@dataclass(frozen=True)
class ShortestLengths:
    l0: float
    l0_plus: Optional[float]
    l0_minus: Optional[float]
    l1: float
    regime: str


@dataclass(frozen=True)
class NondegeneracyCheck:
    passed: bool
    min_eig: float
    tol_eig: float
    triple_min_eig: float
    equivalence_holds: Optional[bool]


def hessian_pair_matrix(G, H, l0: float) -> np.ndarray:
    """(1/l₀)[[S_g, -I], [-I, S_h]] assembled from G and H."""
    eye = np.eye(2)
    s_g = eye + l0 * np.asarray(G, dtype=float)
    s_h = eye + l0 * np.asarray(H, dtype=float)
    return np.block([[s_g, -eye], [-eye, s_h]]) / l0


def hessian_triple_matrix(G, H, l0: float) -> np.ndarray:
    """(1/l₀)[[2S_g, -I, -I], [-I, S_h, 0], [-I, 0, S_h]] assembled from G and H."""
    eye, zero = np.eye(2), np.zeros((2, 2))
    s_g = eye + l0 * np.asarray(G, dtype=float)
    s_h = eye + l0 * np.asarray(H, dtype=float)
    return np.block(
        [
            [2.0 * s_g, -eye, -eye],
            [-eye, s_h, zero],
            [-eye, zero, s_h],
        ]
    ) / l0


def assemble_pair(cavity: Cavity, probe: Surface, x0, y0) -> StationaryPair:
    """
    Build a StationaryPair from a minimiser (x₀, y₀).

    Args:
        cavity (Cavity): Cavity carrying x₀.
        probe (Surface): ∂B, carrying y₀.
        x0: Point on ∂D.
        y0: Point on ∂B.

    Returns:
        StationaryPair: Frame, G, H and both Hessians, amplitude not yet set.

    Raises:
        GeometryError: If the pair violates the normal alignment of a minimiser.
    """
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    l0 = float(np.linalg.norm(y0 - x0))
    frame = frame_from_normal(x0, y0 - x0)

    # a minimiser has ν_{x₀} = (y₀ - x₀)/l₀ and ν_{y₀} = -(y₀ - x₀)/l₀
    cavity_alignment = float(cavity.surface.normal_at(x0) @ frame.normal)
    probe_alignment = float(-probe.normal_at(y0) @ frame.normal)
    if min(cavity_alignment, probe_alignment) < 1.0 - ALIGNMENT_TOL:
        raise GeometryError(
            f"pair on cavity '{cavity.id}' is not normal-aligned "
            f"({cavity_alignment:.12f}, {probe_alignment:.12f})"
        )

    g_matrix, h_matrix = graph_matrices(cavity.surface, probe, (x0, y0), frame)
    hess_l0 = hessian_pair_matrix(g_matrix, h_matrix, l0)
    return StationaryPair(
        cavity_id=cavity.id,
        kind=cavity.kind,
        x0=x0,
        y0=y0,
        frame=frame,
        G=g_matrix,
        H=h_matrix,
        l0_local=l0,
        hess_L0=hess_l0,
        hess_L=hessian_triple_matrix(g_matrix, h_matrix, l0),
        min_eig_L0=float(np.linalg.eigvalsh(hess_l0).min()),
    )


def cavity_pairs(scene: Scene, cavity: Cavity, n_starts: int = 32) -> List[StationaryPair]:
    """
    Minimisers of L₀ restricted to one cavity, at that cavity's own minimum.

    Args:
        scene (Scene): The scene (for ∂B and the tolerance scale).
        cavity (Cavity): The cavity.
        n_starts (int): Multi-start count.

    Returns:
        List[StationaryPair]: Pairs at distance dist(D, B) within the merge tolerance.
    """
    scale = scene.scale
    contacts = surface_contacts(
        cavity.surface, scene.probe, n_starts=n_starts, scale=scale, merge_tol=DEDUP_TOL
    )
    level = contacts[0].distance
    kept = [c for c in contacts if c.distance <= level + MERGE_TOL * scale]
    LOG.debug(f"Cavity '{cavity.id}': {len(contacts)} minimisers, {len(kept)} at level {level}")
    return [assemble_pair(cavity, scene.probe, c.point_a, c.point_b) for c in kept]


def find_pairs(scene: Scene, n_starts: int = 32) -> List[StationaryPair]:
    """
    All global minimisers of L₀ over every cavity of the scene.

    Args:
        scene (Scene): A validated scene.
        n_starts (int): Low-discrepancy starts per cavity.

    Returns:
        List[StationaryPair]: Pairs attaining l₀, ordered by cavity id then by x₀.

    Raises:
        ConvergenceError: If no pair at all is found.

    Example:
        cfg1 -> one pair, x₀ = (0, 0, 3), y₀ = (0, 0, 1), l₀ = 2
    """
    candidates: List[StationaryPair] = []
    for cavity in scene.cavities:
        try:
            candidates.extend(cavity_pairs(scene, cavity, n_starts=n_starts))
        except ConvergenceError as exc:
            LOG.warning(f"Cavity '{cavity.id}': {exc}")
    if not candidates:
        raise ConvergenceError("no stationary pair found; the geometry is inconsistent")

    l0 = min(pair.l0_local for pair in candidates)
    pairs = [p for p in candidates if p.l0_local <= l0 + MERGE_TOL * scene.scale]
    pairs.sort(key=lambda p: (p.cavity_id, *p.x0))
    LOG.info(f"Found {len(pairs)} stationary pair(s) at l₀ = {l0:.12g}")
    return pairs


def shortest_lengths(
    pairs: List[StationaryPair],
    scene: Scene,
    cavity_distances: Optional[Dict[str, float]] = None,
) -> ShortestLengths:
    """
    l₀, l₀⁺, l₀⁻ and an independently minimised l₁.

    Args:
        pairs (List[StationaryPair]): Output of find_pairs.
        scene (Scene): The scene.
        cavity_distances (Dict[str, float], optional): Known dist(D^α, B) by cavity id;
            missing cavities are minimised here.

    Returns:
        ShortestLengths: With ``regime`` one of plus_separated, minus_separated, equal.

    Example:
        cfg1 -> l₀ = l₀⁻ = 2, l₀⁺ absent, l₁ = 4, regime minus_separated
    """
    if not pairs:
        raise ConvergenceError("shortest lengths need at least one stationary pair")
    scale = scene.scale
    distances = dict(cavity_distances or {})
    for pair in pairs:
        distances.setdefault(pair.cavity_id, pair.l0_local)
    for cavity in scene.cavities:
        if cavity.id not in distances:
            contacts = surface_contacts(cavity.surface, scene.probe, n_starts=8, scale=scale)
            distances[cavity.id] = contacts[0].distance

    plus = [distances[c.id] for c in scene.cavities if c.kind == CavityKind.NEUMANN_PLUS]
    minus = [distances[c.id] for c in scene.cavities if c.kind != CavityKind.NEUMANN_PLUS]
    l0_plus = min(plus) if plus else None
    l0_minus = min(minus) if minus else None
    l0 = min(value for value in (l0_plus, l0_minus) if value is not None)

    both = l0_plus is not None and l0_minus is not None
    if both and abs(l0_plus - l0_minus) <= EQUAL_LENGTH_TOL * scale:
        regime = "equal"
    elif l0_minus is None or (l0_plus is not None and l0_plus < l0_minus):
        regime = "plus_separated"
    else:
        regime = "minus_separated"

    l1 = math.inf
    for cavity_id in sorted({pair.cavity_id for pair in pairs}):
        value, _, y, y_tilde = two_leg_minimum(scene.cavity(cavity_id).surface, scene.probe)
        if np.linalg.norm(y - y_tilde) > 1e-4 * scale:
            LOG.warning(f"Three-point minimiser on '{cavity_id}' has y ≠ ỹ")
        l1 = min(l1, value)

    LOG.info(
        f"l₀ = {l0:.12g}, l₀⁺ = {l0_plus}, l₀⁻ = {l0_minus}, l₁ = {l1:.12g} ({regime})"
    )
    return ShortestLengths(l0=l0, l0_plus=l0_plus, l0_minus=l0_minus, l1=l1, regime=regime)


def hessian_triple(pair: StationaryPair) -> np.ndarray:
    """
    The 6×6 Hessian of L̃(σ, u, ũ) = |s(σ) - b(u)| + |s(σ) - b(ũ)| at the origin.

    Example:
        cfg1 -> det = 36
    """
    return hessian_triple_matrix(pair.G, pair.H, pair.l0_local)


def factorization_matrix() -> np.ndarray:
    """P = [[I, 0, 0], [0, I/2, I/2], [0, I/2, -I/2]]."""
    eye, zero = np.eye(2), np.zeros((2, 2))
    return np.block(
        [
            [eye, zero, zero],
            [zero, 0.5 * eye, 0.5 * eye],
            [zero, 0.5 * eye, -0.5 * eye],
        ]
    )


def factorization_residual(pair: StationaryPair) -> float:
    """‖Hess L̃ - (2/l₀)Pᵀ diag(l₀·Hess L̃₀, S_h) P‖ (zero up to round-off)."""
    l0 = pair.l0_local
    middle = np.zeros((6, 6))
    middle[:4, :4] = l0 * pair.hess_L0
    middle[4:, 4:] = pair.s_h
    p = factorization_matrix()
    return float(np.linalg.norm(hessian_triple(pair) - (2.0 / l0) * p.T @ middle @ p))


def check_nondegenerate(
    pair: StationaryPair,
    tol_eig: Optional[float] = None,
    probe_convex: bool = True,
) -> NondegeneracyCheck:
    """
    Positive-definiteness test of Hess L̃₀ at the pair.

    When B is convex, positive-definiteness of Hess L̃₀ and of the 6×6 triple
    Hessian coincide; ``equivalence_holds`` records whether the two tests agree.

    Args:
        pair (StationaryPair): The pair.
        tol_eig (float, optional): Eigenvalue threshold, default 1e-8/l₀.
        probe_convex (bool): Whether to cross-check against the triple Hessian.

    Returns:
        NondegeneracyCheck: ``passed`` iff min eig(Hess L̃₀) ≥ tol_eig.

    Example:
        cfg1 -> passed, min_eig = 1
    """
    tol = tol_eig if tol_eig is not None else 1e-8 / pair.l0_local
    min_eig = float(np.linalg.eigvalsh(pair.hess_L0).min())
    triple_min = float(np.linalg.eigvalsh(hessian_triple(pair)).min())
    passed = min_eig >= tol
    equivalence = None
    if probe_convex:
        equivalence = passed == (triple_min >= tol)
        if not equivalence:
            LOG.warning(
                f"Pair on '{pair.cavity_id}': pair and triple Hessian tests disagree "
                f"({min_eig:.3e} vs {triple_min:.3e})"
            )
    return NondegeneracyCheck(
        passed=passed,
        min_eig=min_eig,
        tol_eig=tol,
        triple_min_eig=triple_min,
        equivalence_holds=equivalence,
    )


def graph_length(
    pair: StationaryPair, cavity_surface: Surface, probe_surface: Surface
) -> Callable[[np.ndarray], float]:
    """
    L̃(σ, u, ũ) in the local graph coordinates of the pair.

    Returns:
        Callable[[np.ndarray], float]: Function of the 6-vector (σ, u, ũ).
    """
    frame = pair.frame
    x0, y0, nu = pair.x0, pair.y0, frame.normal
    basis = np.column_stack([frame.e1, frame.e2])

    def cavity_point(sigma):
        g = cavity_surface.graph_height(x0, frame.e1, frame.e2, nu, sigma)
        return x0 + basis @ sigma - g * nu

    def probe_point(u):
        h = probe_surface.graph_height(y0, frame.e1, frame.e2, -nu, u)
        return y0 + basis @ u + h * nu

    def length(z):
        x = cavity_point(z[0:2])
        return float(
            np.linalg.norm(x - probe_point(z[2:4])) + np.linalg.norm(x - probe_point(z[4:6]))
        )

    return length


def finite_difference_triple(
    pair: StationaryPair,
    cavity_surface: Surface,
    probe_surface: Surface,
    step: Optional[float] = None,
) -> np.ndarray:
    """Richardson-extrapolated 6×6 Hessian of L̃, an independent check of hessian_triple."""
    step = step or 1e-3 * pair.l0_local
    return richardson_hessian(
        graph_length(pair, cavity_surface, probe_surface), np.zeros(6), step
    )
