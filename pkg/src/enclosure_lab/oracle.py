"""
Brute-force quadrature of the top-order kernel integral

    K = ∫_{∂D × B × B} f(y) f(ỹ) e^{-κ(|x-y| + |x-ỹ|)} η(x, y) η̃(x, ỹ) dS_x dy dỹ

as an independent check of the Laplace-method top term. The kernel factorises,
so for each surface node x two ball integrals are formed and multiplied. All
integrands carry e^{+κl₀} per ball integral and stay O(1).

The surface integral runs over a cap around x₀ where every point of B is seen
at an angle with cosine ≥ ε_cap; the excluded part is covered by a tail bound.
"""

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from mcp.server.fastmcp.utilities.logging import get_logger

from .asymptotics import amplitude_general, reflection_coefficient
from .errors import ConvergenceError, GeometryError
from .geometry import frame_from_normal
from .geometry.surfaces import Surface
from .numerics.logvalue import LogValue
from .numerics.quadrature import gauss_legendre, graded_gauss_legendre, periodic_trapezoid
from .scene import Cavity, CavityKind, Scene
from .stationary import StationaryPair, cavity_pairs

LOG = get_logger(__name__)

EPS_CAP = 0.2
DENOMINATOR_TOL = 1e-8
REFINE_TOL = 1e-6
ACCEPT_TOL = 1e-3
MAX_DOUBLINGS = 4
TAIL_FRACTION = 0.01


@dataclass(frozen=True)
class BoundaryKernelPair:
    eta: float
    eta_tilde: float

    @property
    def product(self) -> float:
        return self.eta * self.eta_tilde


@dataclass(frozen=True)
class QuadratureGrid:
    """
    Node counts and cap size; the graded ball rules are laid out per surface
    node from these counts, so one grid serves every τ.
    """

    cap_half_angle: float
    n_theta: int = 20
    n_phi: int = 8
    ball_nodes_per_panel: int = 8
    n_azimuth: int = 8

    def doubled_surface(self) -> "QuadratureGrid":
        return replace(self, n_theta=2 * self.n_theta, n_phi=2 * self.n_phi)

    def doubled_ball(self) -> "QuadratureGrid":
        return replace(
            self, ball_nodes_per_panel=2 * self.ball_nodes_per_panel, n_azimuth=2 * self.n_azimuth
        )


@dataclass(frozen=True)
class KernelEstimate:
    value: LogValue
    surface_change: float
    ball_change: float
    tail_bound: float
    cap_half_angle: float
    grid: QuadratureGrid


@dataclass(frozen=True)
class ComparisonRow:
    tau: float
    oracle: LogValue
    leading: LogValue
    ratio: float
    tail_bound: float = 0.0


@dataclass(frozen=True)
class ComparisonTable:
    cavity_id: str
    rows: List[ComparisonRow]
    exponent: Optional[float]


def _kernel_arrays(kind: CavityKind, x, nu, ys, lambda1: float, gamma0: float):
    diff = np.asarray(x, dtype=float) - np.atleast_2d(ys)
    rho = np.linalg.norm(diff, axis=1)
    cos_out = diff @ np.asarray(nu, dtype=float) / rho
    root = math.sqrt(gamma0)
    if kind == CavityKind.DIRICHLET:
        eta = 1.0 / (4.0 * math.pi * gamma0 * rho)
        # √γ₀ ∂_ν φ = -ν·(x - ỹ)/|x - ỹ|
        eta_tilde = -2.0 * cos_out / (4.0 * math.pi * root * rho)
        return eta, eta_tilde
    a0 = (cos_out / root + lambda1 / gamma0) / (4.0 * math.pi * rho)
    denominator = -root * cos_out + lambda1
    if np.min(np.abs(denominator)) < DENOMINATOR_TOL:
        raise GeometryError("γ₀∂_νφ + λ₁ vanishes: point outside the valid cap")
    eta = -a0
    eta_tilde = 1.0 / (4.0 * math.pi * gamma0 * rho) - a0 / denominator
    return eta, eta_tilde


def boundary_kernels(
    kind: CavityKind,
    x,
    nu,
    y,
    lambda0: float,
    lambda1: float,
    gamma0: float,
    y_tilde=None,
) -> BoundaryKernelPair:
    """
    η(x, y) and η̃(x, ỹ) from the boundary traces of the reflected wave.

    Robin:      η = -a₀,  η̃ = 1/(4πγ₀|x-ỹ|) + b₀,  b₀ = -a₀(x, ỹ)/(γ₀∂_νφ + λ₁)
    Dirichlet:  η = 1/(4πγ₀|x-y|),  η̃ = (-ν·(x-ỹ)/|x-ỹ| + √γ₀∂_νφ)/(4π√γ₀|x-ỹ|)

    with a₀ = (ν·(x-y)/(√γ₀|x-y|) + λ₁/γ₀)/(4π|x-y|) and γ₀∂_νφ = -√γ₀ν·(x-y)/|x-y|.
    λ₀ does not enter at this order.

    Args:
        kind (CavityKind): Boundary condition.
        x: Point on ∂D.
        nu: Unit normal at x, out of D.
        y: Point in B for η.
        lambda0 (float): λ₀ at x.
        lambda1 (float): λ₁ at x.
        gamma0 (float): γ₀.
        y_tilde: Point in B for η̃ (defaults to y).

    Returns:
        BoundaryKernelPair: The two kernel values.

    Example:
        cfg1 Dirichlet at (x₀, y₀) -> η·η̃ = 1/(32π²)
    """
    kind = CavityKind(kind)
    y_tilde = y if y_tilde is None else y_tilde
    eta, _ = _kernel_arrays(kind, x, nu, [y], lambda1, gamma0)
    _, eta_tilde = _kernel_arrays(kind, x, nu, [y_tilde], lambda1, gamma0)
    return BoundaryKernelPair(eta=float(eta[0]), eta_tilde=float(eta_tilde[0]))


def _ball_rule(probe: Surface, x, kappa: float, nodes_per_panel: int, n_azimuth: int):
    """Nodes and weights over B in spherical coordinates with the pole toward x."""
    center = probe.center_array
    mapping = probe.map_matrix
    local = np.linalg.solve(mapping, np.asarray(x, dtype=float) - center)
    pole = local / np.linalg.norm(local)
    frame = frame_from_normal(np.zeros(3), pole)
    stretch = float(np.linalg.norm(mapping @ pole))
    reach = float(np.linalg.norm(np.asarray(x, dtype=float) - center))
    gap = max(reach - stretch, 1e-3 * stretch)

    s, ws = graded_gauss_legendre(0.0, 1.0, 1.0 / (kappa * stretch), nodes_per_panel)
    c, wc = graded_gauss_legendre(-1.0, 1.0, gap / (kappa * reach * stretch), nodes_per_panel)
    phi, wphi = periodic_trapezoid(n_azimuth)

    ss, cc, pp = np.meshgrid(s, c, phi, indexing="ij")
    sin_psi = np.sqrt(np.clip(1.0 - cc * cc, 0.0, None))
    directions = (
        cc[..., None] * frame.normal
        + (sin_psi * np.cos(pp))[..., None] * frame.e1
        + (sin_psi * np.sin(pp))[..., None] * frame.e2
    )
    points = center + (ss[..., None] * directions) @ mapping.T
    weights = abs(np.linalg.det(mapping)) * (ss**2) * np.einsum("i,j,k->ijk", ws, wc, wphi)
    return points.reshape(-1, 3), weights.ravel()


def _inner_sums(
    scene: Scene,
    cavity: Cavity,
    x,
    nu,
    kappa: float,
    shift: float,
    nodes_per_panel: int,
    n_azimuth: int,
) -> Tuple[float, float]:
    points, weights = _ball_rule(scene.probe, x, kappa, nodes_per_panel, n_azimuth)
    f_values = scene.source.radial(np.linalg.norm(points - scene.probe_center, axis=1))
    if not np.any(f_values):
        return 0.0, 0.0
    eta, eta_tilde = _kernel_arrays(
        cavity.kind, x, nu, points, cavity.lambda1_at(x), scene.gamma0
    )
    distances = np.linalg.norm(np.asarray(x, dtype=float) - points, axis=1)
    common = weights * f_values * np.exp(-kappa * distances + shift)
    return float(common @ eta), float(common @ eta_tilde)


def inner_ball_integral(
    scene: Scene,
    cavity: Cavity,
    x,
    nu,
    tau: float,
    grid: QuadratureGrid,
    shift: float,
    refine: bool = False,
    tol: float = REFINE_TOL,
    max_doublings: int = MAX_DOUBLINGS,
) -> Tuple[float, float]:
    """
    The two ball factors at a surface point x.

        I_η = e^{shift} ∫_B f(y) η(x, y) e^{-κ|x-y|} dy,  and I_η̃ likewise

    Args:
        scene (Scene): Probe and source.
        cavity (Cavity): Cavity type and λ₁ field.
        x: Surface point.
        nu: Outward normal at x.
        tau (float): τ.
        grid (QuadratureGrid): Ball node counts.
        shift (float): τl₀/√γ₀.
        refine (bool): Double the ball nodes until the change is below ``tol``.
        tol (float): Relative refinement tolerance.
        max_doublings (int): Most refinement doublings.

    Returns:
        Tuple[float, float]: (I_η, I_η̃).

    Raises:
        ConvergenceError: If refinement does not settle within max_doublings.
    """
    kappa = tau / scene.sqrt_gamma0
    nodes, azimuth = grid.ball_nodes_per_panel, grid.n_azimuth
    current = _inner_sums(scene, cavity, x, nu, kappa, shift, nodes, azimuth)
    if not refine:
        return current
    for level in range(max_doublings):
        nodes, azimuth = 2 * nodes, 2 * azimuth
        finer = _inner_sums(scene, cavity, x, nu, kappa, shift, nodes, azimuth)
        change = max(_relative_change(a, b) for a, b in zip(current, finer))
        LOG.debug(f"Ball refinement {level + 1}: relative change {change:.2e}")
        current = finer
        if change < tol:
            return current
    raise ConvergenceError(
        f"ball integral did not settle below {tol} after {max_doublings} doublings"
    )


def _relative_change(coarse: float, fine: float) -> float:
    if fine == 0.0:
        return 0.0 if coarse == 0.0 else math.inf
    return abs(fine - coarse) / abs(fine)


def _cap_chart(surface: Surface, x0):
    center = surface.center_array
    mapping = surface.map_matrix
    pole = np.linalg.solve(mapping, np.asarray(x0, dtype=float) - center)
    pole /= np.linalg.norm(pole)
    frame = frame_from_normal(np.zeros(3), pole)
    return center, mapping, pole, frame.e1, frame.e2


def _cap_points(surface: Surface, x0, theta, phi):
    """Points and area elements on a geodesic-polar cap parametrisation around x₀."""
    center, mapping, pole, a1, a2 = _cap_chart(surface, x0)
    tt, pp = np.meshgrid(np.atleast_1d(theta), np.atleast_1d(phi), indexing="ij")
    ring = np.cos(pp)[..., None] * a1 + np.sin(pp)[..., None] * a2
    u = np.cos(tt)[..., None] * pole + np.sin(tt)[..., None] * ring
    du_theta = -np.sin(tt)[..., None] * pole + np.cos(tt)[..., None] * ring
    du_phi = np.sin(tt)[..., None] * (-np.sin(pp)[..., None] * a1 + np.cos(pp)[..., None] * a2)
    points = center + u @ mapping.T
    jacobian = np.linalg.norm(np.cross(du_theta @ mapping.T, du_phi @ mapping.T), axis=-1)
    return points.reshape(-1, 3), jacobian.ravel()


def _illumination(surface: Surface, probe_samples: np.ndarray, x) -> Tuple[float, float]:
    """(min cosine between ν and y - x over B, distance from x to B) at a surface point."""
    nu = surface.normal_at(x)
    diff = probe_samples - x
    distances = np.linalg.norm(diff, axis=1)
    return float(np.min(diff @ nu / distances)), float(distances.min())


def cap_half_angle(
    scene: Scene, cavity: Cavity, pair: StationaryPair, eps_cap: float = EPS_CAP, n_scan: int = 90
) -> float:
    """Largest polar angle about x₀ whose cap sees all of B at cosine ≥ ε_cap."""
    samples = scene.probe.sample()
    azimuths = np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False)
    best = 0.0
    for theta in np.linspace(0.0, 0.5 * math.pi, n_scan + 1)[1:]:
        ring, _ = _cap_points(cavity.surface, pair.x0, theta, azimuths)
        if min(_illumination(cavity.surface, samples, x)[0] for x in ring) < eps_cap:
            break
        best = float(theta)
    if best == 0.0:
        raise GeometryError(f"no illuminated cap around x₀ on cavity '{cavity.id}'")
    return best


def build_grid(
    scene: Scene, cavity: Cavity, pair: StationaryPair, level: int = 1
) -> QuadratureGrid:
    """Default grid for a cavity; ``level`` multiplies every node count."""
    level = max(1, int(level))
    return QuadratureGrid(
        cap_half_angle=cap_half_angle(scene, cavity, pair),
        n_theta=20 * level,
        n_phi=8 * level,
        ball_nodes_per_panel=8 * level,
        n_azimuth=8 * level,
    )


def _surface_area(surface: Surface, n: int = 64) -> float:
    theta, wt = gauss_legendre(n, 0.0, math.pi)
    phi, wp = periodic_trapezoid(2 * n)
    _, jacobian = _cap_points(surface, surface.center_array + surface.map_matrix[:, 2], theta, phi)
    return float(jacobian @ np.outer(wt, wp).ravel())


def _cap_integral(
    scene: Scene,
    cavity: Cavity,
    pair: StationaryPair,
    tau: float,
    grid: QuadratureGrid,
    shift: float,
):
    kappa = tau / scene.sqrt_gamma0
    theta, wt = gauss_legendre(grid.n_theta, 0.0, grid.cap_half_angle)
    phi, wp = periodic_trapezoid(grid.n_phi)
    points, jacobian = _cap_points(cavity.surface, pair.x0, theta, phi)
    weights = jacobian * np.outer(wt, wp).ravel()
    products = np.empty(len(points))
    for index, x in enumerate(points):
        nu = cavity.surface.normal_at(x)
        i_eta, i_eta_tilde = _inner_sums(
            scene, cavity, x, nu, kappa, shift, grid.ball_nodes_per_panel, grid.n_azimuth
        )
        products[index] = i_eta * i_eta_tilde
    return math.fsum(weights * products), points, products, float(weights.sum())


def _single_pair(scene: Scene, cavity: Cavity) -> StationaryPair:
    pairs = cavity_pairs(scene, cavity)
    if len(pairs) != 1:
        raise GeometryError(
            f"cavity '{cavity.id}' has {len(pairs)} stationary pairs; the cap integral needs one"
        )
    return pairs[0]


def _spot_products(scene, cavity, spots, tau: float, grid: QuadratureGrid, shift: float):
    kappa = tau / scene.sqrt_gamma0
    products = []
    for x in spots:
        nu = cavity.surface.normal_at(x)
        i_eta, i_eta_tilde = _inner_sums(
            scene, cavity, x, nu, kappa, shift, grid.ball_nodes_per_panel, grid.n_azimuth
        )
        products.append(i_eta * i_eta_tilde)
    return products


def K_top_shifted(
    scene: Scene,
    cavity_id: str,
    tau: float,
    grid: Optional[QuadratureGrid] = None,
    tol: float = REFINE_TOL,
    max_doublings: int = MAX_DOUBLINGS,
    accept_tol: float = ACCEPT_TOL,
) -> KernelEstimate:
    """
    e^{2τl₀/√γ₀}·K as a signed contribution to J (Dirichlet cavities carry the
    minus sign of their boundary form).

    The ball rule is doubled at x₀ and at the peak surface node until their
    products change by less than ``tol``; the surface rule is then doubled the
    same way. Each factor stops after ``max_doublings``.

    Args:
        scene (Scene): The scene.
        cavity_id (str): Cavity to integrate over.
        tau (float): τ.
        grid (QuadratureGrid, optional): Starting grid; built from the cap when omitted.
        tol (float): Relative change that ends a refinement.
        max_doublings (int): Most doublings per factor.
        accept_tol (float): Largest change still accepted once the doublings run out.

    Returns:
        KernelEstimate: Value, last relative changes, tail bound and final grid.

    Raises:
        ConvergenceError: On refinement or tail-bound failure.
        GeometryError: If the cavity does not have exactly one stationary pair.

    Example:
        cfg1, τ = 32 -> τ⁵·K·2√𝒜/(π b) ≈ 1
    """
    cavity = scene.cavity(cavity_id)
    pair = _single_pair(scene, cavity)
    grid = grid or build_grid(scene, cavity, pair)
    kappa = tau / scene.sqrt_gamma0
    shift = kappa * pair.l0_local

    value, points, products, cap_area = _cap_integral(scene, cavity, pair, tau, grid, shift)
    spots = [pair.x0, points[int(np.argmax(np.abs(products)))]]

    ball_change = math.inf
    refined = False
    base = _spot_products(scene, cavity, spots, tau, grid, shift)
    for level in range(max_doublings):
        finer_grid = grid.doubled_ball()
        finer = _spot_products(scene, cavity, spots, tau, finer_grid, shift)
        ball_change = max(_relative_change(a, b) for a, b in zip(base, finer))
        LOG.debug(f"Ball doubling {level + 1} at τ = {tau}: relative change {ball_change:.2e}")
        if ball_change < tol:
            break
        grid, base, refined = finer_grid, finer, True
    else:
        LOG.warning(
            f"Ball rule reached {max_doublings} doublings at τ = {tau} "
            f"with relative change {ball_change:.2e}"
        )
    if refined:
        value, points, products, cap_area = _cap_integral(scene, cavity, pair, tau, grid, shift)

    surface_change = math.inf
    for level in range(max_doublings):
        grid = grid.doubled_surface()
        finer, points, products, cap_area = _cap_integral(scene, cavity, pair, tau, grid, shift)
        surface_change = _relative_change(value, finer)
        value = finer
        LOG.debug(
            f"Surface doubling {level + 1} at τ = {tau}: relative change {surface_change:.2e}"
        )
        if surface_change < tol:
            break
    else:
        LOG.warning(
            f"Surface rule reached {max_doublings} doublings at τ = {tau} "
            f"with relative change {surface_change:.2e}"
        )

    change = max(surface_change, ball_change)
    if change > accept_tol:
        raise ConvergenceError(
            f"kernel quadrature changed by {change:.2e} under refinement at τ = {tau}"
        )

    tail = 0.0
    if value != 0.0:
        samples = scene.probe.sample()
        azimuths = np.linspace(0.0, 2.0 * math.pi, 16, endpoint=False)
        ring, _ = _cap_points(cavity.surface, pair.x0, grid.cap_half_angle, azimuths)
        separation = min(_illumination(cavity.surface, samples, x)[1] for x in ring) - pair.l0_local
        amplitude = float(np.max(np.abs(products)))
        outside = max(_surface_area(cavity.surface) - cap_area, 0.0)
        tail = outside * amplitude * math.exp(-2.0 * kappa * separation) / abs(value)
        if tail > TAIL_FRACTION:
            raise ConvergenceError(
                f"cap tail bound {tail:.2e} exceeds {TAIL_FRACTION} of K at τ = {tau}"
            )
        if tail > 0.1 * TAIL_FRACTION:
            LOG.warning(f"Cap tail bound {tail:.2e} is close to tolerance at τ = {tau}")

    sign = -1.0 if cavity.kind == CavityKind.DIRICHLET else 1.0
    LOG.debug(
        f"K(τ={tau}) refinement changes {surface_change:.1e}/{ball_change:.1e}, tail {tail:.1e}"
    )
    return KernelEstimate(
        value=LogValue.from_float(sign * value),
        surface_change=surface_change,
        ball_change=ball_change,
        tail_bound=tail,
        cap_half_angle=grid.cap_half_angle,
        grid=grid,
    )


def K_unfactorized(scene: Scene, cavity_id: str, tau: float, grid: QuadratureGrid) -> float:
    """
    Shifted K from the full double sum over (y, ỹ) at each surface node, without
    using the product structure. Coarse grids only.
    """
    cavity = scene.cavity(cavity_id)
    pair = _single_pair(scene, cavity)
    kappa = tau / scene.sqrt_gamma0
    shift = kappa * pair.l0_local
    theta, wt = gauss_legendre(grid.n_theta, 0.0, grid.cap_half_angle)
    phi, wp = periodic_trapezoid(grid.n_phi)
    xs, jacobian = _cap_points(cavity.surface, pair.x0, theta, phi)
    weights = jacobian * np.outer(wt, wp).ravel()
    total = []
    for x, weight in zip(xs, weights):
        nu = cavity.surface.normal_at(x)
        points, w = _ball_rule(scene.probe, x, kappa, grid.ball_nodes_per_panel, grid.n_azimuth)
        f_values = scene.source.radial(np.linalg.norm(points - scene.probe_center, axis=1))
        eta, eta_tilde = _kernel_arrays(
            cavity.kind, x, nu, points, cavity.lambda1_at(x), scene.gamma0
        )
        decay = np.exp(-kappa * np.linalg.norm(x - points, axis=1) + shift)
        left = w * f_values * decay * eta
        right = w * f_values * decay * eta_tilde
        total.append(weight * float(np.sum(np.outer(left, right))))
    sign = -1.0 if cavity.kind == CavityKind.DIRICHLET else 1.0
    return sign * math.fsum(total)


def leading_kernel(scene: Scene, pair: StationaryPair, tau: float) -> LogValue:
    """Shifted top term πγ₀ b f(y₀)² / (2√𝒜 τ⁵) of a pair's signed kernel."""
    cavity = scene.cavity(pair.cavity_id)
    b = reflection_coefficient(cavity.kind, cavity.lambda1_at(pair.x0), scene.gamma0)
    amplitude = amplitude_general(pair)
    value = math.pi * scene.gamma0 * b * scene.f_at(pair.y0) ** 2 / (2.0 * math.sqrt(amplitude))
    return LogValue.from_float(value, log_shift=-5.0 * math.log(tau))


def compare_to_laplace(
    scene: Scene,
    cavity_id: str,
    tau_grid: Sequence[float],
    grid_level: int = 1,
) -> ComparisonTable:
    """
    Oracle / top-term ratios over a τ grid and the fitted decay of |ratio - 1|.

    Args:
        scene (Scene): The scene.
        cavity_id (str): Cavity to check.
        tau_grid (Sequence[float]): Increasing τ values.
        grid_level (int): Node-count multiplier.

    Returns:
        ComparisonTable: One row per τ and the log-log slope of |ratio - 1|
        (expected near -1/2), or None with fewer than two usable rows.
    """
    cavity = scene.cavity(cavity_id)
    pair = _single_pair(scene, cavity)
    grid = build_grid(scene, cavity, pair, grid_level)
    rows: List[ComparisonRow] = []
    for tau in tau_grid:
        estimate = K_top_shifted(scene, cavity_id, tau, grid)
        oracle = estimate.value
        leading = leading_kernel(scene, pair, tau)
        ratio = oracle.ratio_to(leading) if leading.sign != 0 else math.nan
        rows.append(
            ComparisonRow(
                tau=float(tau),
                oracle=oracle,
                leading=leading,
                ratio=ratio,
                tail_bound=estimate.tail_bound,
            )
        )
        LOG.info(f"τ = {tau}: oracle / top term = {ratio:.6f}")

    usable = [
        (row.tau, abs(row.ratio - 1.0))
        for row in rows
        if math.isfinite(row.ratio) and row.ratio != 1.0
    ]
    exponent = None
    if len(usable) >= 2:
        taus, deviations = np.array(usable).T
        exponent = float(np.polyfit(np.log(taus), np.log(deviations), 1)[0])
    return ComparisonTable(cavity_id=cavity_id, rows=rows, exponent=exponent)
