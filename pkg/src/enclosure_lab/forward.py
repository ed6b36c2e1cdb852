"""
Exact spectral solution of (γ₀Δ - τ²)w + f = 0 outside one spherical cavity.

With κ = τ/√γ₀ the free kernel is

    Φ_τ(x, y) = e^{-κ|x-y|} / (4πγ₀|x-y|)
              = (κ / (2π²γ₀)) Σ (2n+1) i_n(κr<) k_n(κr>) P_n(cos γ)

and for f radial about the ball centre b only the n = 0 term of the source
survives, so v(x) = (2κ/(πγ₀)) F k_0(κ|x - b|) with F = ∫₀^a ρ² f(ρ) i_0(κρ) dρ.
On the cavity sphere (centre c, radius R, axis pointing at b) v is expanded in
Legendre modes and the scattered field is w_s = Σ c_n k_n(κ|x - c|) P_n.

Every exponential is factored out. Traces and coefficients are stored multiplied
by e^{κl₀} (l₀ = dist(∂D, B)), indicator values by e^{2κl₀}.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from mcp.server.fastmcp.utilities.logging import get_logger
from numpy.polynomial.legendre import legvander

from .errors import ConvergenceError, EnclosureLabError
from .geometry import Sphere
from .numerics.bessel import MAX_ORDER, scaled_bessel
from .numerics.logvalue import LogValue, log_sum
from .numerics.quadrature import graded_gauss_legendre
from .reconstruct import LogSeries, SeriesSample
from .scene import CavityKind, Scene

LOG = get_logger(__name__)

TAIL_TOL = 1e-8
ROUNDOFF_FLOOR = 1e-13
CROSS_CHECK_TOL = 1e-4
EXTRA_MODES = 20


@dataclass(frozen=True, eq=False)
class CavityGeometry:
    """A spherical cavity seen from a ball probe, on the axis c → b."""

    center: np.ndarray
    radius: float
    probe_center: np.ndarray
    probe_radius: float

    @property
    def axis(self) -> np.ndarray:
        offset = self.probe_center - self.center
        return offset / np.linalg.norm(offset)

    @property
    def separation(self) -> float:
        """d = |b - c|."""
        return float(np.linalg.norm(self.probe_center - self.center))

    @property
    def gap(self) -> float:
        """l₀ = d - R - a."""
        return self.separation - self.radius - self.probe_radius


@dataclass(frozen=True, eq=False)
class IncidentTrace:
    """Legendre modes of v and ∂_r v on the cavity sphere, times e^{κl₀}."""

    geometry: CavityGeometry
    kappa: float
    gamma0: float
    n_max: int
    values: np.ndarray
    radial: np.ndarray
    source_moment: float
    tail: float

    @property
    def log_shift(self) -> float:
        return self.kappa * self.geometry.gap


@dataclass(frozen=True, eq=False)
class SpectralSolution:
    """
    Scattered-field modes for one spherical cavity at fixed τ.

    ``coefficients`` holds ĉ_n = c_n k_n(κR) e^{κl₀}, the boundary value of mode
    n of w_s; ``log_derivative`` holds k_n'(κR)/k_n(κR).
    """

    trace: IncidentTrace
    kind: CavityKind
    lam: float
    coefficients: np.ndarray
    log_derivative: np.ndarray
    bc_residual: float
    decay_ok: bool

    @property
    def geometry(self) -> CavityGeometry:
        return self.trace.geometry

    @property
    def kappa(self) -> float:
        return self.trace.kappa

    @property
    def n_max(self) -> int:
        return self.trace.n_max

    @property
    def log_shift(self) -> float:
        return self.trace.log_shift

    @property
    def tail(self) -> float:
        return self.trace.tail

    def boundary_modes(self) -> Tuple[np.ndarray, np.ndarray]:
        """Modes of the total field w and of ∂_r w on the sphere, times e^{κl₀}."""
        w = self.trace.values + self.coefficients
        dw = self.trace.radial + self.kappa * self.log_derivative * self.coefficients
        return w, dw

    def scattered(self, points, extra_shift: float = 0.0) -> np.ndarray:
        """
        w_s at exterior points, times e^{κl₀ + extra_shift}.

        Args:
            points: Array (m, 3) of points with |x - c| ≥ R.
            extra_shift (float): Additional log factor added inside the exponent.

        Returns:
            np.ndarray: Shifted values, shape (m,).
        """
        geometry = self.geometry
        offsets = np.atleast_2d(np.asarray(points, dtype=float)) - geometry.center
        r = np.linalg.norm(offsets, axis=1)
        cos_theta = np.clip(offsets @ geometry.axis / r, -1.0, 1.0)
        radial = _mode_radial_factors(self, r, extra_shift)
        modes = radial * self.coefficients[:, None]
        return np.einsum("nj,jn->j", modes, legvander(cos_theta, self.n_max))


def _mode_radial_factors(
    solution: SpectralSolution, r: np.ndarray, extra_shift: float
) -> np.ndarray:
    kappa, radius = solution.kappa, solution.geometry.radius
    at_points = scaled_bessel(solution.n_max, kappa * r).k_hat
    at_sphere = scaled_bessel(solution.n_max, kappa * radius).k_hat[:, 0]
    return at_points / at_sphere[:, None] * np.exp(-kappa * (r - radius) + extra_shift)[None, :]


def cavity_geometry(scene: Scene, cavity_id: Optional[str] = None) -> CavityGeometry:
    """
    Axisymmetric layout of a spherical cavity and a ball probe.

    Raises:
        EnclosureLabError: For non-spherical cavities or a non-ball probe.
    """
    cavity = scene.cavity(cavity_id) if cavity_id else scene.cavities[0]
    if not isinstance(cavity.surface, Sphere) or scene.probe_radius is None:
        raise EnclosureLabError("the exact solver needs a spherical cavity and a ball probe")
    if not (cavity.lambda0.is_constant and cavity.lambda1.is_constant):
        raise EnclosureLabError("the exact solver needs constant λ₀, λ₁ on the cavity")
    return CavityGeometry(
        center=cavity.surface.center_array,
        radius=cavity.surface.radius,
        probe_center=scene.probe_center,
        probe_radius=scene.probe_radius,
    )


def free_kernel(x, y, tau: float, gamma0: float) -> LogValue:
    """Φ_τ(x, y) = e^{-τ|x-y|/√γ₀} / (4πγ₀|x-y|) in log form."""
    distance = float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))
    kappa = tau / math.sqrt(gamma0)
    return LogValue(1, -kappa * distance - math.log(4.0 * math.pi * gamma0 * distance))


def free_kernel_series(
    x, y, tau: float, gamma0: float, origin=(0.0, 0.0, 0.0), n_max: Optional[int] = None
) -> LogValue:
    """
    Φ_τ(x, y) from the separable i_n k_n expansion about ``origin``.

    Args:
        x: First point.
        y: Second point, |x - origin| ≠ |y - origin|.
        tau (float): τ.
        gamma0 (float): γ₀.
        origin: Expansion centre.
        n_max (int, optional): Truncation; chosen from the radius ratio when omitted.

    Returns:
        LogValue: The kernel value.
    """
    origin = np.asarray(origin, dtype=float)
    px = np.asarray(x, dtype=float) - origin
    py = np.asarray(y, dtype=float) - origin
    rx, ry = float(np.linalg.norm(px)), float(np.linalg.norm(py))
    inner, outer = min(rx, ry), max(rx, ry)
    kappa = tau / math.sqrt(gamma0)
    if n_max is None:
        n_max = int(math.ceil(kappa * inner + 40.0 / math.log(outer / inner))) + 10
        n_max = min(n_max, MAX_ORDER)
    cos_gamma = float(np.clip(px @ py / (rx * ry), -1.0, 1.0))
    orders = np.arange(n_max + 1)
    i_hat = scaled_bessel(n_max, kappa * inner).i_hat[:, 0]
    k_hat = scaled_bessel(n_max, kappa * outer).k_hat[:, 0]
    legendre = legvander(np.array([cos_gamma]), n_max)[0]
    total = float(np.sum((2 * orders + 1) * i_hat * k_hat * legendre))
    prefactor = kappa / (2.0 * math.pi**2 * gamma0)
    return LogValue.from_float(prefactor * total, log_shift=-kappa * (outer - inner))


def _source_moment(scene: Scene, geometry: CavityGeometry, kappa: float, nodes: int) -> float:
    """F e^{-κa} = ∫₀^a ρ² f(ρ) î_0(κρ) e^{-κ(a-ρ)} dρ."""
    a = geometry.probe_radius
    rho, weights = graded_gauss_legendre(0.0, a, 1.0 / kappa, nodes)
    i0 = scaled_bessel(0, kappa * rho).i_hat[0]
    integrand = rho**2 * scene.source.radial(rho) * i0 * np.exp(-kappa * (a - rho))
    return float(weights @ integrand)


def incident_at(
    scene: Scene, points, tau: float, cavity_id: Optional[str] = None, nodes: int = 32
) -> np.ndarray:
    """
    v(x)·e^{κl₀} at points outside B from the closed radial form.

    Returns:
        np.ndarray: Shifted values (m,).
    """
    geometry = cavity_geometry(scene, cavity_id)
    kappa = tau / scene.sqrt_gamma0
    moment = _source_moment(scene, geometry, kappa, nodes)
    offsets = np.atleast_2d(np.asarray(points, dtype=float)) - geometry.probe_center
    r = np.linalg.norm(offsets, axis=1)
    k0 = scaled_bessel(0, kappa * r).k_hat[0]
    exponent = -kappa * (r - geometry.probe_radius - geometry.gap)
    return 2.0 * kappa / (math.pi * scene.gamma0) * moment * k0 * np.exp(exponent)


def incident_direct(
    scene: Scene, point, tau: float, n_radial: int = 24, n_polar: int = 32
) -> LogValue:
    """
    v(x) = ∫_B Φ_τ(x, y) f(y) dy by brute-force quadrature over the ball.

    Uses spherical coordinates about the ball centre with the pole toward x; the
    azimuthal integral is exact by symmetry.
    """
    if scene.probe_radius is None:
        raise EnclosureLabError("direct incident quadrature needs a ball probe")
    a = scene.probe_radius
    kappa = tau / scene.sqrt_gamma0
    r = float(np.linalg.norm(np.asarray(point, dtype=float) - scene.probe_center))
    gap = r - a
    s, ws = graded_gauss_legendre(0.0, a, 1.0 / kappa, n_radial)
    c, wc = graded_gauss_legendre(-1.0, 1.0, max(gap, 1e-3) / (kappa * r * a), n_polar)
    ss, cc = np.meshgrid(s, c, indexing="ij")
    distance = np.sqrt(r * r + ss * ss - 2.0 * r * ss * cc)
    kernel = np.exp(-kappa * (distance - gap)) / (4.0 * math.pi * scene.gamma0 * distance)
    integrand = 2.0 * math.pi * ss**2 * scene.source.radial(ss) * kernel
    return LogValue.from_float(float(ws @ integrand @ wc), log_shift=-kappa * gap)


def incident_trace(
    scene: Scene,
    tau: float,
    n_max: Optional[int] = None,
    nodes_per_panel: Optional[int] = None,
    cavity_id: Optional[str] = None,
) -> IncidentTrace:
    """
    Legendre modes of v and ∂_r v on the cavity sphere, times e^{κl₀}.

    The trace is evaluated at graded Gauss–Legendre nodes in cos θ (clustered at
    the point facing B) and projected onto P_0..P_{n_max}. n_max starts at
    ⌈κR⌉ + 20 and grows until |v_{n_max}| ≤ 1e-8·max|v_n|.

    Args:
        scene (Scene): Ball probe and (first or chosen) spherical cavity.
        tau (float): τ.
        n_max (int, optional): Initial truncation.
        nodes_per_panel (int, optional): Projection nodes per graded panel.
        cavity_id (str, optional): Cavity to use.

    Returns:
        IncidentTrace: Modes with their tail ratio.

    Raises:
        ConvergenceError: If the tail test fails at the largest allowed order.
    """
    geometry = cavity_geometry(scene, cavity_id)
    kappa = tau / scene.sqrt_gamma0
    d, radius = geometry.separation, geometry.radius
    order = n_max if n_max is not None else int(math.ceil(kappa * radius)) + EXTRA_MODES

    moment = _source_moment(scene, geometry, kappa, 32)
    prefactor = 2.0 * kappa / (math.pi * scene.gamma0) * moment
    width = (d - radius) / (kappa * d * radius)

    while True:
        per_panel = nodes_per_panel or order + 16
        t, weights = graded_gauss_legendre(-1.0, 1.0, width, per_panel)
        r = np.sqrt(d * d + radius * radius - 2.0 * d * radius * t)
        tables = scaled_bessel(0, kappa * r)
        decay = np.exp(-kappa * (r - (d - radius)))
        values = prefactor * tables.k_hat[0] * decay
        # ∂/∂R_c of k_0(κ|x - b|) with x = c + R_c n̂
        radial = prefactor * kappa * tables.dk_hat[0] * decay * (radius - d * t) / r

        legendre = legvander(t, order)
        norms = (2.0 * np.arange(order + 1) + 1.0) / 2.0
        v_modes = norms * (legendre.T @ (weights * values))
        dv_modes = norms * (legendre.T @ (weights * radial))

        peak = max(np.max(np.abs(v_modes)), 1e-300)
        tail = float(abs(v_modes[-1]) / peak)
        if tail <= TAIL_TOL or moment == 0.0:
            break
        if order >= MAX_ORDER:
            raise ConvergenceError(f"mode tail {tail:.2e} above {TAIL_TOL} at n_max={order}")
        new_order = min(MAX_ORDER, int(1.5 * order) + 10)
        LOG.debug(f"Tail {tail:.2e} at n_max={order}; raising to {new_order}")
        order = new_order

    return IncidentTrace(
        geometry=geometry,
        kappa=kappa,
        gamma0=scene.gamma0,
        n_max=order,
        values=v_modes,
        radial=dv_modes,
        source_moment=moment,
        tail=tail if moment != 0.0 else 0.0,
    )


def _decays_monotonically(modes: np.ndarray, count: int = 5) -> bool:
    magnitudes = np.abs(modes)
    floor = ROUNDOFF_FLOOR * max(magnitudes.max(), 1e-300)
    last = magnitudes[-count:]
    last = last[last > floor]
    return bool(np.all(np.diff(last) <= 0.0))


def solve_modes(
    trace: IncidentTrace, kind: CavityKind, lambda0: float = 0.0, lambda1: float = 0.0
) -> SpectralSolution:
    """
    Per-mode boundary condition solve.

    Dirichlet:  ĉ_n = -v̂_n
    Robin:      ĉ_n (γ₀κ k_n'/k_n - λ) = -(γ₀ ∂_r v̂_n - λ v̂_n),  λ = λ₁τ + λ₀

    Args:
        trace (IncidentTrace): Incident modes.
        kind (CavityKind): Boundary condition type.
        lambda0 (float): Constant λ₀.
        lambda1 (float): Constant λ₁ ≥ 0.

    Returns:
        SpectralSolution: Modes with the boundary residual and decay diagnostics.

    Example:
        Dirichlet -> v̂_n + ĉ_n = 0 for every n
    """
    kind = CavityKind(kind)
    kappa, gamma0 = trace.kappa, trace.gamma0
    tau = kappa * math.sqrt(gamma0)
    tables = scaled_bessel(trace.n_max, kappa * trace.geometry.radius)
    log_derivative = tables.dk_hat[:, 0] / tables.k_hat[:, 0]
    lam = lambda1 * tau + lambda0

    if kind == CavityKind.DIRICHLET:
        coefficients = -trace.values
        residual = float(np.max(np.abs(trace.values + coefficients)))
    else:
        if lambda1 < 0.0:
            raise EnclosureLabError(f"λ₁ must be non-negative, got {lambda1}")
        denominator = gamma0 * kappa * log_derivative - lam
        if np.min(np.abs(denominator)) < 1e-14 * gamma0 * kappa:
            raise ConvergenceError("vanishing Robin denominator; k_n'/k_n should be negative")
        rhs = -(gamma0 * trace.radial - lam * trace.values)
        coefficients = rhs / denominator
        bc = gamma0 * (trace.radial + kappa * log_derivative * coefficients) - lam * (
            trace.values + coefficients
        )
        scale = max(
            np.max(np.abs(gamma0 * trace.radial)), np.max(np.abs(lam * trace.values)), 1e-300
        )
        residual = float(np.max(np.abs(bc)) / scale)

    decay_ok = _decays_monotonically(coefficients)
    if not decay_ok:
        LOG.warning(f"Scattered modes do not decay over the last modes at n_max={trace.n_max}")
    return SpectralSolution(
        trace=trace,
        kind=kind,
        lam=lam,
        coefficients=coefficients,
        log_derivative=log_derivative,
        bc_residual=residual,
        decay_ok=decay_ok,
    )


def boundary_indicator(solution: SpectralSolution) -> LogValue:
    """
    J from the boundary form on the cavity sphere, as a LogValue.

        Robin:      J = ∫ (γ₀∂_ν v - λv) w dS
        Dirichlet:  J = -γ₀ ∫ ∂_ν w · v dS
    """
    trace = solution.trace
    radius = trace.geometry.radius
    gram = 2.0 / (2.0 * np.arange(trace.n_max + 1) + 1.0)
    w, dw = solution.boundary_modes()
    if solution.kind == CavityKind.DIRICHLET:
        products = -trace.gamma0 * dw * trace.values
    else:
        products = (trace.gamma0 * trace.radial - solution.lam * trace.values) * w
    total = 2.0 * math.pi * radius**2 * math.fsum(gram * products)
    return LogValue.from_float(total, log_shift=-2.0 * solution.log_shift)


def volume_indicator(
    scene: Scene, solution: SpectralSolution, n_radial: int = 24, n_polar: int = 32
) -> LogValue:
    """J = ∫_B f w_s dy from the mode series, as a LogValue."""
    geometry = solution.geometry
    kappa = solution.kappa
    a, d = geometry.probe_radius, geometry.separation
    s, ws = graded_gauss_legendre(0.0, a, 1.0 / kappa, n_radial)
    width = (d - a) / (kappa * d * a)
    c, wc = graded_gauss_legendre(-1.0, 1.0, width, n_polar)
    ss, cc = np.meshgrid(s, c, indexing="ij")
    # ψ is measured at b from the direction toward the cavity centre
    r = np.sqrt(d * d + ss * ss - 2.0 * d * ss * cc)
    cos_theta = np.clip((d - ss * cc) / r, -1.0, 1.0)

    flat_r, flat_cos = r.ravel(), cos_theta.ravel()
    radial = _mode_radial_factors(solution, flat_r, kappa * geometry.gap)
    field = np.einsum(
        "nj,jn->j", radial * solution.coefficients[:, None], legvander(flat_cos, solution.n_max)
    ).reshape(r.shape)
    integrand = 2.0 * math.pi * ss**2 * scene.source.radial(ss) * field
    total = float(ws @ integrand @ wc)
    return LogValue.from_float(total, log_shift=-2.0 * solution.log_shift)


@dataclass(frozen=True)
class IndicatorSample:
    tau: float
    J: LogValue
    J_volume: LogValue
    mode_tail: float
    n_max: int

    @property
    def cross_check(self) -> float:
        """|J - J_volume| / |J|."""
        if self.J.sign == 0:
            return 0.0 if self.J_volume.sign == 0 else math.inf
        return abs((self.J - self.J_volume).ratio_to(self.J))


def indicator_exact(
    scene: Scene,
    tau: float,
    n_max: Optional[int] = None,
    grid_level: int = 1,
    cavity_id: Optional[str] = None,
) -> IndicatorSample:
    """
    J_τ for a single spherical cavity by two independent evaluations.

    Args:
        scene (Scene): Ball probe and a spherical cavity with constant λ fields.
        tau (float): τ.
        n_max (int, optional): Initial mode truncation.
        grid_level (int): Multiplies the volume quadrature node counts.
        cavity_id (str, optional): Cavity to solve for (default: the first).

    Returns:
        IndicatorSample: Boundary-form J, volume-form J and the mode tail.

    Raises:
        ConvergenceError: If the two forms differ by more than 1e-4 relative.

    Example:
        cfg1 at τ = 32 -> τ⁴e^{2τl₀}J/π ≈ -1/24
    """
    cavity = scene.cavity(cavity_id) if cavity_id else scene.cavities[0]
    trace = incident_trace(scene, tau, n_max=n_max, cavity_id=cavity.id)
    solution = solve_modes(trace, cavity.kind, cavity.lambda0.value, cavity.lambda1.value)
    boundary = boundary_indicator(solution)
    level = max(1, grid_level)
    volume = volume_indicator(scene, solution, n_radial=24 * level, n_polar=32 * level)
    sample = IndicatorSample(
        tau=tau, J=boundary, J_volume=volume, mode_tail=trace.tail, n_max=trace.n_max
    )
    mismatch = sample.cross_check
    if mismatch > CROSS_CHECK_TOL:
        raise ConvergenceError(
            f"boundary and volume J differ by {mismatch:.2e} at τ = {tau} (n_max={trace.n_max})"
        )
    LOG.debug(f"τ = {tau}: J = {boundary}, cross-check {mismatch:.1e}")
    return sample


def indicator_superposition(scene: Scene, tau: float, n_max: Optional[int] = None) -> LogValue:
    """
    Single-scattering approximation Σ_α J^α for several spherical cavities.

    Cavity interactions are ignored; this is an approximation at leading order only.
    """
    return log_sum(
        indicator_exact(scene, tau, n_max=n_max, cavity_id=cavity.id).J
        for cavity in scene.cavities
    )


def indicator_series(
    scene: Scene,
    tau_grid: Sequence[float],
    truncation_T: Optional[float] = None,
    n_max: Optional[int] = None,
    grid_level: int = 1,
) -> LogSeries:
    """
    Forward indicator samples over a τ grid.

    With ``truncation_T`` the synthetic term τ⁻¹e^{-τT} standing for the
    I_τ - J_τ gap is added to each sample.

    Args:
        scene (Scene): The scene; several cavities are superposed.
        tau_grid (Sequence[float]): Strictly increasing τ values.
        truncation_T (float, optional): T of the synthetic truncation term.
        n_max (int, optional): Initial mode truncation.
        grid_level (int): Volume quadrature refinement.

    Returns:
        LogSeries: One sample per τ, source "forward".
    """
    samples: List[SeriesSample] = []
    for tau in tau_grid:
        if len(scene.cavities) == 1:
            value = indicator_exact(scene, tau, n_max=n_max, grid_level=grid_level).J
        else:
            value = indicator_superposition(scene, tau, n_max=n_max)
        if truncation_T is not None:
            value = value + LogValue(1, -math.log(tau) - tau * truncation_T)
        samples.append(SeriesSample(tau=float(tau), value=value))
    LOG.info(f"Forward series: {len(samples)} samples")
    return LogSeries(samples=tuple(samples), gamma0=scene.gamma0, source="forward")
