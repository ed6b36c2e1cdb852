"""
Closed-form leading asymptotics of the indicator function.

    I_τ = (πγ₀/τ⁴) e^{-2τl₀/√γ₀} {𝒯₀ + O(τ^{-1/2})},   𝒯₀ = Σ b_α f(y₀)² / (2√𝒜_α)

with one term per stationary pair. Everything exponentially small is returned
as a LogValue.
"""

import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np
from mcp.server.fastmcp.utilities.logging import get_logger

from .errors import DegeneratePairError, EnclosureLabError, SceneValidationError
from .geometry import gauss_curvature, mean_curvature
from .numerics.differences import finite_difference_hessian
from .numerics.logvalue import LogValue
from .reconstruct import LimitClass, LogSeries, SeriesSample
from .scene import CavityKind, Scene
from .stationary import MERGE_TOL, ShortestLengths, StationaryPair, check_nondegenerate

LOG = get_logger(__name__)

PD_RELATIVE_TOL = 1e-10


@dataclass(frozen=True)
class PairTerm:
    """One stationary pair's share of 𝒯₀."""

    pair: StationaryPair
    b: float
    f_value: float
    amplitude: float
    contribution: float
    amplitude_ball: Optional[float] = None
    contribution_ball: Optional[float] = None


@dataclass(frozen=True)
class AsymptoticReport:
    terms: List[PairTerm]
    T0: float
    l0: float
    gamma0: float
    probe_radius: Optional[float] = None

    @property
    def T0_is_zero(self) -> bool:
        scale = math.fsum(abs(term.contribution) for term in self.terms)
        return abs(self.T0) <= 1e-12 * scale

    @property
    def threshold(self) -> float:
        """2l₀/√γ₀, the decay rate of I_τ."""
        return 2.0 * self.l0 / math.sqrt(self.gamma0)


@dataclass(frozen=True)
class LaplaceEstimate:
    value: LogValue
    det_hessian: float
    min_eig: float
    dimension: int
    error_exponent: float = -0.5

    @property
    def error_model(self) -> str:
        return f"relative error O(tau^{self.error_exponent:g})"


def reflection_coefficient(kind: CavityKind, lambda1: float = 0.0, gamma0: float = 1.0) -> float:
    """
    b = -1 for Dirichlet cavities, (√γ₀ - λ₁)/(√γ₀ + λ₁) for Robin cavities.

    Args:
        kind (CavityKind): Cavity type.
        lambda1 (float): λ₁ at the stationary point (ignored for Dirichlet).
        gamma0 (float): γ₀.

    Returns:
        float: The reflection coefficient in [-1, 1].

    Example:
        reflection_coefficient(CavityKind.NEUMANN_PLUS, 0.25, 1.0) -> 0.6
    """
    kind = CavityKind(kind)
    if kind == CavityKind.DIRICHLET:
        return -1.0
    root = math.sqrt(gamma0)
    if lambda1 < 0.0:
        raise SceneValidationError([f"dissipativity violated: λ₁ = {lambda1} < 0"])
    if kind == CavityKind.NEUMANN_PLUS and not lambda1 < root:
        raise SceneValidationError([f"λ₁ margin (n₊) violated: λ₁ = {lambda1} ≥ √γ₀"])
    if kind == CavityKind.NEUMANN_MINUS and not lambda1 > root:
        raise SceneValidationError([f"λ₁ margin (n₋) violated: λ₁ = {lambda1} ≤ √γ₀"])
    return (root - lambda1) / (root + lambda1)


def amplitude_general(pair: StationaryPair) -> float:
    """
    𝒜 from the mean and Gauss curvatures of ∂D at x₀ and ∂B at y₀.

        𝒜 = (1 + 2l₀ℳ_B + l₀²𝒢_B) · {l₀²𝒢_D𝒢_B + 2l₀(ℳ_B𝒢_D + ℳ_D𝒢_B) + det(G + H)}

    Satisfies det(Hess L̃) = 4𝒜/l₀⁴.

    Example:
        cfg1 (G = H = I, l₀ = 2) -> 9·16 = 144
    """
    l0 = pair.l0_local
    m_d, g_d = mean_curvature(pair.G), gauss_curvature(pair.G)
    m_b, g_b = mean_curvature(pair.H), gauss_curvature(pair.H)
    probe_factor = 1.0 + 2.0 * l0 * m_b + l0 * l0 * g_b
    coupled = (
        l0 * l0 * g_d * g_b
        + 2.0 * l0 * (m_b * g_d + m_d * g_b)
        + float(np.linalg.det(pair.G + pair.H))
    )
    value = probe_factor * coupled
    if not value > 0.0:
        raise DegeneratePairError(
            f"pair on '{pair.cavity_id}' has non-positive amplitude {value:.6g}"
        )
    return value


def amplitude_ball(kappa1: float, kappa2: float, l0: float, a: float) -> float:
    """
    ∏(κ_j + 1/(l₀ + a)) for a ball probe of radius a.

    Example:
        amplitude_ball(1, 1, 2, 1) -> 16/9
    """
    shift = 1.0 / (l0 + a)
    factors = (kappa1 + shift, kappa2 + shift)
    if min(factors) <= 0.0:
        raise DegeneratePairError(f"non-positive shifted curvature {min(factors):.6g}")
    return factors[0] * factors[1]


def T0(scene: Scene, pairs: List[StationaryPair]) -> AsymptoticReport:
    """
    Per-pair contributions b f(y₀)²/(2√𝒜) and their compensated sum.

    For a ball probe the ball form a²/(2(l₀+a)²)·b f²/√𝒜_ball is computed too and
    must agree with the general form.

    Args:
        scene (Scene): The scene (source f, γ₀, λ₁ fields, probe).
        pairs (List[StationaryPair]): Output of find_pairs.

    Returns:
        AsymptoticReport: Terms in the order of ``pairs`` and their sum.

    Example:
        cfg1 -> 𝒯₀ = -1/24
    """
    if not pairs:
        raise EnclosureLabError("𝒯₀ needs at least one stationary pair")
    l0 = min(pair.l0_local for pair in pairs)
    radius = scene.probe_radius
    terms: List[PairTerm] = []
    for pair in pairs:
        if pair.l0_local > l0 + MERGE_TOL * scene.scale:
            raise EnclosureLabError(
                f"pair on '{pair.cavity_id}' at {pair.l0_local} is above l₀ = {l0}"
            )
        check = check_nondegenerate(pair)
        if not check.passed:
            raise DegeneratePairError(
                f"pair on '{pair.cavity_id}' fails non-degeneracy (min eig {check.min_eig:.3e})"
            )
        cavity = scene.cavity(pair.cavity_id)
        b = reflection_coefficient(cavity.kind, cavity.lambda1_at(pair.x0), scene.gamma0)
        f_value = scene.f_at(pair.y0)
        amplitude = amplitude_general(pair)
        contribution = b * f_value**2 / (2.0 * math.sqrt(amplitude))

        amp_ball = contribution_ball = None
        if radius is not None:
            kappa = np.linalg.eigvalsh(pair.G)
            amp_ball = amplitude_ball(kappa[0], kappa[1], pair.l0_local, radius)
            prefactor = radius**2 / (2.0 * (pair.l0_local + radius) ** 2)
            contribution_ball = prefactor * b * f_value**2 / math.sqrt(amp_ball)
            if abs(contribution_ball - contribution) > 1e-8 * abs(contribution):
                LOG.warning(
                    f"Ball and general forms differ on '{pair.cavity_id}': "
                    f"{contribution_ball} vs {contribution}"
                )
        terms.append(
            PairTerm(
                pair=pair.with_amplitude(amplitude),
                b=b,
                f_value=f_value,
                amplitude=amplitude,
                contribution=contribution,
                amplitude_ball=amp_ball,
                contribution_ball=contribution_ball,
            )
        )

    total = math.fsum(term.contribution for term in terms)
    LOG.info(f"𝒯₀ = {total:.12g} from {len(terms)} pair(s)")
    return AsymptoticReport(
        terms=terms, T0=total, l0=l0, gamma0=scene.gamma0, probe_radius=radius
    )


def leading_indicator(report: AsymptoticReport, tau: float) -> LogValue:
    """
    (πγ₀/τ⁴) e^{-2τl₀/√γ₀} 𝒯₀ in log form.

    Example:
        cfg1, τ = 10 -> sign -1, log_mag = log π - 4 log 10 - 40 + log(1/24)
    """
    if tau <= 0.0:
        raise ValueError(f"τ must be positive, got {tau}")
    if report.T0_is_zero:
        return LogValue.zero()
    log_mag = (
        math.log(math.pi * report.gamma0)
        - 4.0 * math.log(tau)
        - tau * report.threshold
        + math.log(abs(report.T0))
    )
    return LogValue(1 if report.T0 > 0 else -1, log_mag)


def laplace_asymptotic(
    h: Callable[[np.ndarray], float],
    phi: Callable[[np.ndarray], float],
    x0,
    tau: float,
    hessian: Optional[np.ndarray] = None,
    step: float = 1e-3,
    error_exponent: float = -0.5,
) -> LaplaceEstimate:
    """
    Leading Laplace-method value of ∫ e^{-τh(x)} φ(x) dx about a minimum x₀.

        e^{-τh(x₀)} (2π/τ)^{n/2} φ(x₀) / √det Hess h(x₀)

    Args:
        h (Callable): Phase, minimal at x₀.
        phi (Callable): Amplitude.
        x0: The minimiser.
        tau (float): Large parameter.
        hessian (np.ndarray, optional): Exact Hessian of h at x₀; central
            differences with ``step`` otherwise.
        step (float): Difference step.
        error_exponent (float): Exponent of the relative error model.

    Returns:
        LaplaceEstimate: The value as a LogValue with the Hessian diagnostics.

    Example:
        h = |x|², φ ≡ 1, n = 2, τ = 10 -> π/10
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    hess = hessian if hessian is not None else finite_difference_hessian(h, x0, step)
    hess = 0.5 * (np.asarray(hess, dtype=float) + np.asarray(hess, dtype=float).T)
    eigenvalues = np.linalg.eigvalsh(hess)
    if eigenvalues.min() < PD_RELATIVE_TOL * abs(np.trace(hess)) or eigenvalues.min() <= 0.0:
        raise DegeneratePairError(
            f"phase Hessian is not positive definite (min eig {eigenvalues.min():.3e})"
        )
    n = x0.size
    log_det = float(np.sum(np.log(eigenvalues)))
    amplitude = float(phi(x0))
    log_factor = -tau * float(h(x0)) + 0.5 * n * math.log(2.0 * math.pi / tau) - 0.5 * log_det
    return LaplaceEstimate(
        value=LogValue.from_float(amplitude, log_shift=log_factor),
        det_hessian=math.exp(log_det),
        min_eig=float(eigenvalues.min()),
        dimension=n,
        error_exponent=error_exponent,
    )


def classify_limit(report: AsymptoticReport, T: float) -> LimitClass:
    """
    Limit of e^{τT} I_τ as τ → ∞.

    Example:
        cfg1, T = 5 -> minus_infinity
    """
    threshold = report.threshold
    if T < threshold:
        return LimitClass.ZERO
    if T == threshold or report.T0_is_zero:
        return LimitClass.INDETERMINATE
    return LimitClass.PLUS_INFINITY if report.T0 > 0 else LimitClass.MINUS_INFINITY


def explain_limit(
    report: AsymptoticReport, T: float, lengths: Optional[ShortestLengths] = None
) -> str:
    """Plain-language reading of classify_limit for reports."""
    outcome = classify_limit(report, T)
    threshold = report.threshold
    if outcome == LimitClass.ZERO:
        return f"T = {T:g} < 2l₀/√γ₀ = {threshold:g}: e^(τT) I_τ tends to 0"
    if outcome == LimitClass.INDETERMINATE:
        if T == threshold:
            return f"T equals 2l₀/√γ₀ = {threshold:g}: no statement"
        return "𝒯₀ vanishes: the leading term carries no sign information"
    detected = "l₀⁺ (positive cavity)" if report.T0 > 0 else "l₀⁻ (negative cavity)"
    text = (
        f"T = {T:g} > {threshold:g} and 𝒯₀ = {report.T0:.6g}: "
        f"l₀ is attained as {detected}"
    )
    if lengths is not None:
        if lengths.regime == "equal":
            text += "; l₀⁺ = l₀⁻, the sign of 𝒯₀ decides"
        else:
            text += f"; separated case ({lengths.regime}), the nearer cavity type decides"
    return text


def leading_series(report: AsymptoticReport, tau_grid) -> LogSeries:
    """leading_indicator over a τ grid, as a series with source "asymptotic"."""
    samples = tuple(
        SeriesSample(tau=float(tau), value=leading_indicator(report, tau)) for tau in tau_grid
    )
    return LogSeries(samples=samples, gamma0=report.gamma0, source="asymptotic")
