import math

import numpy as np
import pytest
from numpy.polynomial.legendre import legval

from enclosure_lab.errors import EnclosureLabError
from enclosure_lab.forward import (
    boundary_indicator,
    cavity_geometry,
    free_kernel,
    free_kernel_series,
    incident_at,
    incident_direct,
    incident_trace,
    indicator_exact,
    indicator_series,
    solve_modes,
)
from enclosure_lab.scene import CavityKind, example_scene, validate_document


def _normalised(sample, l0=2.0):
    """τ⁴e^{2τl₀}J/π, which tends to 𝒯₀."""
    tau = sample.tau
    return sample.J.shifted(4.0 * math.log(tau) + 2.0 * tau * l0 - math.log(math.pi)).to_float()


def test_cfg1_geometry(cfg1):
    geometry = cavity_geometry(cfg1)
    assert geometry.gap == pytest.approx(2.0)
    np.testing.assert_allclose(geometry.axis, [0, 0, -1])


def test_geometry_needs_spheres(cfg1_document):
    cfg1_document["probe"] = {"ellipsoid": {"center": [0, 0, 0], "semiaxes": [1.0, 1.0, 0.8]}}
    with pytest.raises(EnclosureLabError):
        cavity_geometry(validate_document(cfg1_document))


@pytest.mark.parametrize("tau", [2.0, 10.0, 40.0])
def test_free_kernel_expansion(tau):
    x, y = (0.2, -0.1, 3.0), (0.0, 0.5, 1.2)
    direct = free_kernel(x, y, tau, 1.0)
    series = free_kernel_series(x, y, tau, 1.0)
    assert series.sign == 1
    assert series.ratio_to(direct) == pytest.approx(1.0, rel=1e-9)


def test_free_kernel_with_gamma0():
    x, y = (0.0, 0.0, 2.5), (0.3, 0.0, 0.4)
    direct = free_kernel(x, y, 6.0, 2.5)
    assert free_kernel_series(x, y, 6.0, 2.5).ratio_to(direct) == pytest.approx(1.0, rel=1e-9)


@pytest.mark.parametrize("tau", [4.0, 16.0])
def test_incident_field_closed_form_matches_quadrature(cfg1, tau):
    points = np.array([[0.0, 0.0, 3.0], [0.6, 0.0, 3.2]])
    closed = incident_at(cfg1, points, tau)
    for point, value in zip(points, closed):
        direct = incident_direct(cfg1, point, tau).shifted(tau * 2.0).to_float()
        assert value == pytest.approx(direct, rel=1e-6)


def test_dirichlet_modes_cancel_the_trace(cfg1):
    trace = incident_trace(cfg1, 12.0)
    solution = solve_modes(trace, CavityKind.DIRICHLET)
    w, _ = solution.boundary_modes()
    assert np.max(np.abs(w)) == 0.0
    assert solution.bc_residual == 0.0
    assert trace.tail <= 1e-8


def test_robin_boundary_condition_holds(cfg1):
    trace = incident_trace(cfg1, 12.0)
    solution = solve_modes(trace, CavityKind.NEUMANN_PLUS, lambda0=0.1, lambda1=0.25)
    assert solution.bc_residual < 1e-10
    assert solution.lam == pytest.approx(0.25 * 12.0 + 0.1)


def test_scattered_field_matches_boundary_modes(cfg1):
    trace = incident_trace(cfg1, 8.0)
    solution = solve_modes(trace, CavityKind.DIRICHLET)
    # on the sphere, facing B, the scattered field cancels the incident field
    scattered = solution.scattered(np.array([[0.0, 0.0, 3.0]]))
    incident = incident_at(cfg1, np.array([[0.0, 0.0, 3.0]]), 8.0)
    assert scattered[0] == pytest.approx(-incident[0], rel=1e-6)


def test_boundary_and_volume_forms_agree(cfg1):
    sample = indicator_exact(cfg1, 12.0)
    assert sample.cross_check < 1e-4
    assert sample.J.sign == -1
    assert boundary_indicator(solve_modes(incident_trace(cfg1, 12.0), "dirichlet")).sign == -1


@pytest.mark.parametrize(("name", "sign"), [("cfg1", -1), ("cfg1-neumann", 1), ("cfg1-robin", 1)])
def test_indicator_sign_on_every_tau(name, sign):
    series = indicator_series(example_scene(name), [8.0, 16.0, 24.0])
    assert all(sample.value.sign == sign for sample in series.samples)
    assert series.source == "forward"


@pytest.mark.slow
@pytest.mark.parametrize(
    ("name", "expected"),
    [("cfg1", -1.0 / 24.0), ("cfg1-neumann", 1.0 / 24.0), ("cfg1-robin", 0.6 / 24.0)],
)
def test_indicator_approaches_leading_coefficient(name, expected):
    sample = indicator_exact(example_scene(name), 32.0)
    assert _normalised(sample) == pytest.approx(expected, rel=0.15)


def test_truncation_term_is_added(cfg1):
    plain = indicator_series(cfg1, [8.0])
    # T below 2l₀ makes the synthetic term dominate
    truncated = indicator_series(cfg1, [8.0], truncation_T=1.0)
    assert plain.samples[0].value.sign == -1
    assert truncated.samples[0].value.sign == 1
    expected = plain.samples[0].value.to_float() + math.exp(-8.0) / 8.0
    assert truncated.samples[0].value.to_float() == pytest.approx(expected, rel=1e-12)


def test_superposition_over_cavities():
    series = indicator_series(example_scene("example-3.1"), [8.0, 12.0])
    assert len(series) == 2
    assert all(sample.value.sign != 0 for sample in series.samples)


def test_trace_series_matches_closed_form_on_the_sphere(cfg1):
    tau = 12.0
    trace = incident_trace(cfg1, tau)
    theta = np.linspace(0.0, math.pi / 3.0, 7)
    center = np.array([0.0, 0.0, 4.0])
    points = center + np.column_stack([np.sin(theta), np.zeros_like(theta), -np.cos(theta)])
    series = legval(np.cos(theta), trace.values)
    closed = incident_at(cfg1, points, tau)
    assert np.max(np.abs(series - closed)) <= 1e-8 * np.max(np.abs(closed))


def test_moving_the_ball_outward_shifts_the_exponent(cfg1, cfg1_document):
    delta = 1.0
    cfg1_document["probe"] = {"ball": {"center": [0.0, 0.0, -delta], "radius": 1.0}}
    moved = validate_document(cfg1_document)
    taus = np.array([16.0, 32.0])
    log_ratios = []
    for tau in taus:
        near, far = incident_trace(cfg1, tau), incident_trace(moved, tau)
        # undo the e^{κl₀} shift each trace carries
        log_near = math.log(abs(near.values[0])) - near.log_shift
        log_far = math.log(abs(far.values[0])) - far.log_shift
        log_ratios.append(log_far - log_near)
    slope = (log_ratios[1] - log_ratios[0]) / (taus[1] - taus[0])
    assert slope == pytest.approx(-delta, rel=0.02)


def test_doubling_n_max_leaves_J_unchanged(cfg1):
    for tau in (8.0, 24.0):
        sample = indicator_exact(cfg1, tau)
        doubled = indicator_exact(cfg1, tau, n_max=2 * sample.n_max)
        assert doubled.n_max >= 2 * sample.n_max
        assert doubled.J.ratio_to(sample.J) == pytest.approx(1.0, rel=1e-8)


def test_absorbing_robin_lowers_J(cfg1):
    for tau in (8.0, 16.0, 24.0):
        trace = incident_trace(cfg1, tau)
        neumann = boundary_indicator(solve_modes(trace, CavityKind.NEUMANN_PLUS))
        robin = boundary_indicator(solve_modes(trace, CavityKind.NEUMANN_PLUS, lambda1=0.25))
        assert neumann.sign == robin.sign == 1
        assert robin.log_mag < neumann.log_mag


def test_stiff_robin_approaches_dirichlet(cfg1):
    trace = incident_trace(cfg1, 12.0)
    dirichlet = solve_modes(trace, CavityKind.DIRICHLET)
    stiff = solve_modes(trace, CavityKind.NEUMANN_PLUS, lambda1=1e6)
    peak = np.max(np.abs(dirichlet.coefficients))
    np.testing.assert_allclose(
        stiff.coefficients, dirichlet.coefficients, rtol=1e-4, atol=1e-10 * peak
    )
    ratio = boundary_indicator(stiff).ratio_to(boundary_indicator(dirichlet))
    assert ratio == pytest.approx(1.0, abs=1e-4)


def test_pure_neumann_normal_derivative_vanishes(cfg1):
    trace = incident_trace(cfg1, 12.0)
    solution = solve_modes(trace, CavityKind.NEUMANN_PLUS)
    _, dw = solution.boundary_modes()
    assert np.max(np.abs(dw)) <= 1e-10 * np.max(np.abs(trace.radial))
    assert solution.bc_residual <= 1e-10
