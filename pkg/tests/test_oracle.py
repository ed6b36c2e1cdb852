import math
from dataclasses import replace

import numpy as np
import pytest

from enclosure_lab import oracle
from enclosure_lab.errors import GeometryError
from enclosure_lab.oracle import (
    K_top_shifted,
    QuadratureGrid,
    _cap_integral,
    boundary_kernels,
    build_grid,
    cap_half_angle,
    compare_to_laplace,
    inner_ball_integral,
    K_unfactorized,
    leading_kernel,
)
from enclosure_lab.scene import CavityKind, SourceField, example_scene

X0 = np.array([0.0, 0.0, 3.0])
NU0 = np.array([0.0, 0.0, -1.0])
Y0 = np.array([0.0, 0.0, 1.0])
GRID = QuadratureGrid(cap_half_angle=0.5)


def test_kernel_product_at_the_stationary_point():
    dirichlet = boundary_kernels(CavityKind.DIRICHLET, X0, NU0, Y0, 0.0, 0.0, 1.0)
    assert dirichlet.eta == pytest.approx(1.0 / (8.0 * math.pi))
    assert dirichlet.product == pytest.approx(1.0 / (32.0 * math.pi**2), rel=1e-14)

    neumann = boundary_kernels(CavityKind.NEUMANN_PLUS, X0, NU0, Y0, 0.0, 0.0, 1.0)
    assert neumann.product == pytest.approx(1.0 / (32.0 * math.pi**2), rel=1e-14)


def test_robin_kernel_product_carries_the_reflection_coefficient():
    lambda1 = 0.25
    pair = boundary_kernels(CavityKind.NEUMANN_PLUS, X0, NU0, Y0, 0.0, lambda1, 1.0)
    # at the stationary point η·η̃ = b/(8π²l₀²γ₀^{3/2})
    expected = 0.6 / (8.0 * math.pi**2 * 4.0)
    assert pair.product == pytest.approx(expected, rel=1e-12)


def test_kernel_rejects_grazing_robin_points():
    tangent = np.array([1.0, 0.0, 0.0])
    with pytest.raises(GeometryError):
        boundary_kernels(CavityKind.NEUMANN_PLUS, X0, tangent, Y0, 0.0, 0.0, 1.0)


def test_vanishing_source_gives_zero(cfg1):
    silent = replace(cfg1, source=SourceField(coefficients=(0.0,)))
    assert inner_ball_integral(silent, silent.cavities[0], X0, NU0, 16.0, GRID, 32.0) == (0.0, 0.0)


def test_dirichlet_and_neumann_ball_products_agree(cfg1):
    neumann = example_scene("cfg1-neumann")
    x = np.array([0.3, 0.0, 4.0 - math.sqrt(1.0 - 0.09)])
    nu = (x - np.array([0.0, 0.0, 4.0])) / 1.0
    for point, normal in ((X0, NU0), (x, nu)):
        d_eta, d_eta_tilde = inner_ball_integral(
            cfg1, cfg1.cavities[0], point, normal, 16.0, GRID, 32.0
        )
        n_eta, n_eta_tilde = inner_ball_integral(
            neumann, neumann.cavities[0], point, normal, 16.0, GRID, 32.0
        )
        assert d_eta * d_eta_tilde == pytest.approx(n_eta * n_eta_tilde, rel=1e-12)


def test_inner_integral_decays_like_tau_squared(cfg1):
    taus = np.array([16.0, 32.0, 64.0])
    values = [
        inner_ball_integral(cfg1, cfg1.cavities[0], X0, NU0, tau, GRID, 2.0 * tau)[0]
        for tau in taus
    ]
    slope = np.polyfit(np.log(taus), np.log(np.abs(values)), 1)[0]
    assert slope == pytest.approx(-2.0, abs=0.25)


def test_inner_refinement_settles(cfg1):
    coarse = inner_ball_integral(cfg1, cfg1.cavities[0], X0, NU0, 24.0, GRID, 48.0)
    refined = inner_ball_integral(
        cfg1, cfg1.cavities[0], X0, NU0, 24.0, GRID, 48.0, refine=True, tol=1e-6
    )
    assert refined[0] == pytest.approx(coarse[0], rel=1e-4)


def test_cap_half_angle_is_illuminated(cfg1, cfg1_pair):
    angle = cap_half_angle(cfg1, cfg1.cavities[0], cfg1_pair)
    assert 0.0 < angle < 0.5 * math.pi
    grid = build_grid(cfg1, cfg1.cavities[0], cfg1_pair, level=2)
    assert (grid.n_theta, grid.n_phi, grid.cap_half_angle) == (40, 16, angle)


def test_unfactorized_sum_equals_product_form(cfg1, cfg1_pair):
    grid = QuadratureGrid(
        cap_half_angle=0.4, n_theta=2, n_phi=3, ball_nodes_per_panel=2, n_azimuth=3
    )
    tau = 16.0
    shift = tau * cfg1_pair.l0_local
    product_form, *_ = _cap_integral(cfg1, cfg1.cavities[0], cfg1_pair, tau, grid, shift)
    assert K_unfactorized(cfg1, "d1", tau, grid) == pytest.approx(-product_form, rel=1e-10)


def test_leading_kernel(cfg1, cfg1_pair):
    value = leading_kernel(cfg1, cfg1_pair, 32.0)
    assert value.sign == -1
    assert value.to_float() == pytest.approx(-math.pi / 24.0 / 32.0**5, rel=1e-8)


@pytest.mark.slow
@pytest.mark.parametrize(
    ("name", "cavity_id"), [("cfg1", "d1"), ("cfg1-neumann", "n1"), ("cfg1-robin", "n1")]
)
def test_oracle_converges_to_top_term(name, cavity_id):
    table = compare_to_laplace(example_scene(name), cavity_id, [16.0, 24.0, 32.0])
    deviations = [abs(row.ratio - 1.0) for row in table.rows]
    assert deviations == sorted(deviations, reverse=True)
    assert table.rows[-1].ratio == pytest.approx(1.0, abs=0.1)
    assert -1.0 <= table.exponent <= -0.25
    assert all(row.tail_bound < 0.01 for row in table.rows)


@pytest.mark.slow
def test_kernel_refinement_settles_at_tau_20(cfg1, cfg1_pair):
    tau = 20.0
    estimate = K_top_shifted(cfg1, "d1", tau)
    assert estimate.surface_change < 1e-6
    assert estimate.ball_change < 1e-6
    shift = tau * cfg1_pair.l0_local
    doubled, *_ = _cap_integral(
        cfg1, cfg1.cavities[0], cfg1_pair, tau, estimate.grid.doubled_surface(), shift
    )
    assert -doubled == pytest.approx(estimate.value.to_float(), rel=1e-6)


def test_oracle_needs_a_single_pair(cfg1, cfg1_pair, monkeypatch):
    monkeypatch.setattr(oracle, "cavity_pairs", lambda scene, cavity: [cfg1_pair, cfg1_pair])
    with pytest.raises(GeometryError, match="2 stationary pairs"):
        K_top_shifted(cfg1, "d1", 16.0)
    with pytest.raises(GeometryError):
        compare_to_laplace(cfg1, "d1", [16.0])
