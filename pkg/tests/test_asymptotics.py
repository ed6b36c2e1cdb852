import math

import numpy as np
import pytest

from enclosure_lab.asymptotics import (
    T0,
    amplitude_ball,
    amplitude_general,
    classify_limit,
    explain_limit,
    laplace_asymptotic,
    leading_indicator,
    leading_series,
    reflection_coefficient,
)
from enclosure_lab.errors import DegeneratePairError, SceneValidationError
from enclosure_lab.numerics.quadrature import gauss_legendre
from enclosure_lab.reconstruct import LimitClass
from enclosure_lab.scene import CavityKind, example_scene
from enclosure_lab.stationary import find_pairs, graph_length, hessian_triple


def _report(name):
    scene = example_scene(name)
    return T0(scene, find_pairs(scene))


def test_reflection_coefficients():
    assert reflection_coefficient(CavityKind.DIRICHLET) == -1.0
    assert reflection_coefficient(CavityKind.NEUMANN_PLUS) == 1.0
    assert reflection_coefficient(CavityKind.NEUMANN_PLUS, 0.25) == pytest.approx(0.6)
    assert reflection_coefficient(CavityKind.NEUMANN_MINUS, 3.0) == pytest.approx(-0.5)
    with pytest.raises(SceneValidationError):
        reflection_coefficient(CavityKind.NEUMANN_PLUS, 1.5)


def test_cfg1_amplitudes(cfg1_pair):
    assert amplitude_general(cfg1_pair) == pytest.approx(144.0, rel=1e-10)
    assert amplitude_ball(1.0, 1.0, 2.0, 1.0) == pytest.approx(16.0 / 9.0, rel=1e-15)


def test_cfg1_leading_coefficient():
    report = _report("cfg1")
    assert report.T0 == pytest.approx(-1.0 / 24.0, rel=1e-10)
    (term,) = report.terms
    assert term.b == -1.0
    assert term.contribution_ball == pytest.approx(term.contribution, rel=1e-10)
    assert report.threshold == pytest.approx(4.0)


def test_neumann_and_robin_signs():
    assert _report("cfg1-neumann").T0 == pytest.approx(1.0 / 24.0, rel=1e-10)
    assert _report("cfg1-robin").T0 == pytest.approx(0.6 / 24.0, rel=1e-10)
    assert _report("cfg1-symmetric").T0_is_zero


def test_example_layouts():
    assert _report("example-3.1").T0 == pytest.approx(0.025, rel=1e-8)
    assert _report("example-3.2").T0 == pytest.approx(-1.0 / 36.0, rel=1e-8)


@pytest.mark.parametrize(
    ("name", "T", "expected"),
    [
        ("cfg1", 3.0, LimitClass.ZERO),
        ("cfg1", 4.0, LimitClass.INDETERMINATE),
        ("cfg1", 5.0, LimitClass.MINUS_INFINITY),
        ("example-3.1", 5.0, LimitClass.PLUS_INFINITY),
        ("example-3.2", 5.0, LimitClass.MINUS_INFINITY),
        ("cfg1-symmetric", 5.0, LimitClass.INDETERMINATE),
    ],
)
def test_classify_limit(name, T, expected):
    assert classify_limit(_report(name), T) == expected


def test_explain_limit_names_the_cavity_type():
    text = explain_limit(_report("example-3.1"), 5.0)
    assert "positive cavity" in text
    assert "tends to 0" in explain_limit(_report("cfg1"), 1.0)


def test_leading_indicator_in_log_form():
    report = _report("cfg1")
    value = leading_indicator(report, 10.0)
    expected = math.log(math.pi) - 4.0 * math.log(10.0) - 40.0 + math.log(1.0 / 24.0)
    assert value.sign == -1
    assert value.log_mag == pytest.approx(expected, rel=1e-10)
    # far below the double range, still representable
    assert leading_indicator(report, 400.0).log_mag < -1600.0
    series = leading_series(report, [8.0, 16.0])
    assert series.source == "asymptotic"
    assert [sample.tau for sample in series.samples] == [8.0, 16.0]


def test_laplace_gaussian_is_exact():
    estimate = laplace_asymptotic(
        lambda x: float(x @ x), lambda x: 1.0, np.zeros(2), 10.0, hessian=2.0 * np.eye(2)
    )
    assert estimate.value.to_float() == pytest.approx(math.pi / 10.0, rel=1e-12)
    assert estimate.det_hessian == pytest.approx(4.0)

    differenced = laplace_asymptotic(lambda x: float(x @ x), lambda x: 1.0, np.zeros(2), 10.0)
    assert differenced.value.to_float() == pytest.approx(math.pi / 10.0, rel=1e-8)


def test_laplace_rejects_indefinite_phase():
    with pytest.raises(DegeneratePairError):
        laplace_asymptotic(
            lambda x: float(x[0] ** 2 - x[1] ** 2), lambda x: 1.0, np.zeros(2), 10.0
        )


@pytest.mark.slow
def test_laplace_matches_six_dimensional_integral(cfg1, cfg1_pair):
    tau = 20.0
    length = graph_length(cfg1_pair, cfg1.cavities[0].surface, cfg1.probe)
    minimum = 2.0 * cfg1_pair.l0_local

    nodes, weights = gauss_legendre(7, -0.6, 0.6)
    total = 0.0
    for index in np.ndindex(*(nodes.size,) * 6):
        z = nodes[list(index)]
        total += float(np.prod(weights[list(index)])) * math.exp(-tau * (length(z) - minimum))

    estimate = laplace_asymptotic(
        lambda z: length(z) - minimum,
        lambda z: 1.0,
        np.zeros(6),
        tau,
        hessian=hessian_triple(cfg1_pair),
    )
    assert total == pytest.approx(estimate.value.to_float(), rel=0.1)
