import math
from dataclasses import replace

import numpy as np
import pytest

from enclosure_lab.asymptotics import amplitude_general
from enclosure_lab.errors import GeometryError
from enclosure_lab.geometry import Ellipsoid, Sphere
from enclosure_lab.scene import Cavity, CavityKind, Scene, SourceField, example_scene
from enclosure_lab.stationary import (
    assemble_pair,
    check_nondegenerate,
    factorization_residual,
    find_pairs,
    finite_difference_triple,
    hessian_pair_matrix,
    hessian_triple,
    shortest_lengths,
)


def _scene(cavity_surface, probe) -> Scene:
    return Scene(
        gamma0=1.0,
        probe=probe,
        source=SourceField(),
        cavities=(Cavity(id="c1", kind=CavityKind.DIRICHLET, surface=cavity_surface),),
    )


@pytest.fixture
def random_scene(rng, random_rotation):
    def draw() -> Scene:
        radius = rng.uniform(0.6, 1.4)
        probe = Sphere((0.0, 0.0, 0.0), radius)
        semiaxes = rng.uniform(0.6, 1.5, size=3)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        offset = radius + semiaxes.max() + rng.uniform(0.8, 2.0)
        cavity = Ellipsoid(tuple(offset * direction), tuple(semiaxes), rotation=random_rotation())
        return _scene(cavity, probe)

    return draw


def test_cfg1_pair(cfg1_pair):
    np.testing.assert_allclose(cfg1_pair.x0, [0, 0, 3], atol=1e-7)
    np.testing.assert_allclose(cfg1_pair.y0, [0, 0, 1], atol=1e-7)
    assert cfg1_pair.l0_local == pytest.approx(2.0, abs=1e-10)
    np.testing.assert_allclose(cfg1_pair.G, np.eye(2), atol=1e-6)
    np.testing.assert_allclose(cfg1_pair.H, np.eye(2), atol=1e-6)
    np.testing.assert_allclose(cfg1_pair.frame.normal, [0, 0, -1], atol=1e-7)


def test_cfg1_shortest_lengths(cfg1, cfg1_pair):
    lengths = shortest_lengths([cfg1_pair], cfg1)
    assert lengths.l0 == pytest.approx(2.0, abs=1e-10)
    assert lengths.l0_minus == pytest.approx(2.0, abs=1e-10)
    assert lengths.l0_plus is None
    assert lengths.l1 == pytest.approx(4.0, abs=1e-8)
    assert lengths.regime == "minus_separated"


@pytest.mark.parametrize(
    ("name", "regime"),
    [("cfg1-neumann", "plus_separated"), ("cfg1-symmetric", "equal"), ("example-3.1", "equal")],
)
def test_regimes(name, regime):
    scene = example_scene(name)
    pairs = find_pairs(scene)
    assert shortest_lengths(pairs, scene).regime == regime


def test_symmetric_layout_has_one_pair_per_cavity():
    pairs = find_pairs(example_scene("cfg1-symmetric"))
    assert [pair.cavity_id for pair in pairs] == ["d1", "n1"]
    np.testing.assert_allclose(pairs[1].x0, [0, 0, -3], atol=1e-7)


def test_cfg1_hessians(cfg1_pair):
    assert np.linalg.det(hessian_triple(cfg1_pair)) == pytest.approx(36.0, rel=1e-10)
    assert amplitude_general(cfg1_pair) == pytest.approx(144.0, rel=1e-8)
    check = check_nondegenerate(cfg1_pair)
    assert check.passed
    assert check.min_eig == pytest.approx(1.0, rel=1e-6)
    assert check.equivalence_holds


def test_triple_determinant_identity_on_random_scenes(random_scene):
    for _ in range(5):
        scene = random_scene()
        for pair in find_pairs(scene, n_starts=16):
            det = np.linalg.det(hessian_triple(pair))
            expected = 4.0 * amplitude_general(pair) / pair.l0_local**4
            assert det == pytest.approx(expected, rel=1e-10)
            assert factorization_residual(pair) < 1e-12


def test_finite_difference_triple_matches_closed_form(cfg1, cfg1_pair):
    numeric = finite_difference_triple(cfg1_pair, cfg1.cavities[0].surface, cfg1.probe)
    np.testing.assert_allclose(numeric, hessian_triple(cfg1_pair), atol=1e-5)


def test_finite_difference_triple_on_ellipsoids(random_scene):
    for _ in range(3):
        scene = random_scene()
        (pair, *_) = find_pairs(scene, n_starts=16)
        numeric = finite_difference_triple(pair, scene.cavities[0].surface, scene.probe)
        np.testing.assert_allclose(numeric, hessian_triple(pair), atol=1e-5)


def test_minimiser_is_normal_aligned(random_scene):
    scene = random_scene()
    for pair in find_pairs(scene, n_starts=16):
        nu = pair.frame.normal
        cavity = scene.cavities[0].surface
        assert float(cavity.normal_at(pair.x0) @ nu) == pytest.approx(1.0, abs=1e-8)
        assert float(scene.probe.normal_at(pair.y0) @ nu) == pytest.approx(-1.0, abs=1e-8)


def test_degenerate_pair_is_reported(cfg1_pair):
    g_matrix = -0.4 * np.eye(2)
    degenerate = replace(
        cfg1_pair,
        G=g_matrix,
        hess_L0=hessian_pair_matrix(g_matrix, cfg1_pair.H, cfg1_pair.l0_local),
    )
    check = check_nondegenerate(degenerate)
    assert not check.passed
    assert check.triple_min_eig < 0.0
    assert check.equivalence_holds


def test_pair_and_triple_tests_agree_on_random_scenes(random_scene):
    for index in range(20):
        scene = random_scene()
        (pair, *_) = find_pairs(scene, n_starts=16)
        assert check_nondegenerate(pair).passed

        # shifting G by -c·I moves the Schur margin min eig(S_g - S_h⁻¹) by exactly -c
        margin = float(np.linalg.eigvalsh(pair.s_g - np.linalg.inv(pair.s_h)).min())
        factor = 0.5 if index % 2 == 0 else 1.5
        g_matrix = pair.G - (factor * margin / pair.l0_local) * np.eye(2)
        shifted = replace(
            pair,
            G=g_matrix,
            hess_L0=hessian_pair_matrix(g_matrix, pair.H, pair.l0_local),
        )
        check = check_nondegenerate(shifted)
        assert check.passed == (index % 2 == 0)
        assert (check.triple_min_eig >= check.tol_eig) == check.passed
        assert check.equivalence_holds


def test_three_point_length_doubles_l0_on_random_scenes(random_scene):
    for _ in range(4):
        scene = random_scene()
        pairs = find_pairs(scene, n_starts=16)
        lengths = shortest_lengths(pairs, scene)
        assert lengths.l1 == pytest.approx(2.0 * lengths.l0, abs=1e-8 * scene.scale)


def test_misaligned_pair_is_rejected(cfg1):
    cavity = cfg1.cavities[0]
    angle = 1e-3
    x0 = np.array([math.sin(angle), 0.0, 4.0 - math.cos(angle)])
    with pytest.raises(GeometryError, match="not normal-aligned"):
        assemble_pair(cavity, cfg1.probe, x0, [0.0, 0.0, 1.0])
