import json

import pytest

from enclosure_lab.errors import SceneValidationError
from enclosure_lab.geometry import Ellipsoid, Sphere
from enclosure_lab.scene import (
    EXAMPLE_DOCUMENTS,
    CavityKind,
    example_scene,
    validate,
    validate_document,
)


def _diagnostics(document) -> str:
    with pytest.raises(SceneValidationError) as info:
        validate_document(document)
    return "; ".join(info.value.diagnostics)


def test_cfg1_document_is_valid(cfg1):
    assert cfg1.gamma0 == 1.0
    assert cfg1.probe == Sphere((0, 0, 0), 1.0)
    (cavity,) = cfg1.cavities
    assert cavity.kind == CavityKind.DIRICHLET
    assert cavity.surface == Sphere((0, 0, 4), 1.0)
    assert cfg1.f_at((0, 0, 1)) == 1.0


@pytest.mark.parametrize("name", sorted(EXAMPLE_DOCUMENTS))
def test_every_example_validates(name):
    scene = example_scene(name)
    assert scene.cavities


@pytest.mark.parametrize("name", sorted(EXAMPLE_DOCUMENTS))
def test_document_round_trip(name):
    scene = example_scene(name)
    assert validate_document(scene.to_document()) == scene


def test_round_trip_with_fields_and_ellipsoid():
    document = {
        "gamma0": 2.0,
        "mu1-margin": 0.01,
        "probe": {"ellipsoid": {"center": [0, 0, 0], "semiaxes": [1.0, 1.2, 0.8]}},
        "source": {"radial-polynomial": [1.0, 0.5]},
        "cavities": [
            {
                "id": "r1",
                "kind": "neumann_plus",
                "surface": {"sphere": {"center": [0, 0, 4], "radius": 1.0}},
                "lambda0": {"value": 0.3, "gradient": [0.0, 0.1, 0.0]},
                "lambda1": 0.2,
            }
        ],
    }
    scene = validate_document(document)
    assert isinstance(scene.probe, Ellipsoid)
    assert not scene.cavities[0].lambda0.is_constant
    assert validate_document(scene.to_document()) == scene
    assert json.loads(json.dumps(scene.to_document())) == scene.to_document()


def test_margin_violation_for_positive_cavity(cfg1_document):
    cavity = cfg1_document["cavities"][0]
    cavity["kind"] = "neumann_plus"
    cavity["lambda1"] = 1.0
    assert "λ₁ margin (n₊) violated" in _diagnostics(cfg1_document)


def test_margin_violation_for_negative_cavity(cfg1_document):
    cavity = cfg1_document["cavities"][0]
    cavity["kind"] = "neumann_minus"
    cavity["lambda1"] = 0.5
    assert "λ₁ margin (n₋) violated" in _diagnostics(cfg1_document)


def test_affine_lambda1_checked_at_its_extrema(cfg1_document):
    cavity = cfg1_document["cavities"][0]
    cavity["kind"] = "neumann_plus"
    # value 0.5 but 0.5 ± 0.6 on the unit sphere
    cavity["lambda1"] = {"value": 0.5, "gradient": [0.0, 0.0, 0.6]}
    text = _diagnostics(cfg1_document)
    assert "dissipativity violated" in text
    assert "λ₁ margin (n₊) violated" in text


def test_cavity_meeting_the_ball_is_rejected(cfg1_document):
    cfg1_document["cavities"][0]["surface"]["sphere"]["center"] = [0.0, 0.0, 1.5]
    assert "disjointness violated" in _diagnostics(cfg1_document)


def test_overlapping_cavities_are_rejected(cfg1_document):
    extra = json.loads(json.dumps(cfg1_document["cavities"][0]))
    extra["id"] = "d2"
    extra["surface"]["sphere"]["center"] = [0.0, 0.5, 4.0]
    cfg1_document["cavities"].append(extra)
    assert "disjointness violated: cavity 'd2' meets cavity 'd1'" in _diagnostics(cfg1_document)


def test_source_sign_change_is_rejected(cfg1_document):
    cfg1_document["source"] = {"radial-polynomial": [1.0, -2.0]}
    assert "emission condition violated" in _diagnostics(cfg1_document)


def test_schema_errors_are_reported(cfg1_document):
    cfg1_document["unexpected"] = True
    del cfg1_document["cavities"][0]["kind"]
    text = _diagnostics(cfg1_document)
    assert "malformed scene document at 'unexpected'" in text
    assert "malformed scene document at 'cavities.0.kind'" in text


def test_non_positive_gamma0(cfg1_document):
    cfg1_document["gamma0"] = 0.0
    assert "γ₀ must be positive" in _diagnostics(cfg1_document)


def test_duplicate_ids(cfg1_document):
    cfg1_document["cavities"].append(json.loads(json.dumps(cfg1_document["cavities"][0])))
    cfg1_document["cavities"][1]["surface"]["sphere"]["center"] = [0.0, 0.0, -4.0]
    assert "not unique" in _diagnostics(cfg1_document)


def test_validate_reads_files(tmp_path, cfg1_document):
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(cfg1_document))
    assert validate(path).cavities[0].id == "d1"

    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(SceneValidationError, match="not valid JSON"):
        validate(broken)


def test_unknown_example():
    with pytest.raises(SceneValidationError, match="unknown example"):
        example_scene("cfg9")


def test_cavity_lookup():
    scene = example_scene("example-3.1")
    assert scene.cavity("n1").id == "n1"
    with pytest.raises(KeyError):
        scene.cavity("zz")
