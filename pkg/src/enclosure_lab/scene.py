"""
Problem instances: the probe region B, the source f, and the cavities.

Scene documents are JSON with kebab-case keys. They are parsed into pydantic
models, then converted into frozen domain objects and checked against the
standing assumptions of the method (disjointness, the λ₁ dissipation margins,
emission from the whole of B). Every failed assumption produces one diagnostic.
"""

import json
import math
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from mcp.server.fastmcp.utilities.logging import get_logger
from numpy.polynomial import polynomial as P
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from .errors import GeometryError, SceneValidationError
from .geometry import Ellipsoid, Sphere, Surface, Vec3, affine_extrema
from .geometry.distance import minimum_gap
from .geometry.surfaces import IDENTITY3

LOG = get_logger(__name__)

EMISSION_SAMPLES = 2001


class CavityKind(StrEnum):
    NEUMANN_PLUS = "neumann_plus"
    NEUMANN_MINUS = "neumann_minus"
    DIRICHLET = "dirichlet"


# ---------------------------------------------------------------------------
# Domain objects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoefficientField:
    """Affine field value + gradient·(p - c) about the cavity centre c."""

    value: float = 0.0
    gradient: Vec3 = (0.0, 0.0, 0.0)

    @property
    def is_constant(self) -> bool:
        return not any(self.gradient)

    def at(self, point, center) -> float:
        offset = np.asarray(point, dtype=float) - np.asarray(center, dtype=float)
        return float(self.value + np.asarray(self.gradient) @ offset)

    def extrema(self, surface: Surface) -> Tuple[float, float]:
        return affine_extrema(surface, self.value, self.gradient)


@dataclass(frozen=True)
class SourceField:
    """f(y) = Σ c_k |y - b|^k about the probe centre b."""

    coefficients: Tuple[float, ...] = (1.0,)

    @property
    def is_constant(self) -> bool:
        return len(self.coefficients) == 1

    def radial(self, rho):
        return P.polyval(np.asarray(rho, dtype=float), self.coefficients)

    def at(self, point, center) -> float:
        rho = np.linalg.norm(np.asarray(point, dtype=float) - np.asarray(center, dtype=float))
        return float(self.radial(rho))


@dataclass(frozen=True)
class Cavity:
    id: str
    kind: CavityKind
    surface: Surface
    lambda0: CoefficientField = field(default_factory=CoefficientField)
    lambda1: CoefficientField = field(default_factory=CoefficientField)

    @property
    def is_robin(self) -> bool:
        return self.kind != CavityKind.DIRICHLET

    def lambda1_at(self, point) -> float:
        return self.lambda1.at(point, self.surface.center)


@dataclass(frozen=True)
class Scene:
    gamma0: float
    probe: Surface
    source: SourceField
    cavities: Tuple[Cavity, ...]
    mu1_margin: float = 1e-3

    @property
    def sqrt_gamma0(self) -> float:
        return math.sqrt(self.gamma0)

    @property
    def probe_center(self) -> np.ndarray:
        return self.probe.center_array

    @property
    def probe_radius(self) -> Optional[float]:
        """Radius a when B is a ball, otherwise None."""
        return self.probe.radius if isinstance(self.probe, Sphere) else None

    @property
    def scale(self) -> float:
        """Length scale used for every relative tolerance."""
        reach = [self.probe.size]
        for cavity in self.cavities:
            offset = np.linalg.norm(cavity.surface.center_array - self.probe_center)
            reach.append(float(offset) + cavity.surface.size)
        return max(reach)

    def f_at(self, point) -> float:
        return self.source.at(point, self.probe_center)

    def cavity(self, cavity_id: str) -> Cavity:
        for cavity in self.cavities:
            if cavity.id == cavity_id:
                return cavity
        raise KeyError(f"no cavity with id '{cavity_id}'")

    def to_document(self) -> dict:
        return _scene_to_document(self)


# ---------------------------------------------------------------------------
# Document schema
# ---------------------------------------------------------------------------


def _kebab(name: str) -> str:
    return name.replace("_", "-")


class _Document(BaseModel):
    model_config = ConfigDict(alias_generator=_kebab, populate_by_name=True, extra="forbid")


Triple = Tuple[float, float, float]


class SphereDoc(_Document):
    center: Triple
    radius: float


class EllipsoidDoc(_Document):
    center: Triple
    semiaxes: Triple
    rotation: Tuple[Triple, Triple, Triple] = IDENTITY3


class _OneOf(_Document):
    @model_validator(mode="after")
    def _exactly_one(self):
        chosen = [name for name in type(self).model_fields if getattr(self, name) is not None]
        if len(chosen) != 1:
            options = ", ".join(_kebab(name) for name in type(self).model_fields)
            raise ValueError(f"give exactly one of: {options}")
        return self


class SurfaceDoc(_OneOf):
    sphere: Optional[SphereDoc] = None
    ellipsoid: Optional[EllipsoidDoc] = None


class ProbeDoc(_OneOf):
    ball: Optional[SphereDoc] = None
    ellipsoid: Optional[EllipsoidDoc] = None


class SourceDoc(_OneOf):
    constant: Optional[float] = None
    radial_polynomial: Optional[List[float]] = None


class FieldDoc(_Document):
    value: float = 0.0
    gradient: Triple = (0.0, 0.0, 0.0)


class CavityDoc(_Document):
    id: str
    kind: CavityKind
    surface: SurfaceDoc
    lambda0: Union[float, FieldDoc] = 0.0
    lambda1: Union[float, FieldDoc] = 0.0


class SceneDoc(_Document):
    gamma0: float
    mu1_margin: float = 1e-3
    probe: ProbeDoc
    source: SourceDoc = SourceDoc(constant=1.0)
    cavities: List[CavityDoc]


def _surface_from(doc: Union[SurfaceDoc, ProbeDoc]) -> Surface:
    sphere = getattr(doc, "sphere", None) or getattr(doc, "ball", None)
    if sphere is not None:
        return Sphere(center=sphere.center, radius=sphere.radius)
    ellipsoid = doc.ellipsoid
    return Ellipsoid(
        center=ellipsoid.center, semiaxes=ellipsoid.semiaxes, rotation=ellipsoid.rotation
    )


def _field_from(doc: Union[float, FieldDoc]) -> CoefficientField:
    if isinstance(doc, FieldDoc):
        return CoefficientField(value=doc.value, gradient=tuple(doc.gradient))
    return CoefficientField(value=float(doc))


def _surface_document(surface: Surface, sphere_key: str) -> dict:
    if isinstance(surface, Sphere):
        return {sphere_key: {"center": list(surface.center), "radius": surface.radius}}
    return {
        "ellipsoid": {
            "center": list(surface.center),
            "semiaxes": list(surface.semiaxes),
            "rotation": [list(row) for row in surface.rotation],
        }
    }


def _field_document(coefficient: CoefficientField) -> Union[float, dict]:
    if coefficient.is_constant:
        return coefficient.value
    return {"value": coefficient.value, "gradient": list(coefficient.gradient)}


def _scene_to_document(scene: Scene) -> dict:
    if scene.source.is_constant:
        source = {"constant": scene.source.coefficients[0]}
    else:
        source = {"radial-polynomial": list(scene.source.coefficients)}
    return {
        "gamma0": scene.gamma0,
        "mu1-margin": scene.mu1_margin,
        "probe": _surface_document(scene.probe, "ball"),
        "source": source,
        "cavities": [
            {
                "id": cavity.id,
                "kind": cavity.kind.value,
                "surface": _surface_document(cavity.surface, "sphere"),
                "lambda0": _field_document(cavity.lambda0),
                "lambda1": _field_document(cavity.lambda1),
            }
            for cavity in scene.cavities
        ],
    }


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _pydantic_diagnostics(exc: ValidationError) -> List[str]:
    messages = []
    for error in exc.errors():
        location = ".".join(str(part) for part in error["loc"])
        messages.append(f"malformed scene document at '{location}': {error['msg']}")
    return messages


def _build_scene(doc: SceneDoc, diagnostics: List[str]) -> Optional[Scene]:
    try:
        probe = _surface_from(doc.probe)
    except GeometryError as exc:
        diagnostics.append(f"probe: {exc}")
        probe = None

    if doc.source.constant is not None:
        source = SourceField(coefficients=(float(doc.source.constant),))
    else:
        coefficients = tuple(float(c) for c in doc.source.radial_polynomial)
        if not coefficients:
            diagnostics.append("source: radial-polynomial needs at least one coefficient")
        source = SourceField(coefficients=coefficients or (0.0,))

    cavities = []
    for cavity_doc in doc.cavities:
        try:
            surface = _surface_from(cavity_doc.surface)
        except GeometryError as exc:
            diagnostics.append(f"cavity '{cavity_doc.id}': {exc}")
            continue
        cavities.append(
            Cavity(
                id=cavity_doc.id,
                kind=cavity_doc.kind,
                surface=surface,
                lambda0=_field_from(cavity_doc.lambda0),
                lambda1=_field_from(cavity_doc.lambda1),
            )
        )

    if probe is None:
        return None
    return Scene(
        gamma0=doc.gamma0,
        probe=probe,
        source=source,
        cavities=tuple(cavities),
        mu1_margin=doc.mu1_margin,
    )


def _check_coefficients(scene: Scene, diagnostics: List[str]) -> None:
    root = scene.sqrt_gamma0
    margin = scene.mu1_margin
    for cavity in scene.cavities:
        if not cavity.is_robin:
            continue
        low, high = cavity.lambda1.extrema(cavity.surface)
        if low < 0.0:
            diagnostics.append(
                f"dissipativity violated on cavity '{cavity.id}': inf λ₁ = {low:.6g} < 0"
            )
        if cavity.kind == CavityKind.NEUMANN_PLUS and not high < root - margin:
            diagnostics.append(
                f"λ₁ margin (n₊) violated on cavity '{cavity.id}': "
                f"sup λ₁ = {high:.6g} ≥ √γ₀ - μ₁ = {root - margin:.6g}"
            )
        if cavity.kind == CavityKind.NEUMANN_MINUS and not low > root + margin:
            diagnostics.append(
                f"λ₁ margin (n₋) violated on cavity '{cavity.id}': "
                f"inf λ₁ = {low:.6g} ≤ √γ₀ + μ₁ = {root + margin:.6g}"
            )


def _check_emission(scene: Scene, diagnostics: List[str]) -> None:
    reach = scene.probe.size
    coefficients = np.asarray(scene.source.coefficients, dtype=float)
    samples = scene.source.radial(np.linspace(0.0, reach, EMISSION_SAMPLES))
    roots = P.polyroots(coefficients) if coefficients.size > 1 else np.array([])
    real_roots = [
        r.real for r in np.atleast_1d(roots) if abs(r.imag) < 1e-12 and 0.0 <= r.real <= reach
    ]
    if np.min(np.abs(samples)) == 0.0 or real_roots or np.ptp(np.sign(samples)) != 0.0:
        diagnostics.append(
            "emission condition violated: f vanishes or changes sign on the closure of B"
        )


def _check_disjoint(scene: Scene, diagnostics: List[str]) -> None:
    bodies: List[Tuple[str, Surface]] = [("probe", scene.probe)]
    bodies += [(f"cavity '{cavity.id}'", cavity.surface) for cavity in scene.cavities]
    for i, (name_a, surface_a) in enumerate(bodies):
        for name_b, surface_b in bodies[:i]:
            gap = minimum_gap(surface_a, surface_b)
            if gap <= 0.0:
                diagnostics.append(f"disjointness violated: {name_a} meets {name_b}")


def validate_document(document: Dict) -> Scene:
    """
    Parse and check a scene document.

    Args:
        document (Dict): Decoded JSON scene with kebab-case keys.

    Returns:
        Scene: A scene satisfying every standing assumption.

    Raises:
        SceneValidationError: With one diagnostic per violated assumption.
    """
    try:
        doc = SceneDoc.model_validate(document)
    except ValidationError as exc:
        raise SceneValidationError(_pydantic_diagnostics(exc)) from exc

    diagnostics: List[str] = []
    if not doc.gamma0 > 0.0:
        diagnostics.append(f"γ₀ must be positive, got {doc.gamma0}")
    if not doc.mu1_margin > 0.0:
        diagnostics.append(f"μ₁ margin must be positive, got {doc.mu1_margin}")
    ids = [cavity.id for cavity in doc.cavities]
    if len(set(ids)) != len(ids):
        diagnostics.append(f"cavity ids are not unique: {ids}")
    if not doc.cavities:
        diagnostics.append("scene has no cavities")

    scene = _build_scene(doc, diagnostics)
    if scene is not None and not diagnostics:
        _check_coefficients(scene, diagnostics)
        _check_emission(scene, diagnostics)
        _check_disjoint(scene, diagnostics)

    if diagnostics:
        for message in diagnostics:
            LOG.warning(message)
        raise SceneValidationError(diagnostics)
    LOG.info(f"Scene valid: {len(scene.cavities)} cavities, γ₀ = {scene.gamma0}")
    return scene


def validate(source: Union[str, Path, Dict]) -> Scene:
    """
    Load a scene from a JSON file path or an already decoded document.

    Args:
        source (str | Path | Dict): Path to a ``.json`` file or the document itself.

    Returns:
        Scene: The validated scene.

    Example:
        validate("scenes/cfg1.json") -> Scene with one Dirichlet cavity
    """
    if isinstance(source, dict):
        return validate_document(source)
    path = Path(source)
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SceneValidationError([f"scene file {path} is not valid JSON: {exc}"]) from exc
    return validate_document(document)


# ---------------------------------------------------------------------------
# Example layouts
# ---------------------------------------------------------------------------


def _ball_document(cavities: List[dict], gamma0: float = 1.0) -> dict:
    return {
        "gamma0": gamma0,
        "mu1-margin": 1e-3,
        "probe": {"ball": {"center": [0.0, 0.0, 0.0], "radius": 1.0}},
        "source": {"constant": 1.0},
        "cavities": cavities,
    }


def _sphere_cavity(cavity_id: str, kind: str, center, radius: float, lambda1: float = 0.0):
    return {
        "id": cavity_id,
        "kind": kind,
        "surface": {"sphere": {"center": list(center), "radius": radius}},
        "lambda0": 0.0,
        "lambda1": lambda1,
    }


EXAMPLE_DOCUMENTS: Dict[str, dict] = {
    # Dirichlet unit sphere at distance 2 from the unit ball
    "cfg1": _ball_document([_sphere_cavity("d1", "dirichlet", (0, 0, 4), 1.0)]),
    "cfg1-neumann": _ball_document([_sphere_cavity("n1", "neumann_plus", (0, 0, 4), 1.0)]),
    "cfg1-robin": _ball_document(
        [_sphere_cavity("n1", "neumann_plus", (0, 0, 4), 1.0, lambda1=0.25)]
    ),
    "cfg1-symmetric": _ball_document(
        [
            _sphere_cavity("d1", "dirichlet", (0, 0, 4), 1.0),
            _sphere_cavity("n1", "neumann_plus", (0, 0, -4), 1.0),
        ]
    ),
    # flatter Robin cavity: smaller relative Gauss curvature, positive sign wins
    "example-3.1": _ball_document(
        [
            _sphere_cavity("d1", "dirichlet", (0, 0, 4), 1.0),
            _sphere_cavity("n1", "neumann_plus", (0, 0, -5), 2.0),
        ]
    ),
    # equal curvatures, absorbing Robin cavity: the Dirichlet sign wins
    "example-3.2": _ball_document(
        [
            _sphere_cavity("d1", "dirichlet", (0, 0, 4), 1.0),
            _sphere_cavity("n1", "neumann_plus", (0, 0, -4), 1.0, lambda1=0.5),
        ]
    ),
}


def example_scene(name: str) -> Scene:
    """
    One of the built-in layouts (all with γ₀ = 1, f ≡ 1, B the unit ball).

    Args:
        name (str): One of ``EXAMPLE_DOCUMENTS``.

    Returns:
        Scene: The validated layout.

    Example:
        example_scene("cfg1").cavities[0].kind -> CavityKind.DIRICHLET
    """
    if name not in EXAMPLE_DOCUMENTS:
        raise SceneValidationError(
            [f"unknown example '{name}'; choose from {sorted(EXAMPLE_DOCUMENTS)}"]
        )
    return validate_document(EXAMPLE_DOCUMENTS[name])
