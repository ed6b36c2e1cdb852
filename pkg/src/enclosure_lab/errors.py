from typing import List


class EnclosureLabError(Exception):
    """Base class for every error raised by the lab."""


class SceneValidationError(EnclosureLabError):
    """
    A scene document violates one of the problem assumptions.

    Args:
        diagnostics (List[str]): One message per violated assumption, each naming
            the condition that failed (e.g. "λ₁ margin (n₊) violated").
    """

    def __init__(self, diagnostics: List[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


class GeometryError(EnclosureLabError):
    """Chart parameters out of domain, or a frame that does not match its pair."""


class DegeneratePairError(EnclosureLabError):
    """A stationary pair fails the non-degenerate condition."""


class ConvergenceError(EnclosureLabError):
    """A minimisation, quadrature refinement or mode truncation did not converge."""


class ReconstructionError(EnclosureLabError):
    """An indicator series cannot support the requested fit."""
