"""Exception hierarchy shared by all modules."""


class TransbemError(Exception):
    """Base class for all errors raised by transbem."""

    code = "internal"


class MeshError(TransbemError):
    code = "mesh"


class ResolutionOverflow(MeshError):
    code = "resolution-overflow"


class MalformedHeader(MeshError):
    code = "malformed-header"


class DanglingNodeReference(MeshError):
    code = "dangling-node-reference"


class EmptyMesh(MeshError):
    code = "empty-mesh"


class NonManifoldEdge(MeshError):
    code = "non-manifold-edge"


class OpenBoundary(MeshError):
    code = "open-boundary"


class DegenerateTriangle(MeshError):
    code = "degenerate-triangle"


class SceneError(TransbemError):
    code = "scene"


class NonPositiveKR(TransbemError):
    code = "nonpositive-kr"


class CoincidentSurfaces(TransbemError):
    code = "coincident-surfaces"


class DimensionMismatch(TransbemError):
    code = "dimension-mismatch"


class FormulationMismatch(TransbemError):
    code = "formulation-mismatch"


class InvalidTheta(TransbemError):
    code = "invalid-theta"


class SingularFactorisation(TransbemError):
    code = "singular-factorisation"

    def __init__(self, message, term=None):
        super().__init__(message)
        self.term = term


class Breakdown(TransbemError):
    code = "breakdown"

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class ModeSystemSingular(TransbemError):
    code = "mode-system-singular"

    def __init__(self, message, mode=None):
        super().__init__(message)
        self.mode = mode


class PointOnSurface(TransbemError):
    code = "point-on-surface"


class MaskMismatch(TransbemError):
    code = "mask-mismatch"


class ConfigError(TransbemError):
    code = "config"
