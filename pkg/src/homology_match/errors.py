"""Exception hierarchy shared by every module."""


class HomologyMatchError(Exception):
    """Base class for all errors raised by this package."""


class InputError(HomologyMatchError):
    """Malformed or insufficient input (CLI exit code 1)."""


class GeometryError(HomologyMatchError):
    """A geometric degeneracy that makes a quantity undefined (CLI exit code 2)."""


class DegenerateInput(GeometryError):
    pass


class PointAtInfinity(GeometryError):
    pass


class CollinearPoints(GeometryError):
    pass


class SingularSystem(GeometryError):
    pass


class RankError(GeometryError):
    pass


class DegenerateConfiguration(GeometryError):
    """Correspondences do not determine the two-view geometry (e.g. a planar scene)."""


class InsufficientCorrespondences(InputError):
    pass


class TooFewPoints(InputError):
    pass


class AllQuadruplesDegenerate(GeometryError):
    pass


class NoScorableTemplates(GeometryError):
    pass


class BehindCamera(GeometryError):
    pass


class AtCameraCenter(GeometryError):
    pass


class CoincidentCenters(GeometryError):
    pass


class ParseError(InputError):
    """Correspondence or config file could not be parsed."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
