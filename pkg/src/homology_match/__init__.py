"""Template matching that tests matched points for one rigid 3D configuration via planar homologies."""
from ._core import BACKEND, available_backends
from .errors import *  # noqa: F401,F403
from .geometry import (
    eigenvalues_3x3,
    epipoles_from_fundamental,
    estimate_fundamental,
    estimate_fundamental_ransac,
    homography_from_4,
    normalize_points,
    sampson_distance,
)
from .homology import (
    Pairing,
    QuadrupleIndex,
    QuadrupleScore,
    Status,
    homology_error,
    homology_matrix,
    score_quadruple,
)
from .matching import (
    CorrespondenceSet,
    MatchConfig,
    MatchResult,
    PairScore,
    TemplateLibrary,
    enumerate_quadruples,
    fuse_classes,
    match_templates,
    score_pair,
)

__version__ = "0.1.0"
