"""Per-quadruple homology matrices and the equal-eigenvalue error.

For four correspondences, each triple of points spans a world plane, and
each plane together with the epipole pair fixes a homography between the
two views.  Two planes that share an edge give ``H = H1 @ inv(H2)``, which is
a planar homology (two equal eigenvalues) exactly when both images come
from one rigid point configuration.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from . import geometry
from .errors import CollinearPoints, DegenerateInput, SingularSystem

# triples (positions within the quadruple) for the two plane pairings;
# each pair of planes shares an edge: (0, 1) for FIRST, (2, 3) for SECOND
PAIRING_TRIPLES = {
    0: ((0, 1, 2), (0, 1, 3)),
    1: ((0, 2, 3), (1, 2, 3)),
}


class Pairing(Enum):
    FIRST = 0
    SECOND = 1


class Status(Enum):
    OK = "ok"
    SKIPPED_COLLINEAR = "skipped_collinear"
    SKIPPED_SINGULAR = "skipped_singular"


@dataclass(frozen=True)
class QuadrupleIndex:
    indices: Tuple[int, int, int, int]
    pairing: Pairing = Pairing.FIRST

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(idx) != 4 or len(set(idx)) != 4 or any(i < 0 for i in idx):
            raise ValueError(f"quadruple needs 4 distinct non-negative indices, got {self.indices}")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "pairing", Pairing(self.pairing))

    def planes(self):
        """The two index triples whose plane homographies are compared."""
        a, b = PAIRING_TRIPLES[self.pairing.value]
        return tuple(self.indices[i] for i in a), tuple(self.indices[i] for i in b)


@dataclass(frozen=True)
class QuadrupleScore:
    quadruple: QuadrupleIndex
    status: Status
    score: Optional[float] = None

    def __post_init__(self):
        if (self.score is None) == (self.status is Status.OK):
            raise ValueError("score must be present exactly when status is ok")

    @property
    def ok(self):
        return self.status is Status.OK


def homology_matrix(quad, ref, qry, e1, e2, collinear_px=1.0, rank_tol=geometry.RANK_TOL):
    """``H1 @ inv(H2)`` for the two planes of ``quad``'s pairing, in query-image coordinates.

    ``ref`` and ``qry`` are the full point arrays of a correspondence set;
    ``e1`` and ``e2`` are the epipoles in the reference and query image.
    The result has unit Frobenius norm and a positive determinant.
    """
    ref = geometry.homogenize(ref)
    qry = geometry.homogenize(qry)
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    hs = []
    for tri in quad.planes():
        src = np.vstack([ref[list(tri)], e1])
        dst = np.vstack([qry[list(tri)], e2])
        hs.append(geometry.homography_from_4(src, dst, collinear_px=collinear_px, rank_tol=rank_tol))
    H1, H2 = hs
    # invertibility is judged in each image's conditioned frame; pixel-scale
    # determinants mostly reflect the coordinate scale, not the geometry
    idx = list(quad.indices)
    Tr = geometry.conditioning_transform(ref[idx])
    Tq = geometry.conditioning_transform(qry[idx])
    H2c = Tq @ H2 @ np.linalg.inv(Tr)
    if not abs(np.linalg.det(H2c / np.linalg.norm(H2c))) >= rank_tol:
        raise SingularSystem("second plane homography is not invertible")
    Hc = Tq @ H1 @ np.linalg.inv(H2) @ np.linalg.inv(Tq)
    if not abs(np.linalg.det(Hc / np.linalg.norm(Hc))) >= rank_tol:
        raise SingularSystem("homology matrix is singular")
    return geometry.normalize_homography(H1 @ np.linalg.inv(H2))


def closest_pair_ratio(values, clamp=1.0):
    """``|a - b| / |a + b|`` for the closest pair among three (complex) values, clamped to [0, clamp]."""
    v = np.asarray(values, dtype=complex)
    pairs = ((0, 1), (0, 2), (1, 2))
    gaps = [abs(v[i] - v[j]) for i, j in pairs]
    i, j = pairs[int(np.argmin(gaps))]
    num = abs(v[i] - v[j])
    den = abs(v[i] + v[j])
    if den < 1e-12 * np.max(np.abs(v)):
        return float(clamp)
    return float(min(num / den, clamp))


def homology_error(H, clamp=1.0):
    """Normalized gap between the two closest eigenvalues of ``H``; 0 for a homology.

    ``H`` is first brought to unit norm and positive determinant, so any
    rescaling by a power of two (either sign) gives a bit-identical result.
    """
    return closest_pair_ratio(geometry.eigenvalues_3x3(geometry.normalize_homography(H)), clamp)


def score_quadruple(indices, ref, qry, e1, e2, collinear_px=1.0, rank_tol=geometry.RANK_TOL,
                    clamp=1.0):
    """Score both plane pairings of one quadruple; degeneracies are reported in the status."""
    out = []
    for pairing in Pairing:
        quad = QuadrupleIndex(tuple(indices), pairing)
        try:
            H = homology_matrix(quad, ref, qry, e1, e2, collinear_px, rank_tol)
        except (CollinearPoints, DegenerateInput):
            out.append(QuadrupleScore(quad, Status.SKIPPED_COLLINEAR))
            continue
        except SingularSystem:
            out.append(QuadrupleScore(quad, Status.SKIPPED_SINGULAR))
            continue
        out.append(QuadrupleScore(quad, Status.OK, homology_error(H, clamp)))
    return tuple(out)
