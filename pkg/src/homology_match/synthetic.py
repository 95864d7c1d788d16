"""Synthetic pinhole-camera benchmark.

A reference camera sits at the world origin looking down +Z at a point
cloud centred on the optical axis.  The test camera is obtained by rotating
the reference camera rig about the cloud centroid, first around the world Y
axis (yaw) and then around the world Z axis (pitch), so it stays on the
viewing hemisphere at the reference distance.  Focal lengths are redrawn
for every trial, keypoints are a random subset of the cloud, and Gaussian
noise is added to every image coordinate.
"""
import csv
import io
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from . import geometry
from .errors import (
    AtCameraCenter,
    BehindCamera,
    CoincidentCenters,
    GeometryError,
)
from .matching import CorrespondenceSet, MatchConfig, TemplateLibrary, score_pair


def rot_x(deg):
    t = np.radians(deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(deg):
    t = np.radians(deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(deg):
    t = np.radians(deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def random_rotation(rng):
    """Uniformly distributed rotation (QR of a Gaussian matrix, sign-fixed)."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@dataclass(frozen=True)
class CameraModel:
    focal: float
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    principal_point: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        C = np.asarray(self.center, dtype=float)
        if self.focal <= 0:
            raise ValueError("focal length must be positive")
        if R.shape != (3, 3) or not np.allclose(R @ R.T, np.eye(3), atol=1e-10) \
                or abs(np.linalg.det(R) - 1.0) > 1e-10:
            raise ValueError("rotation must be orthonormal with determinant +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "center", C.reshape(3))

    @property
    def K(self):
        cx, cy = self.principal_point
        return np.array([[self.focal, 0.0, cx], [0.0, self.focal, cy], [0.0, 0.0, 1.0]])

    @property
    def P(self):
        """3x4 camera matrix ``K [R | -R C]``."""
        return self.K @ np.hstack([self.rotation, (-self.rotation @ self.center)[:, None]])

    def moved(self, R_world, t_world=np.zeros(3)):
        """Same camera after the rigid world motion ``X -> R_world X + t_world``."""
        return CameraModel(self.focal, self.rotation @ R_world.T,
                           R_world @ self.center + t_world, self.principal_point)


@dataclass(frozen=True)
class PointCloud3:
    points: np.ndarray
    label: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 4:
            raise ValueError("a point cloud needs at least 4 points of dimension 3")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    @property
    def centroid(self):
        return self.points.mean(axis=0)

    def planarity(self):
        """Smallest singular value of the centred point matrix, per point (RMS distance to the best plane)."""
        c = self.points - self.centroid
        return np.linalg.svd(c, compute_uv=False)[-1] / np.sqrt(len(self))

    def diameter(self):
        p = self.points
        return float(np.max(np.linalg.norm(p[:, None] - p[None], axis=2)))

    def translated(self, t):
        return PointCloud3(self.points + np.asarray(t, dtype=float), self.label)


def project(camera, points, check_depth=True):
    """Pinhole projection ``K R (X - C)``, w-normalized, as an (n, 3) array.

    With ``check_depth=False`` points behind the camera are allowed and the
    raw homogeneous images are returned unnormalized.
    """
    X = points.points if isinstance(points, PointCloud3) else np.atleast_2d(np.asarray(points, dtype=float))
    cam = (X - camera.center) @ camera.rotation.T
    if check_depth:
        if np.any(np.linalg.norm(cam, axis=1) == 0.0):
            raise AtCameraCenter("a point coincides with the camera center")
        if np.any(cam[:, 2] <= 0.0):
            raise BehindCamera("a point lies on or behind the image plane")
    img = cam @ camera.K.T
    if not check_depth:
        return img
    return img / img[:, 2:3]


def ground_truth_epipoles(cam_r, cam_q):
    """Exact unit-norm epipoles ``(e1, e2)``: each camera's image of the other's center."""
    if np.allclose(cam_r.center, cam_q.center, rtol=0.0, atol=1e-12):
        raise CoincidentCenters("camera centers coincide; epipoles are undefined")
    e1 = project(cam_r, cam_q.center, check_depth=False)[0]
    e2 = project(cam_q, cam_r.center, check_depth=False)[0]
    return geometry.unit(e1), geometry.unit(e2)


def fundamental_from_cameras(cam_r, cam_q):
    """``F = [e2]_x P_q P_r^+`` with ``x_q^T F x_r = 0``, unit Frobenius norm."""
    Pr, Pq = cam_r.P, cam_q.P
    C = np.append(cam_r.center, 1.0)
    e2 = Pq @ C
    ex = np.array([[0.0, -e2[2], e2[1]], [e2[2], 0.0, -e2[0]], [-e2[1], e2[0], 0.0]])
    F = ex @ Pq @ np.linalg.pinv(Pr)
    return F / np.linalg.norm(F)


def generate_cloud(kind="blob", point_count=1000, extent=1.0, seed=0, label=None):
    """Seeded stand-in object centred on the origin.

    ``blob``: uniform in a ball of radius ``extent``; ``box``: uniform on the
    surface of a cuboid with half-sides ``extent * (1, 0.7, 0.5)``;
    ``two_plane``: half the points on each of two planes meeting at 60 degrees;
    ``plane``: all points on one tilted plane.
    """
    rng = np.random.default_rng(seed)
    n = int(point_count)
    if n < 4 or extent <= 0:
        raise ValueError("need point_count >= 4 and extent > 0")
    if kind == "blob":
        d = rng.normal(size=(n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        pts = d * (extent * rng.uniform(size=(n, 1)) ** (1.0 / 3.0))
    elif kind == "box":
        half = extent * np.array([1.0, 0.7, 0.5])
        areas = np.array([half[1] * half[2], half[0] * half[2], half[0] * half[1]])
        axis = rng.choice(3, size=n, p=areas / areas.sum())
        pts = rng.uniform(-1.0, 1.0, size=(n, 3)) * half
        side = rng.choice([-1.0, 1.0], size=n)
        pts[np.arange(n), axis] = side * half[axis]
    elif kind == "two_plane":
        m = n // 2
        uv = rng.uniform(-extent, extent, size=(n, 2))
        pts = np.zeros((n, 3))
        pts[:m, 0] = uv[:m, 0]
        pts[:m, 1] = uv[:m, 1]
        # second plane through the y-axis, tilted 60 degrees
        pts[m:] = (rot_y(60.0) @ np.column_stack([uv[m:, 0], uv[m:, 1], np.zeros(n - m)]).T).T
    elif kind == "plane":
        uv = rng.uniform(-extent, extent, size=(n, 2))
        pts = (rot_x(25.0) @ rot_y(35.0) @ np.column_stack([uv, np.zeros(n)]).T).T
    else:
        raise ValueError(f"unknown cloud kind {kind!r}")
    return PointCloud3(pts, label if label is not None else f"{kind}-{seed}")


# ---------------------------------------------------------------------------
# hemisphere sweep

@dataclass(frozen=True)
class SweepConfig:
    yaw_range: Tuple[float, float, float] = (-60.0, 60.0, 10.0)
    pitch_range: Tuple[float, float, float] = (0.0, 60.0, 10.0)
    focal_base: float = 1000.0
    focal_jitter: float = 100.0
    noise_sigma: float = 0.0
    keypoint_count: int = 8
    trials_per_pose: int = 5
    distance: float = 4.0
    seed: int = 0
    match: MatchConfig = field(default_factory=MatchConfig)

    def __post_init__(self):
        for lo, hi, step in (self.yaw_range, self.pitch_range):
            if step <= 0 or hi < lo:
                raise ValueError("angle ranges need lo <= hi and a positive step")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.keypoint_count < 4 or self.trials_per_pose < 1:
            raise ValueError("need keypoint_count >= 4 and trials_per_pose >= 1")

    @staticmethod
    def _grid(lo, hi, step):
        count = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return lo + step * np.arange(count)

    @property
    def yaws(self):
        return self._grid(*self.yaw_range)

    @property
    def pitches(self):
        return self._grid(*self.pitch_range)


@dataclass
class SurfaceCell:
    yaw_deg: float
    pitch_deg: float
    sigma: float
    match_score: Optional[float]
    nonmatch_score: Optional[float]
    trials: int
    status: str = "ok"

    @property
    def valid(self):
        return self.status == "ok"


CSV_HEADER = ("yaw_deg", "pitch_deg", "sigma", "match_score", "nonmatch_score", "trials", "status")


@dataclass
class ErrorSurface:
    cells: list

    def valid_cells(self):
        return [c for c in self.cells if c.valid]

    def separation(self):
        """Minimum of ``nonmatch - match`` over valid cells."""
        return min(c.nonmatch_score - c.match_score for c in self.valid_cells())

    def accuracy(self):
        """Fraction of valid cells where the matching pair scores strictly lower."""
        v = self.valid_cells()
        return sum(c.match_score < c.nonmatch_score for c in v) / len(v)

    def match_max(self):
        return max(c.match_score for c in self.valid_cells())

    def nonmatch_min(self):
        return min(c.nonmatch_score for c in self.valid_cells())

    def mean_match(self):
        return float(np.mean([c.match_score for c in self.valid_cells()]))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for c in self.cells:
            w.writerow([repr(float(c.yaw_deg)), repr(float(c.pitch_deg)), repr(float(c.sigma)),
                        "" if c.match_score is None else repr(float(c.match_score)),
                        "" if c.nonmatch_score is None else repr(float(c.nonmatch_score)),
                        c.trials, c.status])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.DictReader(io.StringIO(text)))
        cells = []
        for r in rows:
            cells.append(SurfaceCell(
                float(r["yaw_deg"]), float(r["pitch_deg"]), float(r["sigma"]),
                float(r["match_score"]) if r["match_score"] else None,
                float(r["nonmatch_score"]) if r["nonmatch_score"] else None,
                int(r["trials"]), r["status"]))
        return cls(cells)


def reference_camera(focal):
    return CameraModel(focal)


def orbit_camera(focal, yaw, pitch, pivot):
    """Reference rig rotated about ``pivot`` by yaw (around Y), then pitch (around Z)."""
    G = rot_z(pitch) @ rot_y(yaw)
    pivot = np.asarray(pivot, dtype=float)
    center = pivot + G @ (np.zeros(3) - pivot)
    return CameraModel(focal, G.T, center)


def scene_rng(seed, *indices):
    """Independent random stream for one (pose, trial) cell."""
    return np.random.default_rng(np.random.SeedSequence([int(seed)] + [int(i) for i in indices]))


def simulate_pair(cloud_r, cloud_q, cam_r, cam_q, keypoints, sigma, rng):
    """Noisy correspondences between ``cloud_r`` in ``cam_r`` and ``cloud_q`` in ``cam_q``."""
    pr = project(cam_r, cloud_r.points[keypoints])[:, :2]
    pq = project(cam_q, cloud_q.points[keypoints])[:, :2]
    if sigma > 0:
        pr = pr + rng.normal(scale=sigma, size=pr.shape)
        pq = pq + rng.normal(scale=sigma, size=pq.shape)
    return pr, pq


def draw_focals(config, rng):
    lo = config.focal_base - config.focal_jitter
    hi = config.focal_base + config.focal_jitter
    return rng.uniform(lo, hi, size=2)


def hemisphere_sweep(cloud_match, cloud_nonmatch, config=SweepConfig()):
    """Match and non-match scores over the (yaw, pitch) grid; see the module docstring.

    Both clouds are re-centred on ``(0, 0, distance)``.  The non-matching
    query uses the other cloud's points at the same indices as the selected
    keypoints.  Scores use ground-truth epipoles.
    """
    if len(cloud_nonmatch) < len(cloud_match):
        raise ValueError("the non-matching cloud must have at least as many points as the matching one")
    pivot = np.array([0.0, 0.0, config.distance])
    cm = cloud_match.translated(pivot - cloud_match.centroid)
    cn = cloud_nonmatch.translated(pivot - cloud_nonmatch.centroid)
    cells = []
    for yi, yaw in enumerate(config.yaws):
        for pi, pitch in enumerate(config.pitches):
            cells.append(_sweep_cell(cm, cn, config, yi, pi, yaw, pitch, pivot))
    return ErrorSurface(cells)


def _sweep_cell(cm, cn, config, yi, pi, yaw, pitch, pivot):
    sigma = float(config.noise_sigma)
    match_scores, nonmatch_scores = [], []
    for trial in range(config.trials_per_pose):
        rng = scene_rng(config.seed, yi, pi, trial)
        f_r, f_q = draw_focals(config, rng)
        keypoints = rng.choice(len(cm), size=config.keypoint_count, replace=False)
        cam_r = reference_camera(f_r)
        cam_q = orbit_camera(f_q, yaw, pitch, pivot)
        try:
            e1, e2 = ground_truth_epipoles(cam_r, cam_q)
        except CoincidentCenters:
            return SurfaceCell(yaw, pitch, sigma, None, None, 0, "coincident_centers")
        try:
            pr, pq = simulate_pair(cm, cm, cam_r, cam_q, keypoints, sigma, rng)
            nr, nq = simulate_pair(cm, cn, cam_r, cam_q, keypoints, sigma, rng)
        except (BehindCamera, AtCameraCenter):
            return SurfaceCell(yaw, pitch, sigma, None, None, 0, "behind_camera")
        try:
            m = score_pair(CorrespondenceSet(pr, pq), (e1, e2), config.match)
            nm = score_pair(CorrespondenceSet(nr, nq), (e1, e2), config.match)
        except GeometryError:
            continue
        match_scores.append(m.aggregate)
        nonmatch_scores.append(nm.aggregate)
    if not match_scores:
        return SurfaceCell(yaw, pitch, sigma, None, None, 0, "degenerate")
    return SurfaceCell(yaw, pitch, sigma, float(np.mean(match_scores)),
                       float(np.mean(nonmatch_scores)), len(match_scores))


def default_clouds(kind="blob", point_count=1000, seed=0):
    """The matching and non-matching clouds used by the sweep for a given seed."""
    a = generate_cloud(kind, point_count, 1.0, seed=2 * int(seed) + 1, label="match")
    b = generate_cloud(kind, point_count, 1.0, seed=2 * int(seed) + 2, label="nonmatch")
    return a, b


def two_object_library(seed, sigma=0.0, count=8):
    """A true and a decoy template observed against one shared query view.

    Returns ``(library, true_id)``.  Both templates use the same reference
    camera, so the ground-truth epipoles are shared; the query image noise
    is drawn once and applied to both sets.
    """
    cam_r, cam_q, pivot, rng = fixture_scene(seed)
    obj = generate_cloud("blob", 64, 1.0, seed=2 * int(seed) + 1)
    decoy = generate_cloud("blob", 64, 1.0, seed=2 * int(seed) + 2)
    obj = obj.translated(pivot - obj.centroid)
    decoy = decoy.translated(pivot - decoy.centroid)
    keypoints = rng.choice(len(obj), size=count, replace=False)
    pq = project(cam_q, obj.points[keypoints])[:, :2]
    pt = project(cam_r, obj.points[keypoints])[:, :2]
    pd = project(cam_r, decoy.points[keypoints])[:, :2]
    if sigma > 0:
        noise = scene_rng(seed, 0xA5)
        pq = pq + noise.normal(scale=sigma, size=pq.shape)
        pt = pt + noise.normal(scale=sigma, size=pt.shape)
        pd = pd + noise.normal(scale=sigma, size=pd.shape)
    gt = ground_truth_epipoles(cam_r, cam_q)
    query_id = f"query-{seed}"
    true_id, decoy_id = f"true/{seed}", f"decoy/{seed}"
    library = TemplateLibrary([
        (true_id, CorrespondenceSet(pt, pq, true_id, query_id, gt_epipoles=gt)),
        (decoy_id, CorrespondenceSet(pd, pq, decoy_id, query_id, gt_epipoles=gt)),
    ])
    return library, true_id


FIXTURE_KINDS = ("match", "nonmatch", "planar", "noisy:<sigma>")


def parse_fixture_kind(kind):
    """``'noisy:6'`` -> ``('noisy', 6.0)``; other kinds carry zero noise."""
    if kind in ("match", "nonmatch", "planar"):
        return kind, 0.0
    if kind.startswith("noisy:"):
        try:
            sigma = float(kind.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"invalid noise level in fixture kind {kind!r}") from None
        if not sigma >= 0:
            raise ValueError("noise level must be non-negative")
        return "noisy", sigma
    raise ValueError(f"unknown fixture kind {kind!r}; expected one of {FIXTURE_KINDS}")


def fixture_scene(seed, distance=4.0):
    """Deterministic camera pair for fixture generation."""
    rng = scene_rng(seed, 0xF1)
    f_r, f_q = rng.uniform(900.0, 1100.0, size=2)
    yaw = rng.uniform(20.0, 50.0) * rng.choice([-1.0, 1.0])
    pitch = rng.uniform(10.0, 50.0)
    pivot = np.array([0.0, 0.0, distance])
    return reference_camera(f_r), orbit_camera(f_q, yaw, pitch, pivot), pivot, rng


def make_fixture(kind, count=12, seed=0, reference_id=None, query_id=None):
    """Synthetic correspondence set with ground-truth epipoles.

    ``match``: the true object in both views.  ``nonmatch``: a decoy object's
    reference view against the same query view as ``match`` with the same seed,
    so the two form a true/decoy template pair for one query.  ``planar``:
    points on a single world plane.  ``noisy:<sigma>``: ``match`` plus Gaussian
    pixel noise.
    """
    base, sigma = parse_fixture_kind(kind)
    if count < 4:
        raise ValueError("a fixture needs at least 4 points")
    cam_r, cam_q, pivot, rng = fixture_scene(seed)
    true_kind = "plane" if base == "planar" else "blob"
    obj = generate_cloud(true_kind, max(count, 64), 1.0, seed=int(seed) * 2 + 1)
    obj = obj.translated(pivot - obj.centroid)
    decoy = generate_cloud("blob", max(count, 64), 1.0, seed=int(seed) * 2 + 2)
    decoy = decoy.translated(pivot - decoy.centroid)
    keypoints = rng.choice(len(obj), size=count, replace=False)
    ref_cloud = decoy if base == "nonmatch" else obj
    pr = project(cam_r, ref_cloud.points[keypoints])[:, :2]
    pq = project(cam_q, obj.points[keypoints])[:, :2]
    if sigma > 0:
        noise = scene_rng(seed, 0xA5)
        pr = pr + noise.normal(scale=sigma, size=pr.shape)
        pq = pq + noise.normal(scale=sigma, size=pq.shape)
    label = {"match": "true", "nonmatch": "decoy", "planar": "planar", "noisy": "noisy"}[base]
    return CorrespondenceSet(
        pr, pq,
        reference_id=reference_id or f"{label}/{seed}",
        query_id=query_id or f"query-{seed}",
        gt_epipoles=ground_truth_epipoles(cam_r, cam_q))
