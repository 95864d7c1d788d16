"""Template labeling: aggregate quadruple homology errors and pick the best template."""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import _core, geometry
from .errors import (
    AllQuadruplesDegenerate,
    CollinearPoints,
    DegenerateConfiguration,
    DegenerateInput,
    HomologyMatchError,
    InputError,
    InsufficientCorrespondences,
    NoScorableTemplates,
    SingularSystem,
    TooFewPoints,
)
from .homology import Pairing, QuadrupleIndex, QuadrupleScore, Status

EPIPOLE_MODES = ("estimate", "provided", "ground_truth")
FUSION_RULES = ("min", "mean")
DUPLICATE_PX = 1e-6

_STATUS = {0: Status.OK, 1: Status.SKIPPED_COLLINEAR, 2: Status.SKIPPED_SINGULAR}


@dataclass(frozen=True)
class MatchConfig:
    """Every tunable of the scoring pipeline."""
    cap: int = 2000
    seed: int = 0
    collinear_px: float = 1.0
    sampson_px: float = 3.0
    outlier_filter: bool = False
    ransac: bool = False
    ransac_px: float = 1.0
    ransac_iterations: int = 1000
    epipole_mode: str = "estimate"
    clamp: float = 1.0
    class_fusion: str = "min"
    planar_px: float = 1.0
    degeneracy_tol: float = 1e-9
    rank_tol: float = 1e-12
    backend: str = "auto"
    workers: int = 1

    def __post_init__(self):
        if self.cap < 1:
            raise ValueError("cap must be >= 1")
        for name in ("collinear_px", "sampson_px", "ransac_px", "clamp", "planar_px",
                     "degeneracy_tol", "rank_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.epipole_mode not in EPIPOLE_MODES:
            raise ValueError(f"epipole_mode must be one of {EPIPOLE_MODES}")
        if self.class_fusion not in FUSION_RULES:
            raise ValueError(f"class_fusion must be one of {FUSION_RULES}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def updated(self, **changes):
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def _as_xy(points, what):
    pts = geometry.dehomogenize(points)[:, :2]
    if not np.all(np.isfinite(pts)):
        raise InputError(f"{what} coordinates must be finite")
    return np.ascontiguousarray(pts)


def _has_duplicates(xy):
    order = np.lexsort((xy[:, 1], xy[:, 0]))
    s = xy[order]
    for i in range(len(s)):
        j = i + 1
        while j < len(s) and s[j, 0] - s[i, 0] <= DUPLICATE_PX:
            if abs(s[j, 1] - s[i, 1]) <= DUPLICATE_PX:
                return True
            j += 1
    return False


@dataclass
class CorrespondenceSet:
    """Matched points between a reference (template) image and a query image.

    ``ref`` and ``qry`` are (n, 2) pixel arrays; homogeneous (n, 3) input is
    accepted and w-normalized.  Optional epipoles are homogeneous 3-vectors:
    ``epipoles`` for externally supplied ones, ``gt_epipoles`` for exact ones
    from a synthetic scene.
    """
    ref: np.ndarray
    qry: np.ndarray
    reference_id: str = "reference"
    query_id: str = "query"
    image_size: Optional[Tuple[int, int]] = None
    confidence: Optional[np.ndarray] = None
    epipoles: Optional[Tuple[np.ndarray, np.ndarray]] = None
    gt_epipoles: Optional[Tuple[np.ndarray, np.ndarray]] = None

    def __post_init__(self):
        self.ref = _as_xy(self.ref, "reference")
        self.qry = _as_xy(self.qry, "query")
        if self.ref.shape != self.qry.shape:
            raise InputError("reference and query point lists differ in length")
        if self.confidence is not None:
            self.confidence = np.asarray(self.confidence, dtype=float).reshape(-1)
            if self.confidence.shape[0] != len(self):
                raise InputError("one confidence value per pair is required")
        if _has_duplicates(self.ref):
            raise InputError("duplicate reference points")
        if _has_duplicates(self.qry):
            raise InputError("duplicate query points")
        for name in ("epipoles", "gt_epipoles"):
            value = getattr(self, name)
            if value is not None:
                e1, e2 = (np.asarray(e, dtype=float).reshape(3) for e in value)
                setattr(self, name, (e1, e2))

    def __len__(self):
        return self.ref.shape[0]

    def subset(self, index):
        index = np.asarray(index)
        return replace(self, ref=self.ref[index], qry=self.qry[index],
                       confidence=None if self.confidence is None else self.confidence[index])

    def canonical_order(self):
        """Permutation sorting pairs by (x_ref, y_ref, x_qry, y_qry)."""
        return np.lexsort((self.qry[:, 1], self.qry[:, 0], self.ref[:, 1], self.ref[:, 0]))


# ---------------------------------------------------------------------------
# quadruples

def _unrank_colex(rank, k=4):
    out = []
    for size in range(k, 0, -1):
        c = size - 1
        while math.comb(c + 1, size) <= rank:
            c += 1
        out.append(c)
        rank -= math.comb(c, size)
    return tuple(sorted(out))


def enumerate_quadruples(n, cap=2000, seed=0):
    """All ``C(n, 4)`` index quadruples in lexicographic order, or ``cap`` of them sampled.

    Sampling is uniform without replacement and deterministic for a given
    seed; the sample is returned in lexicographic order too.
    """
    if n < 4:
        raise TooFewPoints(f"at least 4 correspondences required, got {n}")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    total = math.comb(n, 4)
    if total <= cap:
        return np.array(list(combinations(range(n), 4)), dtype=np.int64)
    rng = np.random.default_rng(seed)
    if total < 2 ** 62:
        ranks = rng.choice(total, size=cap, replace=False)
    else:
        picked = set()
        while len(picked) < cap:
            picked.add(int(rng.integers(0, 2 ** 62)) % total)
        ranks = list(picked)
    quads = sorted(_unrank_colex(int(r)) for r in ranks)
    return np.array(quads, dtype=np.int64)


def best_conditioned_quadruple(ref, qry, quads):
    """Quadruple whose worst triple (in either image) is farthest from collinear."""
    worst = None
    for pts in (ref, qry):
        p = pts[quads]
        for a, b, c in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
            u = p[:, b] - p[:, a]
            v = p[:, c] - p[:, a]
            w = p[:, c] - p[:, b]
            longest = np.max(np.stack([np.hypot(*u.T), np.hypot(*v.T), np.hypot(*w.T)]), axis=0)
            with np.errstate(invalid="ignore", divide="ignore"):
                d = np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]) / longest
            d = np.nan_to_num(d)
            worst = d if worst is None else np.minimum(worst, d)
    return quads[int(np.argmax(worst))]


def planar_consistency(ref, qry, quads, collinear_px=1.0):
    """Mean symmetric transfer distance (px) of all pairs under one homography.

    The homography is the exact 4-point map of the best-conditioned quadruple.
    Small values mean a single plane explains the correspondences, in which case
    every homology matrix is close to the identity and the score is uninformative.
    """
    quad = best_conditioned_quadruple(ref, qry, quads)
    try:
        H = geometry.homography_from_4(ref[quad], qry[quad], collinear_px=collinear_px)
    except (CollinearPoints, SingularSystem, DegenerateInput):
        return None
    err = geometry.symmetric_transfer_error(H, ref, qry)
    return float(np.mean(np.sqrt(err)))


# ---------------------------------------------------------------------------
# pair scoring

@dataclass
class PairScore:
    """Result of scoring one correspondence set.

    ``aggregate`` is the mean homology error over scorable quadruple pairings,
    or ``None`` when the epipolar geometry could not be recovered (planar scene);
    then ``planar_score`` carries the single-homography fallback.

    Quadruple indices in ``quads`` refer to the input order but are listed in
    canonical order (sorted by coordinates), which fixes the two pairings.
    """
    aggregate: Optional[float]
    quads: np.ndarray
    scores: np.ndarray
    status: np.ndarray
    epipoles: Optional[Tuple[np.ndarray, np.ndarray]]
    planar_score: Optional[float] = None
    coplanar_warning: bool = False
    degenerate_reason: Optional[str] = None
    diagnostics: Dict[str, float] = field(default_factory=dict)
    inliers: Optional[np.ndarray] = None

    @property
    def n_ok(self):
        return int(np.sum(self.status == 0))

    @property
    def n_skipped(self):
        return int(self.status.size - self.n_ok)

    @property
    def n_skipped_collinear(self):
        return int(np.sum(self.status == 1))

    @property
    def n_skipped_singular(self):
        return int(np.sum(self.status == 2))

    def quadruple_scores(self) -> List[QuadrupleScore]:
        out = []
        for qi, quad in enumerate(self.quads):
            for pairing in Pairing:
                st = _STATUS[int(self.status[qi, pairing.value])]
                score = float(self.scores[qi, pairing.value]) if st is Status.OK else None
                out.append(QuadrupleScore(QuadrupleIndex(tuple(quad), pairing), st, score))
        return out


def _resolve_epipoles(corr, epipoles, config):
    if epipoles is not None:
        return tuple(np.asarray(e, dtype=float).reshape(3) for e in epipoles)
    if config.epipole_mode == "provided":
        if corr.epipoles is None:
            raise InputError("epipole mode 'provided' but the correspondence set carries no epipoles")
        return corr.epipoles
    if config.epipole_mode == "ground_truth":
        if corr.gt_epipoles is None:
            raise InputError("epipole mode 'ground_truth' but the correspondence set carries no ground-truth epipoles")
        return corr.gt_epipoles
    return None


def _estimate_epipoles(ref, qry, config):
    if config.ransac:
        F, inliers = geometry.estimate_fundamental_ransac(
            ref, qry, config.ransac_px, config.ransac_iterations, config.seed, config.degeneracy_tol)
    else:
        F = geometry.estimate_fundamental(ref, qry, config.degeneracy_tol)
        inliers = None
    if config.outlier_filter:
        keep = geometry.sampson_distance(F, ref, qry) <= config.sampson_px
        inliers = keep if inliers is None else (inliers & keep)
    e1, e2 = geometry.epipoles_from_fundamental(F)
    return F, e1, e2, inliers


def score_pair(corr, epipoles=None, config=MatchConfig()):
    """Mean homology error of a correspondence set over sampled quadruples.

    Epipoles come from ``epipoles`` when given, else per ``config.epipole_mode``
    (estimated with the normalized eight-point algorithm by default).
    """
    n = len(corr)
    if n < 4:
        raise TooFewPoints(f"at least 4 correspondences required, got {n}")
    order = corr.canonical_order()
    ref = corr.ref[order]
    qry = corr.qry[order]
    diagnostics = {}
    inliers = None

    ep = _resolve_epipoles(corr, epipoles, config)
    if ep is None:
        if n < 8:
            raise TooFewPoints(f"at least 8 correspondences required to estimate epipoles, got {n}")
        try:
            F, e1, e2, keep = _estimate_epipoles(ref, qry, config)
        except (DegenerateConfiguration, InsufficientCorrespondences) as exc:
            quads = enumerate_quadruples(n, config.cap, config.seed)
            planar = planar_consistency(ref, qry, quads, config.collinear_px)
            return PairScore(None, order[quads], np.full((0, 2), np.nan), np.zeros((0, 2), np.int8),
                             None, planar_score=planar, coplanar_warning=True,
                             degenerate_reason=str(exc), diagnostics=diagnostics)
        d = geometry.sampson_distance(F, ref, qry)
        diagnostics.update({
            "sampson_mean_px": float(np.mean(d)),
            "sampson_max_px": float(np.max(d)),
            "F_e1_residual": float(np.linalg.norm(F @ e1)),
            "Ft_e2_residual": float(np.linalg.norm(F.T @ e2)),
        })
        if keep is not None:
            inliers = np.empty(n, dtype=bool)
            inliers[order] = keep
            ref, qry, order = ref[keep], qry[keep], order[keep]
            diagnostics["outliers_removed"] = float(n - keep.sum())
            if len(order) < 4:
                raise TooFewPoints("fewer than 4 correspondences survive outlier filtering")
        ep = (e1, e2)
    e1, e2 = ep

    quads = enumerate_quadruples(len(order), config.cap, config.seed)
    scorer = _core.get_scorer(config.backend)
    scores, status = scorer(ref, qry, e1, e2, quads, config.collinear_px, config.rank_tol, config.clamp)
    ok = status == 0
    planar = planar_consistency(ref, qry, quads, config.collinear_px)
    result = PairScore(None, order[quads], scores, status, (e1, e2), planar_score=planar,
                       coplanar_warning=planar is not None and planar < config.planar_px,
                       diagnostics=diagnostics, inliers=inliers)
    if not ok.any():
        raise AllQuadruplesDegenerate("no quadruple produced a valid homology score")
    result.aggregate = math.fsum(scores[ok].tolist()) / int(ok.sum())
    return result


# ---------------------------------------------------------------------------
# template labeling

@dataclass
class TemplateLibrary:
    """Correspondence sets of one query image against each candidate template."""
    templates: List[Tuple[str, CorrespondenceSet]]

    def __post_init__(self):
        ids = [t for t, _ in self.templates]
        if len(set(ids)) != len(ids):
            raise InputError("template ids must be unique")

    @classmethod
    def from_mapping(cls, mapping):
        return cls(list(mapping.items()))


@dataclass
class TemplateScore:
    template_id: str
    score: Optional[float]
    quadruples_evaluated: int = 0
    quadruples_skipped: int = 0
    coplanar_warning: bool = False
    error: Optional[str] = None
    detail: Optional[PairScore] = None

    @property
    def scorable(self):
        return self.score is not None


@dataclass
class MatchResult:
    best_template: str
    per_template: List[TemplateScore]

    def ranking(self):
        """Scorable templates sorted by ascending score, ties by id."""
        good = [t for t in self.per_template if t.scorable]
        return sorted(good, key=lambda t: (t.score, t.template_id))

    def failures(self):
        return [t for t in self.per_template if not t.scorable]


def _score_template(item, config):
    tid, corr = item
    try:
        ps = score_pair(corr, None, config)
    except HomologyMatchError as exc:
        return TemplateScore(tid, None, error=f"{type(exc).__name__}: {exc}")
    if ps.aggregate is None:
        return TemplateScore(tid, None, coplanar_warning=True, detail=ps,
                             error=f"CoplanarWarning: {ps.degenerate_reason}")
    return TemplateScore(tid, ps.aggregate, ps.n_ok, ps.n_skipped, ps.coplanar_warning, detail=ps)


def match_templates(library, config=MatchConfig()):
    """Score every template against the query and return the minimum-score label.

    Templates that cannot be scored are kept in ``per_template`` with their
    error and excluded from the argmin; ties go to the lowest template id.
    """
    if isinstance(library, dict):
        library = TemplateLibrary.from_mapping(library)
    items = sorted(library.templates, key=lambda t: t[0])
    if not items:
        raise NoScorableTemplates("template library is empty")
    if config.workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            per = list(pool.map(lambda it: _score_template(it, config), items))
    else:
        per = [_score_template(it, config) for it in items]
    good = [t for t in per if t.scorable]
    if not good:
        raise NoScorableTemplates("no template could be scored: " +
                                  "; ".join(f"{t.template_id}: {t.error}" for t in per))
    best = min(good, key=lambda t: (t.score, t.template_id))
    return MatchResult(best.template_id, per)


def split_class(template_id):
    """``'class/instance'`` -> ``'class'``; ids without a slash are their own class."""
    return template_id.split("/", 1)[0] if "/" in template_id else template_id


def fuse_classes(result, rule="min"):
    """Per-class score from per-template scores; returns ``(best_class, {class: score})``."""
    if rule not in FUSION_RULES:
        raise ValueError(f"rule must be one of {FUSION_RULES}")
    groups: Dict[str, List[float]] = {}
    for t in result.ranking():
        groups.setdefault(split_class(t.template_id), []).append(t.score)
    fused = {c: (min(v) if rule == "min" else math.fsum(v) / len(v)) for c, v in groups.items()}
    best = min(fused, key=lambda c: (fused[c], c))
    return best, dict(sorted(fused.items()))
