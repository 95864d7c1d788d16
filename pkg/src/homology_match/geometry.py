"""Projective primitives for two-view geometry.

Points are numpy arrays of homogeneous 3-vectors, shape ``(n, 3)``; 2-D
inputs of shape ``(n, 2)`` are accepted wherever points are expected and
lifted with ``w = 1``.  Homographies and fundamental matrices are plain
``(3, 3)`` float arrays defined up to scale.
"""
import numpy as np

from .errors import (
    CollinearPoints,
    DegenerateConfiguration,
    DegenerateInput,
    InsufficientCorrespondences,
    PointAtInfinity,
    RankError,
    SingularSystem,
)

W_TOL = 1e-12
RANK_TOL = 1e-12
DISCRIMINANT_TOL = 1e-12


def homogenize(points):
    """Return ``points`` as an ``(n, 3)`` float array of homogeneous coordinates."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[-1] == 2:
        pts = np.hstack([pts, np.ones((pts.shape[0], 1))])
    elif pts.shape[-1] != 3:
        raise ValueError(f"expected points of shape (n, 2) or (n, 3), got {pts.shape}")
    if np.any(np.all(pts == 0.0, axis=1)):
        raise DegenerateInput("the zero vector is not a projective point")
    return pts


def is_finite_point(p, tol=W_TOL):
    p = np.asarray(p, dtype=float)
    return abs(p[2]) > tol * np.linalg.norm(p)


def dehomogenize(points, tol=W_TOL):
    """Divide through by ``w``; raise :class:`PointAtInfinity` when ``w`` vanishes."""
    pts = homogenize(points)
    w = pts[:, 2]
    if np.any(np.abs(w) <= tol * np.linalg.norm(pts, axis=1)):
        raise PointAtInfinity("point with w = 0 has no finite image coordinates")
    return pts / w[:, None]


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def same_point(a, b, tol=1e-8):
    """True when ``a`` and ``b`` are nonzero multiples of each other."""
    return np.linalg.norm(np.cross(unit(a), unit(b))) < tol


def conditioning_transform(points):
    """Similarity moving the centroid to the origin with RMS radius sqrt(2).

    Only finite points contribute; points at infinity are left to be mapped by
    the resulting transform like any other homogeneous vector.
    """
    pts = homogenize(points)
    finite = np.abs(pts[:, 2]) > W_TOL * np.linalg.norm(pts, axis=1)
    xy = pts[finite, :2] / pts[finite, 2:3]
    if xy.shape[0] < 2:
        raise DegenerateInput("at least 2 finite points are needed for conditioning")
    centroid = xy.mean(axis=0)
    rms = np.sqrt(np.mean(np.sum((xy - centroid) ** 2, axis=1)))
    if rms <= 1e-12 * max(1.0, np.abs(centroid).max()):
        raise DegenerateInput("all points coincide")
    s = np.sqrt(2.0) / rms
    return np.array([
        [s, 0.0, -s * centroid[0]],
        [0.0, s, -s * centroid[1]],
        [0.0, 0.0, 1.0],
    ])


def normalize_points(points):
    """Isotropic conditioning of finite image points.

    Returns ``(conditioned, T)`` with ``conditioned[i] ~ T @ points[i]``,
    the conditioned points w-normalized, centred on the origin and at RMS
    distance sqrt(2).
    """
    pts = dehomogenize(points)
    T = conditioning_transform(pts)
    out = pts @ T.T
    return out / out[:, 2:3], T


def apply_homography(H, points):
    return homogenize(points) @ np.asarray(H, dtype=float).T


def collinearity_distance(a, b, c):
    """Smallest point-to-line distance within the triangle ``a, b, c`` (pixels).

    For three finite points this is twice the area over the longest side.  When
    one point is at infinity (a direction), the distance of one finite point to
    the line through the other along that direction is used instead.  Two or
    more points at infinity are always treated as collinear.
    """
    pts = homogenize([a, b, c])
    finite = np.abs(pts[:, 2]) > W_TOL * np.linalg.norm(pts, axis=1)
    if finite.all():
        xy = pts[:, :2] / pts[:, 2:3]
        u = xy[1] - xy[0]
        v = xy[2] - xy[0]
        twice_area = abs(u[0] * v[1] - u[1] * v[0])
        longest = max(np.hypot(*u), np.hypot(*v), np.hypot(*(xy[2] - xy[1])))
        if longest == 0.0:
            return 0.0
        return twice_area / longest
    if finite.sum() < 2:
        return 0.0
    direction = pts[~finite][0, :2]
    p, q = pts[finite][:, :2] / pts[finite][:, 2:3]
    d = q - p
    dn = np.hypot(*direction)
    return abs(d[0] * direction[1] - d[1] * direction[0]) / dn


def check_no_collinear(points, threshold=1.0):
    """Raise :class:`CollinearPoints` if any triple of ``points`` is within ``threshold`` px of a line."""
    pts = homogenize(points)
    n = pts.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                d = collinearity_distance(pts[i], pts[j], pts[k])
                if d < threshold:
                    raise CollinearPoints(
                        f"points {i}, {j}, {k} are collinear (distance {d:.3g} px < {threshold} px)")


def normalize_homography(H):
    """Scale ``H`` to unit Frobenius norm with a positive determinant.

    A singular ``H`` is signed so that its largest-magnitude entry is positive.
    """
    H = np.asarray(H, dtype=float)
    norm = np.linalg.norm(H)
    if norm == 0.0:
        raise DegenerateInput("the zero matrix is not a homography")
    H = H / norm
    d = np.linalg.det(H)
    if d < 0 or (d == 0 and H.flat[np.argmax(np.abs(H))] < 0):
        H = -H
    return H


def _dlt_rows(src, dst):
    rows = []
    for x, xp in zip(src, dst):
        rows.append(np.concatenate([np.zeros(3), -xp[2] * x, xp[1] * x]))
        rows.append(np.concatenate([xp[2] * x, np.zeros(3), -xp[0] * x]))
    return np.array(rows)


def homography_from_4(src, dst, collinear_px=1.0, condition=True, rank_tol=RANK_TOL):
    """Exact projective map taking four source points onto four destination points.

    Solves the 8x9 direct linear transform for its one-dimensional null space
    in conditioned coordinates and undoes the conditioning.  Any point may be
    at infinity (an epipole can be), provided the rest allow conditioning.
    The result is normalized with :func:`normalize_homography`.
    """
    src = homogenize(src)
    dst = homogenize(dst)
    if src.shape != (4, 3) or dst.shape != (4, 3):
        raise ValueError("homography_from_4 needs exactly 4 source and 4 destination points")
    check_no_collinear(src, collinear_px)
    check_no_collinear(dst, collinear_px)

    if condition:
        Ts = conditioning_transform(src)
        Td = conditioning_transform(dst)
    else:
        Ts = Td = np.eye(3)
    s = src @ Ts.T
    d = dst @ Td.T
    s /= np.linalg.norm(s, axis=1, keepdims=True)
    d /= np.linalg.norm(d, axis=1, keepdims=True)

    A = _dlt_rows(s, d)
    _, sv, vt = np.linalg.svd(A)
    if sv[7] < rank_tol * sv[0]:
        raise SingularSystem("DLT design matrix has a null space of dimension > 1")
    Hn = vt[-1].reshape(3, 3)
    H = np.linalg.solve(Td, Hn @ Ts)
    return normalize_homography(H)


def symmetric_transfer_error(H, src, dst):
    """Per-pair ``d(Hx, x')^2 + d(H^-1 x', x)^2`` in squared pixels."""
    src = homogenize(src)
    dst = homogenize(dst)
    fwd = dehomogenize(src @ H.T)
    bwd = dehomogenize(dst @ np.linalg.inv(H).T)
    a = dehomogenize(dst)
    b = dehomogenize(src)
    return np.sum((fwd - a)[:, :2] ** 2, axis=1) + np.sum((bwd - b)[:, :2] ** 2, axis=1)


# ---------------------------------------------------------------------------
# epipolar geometry

def _unit_sign(v):
    """Deterministic sign: largest-magnitude component positive."""
    i = np.argmax(np.abs(v))
    return v if v.flat[i] >= 0 else -v


def estimate_fundamental(ref, qry, degeneracy_tol=1e-9):
    """Normalized eight-point estimate of F with ``qry^T F ref = 0``.

    The result has rank 2 and unit Frobenius norm.  Raises
    :class:`DegenerateConfiguration` when the second-smallest singular value of
    the design matrix is negligible relative to the largest, which is what a
    planar scene or a pure rotation produces.
    """
    r, Tr = normalize_points(ref)
    q, Tq = normalize_points(qry)
    n = r.shape[0]
    if n < 8:
        raise InsufficientCorrespondences(f"at least 8 correspondences required, got {n}")
    A = np.einsum("ni,nj->nij", q, r).reshape(n, 9)
    _, sv, vt = np.linalg.svd(A)
    # with n == 8 the ninth singular value is zero by construction
    if sv[7] < degeneracy_tol * sv[0]:
        raise DegenerateConfiguration(
            "correspondences do not determine the epipolar geometry "
            f"(singular value ratio {sv[7] / sv[0]:.3g}); the scene may be planar")
    Fn = vt[-1].reshape(3, 3)
    u, s, vh = np.linalg.svd(Fn)
    Fn = u @ np.diag([s[0], s[1], 0.0]) @ vh
    F = Tq.T @ Fn @ Tr
    return _unit_sign(F / np.linalg.norm(F))


def sampson_distance(F, ref, qry):
    """First-order geometric distance of each pair to the epipolar constraint, in pixels."""
    r = dehomogenize(ref)
    q = dehomogenize(qry)
    Fr = r @ F.T
    Ftq = q @ F
    num = np.sum(q * Fr, axis=1)
    den = Fr[:, 0] ** 2 + Fr[:, 1] ** 2 + Ftq[:, 0] ** 2 + Ftq[:, 1] ** 2
    return np.abs(num) / np.sqrt(np.maximum(den, 1e-300))


def estimate_fundamental_ransac(ref, qry, threshold=1.0, iterations=1000, seed=0,
                                degeneracy_tol=1e-9):
    """RANSAC over 8-point samples, refit on the largest Sampson-distance inlier set.

    Returns ``(F, inlier_mask)``.
    """
    r = dehomogenize(ref)
    q = dehomogenize(qry)
    n = r.shape[0]
    if n < 8:
        raise InsufficientCorrespondences(f"at least 8 correspondences required, got {n}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(iterations):
        sample = rng.choice(n, 8, replace=False)
        try:
            F = estimate_fundamental(r[sample], q[sample], degeneracy_tol)
        except (DegenerateConfiguration, DegenerateInput):
            continue
        inliers = sampson_distance(F, r, q) < threshold
        if best is None or inliers.sum() > best.sum():
            best = inliers
            if best.all():
                break
    if best is None or best.sum() < 8:
        raise DegenerateConfiguration("RANSAC found no inlier set of 8 or more correspondences")
    F = estimate_fundamental(r[best], q[best], degeneracy_tol)
    return F, sampson_distance(F, r, q) < threshold


def epipoles_from_fundamental(F, tol=1e-10):
    """Unit-norm epipoles ``(e1, e2)`` with ``F e1 = 0`` and ``F^T e2 = 0``."""
    F = np.asarray(F, dtype=float)
    u, s, vt = np.linalg.svd(F)
    if s[1] < tol * s[0]:
        raise RankError("fundamental matrix has rank < 2; epipoles are not unique")
    return _unit_sign(vt[-1]), _unit_sign(u[:, -1])


# ---------------------------------------------------------------------------
# eigenvalues

def _char_poly(M):
    """Coefficients ``(a, b, c)`` of the monic ``x^3 + a x^2 + b x + c``."""
    tr = M[0, 0] + M[1, 1] + M[2, 2]
    minors = (M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
              + M[0, 0] * M[2, 2] - M[0, 2] * M[2, 0]
              + M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1])
    det = (M[0, 0] * (M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1])
           - M[0, 1] * (M[1, 0] * M[2, 2] - M[1, 2] * M[2, 0])
           + M[0, 2] * (M[1, 0] * M[2, 1] - M[1, 1] * M[2, 0]))
    return -tr, minors, -det


def _polish(x, a, b, c):
    # one Newton step on the cubic; skipped where the derivative vanishes
    f = ((x + a) * x + b) * x + c
    df = (3.0 * x + 2.0 * a) * x + b
    return x - f / df if df != 0.0 else x


def cubic_roots(a, b, c, discriminant_tol=DISCRIMINANT_TOL):
    """Roots of ``x^3 + a x^2 + b x + c`` in closed form.

    Returns ``None`` when the discriminant is within ``discriminant_tol`` of
    zero (a repeated root), where the closed form loses half the precision.
    """
    shift = a / 3.0
    p = b - a * a / 3.0
    q = 2.0 * a ** 3 / 27.0 - a * b / 3.0 + c
    disc = -(4.0 * p ** 3 + 27.0 * q * q)
    if abs(disc) < discriminant_tol:
        return None
    if disc > 0:
        # three distinct real roots, p < 0
        m = 2.0 * np.sqrt(-p / 3.0)
        arg = np.clip(3.0 * q / (p * m), -1.0, 1.0)
        theta = np.arccos(arg) / 3.0
        t = m * np.cos(theta - 2.0 * np.pi * np.arange(3) / 3.0)
        roots = [_polish(x, a, b, c) for x in t - shift]
        return np.array(roots, dtype=complex)
    if p < 0:
        m = np.sqrt(-p / 3.0)
        t = -2.0 * np.sign(q) * m * np.cosh(np.arccosh(abs(q) / (2.0 * m ** 3)) / 3.0)
    elif p > 0:
        m = np.sqrt(p / 3.0)
        t = -2.0 * m * np.sinh(np.arcsinh(q / (2.0 * m ** 3)) / 3.0)
    else:
        t = np.cbrt(-q)
    x = _polish(t - shift, a, b, c)
    # remaining pair from the symmetric functions of the roots
    s = -a - x
    prod = b - x * s
    im = np.sqrt(max(prod - s * s / 4.0, 0.0))
    return np.array([x, complex(s / 2.0, im), complex(s / 2.0, -im)])


def eigenvalues_3x3(M, discriminant_tol=DISCRIMINANT_TOL):
    """The three eigenvalues of a real 3x3 matrix as a complex array.

    Closed-form cubic on the Frobenius-normalized matrix; falls back to the
    QR algorithm (LAPACK via numpy) when two roots nearly coincide.  Values are
    sorted by real part, then imaginary part.
    """
    M = np.asarray(M, dtype=float)
    scale = np.linalg.norm(M)
    if scale == 0.0:
        return np.zeros(3, dtype=complex)
    Mn = M / scale
    roots = cubic_roots(*_char_poly(Mn), discriminant_tol=discriminant_tol)
    if roots is None:
        roots = np.linalg.eigvals(Mn).astype(complex)
    roots = roots * scale
    return roots[np.lexsort((roots.imag, roots.real))]
