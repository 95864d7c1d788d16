"""Vectorized numpy implementation of the batch quadruple scorer.

Mirrors ``_kernels.pyx`` step for step and is used when the compiled
extension is unavailable (or ``HOMOLOGY_MATCH_PURE=1``).

Each plane homography is built from the projective basis of its four
points (three keypoints plus the epipole) rather than an SVD: with
``A = [a b c]`` and ``A @ lam = d``, ``P = A @ diag(lam)`` sends the standard
frame onto the four points, so ``H = P_query @ inv(P_ref)`` is the exact
four-point map.  Work happens in conditioned coordinates, which only
conjugates the homology matrix and leaves its eigenvalues unchanged.
"""
import numpy as np

STATUS_OK = 0
STATUS_COLLINEAR = 1
STATUS_SINGULAR = 2

W_TOL = 1e-12
DISCRIMINANT_TOL = 1e-12

_PAIRINGS = (((0, 1, 2), (0, 1, 3)), ((0, 2, 3), (1, 2, 3)))
_KEY_TRIPLES = ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3))
_KEY_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


def _altitude(p, q, r):
    u = q - p
    v = r - p
    twice_area = np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
    longest = np.maximum(np.hypot(u[:, 0], u[:, 1]),
                         np.maximum(np.hypot(v[:, 0], v[:, 1]),
                                    np.hypot(*(r - q).T)))
    with np.errstate(invalid="ignore", divide="ignore"):
        out = twice_area / longest
    return np.where(longest > 0, out, 0.0)


def _epipole_altitude(p, q, e):
    """Collinearity distance of two finite points and one (possibly infinite) epipole."""
    if abs(e[2]) > W_TOL * np.linalg.norm(e):
        ee = np.broadcast_to(e[:2] / e[2], p.shape)
        return _altitude(p, q, ee)
    d = q - p
    return np.abs(d[:, 0] * e[1] - d[:, 1] * e[0]) / np.hypot(e[0], e[1])


def _collinear_flags(pts, e, threshold):
    """(k, 2) bool: pairing uses a near-collinear triple of keypoints or keypoints+epipole."""
    key = np.stack([_altitude(pts[:, a], pts[:, b], pts[:, c]) < threshold
                    for a, b, c in _KEY_TRIPLES], axis=1)
    edge = {ab: _epipole_altitude(pts[:, ab[0]], pts[:, ab[1]], e) < threshold
            for ab in _KEY_EDGES}
    flags = np.zeros((pts.shape[0], 2), dtype=bool)
    for pi, tris in enumerate(_PAIRINGS):
        for tri in tris:
            f = key[:, _KEY_TRIPLES.index(tri)]
            a, b, c = tri
            f = f | edge[(a, b)] | edge[(a, c)] | edge[(b, c)]
            flags[:, pi] |= f
    return flags


def _conditioning(pts):
    centroid = pts.mean(axis=1)
    rms = np.sqrt(np.mean(np.sum((pts - centroid[:, None, :]) ** 2, axis=2), axis=1))
    with np.errstate(divide="ignore"):
        s = np.sqrt(2.0) / rms
    return centroid, s


def _condition(pts, e, centroid, s):
    """Conditioned homogeneous keypoints (k, 4, 3) and unit epipole (k, 3)."""
    k = pts.shape[0]
    out = np.empty((k, 4, 3))
    out[:, :, :2] = (pts - centroid[:, None, :]) * s[:, None, None]
    out[:, :, 2] = 1.0
    ec = np.empty((k, 3))
    ec[:, 0] = s * (e[0] - centroid[:, 0] * e[2])
    ec[:, 1] = s * (e[1] - centroid[:, 1] * e[2])
    ec[:, 2] = e[2]
    ec /= np.linalg.norm(ec, axis=1, keepdims=True)
    return out, ec


def _det_cols(a, b, c):
    return np.einsum("ki,ki->k", a, np.cross(b, c))


def _basis(a, b, c, d, rank_tol):
    """Matrix P (k, 3, 3) mapping the standard frame onto a, b, c, d; plus a singular flag."""
    det = _det_cols(a, b, c)
    lam = np.stack([_det_cols(d, b, c), _det_cols(a, d, c), _det_cols(a, b, d)], axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        lam = lam / det[:, None]
    P = np.stack([a * lam[:, 0:1], b * lam[:, 1:2], c * lam[:, 2:3]], axis=2)
    norms = np.linalg.norm(P, axis=1).prod(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.abs(_det_cols(P[:, :, 0], P[:, :, 1], P[:, :, 2])) / norms
    singular = ~(rel >= rank_tol)
    return P, singular


def _inv3(P):
    a, b, c = P[:, :, 0], P[:, :, 1], P[:, :, 2]
    det = _det_cols(a, b, c)
    rows = np.stack([np.cross(b, c), np.cross(c, a), np.cross(a, b)], axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return rows / det[:, None, None]


def _char_poly(M):
    tr = M[:, 0, 0] + M[:, 1, 1] + M[:, 2, 2]
    minors = (M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]
              + M[:, 0, 0] * M[:, 2, 2] - M[:, 0, 2] * M[:, 2, 0]
              + M[:, 1, 1] * M[:, 2, 2] - M[:, 1, 2] * M[:, 2, 1])
    det = np.linalg.det(M)
    return -tr, minors, -det


def _polish(x, a, b, c):
    f = ((x + a) * x + b) * x + c
    df = (3.0 * x + 2.0 * a) * x + b
    with np.errstate(invalid="ignore", divide="ignore"):
        step = np.where(df != 0.0, f / df, 0.0)
    return x - step


def eig_batch(M, discriminant_tol=DISCRIMINANT_TOL):
    """Eigenvalues (k, 3) complex of Frobenius-normalized 3x3 matrices (k, 3, 3)."""
    k = M.shape[0]
    a, b, c = _char_poly(M)
    shift = a / 3.0
    p = b - a * a / 3.0
    q = 2.0 * a ** 3 / 27.0 - a * b / 3.0 + c
    disc = -(4.0 * p ** 3 + 27.0 * q * q)
    out = np.empty((k, 3), dtype=complex)

    near = np.abs(disc) < discriminant_tol
    if near.any():
        out[near] = np.linalg.eigvals(M[near])

    three = (~near) & (disc > 0)
    if three.any():
        pp, qq = p[three], q[three]
        m = 2.0 * np.sqrt(-pp / 3.0)
        theta = np.arccos(np.clip(3.0 * qq / (pp * m), -1.0, 1.0)) / 3.0
        t = m[:, None] * np.cos(theta[:, None] - 2.0 * np.pi * np.arange(3)[None, :] / 3.0)
        x = t - shift[three, None]
        out[three] = _polish(x, a[three, None], b[three, None], c[three, None])

    one = (~near) & (disc <= 0)
    if one.any():
        pp, qq = p[one], q[one]
        t = np.empty(pp.shape)
        neg = pp < 0
        pos = pp > 0
        zero = ~(neg | pos)
        m = np.sqrt(-pp[neg] / 3.0)
        t[neg] = -2.0 * np.sign(qq[neg]) * m * np.cosh(
            np.arccosh(np.maximum(np.abs(qq[neg]) / (2.0 * m ** 3), 1.0)) / 3.0)
        m = np.sqrt(pp[pos] / 3.0)
        t[pos] = -2.0 * m * np.sinh(np.arcsinh(qq[pos] / (2.0 * m ** 3)) / 3.0)
        t[zero] = np.cbrt(-qq[zero])
        aa, bb, cc = a[one], b[one], c[one]
        x = _polish(t - shift[one], aa, bb, cc)
        s = -aa - x
        prod = bb - x * s
        im = np.sqrt(np.maximum(prod - s * s / 4.0, 0.0))
        out[one, 0] = x
        out[one, 1] = s / 2.0 + 1j * im
        out[one, 2] = s / 2.0 - 1j * im
    return out


def closest_pair_ratio(ev, clamp=1.0):
    pairs = ((0, 1), (0, 2), (1, 2))
    gaps = np.stack([np.abs(ev[:, i] - ev[:, j]) for i, j in pairs], axis=1)
    sums = np.stack([np.abs(ev[:, i] + ev[:, j]) for i, j in pairs], axis=1)
    best = np.argmin(gaps, axis=1)
    rows = np.arange(ev.shape[0])
    num = gaps[rows, best]
    den = sums[rows, best]
    ceiling = den < 1e-12 * np.abs(ev).max(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.minimum(num / den, clamp)
    return np.where(ceiling, clamp, r)


def score_quadruples(ref, qry, e1, e2, quads, collinear_px=1.0, rank_tol=1e-12, clamp=1.0):
    """Homology error for both pairings of every quadruple.

    ``ref``/``qry`` are finite pixel coordinates (n, 2); ``e1``/``e2``
    homogeneous epipoles; ``quads`` an int array (k, 4).  Returns
    ``(scores, status)`` of shape (k, 2); skipped entries score NaN.
    """
    ref = np.ascontiguousarray(ref, dtype=np.float64)
    qry = np.ascontiguousarray(qry, dtype=np.float64)
    e1 = np.asarray(e1, dtype=np.float64)
    e2 = np.asarray(e2, dtype=np.float64)
    quads = np.asarray(quads, dtype=np.int64).reshape(-1, 4)
    if qry.shape[0] != ref.shape[0]:
        raise ValueError("reference and query arrays differ in length")
    if quads.size and (quads.min() < 0 or quads.max() >= ref.shape[0]):
        raise IndexError("quadruple index out of range")
    k = quads.shape[0]
    scores = np.full((k, 2), np.nan)
    status = np.zeros((k, 2), dtype=np.int8)
    if k == 0:
        return scores, status

    r = ref[quads]
    q = qry[quads]
    collinear = _collinear_flags(r, e1, collinear_px) | _collinear_flags(q, e2, collinear_px)

    cr, sr = _conditioning(r)
    cq, sq = _conditioning(q)
    rc, e1c = _condition(r, e1, cr, sr)
    qc, e2c = _condition(q, e2, cq, sq)

    mats = np.empty((k, 2, 3, 3))
    singular = np.zeros((k, 2), dtype=bool)
    for pi, (t1, t2) in enumerate(_PAIRINGS):
        Ps = []
        for tri in (t1, t2):
            for pts, ec in ((rc, e1c), (qc, e2c)):
                P, bad = _basis(pts[:, tri[0]], pts[:, tri[1]], pts[:, tri[2]], ec, rank_tol)
                Ps.append(P)
                singular[:, pi] |= bad
        Pr1, Pq1, Pr2, Pq2 = Ps
        with np.errstate(invalid="ignore", over="ignore"):
            Hm = Pq1 @ _inv3(Pr1) @ Pr2 @ _inv3(Pq2)
        fro = np.linalg.norm(Hm, axis=(1, 2))
        with np.errstate(invalid="ignore", divide="ignore"):
            Hm = Hm / fro[:, None, None]
        finite = np.isfinite(Hm).all(axis=(1, 2))
        Hm[~finite] = np.eye(3)
        singular[:, pi] |= ~finite
        singular[:, pi] |= ~(np.abs(np.linalg.det(Hm)) >= rank_tol)
        mats[:, pi] = Hm

    status[singular] = STATUS_SINGULAR
    status[collinear] = STATUS_COLLINEAR
    ok = status == STATUS_OK
    if ok.any():
        ev = eig_batch(mats[ok])
        scores[ok] = closest_pair_ratio(ev, clamp)
    return scores, status
