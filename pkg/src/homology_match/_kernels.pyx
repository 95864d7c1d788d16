# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch quadruple scorer; same algorithm as ``_fallback.score_quadruples``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport NAN, fabs, sqrt, hypot, cos, acos, cosh, acosh, sinh, asinh, cbrt, M_PI
from scipy.linalg.cython_lapack cimport dgeev

cnp.import_array()

cdef double W_TOL = 1e-12
cdef double DISC_TOL = 1e-12

cdef int PAIR_TRI[2][2][3]
PAIR_TRI[0][0][:] = [0, 1, 2]
PAIR_TRI[0][1][:] = [0, 1, 3]
PAIR_TRI[1][0][:] = [0, 2, 3]
PAIR_TRI[1][1][:] = [1, 2, 3]


cdef inline double altitude(double px, double py, double qx, double qy,
                            double rx, double ry) noexcept nogil:
    cdef double ux = qx - px, uy = qy - py
    cdef double vx = rx - px, vy = ry - py
    cdef double wx = rx - qx, wy = ry - qy
    cdef double area2 = fabs(ux * vy - uy * vx)
    cdef double longest = ux * ux + uy * uy
    cdef double t = vx * vx + vy * vy
    if t > longest:
        longest = t
    t = wx * wx + wy * wy
    if t > longest:
        longest = t
    if longest > 0:
        return area2 / sqrt(longest)
    return 0.0


cdef inline double epi_altitude(double px, double py, double qx, double qy,
                                double *e, bint finite) noexcept nogil:
    if finite:
        return altitude(px, py, qx, qy, e[0] / e[2], e[1] / e[2])
    cdef double dx = qx - px, dy = qy - py
    return fabs(dx * e[1] - dy * e[0]) / sqrt(e[0] * e[0] + e[1] * e[1])


cdef int KEY_TRI[4][3]
KEY_TRI[0][:] = [0, 1, 2]
KEY_TRI[1][:] = [0, 1, 3]
KEY_TRI[2][:] = [0, 2, 3]
KEY_TRI[3][:] = [1, 2, 3]


cdef inline void collinear_flags(double *p, double *e, bint finite, double thr,
                                 bint *flags) noexcept nogil:
    """flags[pairing] |= some plane triple of that pairing is near-collinear (with or without the epipole)."""
    cdef bint edge[4][4]
    cdef bint key[4]
    cdef int i, j, t
    cdef int *k
    for i in range(4):
        for j in range(i + 1, 4):
            edge[i][j] = epi_altitude(p[2*i], p[2*i+1], p[2*j], p[2*j+1], e, finite) < thr
    for t in range(4):
        k = KEY_TRI[t]
        key[t] = (altitude(p[2*k[0]], p[2*k[0]+1], p[2*k[1]], p[2*k[1]+1],
                           p[2*k[2]], p[2*k[2]+1]) < thr
                  or edge[k[0]][k[1]] or edge[k[0]][k[2]] or edge[k[1]][k[2]])
    # pairing 0 uses key triples 0 and 1, pairing 1 uses 2 and 3
    flags[0] = flags[0] or key[0] or key[1]
    flags[1] = flags[1] or key[2] or key[3]


cdef inline void condition(double *p, double *e, double *pc, double *ec) noexcept nogil:
    """Conditioned homogeneous keypoints pc[4*3] and unit epipole ec[3]."""
    cdef double cx = 0.0, cy = 0.0, ss = 0.0, s, dx, dy, n
    cdef int i
    for i in range(4):
        cx += p[2*i]
        cy += p[2*i+1]
    cx /= 4.0
    cy /= 4.0
    for i in range(4):
        dx = p[2*i] - cx
        dy = p[2*i+1] - cy
        ss += dx * dx + dy * dy
    s = sqrt(2.0) / sqrt(ss / 4.0)
    for i in range(4):
        pc[3*i] = (p[2*i] - cx) * s
        pc[3*i+1] = (p[2*i+1] - cy) * s
        pc[3*i+2] = 1.0
    ec[0] = s * (e[0] - cx * e[2])
    ec[1] = s * (e[1] - cy * e[2])
    ec[2] = e[2]
    n = sqrt(ec[0] * ec[0] + ec[1] * ec[1] + ec[2] * ec[2])
    ec[0] /= n
    ec[1] /= n
    ec[2] /= n


cdef inline double det_cols(double *a, double *b, double *c) noexcept nogil:
    return (a[0] * (b[1] * c[2] - b[2] * c[1])
            + a[1] * (b[2] * c[0] - b[0] * c[2])
            + a[2] * (b[0] * c[1] - b[1] * c[0]))


cdef inline bint basis(double *a, double *b, double *c, double *d, double *P,
                       double rank_tol) noexcept nogil:
    """Row-major P with columns lam_i * (a, b, c); returns True when singular."""
    cdef double det = det_cols(a, b, c)
    cdef double l0 = det_cols(d, b, c) / det
    cdef double l1 = det_cols(a, d, c) / det
    cdef double l2 = det_cols(a, b, d) / det
    cdef int i
    cdef double n0 = 0.0, n1 = 0.0, n2 = 0.0, rel
    for i in range(3):
        P[3*i] = a[i] * l0
        P[3*i+1] = b[i] * l1
        P[3*i+2] = c[i] * l2
        n0 += P[3*i] * P[3*i]
        n1 += P[3*i+1] * P[3*i+1]
        n2 += P[3*i+2] * P[3*i+2]
    rel = fabs(det * l0 * l1 * l2) / sqrt(n0 * n1 * n2)
    return not (rel >= rank_tol)


cdef inline void inv3(double *P, double *out) noexcept nogil:
    # rows of the inverse are cross products of the columns of P
    cdef double a[3]
    cdef double b[3]
    cdef double c[3]
    cdef int i
    for i in range(3):
        a[i] = P[3*i]
        b[i] = P[3*i+1]
        c[i] = P[3*i+2]
    cdef double det = det_cols(a, b, c)
    out[0] = (b[1] * c[2] - b[2] * c[1]) / det
    out[1] = (b[2] * c[0] - b[0] * c[2]) / det
    out[2] = (b[0] * c[1] - b[1] * c[0]) / det
    out[3] = (c[1] * a[2] - c[2] * a[1]) / det
    out[4] = (c[2] * a[0] - c[0] * a[2]) / det
    out[5] = (c[0] * a[1] - c[1] * a[0]) / det
    out[6] = (a[1] * b[2] - a[2] * b[1]) / det
    out[7] = (a[2] * b[0] - a[0] * b[2]) / det
    out[8] = (a[0] * b[1] - a[1] * b[0]) / det


cdef inline void matmul3(double *A, double *B, double *out) noexcept nogil:
    cdef int i, j
    for i in range(3):
        for j in range(3):
            out[3*i+j] = A[3*i] * B[j] + A[3*i+1] * B[3+j] + A[3*i+2] * B[6+j]


cdef inline double det3(double *M) noexcept nogil:
    return (M[0] * (M[4] * M[8] - M[5] * M[7])
            - M[1] * (M[3] * M[8] - M[5] * M[6])
            + M[2] * (M[3] * M[7] - M[4] * M[6]))


cdef inline double polish(double x, double a, double b, double c) noexcept nogil:
    cdef double f = ((x + a) * x + b) * x + c
    cdef double df = (3.0 * x + 2.0 * a) * x + b
    if df != 0.0:
        return x - f / df
    return x


cdef inline double sign(double x) noexcept nogil:
    if x > 0:
        return 1.0
    if x < 0:
        return -1.0
    return 0.0


cdef int eig3(double *M, double *wr, double *wi) noexcept nogil:
    """Eigenvalues of a Frobenius-normalized 3x3 matrix; LAPACK near repeated roots."""
    cdef double a = -(M[0] + M[4] + M[8])
    cdef double b = (M[0] * M[4] - M[1] * M[3] + M[0] * M[8] - M[2] * M[6]
                     + M[4] * M[8] - M[5] * M[7])
    cdef double c = -det3(M)
    cdef double shift = a / 3.0
    cdef double p = b - a * a / 3.0
    cdef double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c
    cdef double disc = -(4.0 * p * p * p + 27.0 * q * q)
    cdef double m, arg, theta, t, x, s, prod
    cdef int k, n = 3, lda = 3, ldv = 1, lwork = 64, info = 0
    cdef double A[9]
    cdef double work[64]
    cdef double vdummy[1]
    cdef char jobv = b'N'
    if fabs(disc) < DISC_TOL:
        for k in range(9):
            A[k] = M[k]
        dgeev(&jobv, &jobv, &n, A, &lda, wr, wi, vdummy, &ldv, vdummy, &ldv, work, &lwork, &info)
        return info
    if disc > 0:
        m = 2.0 * sqrt(-p / 3.0)
        arg = 3.0 * q / (p * m)
        if arg > 1.0:
            arg = 1.0
        elif arg < -1.0:
            arg = -1.0
        theta = acos(arg) / 3.0
        for k in range(3):
            t = m * cos(theta - 2.0 * M_PI * k / 3.0)
            wr[k] = polish(t - shift, a, b, c)
            wi[k] = 0.0
        return 0
    if p < 0:
        m = sqrt(-p / 3.0)
        arg = fabs(q) / (2.0 * m * m * m)
        if arg < 1.0:
            arg = 1.0
        t = -2.0 * sign(q) * m * cosh(acosh(arg) / 3.0)
    elif p > 0:
        m = sqrt(p / 3.0)
        t = -2.0 * m * sinh(asinh(q / (2.0 * m * m * m)) / 3.0)
    else:
        t = cbrt(-q)
    x = polish(t - shift, a, b, c)
    s = -a - x
    prod = b - x * s
    wr[0] = x
    wi[0] = 0.0
    wr[1] = s / 2.0
    wr[2] = s / 2.0
    t = prod - s * s / 4.0
    wi[1] = sqrt(t) if t > 0 else 0.0
    wi[2] = -wi[1]
    return 0


cdef inline double closest_ratio(double *wr, double *wi, double clamp) noexcept nogil:
    cdef int pi[3]
    cdef int pj[3]
    pi[0] = 0; pj[0] = 1
    pi[1] = 0; pj[1] = 2
    pi[2] = 1; pj[2] = 2
    cdef int k, best = 0
    cdef double g, bestg = -1.0, num, den, mx = 0.0
    for k in range(3):
        g = hypot(wr[pi[k]] - wr[pj[k]], wi[pi[k]] - wi[pj[k]])
        if bestg < 0 or g < bestg:
            bestg = g
            best = k
    for k in range(3):
        g = hypot(wr[k], wi[k])
        if g > mx:
            mx = g
    num = bestg
    den = hypot(wr[pi[best]] + wr[pj[best]], wi[pi[best]] + wi[pj[best]])
    if den < 1e-12 * mx:
        return clamp
    g = num / den
    return g if g < clamp else clamp


cdef void score_one(double *pr, double *pq, double *e1, double *e2, bint f1, bint f2,
                    double thr, double rank_tol, double clamp,
                    double *score_out, signed char *status_out) noexcept nogil:
    cdef double rc[12]
    cdef double qc[12]
    cdef double e1c[3]
    cdef double e2c[3]
    cdef double Pr1[9]
    cdef double Pq1[9]
    cdef double Pr2[9]
    cdef double Pq2[9]
    cdef double inv[9]
    cdef double T1[9]
    cdef double T2[9]
    cdef double Hm[9]
    cdef double wr[3]
    cdef double wi[3]
    cdef int pairing, j, info
    cdef int *t1
    cdef int *t2
    cdef bint singular
    cdef bint collinear[2]
    cdef double fro

    collinear[0] = False
    collinear[1] = False
    collinear_flags(pr, e1, f1, thr, collinear)
    collinear_flags(pq, e2, f2, thr, collinear)
    condition(pr, e1, rc, e1c)
    condition(pq, e2, qc, e2c)
    for pairing in range(2):
        score_out[pairing] = NAN
        t1 = PAIR_TRI[pairing][0]
        t2 = PAIR_TRI[pairing][1]
        if collinear[pairing]:
            status_out[pairing] = 1
            continue
        singular = basis(&rc[3*t1[0]], &rc[3*t1[1]], &rc[3*t1[2]], e1c, Pr1, rank_tol)
        singular = basis(&qc[3*t1[0]], &qc[3*t1[1]], &qc[3*t1[2]], e2c, Pq1, rank_tol) or singular
        singular = basis(&rc[3*t2[0]], &rc[3*t2[1]], &rc[3*t2[2]], e1c, Pr2, rank_tol) or singular
        singular = basis(&qc[3*t2[0]], &qc[3*t2[1]], &qc[3*t2[2]], e2c, Pq2, rank_tol) or singular
        if singular:
            status_out[pairing] = 2
            continue
        inv3(Pr1, inv)
        matmul3(Pq1, inv, T1)
        matmul3(T1, Pr2, T2)
        inv3(Pq2, inv)
        matmul3(T2, inv, Hm)
        fro = 0.0
        for j in range(9):
            fro += Hm[j] * Hm[j]
        fro = sqrt(fro)
        for j in range(9):
            Hm[j] /= fro
        if not (fabs(det3(Hm)) >= rank_tol) or fro != fro:
            status_out[pairing] = 2
            continue
        info = eig3(Hm, wr, wi)
        if info != 0:
            status_out[pairing] = 2
            continue
        status_out[pairing] = 0
        score_out[pairing] = closest_ratio(wr, wi, clamp)


def score_quadruples(ref, qry, e1, e2, quads, double collinear_px=1.0,
                     double rank_tol=1e-12, double clamp=1.0):
    """Homology error for both pairings of every quadruple.

    Same contract as ``_fallback.score_quadruples``: returns ``(scores,
    status)`` of shape (k, 2), NaN scores for skipped pairings.
    """
    cdef double[:, ::1] r = np.ascontiguousarray(ref, dtype=np.float64)
    cdef double[:, ::1] q = np.ascontiguousarray(qry, dtype=np.float64)
    cdef double[::1] ev1 = np.ascontiguousarray(e1, dtype=np.float64).reshape(3)
    cdef double[::1] ev2 = np.ascontiguousarray(e2, dtype=np.float64).reshape(3)
    cdef long long[:, ::1] qd = np.ascontiguousarray(quads, dtype=np.int64).reshape(-1, 4)
    cdef Py_ssize_t k = qd.shape[0], n = r.shape[0], i, j
    if q.shape[0] != n:
        raise ValueError("reference and query arrays differ in length")
    for i in range(k):
        for j in range(4):
            if qd[i, j] < 0 or qd[i, j] >= n:
                raise IndexError("quadruple index out of range")
    scores_arr = np.empty((k, 2), dtype=np.float64)
    status_arr = np.zeros((k, 2), dtype=np.int8)
    cdef double[:, ::1] scores = scores_arr
    cdef signed char[:, ::1] status = status_arr
    cdef double e1a[3]
    cdef double e2a[3]
    for j in range(3):
        e1a[j] = ev1[j]
        e2a[j] = ev2[j]
    cdef bint f1 = fabs(e1a[2]) > W_TOL * sqrt(e1a[0] * e1a[0] + e1a[1] * e1a[1] + e1a[2] * e1a[2])
    cdef bint f2 = fabs(e2a[2]) > W_TOL * sqrt(e2a[0] * e2a[0] + e2a[1] * e2a[1] + e2a[2] * e2a[2])
    cdef double pr[8]
    cdef double pq[8]
    with nogil:
        for i in range(k):
            for j in range(4):
                pr[2*j] = r[qd[i, j], 0]
                pr[2*j+1] = r[qd[i, j], 1]
                pq[2*j] = q[qd[i, j], 0]
                pq[2*j+1] = q[qd[i, j], 1]
            score_one(pr, pq, e1a, e2a, f1, f2, collinear_px, rank_tol, clamp,
                      &scores[i, 0], &status[i, 0])
    return scores_arr, status_arr
