import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from homology_match import geometry
from homology_match.errors import (
    CollinearPoints,
    DegenerateConfiguration,
    DegenerateInput,
    RankError,
)

from . import oracles


def scale_free_close(A, B, tol):
    a = A / np.linalg.norm(A)
    b = B / np.linalg.norm(B)
    if np.vdot(a, b) < 0:
        b = -b
    return np.max(np.abs(a - b)) < tol


def generic_quad(rng, spread=400.0):
    while True:
        pts = rng.uniform(-spread, spread, size=(4, 2))
        try:
            geometry.check_no_collinear(pts, 0.05 * spread)
            return pts
        except CollinearPoints:
            continue


# conditioning

def test_conditioning_of_square_centres_and_scales():
    pts = np.array([(0, 0, 1), (2, 0, 1), (0, 2, 1), (2, 2, 1)], dtype=float)
    out, T = geometry.normalize_points(pts)
    assert np.allclose(out[:, :2].mean(axis=0), 0.0, atol=1e-15)
    assert np.sqrt(np.mean(np.sum(out[:, :2] ** 2, axis=1))) == pytest.approx(np.sqrt(2.0), abs=1e-15)


def test_conditioning_rejects_zero_spread():
    with pytest.raises(DegenerateInput):
        geometry.normalize_points(np.array([(5.0, 5.0, 1.0)] * 4))


def test_conditioning_transform_maps_inputs_to_outputs():
    rng = np.random.default_rng(3)
    pts = np.hstack([rng.uniform(-800, 800, size=(8, 2)), rng.uniform(0.5, 2.0, size=(8, 1))])
    out, T = geometry.normalize_points(pts)
    mapped = (T @ pts.T).T
    mapped /= mapped[:, 2:3]
    assert np.allclose(mapped, out, rtol=0, atol=1e-12)


# homographies

def test_identity_map_gives_identity():
    src = np.array([(10.0, 20.0), (300.0, 40.0), (50.0, 250.0), (310.0, 330.0)])
    H = geometry.homography_from_4(src, src)
    assert scale_free_close(H, np.eye(3), 1e-12)


def test_doubled_square_gives_diagonal():
    src = np.array([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)])
    # the unit square's altitudes are below the default 1 px margin
    H = geometry.homography_from_4(src, 2 * src, collinear_px=0.1)
    assert scale_free_close(H, np.diag([2.0, 2.0, 1.0]), 1e-12)


def test_recovers_random_projective_map():
    rng = np.random.default_rng(11)
    for _ in range(20):
        A = rng.normal(size=(3, 3)) + 3 * np.eye(3)
        A[2] = [*rng.normal(scale=1e-4, size=2), 1.0]
        src = generic_quad(rng)
        dst = geometry.apply_homography(A, src)
        H = geometry.homography_from_4(src, dst, collinear_px=1e-6)
        assert scale_free_close(H, A, 1e-9)


def test_collinear_source_is_rejected():
    src = np.array([(0.0, 0.0), (100.0, 0.0), (200.0, 0.5), (0.0, 100.0)])
    with pytest.raises(CollinearPoints):
        geometry.homography_from_4(src, src)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(-1e3, 1e3).filter(lambda v: abs(v) > 1e-3))
def test_destination_scale_only_rescales_result(seed, lam):
    rng = np.random.default_rng(seed)
    src = geometry.homogenize(generic_quad(rng))
    dst = geometry.homogenize(generic_quad(rng))
    H = geometry.homography_from_4(src, dst)
    Hs = geometry.homography_from_4(src, lam * dst)
    assert scale_free_close(H, Hs, 1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_conditioned_and_raw_solutions_agree(seed):
    rng = np.random.default_rng(seed)
    src = generic_quad(rng, 2.0)
    dst = generic_quad(rng, 2.0)
    H1 = geometry.homography_from_4(src, dst, collinear_px=1e-3, condition=True)
    H2 = geometry.homography_from_4(src, dst, collinear_px=1e-3, condition=False)
    assert scale_free_close(H1, H2, 1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_plane_homography_maps_epipole_to_epipole(seed):
    rng = np.random.default_rng(seed)
    X, (P1, C1), (P2, C2), x1, x2, e1, e2 = oracles.rigid_quadruple_scene(rng)
    H = geometry.homography_from_4(np.vstack([geometry.homogenize(x1[:3]), e1]),
                                   np.vstack([geometry.homogenize(x2[:3]), e2]))
    assert geometry.same_point(H @ e1, e2, 1e-8)


# fundamental matrix

def two_view(seed, n=20):
    rng = np.random.default_rng(seed)
    X, (P1, C1), (P2, C2), x1, x2 = oracles.random_scene(rng, n)
    return X, P1, C1, P2, C2, x1, x2


def angle(A, B):
    a = A.ravel() / np.linalg.norm(A)
    b = B.ravel() / np.linalg.norm(B)
    return np.arccos(min(1.0, abs(a @ b)))


@pytest.mark.parametrize("seed", range(10))
def test_eight_point_recovers_camera_fundamental(seed):
    X, P1, C1, P2, C2, x1, x2 = two_view(seed)
    F = geometry.estimate_fundamental(x1, x2)
    assert angle(F, oracles.fundamental(P1, P2, C1)) < 1e-6


def test_single_plane_is_degenerate():
    rng = np.random.default_rng(5)
    X = np.column_stack([rng.uniform(-1, 1, (20, 2)), np.zeros(20)]) + [0, 0, 5]
    P1 = oracles.camera_matrix(1000, np.eye(3), np.zeros(3))
    R = oracles.look_at([2.0, 0.5, 0.0], [0, 0, 5], 0.0)
    P2 = oracles.camera_matrix(1000, R, [2.0, 0.5, 0.0])
    with pytest.raises(DegenerateConfiguration):
        geometry.estimate_fundamental(oracles.project(P1, X), oracles.project(P2, X))


@pytest.mark.parametrize("seed", range(10))
def test_perturbed_pair_carries_largest_residual(seed):
    X, P1, C1, P2, C2, x1, x2 = two_view(seed)
    line = oracles.fundamental(P1, P2, C1) @ np.append(x1[7], 1.0)
    x2 = x2.copy()
    x2[7] += 50.0 * line[:2] / np.linalg.norm(line[:2])
    F = geometry.estimate_fundamental(x1, x2)
    # the first-order geometric residual; raw algebraic values scale with pixel position
    d = geometry.sampson_distance(F, x1, x2)
    assert int(np.argmax(d)) == 7
    assert d[7] > 2 * np.median(np.delete(d, 7))


def test_fundamental_is_unchanged_when_views_swap_roles():
    X, P1, C1, P2, C2, x1, x2 = two_view(8)
    F = geometry.estimate_fundamental(x1, x2)
    Ft = geometry.estimate_fundamental(x2, x1)
    assert scale_free_close(F, Ft.T, 1e-8)


def test_ransac_ignores_gross_outliers():
    X, P1, C1, P2, C2, x1, x2 = two_view(4, n=40)
    x2 = x2.copy()
    x2[:6] += np.random.default_rng(0).uniform(40, 80, size=(6, 2))
    F, inliers = geometry.estimate_fundamental_ransac(x1, x2, threshold=1.0, seed=3)
    assert not inliers[:6].any() and inliers[6:].all()
    assert angle(F, oracles.fundamental(P1, P2, C1)) < 1e-6


# epipoles

@pytest.mark.parametrize("seed", range(5))
def test_epipoles_are_images_of_camera_centres(seed):
    X, P1, C1, P2, C2, x1, x2 = two_view(seed)
    e1, e2 = geometry.epipoles_from_fundamental(geometry.estimate_fundamental(x1, x2))
    assert geometry.same_point(e1, P1 @ np.append(C2, 1.0), 1e-6)
    assert geometry.same_point(e2, P2 @ np.append(C1, 1.0), 1e-6)


def test_epipoles_of_diagonal_matrix():
    e1, e2 = geometry.epipoles_from_fundamental(np.diag([1.0, 1.0, 0.0]))
    assert geometry.same_point(e1, [0, 0, 1]) and geometry.same_point(e2, [0, 0, 1])


def test_estimated_fundamental_annihilates_epipole():
    X, P1, C1, P2, C2, x1, x2 = two_view(2)
    F = geometry.estimate_fundamental(x1, x2)
    e1, e2 = geometry.epipoles_from_fundamental(F)
    assert np.linalg.norm(F @ e1) < 1e-10 and np.linalg.norm(F.T @ e2) < 1e-10


def test_rank_one_matrix_has_no_unique_epipole():
    with pytest.raises(RankError):
        geometry.epipoles_from_fundamental(np.outer([1.0, 2.0, 3.0], [0.5, -1.0, 2.0]))


# eigenvalues

def test_identity_eigenvalues():
    assert np.allclose(geometry.eigenvalues_3x3(np.eye(3)), [1, 1, 1], atol=1e-15)


def test_diagonal_eigenvalues():
    assert np.allclose(sorted(geometry.eigenvalues_3x3(np.diag([2.0, 3.0, 5.0])).real), [2, 3, 5], atol=1e-13)


def test_random_matrices_match_iterative_solver():
    rng = np.random.default_rng(0)
    for _ in range(500):
        M = rng.normal(size=(3, 3)) * 10 ** rng.uniform(-3, 3)
        ours = np.sort_complex(geometry.eigenvalues_3x3(M))
        ref = np.sort_complex(np.linalg.eigvals(M))
        assert np.max(np.abs(ours - ref)) <= 1e-9 * np.max(np.abs(ref))


def test_eigenvalue_product_is_determinant():
    rng = np.random.default_rng(2)
    for _ in range(200):
        M = rng.normal(size=(3, 3))
        prod = np.prod(geometry.eigenvalues_3x3(M))
        assert abs(prod.imag) < 1e-9 * abs(np.linalg.det(M)) + 1e-15
        assert prod.real == pytest.approx(np.linalg.det(M), rel=1e-9)


def test_repeated_root_uses_fallback_and_stays_accurate():
    rng = np.random.default_rng(1)
    S = rng.normal(size=(3, 3))
    M = S @ np.diag([2.0, 2.0, 7.0]) @ np.linalg.inv(S)
    ev = np.sort(geometry.eigenvalues_3x3(M).real)
    assert np.allclose(ev, [2, 2, 7], atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_eigenvalues_survive_similarity(seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(3, 3))
    S = rng.normal(size=(3, 3)) + 2 * np.eye(3)
    if np.linalg.cond(S) > 1e3:
        S = np.eye(3) + 0.5 * np.diag(rng.uniform(size=3))
    a = np.sort_complex(geometry.eigenvalues_3x3(M))
    b = np.sort_complex(geometry.eigenvalues_3x3(S @ M @ np.linalg.inv(S)))
    assert np.max(np.abs(a - b)) < 1e-8 * max(1.0, np.max(np.abs(a)))
