import itertools

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from homology_match.homology import (
    Pairing,
    QuadrupleIndex,
    QuadrupleScore,
    Status,
    closest_pair_ratio,
    homology_error,
    homology_matrix,
    score_quadruple,
)

from . import oracles, protocols

vec = st.lists(st.floats(-10, 10), min_size=3, max_size=3).map(np.array)


def closest_gap(H):
    """Smallest eigenvalue distance of ``H`` scaled to unit determinant."""
    ev = np.linalg.eigvals(H / np.cbrt(np.linalg.det(H)))
    return min(abs(a - b) for a, b in itertools.combinations(ev, 2))


# the closest-pair ratio on known spectra

def test_identity_scores_zero():
    assert homology_error(np.eye(3)) == 0.0


def test_two_equal_eigenvalues_score_zero():
    assert homology_error(np.diag([1.0, 1.0, 5.0])) == 0.0


def test_distinct_eigenvalues_use_closest_pair():
    # closest pair is (1, 2): |1 - 2| / |1 + 2|
    assert homology_error(np.diag([1.0, 2.0, 10.0])) == pytest.approx(1.0 / 3.0, abs=1e-15)


def test_opposite_signs_are_clamped():
    assert homology_error(np.diag([1.0, -1.1, 10.0])) == 1.0
    assert homology_error(np.diag([1.0, -1.1, 10.0]), clamp=0.5) == 0.5


def test_vanishing_sum_returns_clamp():
    assert closest_pair_ratio([1.0, -1.0, 10.0]) == 1.0


def test_conjugate_pair_gives_imaginary_over_real():
    rng = np.random.default_rng(4)
    S = rng.normal(size=(3, 3)) + 3 * np.eye(3)
    B = np.array([[2.0, -0.5, 0.0], [0.5, 2.0, 0.0], [0.0, 0.0, 50.0]])
    score = homology_error(S @ B @ np.linalg.inv(S))
    assert type(score) is float
    assert score == pytest.approx(0.25, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(vec, vec, st.floats(-5, 5))
def test_constructed_homologies_score_zero(v, a, mu):
    assume(np.linalg.norm(v) > 1e-2 and np.linalg.norm(a) > 1e-2 and abs(mu) > 1e-2)
    c = mu * (a @ v)
    # a distinct vertex (off the axis) and an invertible matrix
    assume(abs(c) > 1e-3 * abs(mu) * np.linalg.norm(v) * np.linalg.norm(a))
    assume(abs(1 + c) > 1e-3)
    assert homology_error(np.eye(3) + mu * np.outer(v, a)) < 1e-9


def test_elation_limit_is_bounded_by_double_precision():
    # vertex on the axis: a defective triple eigenvalue, exact only to about sqrt(eps)
    rng = np.random.default_rng(9)
    for _ in range(50):
        v = rng.normal(size=3)
        a = rng.normal(size=3)
        a -= (a @ v) / (v @ v) * v
        assert homology_error(np.eye(3) + 2.0 * np.outer(v, a)) < 1e-7


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(-60, 60), st.sampled_from([-1.0, 1.0]))
def test_power_of_two_rescaling_is_bit_exact(seed, k, sign):
    H = np.random.default_rng(seed).normal(size=(3, 3))
    assert homology_error(sign * 2.0 ** k * H) == homology_error(H)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(1e-6, 1e6), st.sampled_from([-1.0, 1.0]))
def test_arbitrary_rescaling_changes_score_only_by_rounding(seed, lam, sign):
    H = np.random.default_rng(seed).normal(size=(3, 3))
    a = homology_error(H)
    assert homology_error(sign * lam * H) == pytest.approx(a, rel=1e-12, abs=1e-15)


# plane pairings of a quadruple

def test_quadruple_index_validation():
    with pytest.raises(ValueError):
        QuadrupleIndex((0, 1, 1, 2))
    q = QuadrupleIndex((3, 5, 7, 9), Pairing.SECOND)
    assert q.planes() == ((3, 7, 9), (5, 7, 9))
    assert QuadrupleIndex((3, 5, 7, 9)).planes() == ((3, 5, 7), (3, 5, 9))


def test_score_present_exactly_when_ok():
    q = QuadrupleIndex((0, 1, 2, 3))
    with pytest.raises(ValueError):
        QuadrupleScore(q, Status.OK)
    with pytest.raises(ValueError):
        QuadrupleScore(q, Status.SKIPPED_COLLINEAR, 0.1)


@pytest.mark.parametrize("trial", range(20))
def test_rigid_quadruple_gives_homology(trial):
    x1, x2, e1, e2 = protocols.exact_quadruple(trial)
    for pairing in Pairing:
        H = homology_matrix(QuadrupleIndex((0, 1, 2, 3), pairing), x1, x2, e1, e2)
        assert closest_gap(H) < 1e-8
    assert all(s.ok and s.score < 1e-8 for s in score_quadruple((0, 1, 2, 3), x1, x2, e1, e2))


@pytest.mark.parametrize("trial", range(20))
def test_point_moved_off_epipolar_plane_separates_eigenvalues(trial):
    rng = np.random.default_rng([5, trial])
    q = None
    while q is None:
        X, (P1, C1), (P2, C2), x1, x2, e1, e2 = oracles.rigid_quadruple_scene(rng)
        q = oracles.off_epipolar_query(X, C1, C2, P2, e2)
    for pairing in Pairing:
        H = homology_matrix(QuadrupleIndex((0, 1, 2, 3), pairing), x1, q, e1, e2)
        assert closest_gap(H) > 1e-3


@pytest.mark.parametrize("trial", range(20))
def test_agrees_with_high_precision_route(trial):
    x1, q, e1, e2 = protocols.displaced_quadruple(trial)
    ours = score_quadruple((0, 1, 2, 3), x1, q, e1, e2)
    for pairing in Pairing:
        assert ours[pairing.value].score == pytest.approx(
            oracles.homology_score(x1, q, e1, e2, pairing.value), abs=1e-9)


def coplanar_scene(seed):
    rng = np.random.default_rng(seed)
    X = np.column_stack([rng.uniform(-1, 1, (4, 2)), np.zeros(4)])
    R = oracles.look_at([3.0, 1.0, -4.0], [0, 0, 0], 0.3)
    P1 = oracles.camera_matrix(1000, oracles.look_at([0, 0, -5.0], [0, 0, 0], 0.0), [0, 0, -5.0])
    P2 = oracles.camera_matrix(950, R, [3.0, 1.0, -4.0])
    return (oracles.project(P1, X), oracles.project(P2, X),
            oracles.epipole(P1, [3.0, 1.0, -4.0]), oracles.epipole(P2, [0, 0, -5.0]))


@pytest.mark.parametrize("seed", range(5))
def test_coplanar_quadruple_gives_identity(seed):
    x1, x2, e1, e2 = coplanar_scene(seed)
    for pairing in Pairing:
        H = homology_matrix(QuadrupleIndex((0, 1, 2, 3), pairing), x1, x2, e1, e2)
        assert np.max(np.abs(H / H[2, 2] - np.eye(3))) < 1e-8
    assert all(s.score < 1e-8 for s in score_quadruple((0, 1, 2, 3), x1, x2, e1, e2))


def test_collinear_triple_is_skipped_not_scored():
    rng = np.random.default_rng(12)
    X = np.array([[0.0, 0.0, 0.0], [0.5, 0.25, 0.1], [1.0, 0.5, 0.2], [0.2, 0.9, -0.6]])
    P1, C1 = oracles.random_camera(rng, X.mean(axis=0))
    P2, C2 = oracles.random_camera(rng, X.mean(axis=0))
    x1, x2 = oracles.project(P1, X), oracles.project(P2, X)
    first, second = score_quadruple((0, 1, 2, 3), x1, x2, oracles.epipole(P1, C2), oracles.epipole(P2, C1))
    # points 0, 1, 2 only form a plane in the first pairing
    assert first.status is Status.SKIPPED_COLLINEAR and first.score is None
    assert second.status is Status.OK


@pytest.mark.parametrize("trial", range(10))
def test_swapping_plane_roles_keeps_zero_and_nonzero(trial):
    x1, x2, e1, e2 = protocols.exact_quadruple(trial)
    _, q, _, _ = protocols.displaced_quadruple(trial)
    for qry, exact in ((x2, True), (q, False)):
        for pairing in Pairing:
            quad = QuadrupleIndex((0, 1, 2, 3), pairing)
            H = homology_matrix(quad, x1, qry, e1, e2)
            a, b = homology_error(H), homology_error(np.linalg.inv(H))
            if exact:
                assert a < 1e-9 and b < 1e-9
            else:
                assert a > 1e-6 and b > 1e-6


@pytest.mark.parametrize("trial", range(10))
def test_relabeling_points_keeps_score_multiset(trial):
    x1, x2, e1, e2 = protocols.exact_quadruple(trial)
    base = sorted(s.score for s in score_quadruple((0, 1, 2, 3), x1, x2, e1, e2))
    for perm in itertools.permutations(range(4)):
        got = sorted(s.score for s in score_quadruple(perm, x1, x2, e1, e2))
        assert np.allclose(got, base, atol=1e-8)
