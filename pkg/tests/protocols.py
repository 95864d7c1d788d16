"""Seeded trial generators shared by the tests and by the frozen-value derivation."""
import numpy as np

from homology_match import MatchConfig, synthetic

from . import oracles

EXACT_SEED = 2024
DISPLACED_SEED = 2024
DIFFERENT_SEED = 77
TRIALS = 100

PROVIDED = MatchConfig(epipole_mode="provided")


def exact_quadruple(trial):
    """(ref, qry, e1, e2) for one rigid non-coplanar quadruple seen by two random cameras."""
    rng = np.random.default_rng([EXACT_SEED, trial])
    X, (P1, C1), (P2, C2), x1, x2, e1, e2 = oracles.rigid_quadruple_scene(rng)
    return x1, x2, e1, e2


def displaced_quadruple(trial):
    """Same scene as :func:`exact_quadruple`, with the query's fourth 3D point moved."""
    rng = np.random.default_rng([DISPLACED_SEED, trial])
    X, (P1, C1), (P2, C2), x1, x2, e1, e2 = oracles.rigid_quadruple_scene(rng)
    q = oracles.displaced_query(rng, X, P2, e2)
    return x1, q, e1, e2


def eight_point_pair(trial, n=8):
    """(ref, qry_same, qry_other, e1, e2): an exact rigid pair plus a query of a different configuration."""
    rng = np.random.default_rng([DIFFERENT_SEED, trial])
    X, (P1, C1), (P2, C2), x1, x2 = oracles.random_scene(rng, n)
    e1, e2 = oracles.epipole(P1, C2), oracles.epipole(P2, C1)
    while True:
        Y = rng.uniform(-1.0, 1.0, size=(n, 3)) + X.mean(axis=0)
        try:
            q = oracles.project(P2, Y)
            break
        except ValueError:
            continue
    return x1, x2, q, e1, e2


def sweep(sigma, seed=0, **overrides):
    """Default hemisphere sweep (13 x 7 grid, 8 keypoints, 5 trials) at one noise level."""
    a, b = synthetic.default_clouds("blob", 1000, seed)
    config = synthetic.SweepConfig(noise_sigma=sigma, seed=seed, **overrides)
    return synthetic.hemisphere_sweep(a, b, config)
