import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperfit.errors import InvalidArgumentError
from hyperfit.rdos import RdosScores, init_from_scores, initialize, rdos_scores
from hyperfit.state import W_MIN


def brute_rdos(X, k):
    """Direct transcription of the score definition with Python sets."""
    N = len(X)
    D2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)
    knn = []
    for i in range(N):
        order = sorted((d, j) for j, d in enumerate(D2[i]) if j != i)
        knn.append({j for _, j in order[:k]})
    h = np.mean([np.sqrt(sorted(D2[i][j] for j in range(N) if j != i)[k - 1]) for i in range(N)])
    if h == 0:
        h = 1.0
    S = []
    for i in range(N):
        rnn = {j for j in range(N) if i in knn[j]}
        snn = {j for j in range(N) if j != i and knn[i] & knn[j]}
        S.append((knn[i] | rnn | snn) - {i})
    kern = lambda i, j: np.exp(-D2[i, j] / (2 * h * h))
    p = np.array([(1 + sum(kern(i, j) for j in S[i])) / (len(S[i]) + 1) for i in range(N)])
    return np.array([sum(p[j] for j in S[i]) / (len(S[i]) * p[i]) for i in range(N)])


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_scores_match_brute_force(seed):
    X = np.random.default_rng(seed).normal(size=(40, 3))
    np.testing.assert_allclose(rdos_scores(X, k=5).scores, brute_rdos(X, 5), rtol=1e-12)


def test_identical_points_score_one():
    s = rdos_scores(np.ones((20, 3)), k=5).scores
    np.testing.assert_allclose(s, 1.0)


def test_grid_interior_scores_near_one():
    g = np.stack(np.meshgrid(np.arange(15.0), np.arange(15.0)), -1).reshape(-1, 2)
    s = rdos_scores(g, k=4).scores
    interior = np.all((g >= 3) & (g <= 11), axis=1)
    assert np.all((s[interior] >= 0.9) & (s[interior] <= 1.1))


@pytest.mark.parametrize("seed", range(5))
def test_isolated_point_scores_high(seed):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(size=(100, 2)), [[50.0, 0.0]]])
    assert rdos_scores(X, k=11).scores[-1] > 2


def test_k_validation():
    X = np.random.default_rng(0).normal(size=(10, 2))
    with pytest.raises(InvalidArgumentError):
        rdos_scores(X, k=10)
    with pytest.raises(InvalidArgumentError):
        rdos_scores(X, k=0)


@given(st.integers(0, 10_000))
def test_scores_permutation_equivariant(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(30, 3))
    perm = rng.permutation(30)
    np.testing.assert_allclose(rdos_scores(X[perm], 5).scores, rdos_scores(X, 5).scores[perm], rtol=1e-10)


@given(st.integers(0, 10_000), st.floats(0.01, 100.0))
def test_scores_translation_scale_invariant(seed, scale):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(30, 2))
    moved = scale * X + rng.uniform(-100, 100, size=2)
    np.testing.assert_allclose(rdos_scores(moved, 5).scores, rdos_scores(X, 5).scores, rtol=1e-7)


def test_indicator_arithmetic():
    X = np.random.default_rng(0).normal(size=(30, 3))
    res = init_from_scores(X, RdosScores(np.full(30, 0.5), 11))
    assert res.M == 30 and res.w == 0.0
    assert res.state0.w == W_MIN
    sc = np.r_[np.full(20, 1.0), np.full(4, 1.5), np.full(6, 3.0)]
    res = init_from_scores(X, RdosScores(sc, 11))
    assert res.M == 20 and res.w == pytest.approx(0.2)


def test_M_floor_and_cap():
    X = np.random.default_rng(0).normal(size=(30, 3))
    assert init_from_scores(X, RdosScores(np.full(30, 5.0), 11)).M == 4
    assert init_from_scores(X, RdosScores(np.full(30, 0.5), 11), M_cap=10).M == 10


def test_initial_state():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 3)) + [100, -50, 7]
    res = initialize(X, k=11)
    np.testing.assert_allclose(res.state0.t, np.median(X, axis=0))
    Z = res.sphere.points @ res.state0.A.T + res.state0.t
    msd = np.median(np.mean(((X[:, None] - Z[None]) ** 2).sum(-1), axis=1))
    assert res.state0.s == pytest.approx(np.log(msd / 3))


def test_overrides_skip_scoring():
    X = np.random.default_rng(0).normal(size=(10, 2))
    res = initialize(X, k=50, M_override=7, w_override=0.25)
    assert res.M == 7 and res.w == 0.25 and len(res.sphere) == 7
