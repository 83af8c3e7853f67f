import numpy as np
import pytest

from pumpscope.bots import cluster_users
from pumpscope.corex import (CorexModel, _Problem, gaussian_tc, linear_corex, standardize,
                             total_correlation)
from pumpscope.errors import ValidationError

RHO_HALF = float(np.sqrt(1 - np.exp(-1)))  # TC = 0.5 exactly


def exact_pair(rho, n, seed):
    """n samples whose sample correlation is exactly rho."""
    z = np.random.default_rng(seed).normal(size=(n, 2))
    z -= z.mean(axis=0)
    q, _ = np.linalg.qr(z)
    L = np.linalg.cholesky(np.array([[1.0, rho], [rho, 1.0]]))
    return q @ L.T * np.sqrt(n)


def two_blocks(seed, m=400, per=5, noise=0.4):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(m, 2))
    cols = [z[:, b] + noise * rng.normal(size=m) for b in (0, 1) for _ in range(per)]
    return np.column_stack(cols), np.repeat([0, 1], per)


def purity(assign, labels):
    assign = np.asarray(assign)
    total = 0
    for c in np.unique(assign):
        total += np.bincount(labels[assign == c]).max()
    return total / len(labels)


def test_tc_closed_form():
    assert total_correlation(np.eye(4)) == 0.0
    R = np.array([[1, RHO_HALF], [RHO_HALF, 1]])
    assert total_correlation(R) == pytest.approx(0.5, abs=1e-12)
    x = exact_pair(RHO_HALF, 10_000, 0)
    assert gaussian_tc(x) == pytest.approx(0.5, rel=0.02)


def test_tc_sampling_error_is_small_on_average():
    errs = []
    for s in range(40):
        z = np.random.default_rng(s).normal(size=(10_000, 2))
        x = np.column_stack([z[:, 0], RHO_HALF * z[:, 0] + np.sqrt(1 - RHO_HALF ** 2) * z[:, 1]])
        errs.append(abs(gaussian_tc(x) - 0.5) / 0.5)
    assert np.median(errs) < 0.02


def test_tc_rejects_non_correlation():
    with pytest.raises(ValidationError):
        total_correlation(np.array([[1, 2], [2, 1]]))


def test_objective_at_zero_is_tc():
    x, _ = two_blocks(0)
    X, *_ = standardize(x)
    prob = _Problem(X, 1e-6)
    C = np.corrcoef(X, rowvar=False)
    assert prob.objective(np.zeros((X.shape[1], 2))) == pytest.approx(total_correlation(C), rel=1e-4)


@pytest.mark.parametrize("seed", range(3))
def test_gradient_matches_finite_differences(seed):
    x, _ = two_blocks(seed, m=60, per=3)
    X, *_ = standardize(x)
    prob = _Problem(X, 1e-3)
    W = np.random.default_rng(seed).normal(scale=0.3, size=(X.shape[1], 2))
    G = prob.gradient(W)
    h = 1e-6
    num = np.zeros_like(W)
    for idx in np.ndindex(W.shape):
        E = np.zeros_like(W)
        E[idx] = h
        num[idx] = (prob.objective(W + E) - prob.objective(W - E)) / (2 * h)
    np.testing.assert_allclose(G, num, atol=1e-6, rtol=1e-5)


def test_independent_columns_objective_near_zero():
    x = np.random.default_rng(0).normal(size=(5000, 4))
    m = linear_corex(x, k=2, seed=0)
    assert abs(m.objective_trace[-1]) < 0.01


@pytest.mark.parametrize("seed", range(10))
def test_block_recovery_and_monotone_trace(seed):
    x, labels = two_blocks(seed)
    m = linear_corex(x, k=2, seed=seed)
    tr = np.array(m.objective_trace)
    assert np.all(np.diff(tr) <= 0)
    assign = np.argmax(np.abs(m.weights), axis=1)
    assert purity(assign, labels) >= 0.9


def test_zero_variance_columns_dropped(caplog):
    x, _ = two_blocks(0)
    x = np.column_stack([x, np.ones(len(x))])
    m = linear_corex(x, k=2, seed=0, columns=[f"c{i}" for i in range(11)])
    assert m.dropped == ("c10",) and len(m.columns) == 10
    assert "zero-variance" in caplog.text
    assert m.transform(x[:3, :10]).shape == (3, 2)
    with pytest.raises(ValidationError):
        m.transform(x[:3])


def test_roundtrip_and_determinism(tmp_path):
    x, _ = two_blocks(1)
    a = linear_corex(x, k=2, seed=4, max_iter=50)
    b = linear_corex(x, k=2, seed=4, max_iter=50)
    np.testing.assert_array_equal(a.weights, b.weights)
    a.save(str(tmp_path / "c.json"))
    back = CorexModel.load(str(tmp_path / "c.json"))
    np.testing.assert_array_equal(back.weights, a.weights)
    assert cluster_users(back) == cluster_users(a)


def test_corex_input_validation():
    with pytest.raises(ValidationError):
        linear_corex(np.ones((1, 3)), k=1)
    with pytest.raises(ValidationError):
        linear_corex(np.ones((5, 3)), k=1)
