"""Linear total-correlation explanation for Gaussian data.

Each column of the data matrix is a variable. Latent factors are
``Y = X W + eps`` with standardized ``X`` and unit-variance noise ``eps``;
``W`` is fitted by minimizing ``TC(X|Y) + TC(Y)``. With
``A = Cov(Y) = W'CW + I`` and ``q_u`` the variance of ``X_u`` explained by
``Y``, the objective reduces to::

    J(W) = 1/2 sum_u ln(1 - q_u) + 1/2 sum_j ln A_jj - 1/2 ln det C
"""

import json
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from pumpscope.errors import DataError, ValidationError
from pumpscope.seeding import rng_for

logger = logging.getLogger(__name__)

MODEL_FORMAT = "pumpscope.corex"
MODEL_VERSION = 1


def total_correlation(corr):
    """Gaussian total correlation ``-1/2 ln det R`` of a correlation matrix."""
    R = np.asarray(corr, dtype=float)
    sign, logdet = np.linalg.slogdet(R)
    if sign <= 0:
        raise ValidationError("correlation matrix is not positive definite")
    if logdet > 1e-9:
        raise ValidationError(f"det(R) = exp({logdet:.3g}) > 1: not a correlation matrix")
    return max(0.0, -0.5 * logdet)


def gaussian_tc(data):
    """Total correlation of the columns of ``data`` under a Gaussian model."""
    return total_correlation(np.corrcoef(np.asarray(data, dtype=float), rowvar=False))


def standardize(B):
    """Zero-mean, unit-variance columns; zero-variance columns are dropped.

    Returns ``(X, kept_indices, dropped_indices, means, stds)``.
    """
    X = B.toarray() if sp.issparse(B) else np.asarray(B, dtype=float)
    X = X.astype(float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    keep = np.flatnonzero(std > 1e-12 * np.maximum(1.0, np.abs(mean)))
    drop = np.setdiff1d(np.arange(X.shape[1]), keep)
    Xs = (X[:, keep] - mean[keep]) / std[keep]
    return Xs, keep, drop, mean[keep], std[keep]


class _Problem:
    """Objective and gradient for standardized data ``X`` (m x n)."""

    def __init__(self, X, ridge):
        self.X = X
        self.m, self.n = X.shape
        self.ridge = ridge
        self.logdet_c = self._logdet_c()

    def cov_times(self, Z):
        return (self.X.T @ (self.X @ Z) / self.m + self.ridge * Z) / (1.0 + self.ridge)

    def _logdet_c(self):
        X, m, n, d = self.X, self.m, self.n, self.ridge
        gram = X @ X.T / m if m < n else X.T @ X / m
        ev = np.clip(np.linalg.eigvalsh(gram), 0.0, None)
        r = len(ev)
        return float(np.sum(np.log((ev + d) / (1 + d))) + (n - r) * np.log(d / (1 + d)))

    def parts(self, W):
        M = self.cov_times(W)
        A = W.T @ M + np.eye(W.shape[1])
        Ainv = np.linalg.inv(A)
        q = np.einsum("uj,jk,uk->u", M, Ainv, M)
        return M, A, Ainv, q

    def objective(self, W):
        _, A, _, q = self.parts(W)
        if np.any(q >= 1.0) or np.any(np.diag(A) <= 0):
            return np.inf
        return float(0.5 * np.sum(np.log1p(-q)) + 0.5 * np.sum(np.log(np.diag(A)))
                     - 0.5 * self.logdet_c)

    def gradient(self, W):
        M, A, Ainv, q = self.parts(W)
        r = 1.0 / (1.0 - q)
        RMAi = (r[:, None] * M) @ Ainv
        P = Ainv @ M.T @ (r[:, None] * M) @ Ainv
        return M / np.diag(A) - self.cov_times(RMAi) + M @ P


@dataclass(eq=False)
class CorexModel:
    weights: np.ndarray          # one row per retained variable, k columns
    k: int
    objective_trace: list
    seed: int
    columns: tuple = ()          # ids of retained variables
    dropped: tuple = ()          # ids of zero-variance variables
    means: np.ndarray = None
    stds: np.ndarray = None
    converged: bool = False
    extra: dict = field(default_factory=dict)

    def embedding(self):
        return {c: self.weights[i] for i, c in enumerate(self.columns)}

    def transform(self, rows):
        """Latent factor values ``X W`` for raw rows over the retained ``columns``."""
        R = np.atleast_2d(np.asarray(rows, dtype=float))
        if R.shape[1] != len(self.columns):
            raise ValidationError(f"expected {len(self.columns)} retained columns, got {R.shape[1]}")
        return ((R - self.means) / self.stds) @ self.weights

    def to_json(self):
        return {"format": MODEL_FORMAT, "version": MODEL_VERSION, "k": self.k, "seed": self.seed,
                "columns": list(self.columns), "dropped": list(self.dropped),
                "weights": self.weights.tolist(), "means": self.means.tolist(),
                "stds": self.stds.tolist(), "objective_trace": list(self.objective_trace),
                "converged": self.converged}

    @classmethod
    def from_json(cls, obj):
        if obj.get("format") != MODEL_FORMAT or obj.get("version") != MODEL_VERSION:
            raise DataError("not a supported CorEx model file")
        return cls(np.array(obj["weights"], dtype=float).reshape(len(obj["columns"]), obj["k"]),
                   obj["k"], list(obj["objective_trace"]), obj["seed"], tuple(obj["columns"]),
                   tuple(obj["dropped"]), np.array(obj["means"], dtype=float),
                   np.array(obj["stds"], dtype=float), obj.get("converged", False))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_json(json.load(fh))
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataError(f"malformed CorEx model ({exc})", path) from None


def linear_corex(B, k=24, seed=0, max_iter=2000, lr=0.1, tol=1e-9, ridge=1e-6,
                 columns=None, init_scale=0.1):
    """Fit linear CorEx on the columns of ``B`` (samples x variables).

    Gradient descent with backtracking: a step is only accepted if it lowers
    the objective, so ``objective_trace`` never increases.
    """
    m, n_all = B.shape
    if m < 2 or n_all < 2:
        raise ValidationError("CorEx needs at least 2 rows and 2 columns")
    if k < 1:
        raise ValidationError("k must be >= 1")
    X, keep, drop, means, stds = standardize(B)
    columns = tuple(columns) if columns is not None else tuple(range(n_all))
    if len(drop):
        logger.warning("CorEx: dropped %d zero-variance columns", len(drop))
    if X.shape[1] < 2:
        raise ValidationError("CorEx needs at least 2 columns with nonzero variance")
    prob = _Problem(X, ridge)
    rng = rng_for(seed, "corex")
    W = rng.normal(scale=init_scale, size=(X.shape[1], k))
    J = prob.objective(W)
    if not np.isfinite(J):
        raise DataError("CorEx objective is not finite at initialization")
    trace = [J]
    converged = False
    step = lr
    for _ in range(max_iter):
        G = prob.gradient(W)
        if not np.all(np.isfinite(G)):
            raise DataError("CorEx gradient is not finite")
        g2 = float(np.sum(G * G))
        if g2 == 0.0:
            converged = True
            break
        accepted = False
        for _ in range(60):
            W_new = W - step * G
            J_new = prob.objective(W_new)
            if np.isfinite(J_new) and J_new <= J - 1e-4 * step * g2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True
            break
        improvement = J - J_new
        W, J = W_new, J_new
        trace.append(J)
        step *= 1.5
        if improvement < tol * max(1.0, abs(J)):
            converged = True
            break
    return CorexModel(W, k, trace, seed, tuple(columns[i] for i in keep),
                      tuple(columns[i] for i in drop), means, stds, converged,
                      {"objective_start": trace[0]})
