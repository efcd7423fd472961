"""Exact Gaussian-process regression with an RBF kernel.

Targets are centered by their mean before fitting and the mean is restored at
prediction time. Hyperparameters are chosen by exhaustive search over a fixed
grid, maximizing the log marginal likelihood.
"""

from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

LOG_2PI = np.log(2.0 * np.pi)

JITTER_START = 1e-10
JITTER_MAX = 1e-4


class CholeskyError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class KernelConfig:
    lengthscale: float = 1.0
    signal_variance: float = 1.0
    noise_variance: float = 1e-6
    kind: str = "rbf"

    def __post_init__(self):
        if self.kind != "rbf":
            raise ValueError(f"unsupported kernel kind {self.kind!r}")
        if not self.lengthscale > 0:
            raise ValueError("lengthscale must be positive")
        if not self.signal_variance > 0:
            raise ValueError("signal_variance must be positive")
        if not self.noise_variance >= 0:
            raise ValueError("noise_variance must be non-negative")


@dataclass(frozen=True)
class HyperGrid:
    """Cartesian grid of kernel hyperparameters.

    Iteration order is lengthscale-major, then signal variance, then noise
    variance; that order is what breaks likelihood ties.
    """

    lengthscales: Sequence[float] = (0.5, 1.0, 2.0, 4.0, 8.0)
    signal_variances: Sequence[float] = (0.01, 0.1, 1.0)
    noise_variances: Sequence[float] = (1e-6, 1e-4, 1e-2)

    def configs(self) -> list:
        return [KernelConfig(l, s, n) for l, s, n in
                product(self.lengthscales, self.signal_variances, self.noise_variances)]

    @classmethod
    def single(cls, cfg: KernelConfig) -> "HyperGrid":
        return cls((cfg.lengthscale,), (cfg.signal_variance,), (cfg.noise_variance,))


def _as_configs(grid) -> list:
    if isinstance(grid, HyperGrid):
        return grid.configs()
    if isinstance(grid, KernelConfig):
        return [grid]
    return list(grid)


def sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    d = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d, 0.0)


def rbf_from_sq(sq: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    return cfg.signal_variance * np.exp(-sq / (2.0 * cfg.lengthscale ** 2))


def kernel_eval(cfg: KernelConfig, x, x2) -> float:
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x.shape != x2.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    d = x - x2
    return float(cfg.signal_variance * np.exp(-(d @ d) / (2.0 * cfg.lengthscale ** 2)))


def kernel_matrix(cfg: KernelConfig, a, b) -> np.ndarray:
    return rbf_from_sq(sq_dists(a, b), cfg)


def _cholesky_with_jitter(K: np.ndarray, signal_variance: float) -> np.ndarray:
    try:
        return np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(K.shape[0])
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return np.linalg.cholesky(K + jitter * signal_variance * eye)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise CholeskyError("Cholesky factorization failed after maximum jitter escalation")


@dataclass(frozen=True, eq=False)
class GpModel:
    train_x: np.ndarray
    train_y: np.ndarray  # centered
    y_mean: float
    kernel: KernelConfig
    chol: np.ndarray
    alpha: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.train_x.shape[0]

    @property
    def dim(self) -> int:
        return self.train_x.shape[1]

    def predict(self, x):
        return predict(self, x)


def _check_xy(train_x, train_y):
    train_x = np.atleast_2d(np.asarray(train_x, dtype=float))
    train_y = np.asarray(train_y, dtype=float).ravel()
    if train_x.shape[0] == 0:
        raise ValueError("cannot fit a GP on an empty training set")
    if train_x.shape[0] != train_y.shape[0]:
        raise ValueError(f"{train_x.shape[0]} inputs but {train_y.shape[0]} targets")
    return train_x, train_y


def _has_duplicates(x: np.ndarray) -> bool:
    return np.unique(x, axis=0).shape[0] < x.shape[0]


def fit_gp(train_x, train_y, cfg: KernelConfig) -> GpModel:
    train_x, train_y = _check_xy(train_x, train_y)
    if cfg.noise_variance == 0 and _has_duplicates(train_x):
        raise ValueError("duplicate inputs are not allowed with zero noise variance")
    return _fit_from_sq(train_x, train_y, sq_dists(train_x, train_x), cfg)


def _fit_from_sq(train_x, train_y, sq, cfg) -> GpModel:
    y_mean = float(train_y.mean())
    yc = train_y - y_mean
    K = rbf_from_sq(sq, cfg)
    K[np.diag_indices_from(K)] += cfg.noise_variance
    L = _cholesky_with_jitter(K, cfg.signal_variance)
    alpha = solve_triangular(L.T, solve_triangular(L, yc, lower=True), lower=False)
    return GpModel(train_x, yc, y_mean, cfg, L, alpha)


def predict(model: GpModel, x):
    """Posterior mean and latent variance at one point or at each row of a matrix.

    A 1-D input returns a pair of floats; a 2-D input returns a pair of arrays.
    Variance is clamped at zero.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != model.dim:
        raise ValueError(f"dimension mismatch: model has d={model.dim}, got {X.shape[1]}")
    Ks = rbf_from_sq(sq_dists(X, model.train_x), model.kernel)
    mean = model.y_mean + Ks @ model.alpha
    v = solve_triangular(model.chol, Ks.T, lower=True)
    var = np.maximum(model.kernel.signal_variance - (v * v).sum(axis=0), 0.0)
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def log_marginal_likelihood(model: GpModel) -> float:
    n = model.n
    return float(-0.5 * model.train_y @ model.alpha
                 - np.log(np.diag(model.chol)).sum()
                 - 0.5 * n * LOG_2PI)


def lml_table(train_x, targets: np.ndarray, grid) -> tuple:
    """Log marginal likelihood of every grid config against every target column.

    ``targets`` is (n, m); each column is centered independently. Returns the
    config list and an array of shape (len(configs), m); configs whose
    factorization fails get ``-inf``.
    """
    train_x = np.atleast_2d(np.asarray(train_x, dtype=float))
    targets = np.asarray(targets, dtype=float)
    if targets.ndim == 1:
        targets = targets[:, None]
    configs = _as_configs(grid)
    if not configs:
        raise ValueError("hyperparameter grid is empty")
    n = train_x.shape[0]
    centered = targets - targets.mean(axis=0, keepdims=True)
    sq = sq_dists(train_x, train_x)
    dup = None
    table = np.full((len(configs), targets.shape[1]), -np.inf)
    for i, cfg in enumerate(configs):
        if cfg.noise_variance == 0:
            if dup is None:
                dup = _has_duplicates(train_x)
            if dup:
                continue
        K = rbf_from_sq(sq, cfg)
        K[np.diag_indices_from(K)] += cfg.noise_variance
        try:
            L = _cholesky_with_jitter(K, cfg.signal_variance)
        except CholeskyError:
            continue
        v = solve_triangular(L, centered, lower=True)
        table[i] = (-0.5 * (v * v).sum(axis=0)
                    - np.log(np.diag(L)).sum() - 0.5 * n * LOG_2PI)
    return configs, table


def optimize_hyperparams(train_x, train_y, grid=HyperGrid()) -> KernelConfig:
    """Grid point with the highest log marginal likelihood (earliest wins ties)."""
    train_x, train_y = _check_xy(train_x, train_y)
    configs, table = lml_table(train_x, train_y, grid)
    scores = table[:, 0]
    if not np.isfinite(scores).any():
        raise CholeskyError("all hyperparameter fits failed")
    return configs[int(np.argmax(scores))]


def fit_gp_ml(train_x, train_y, grid=HyperGrid()) -> GpModel:
    """Fit with hyperparameters chosen by :func:`optimize_hyperparams`."""
    return fit_gp(train_x, train_y, optimize_hyperparams(train_x, train_y, grid))
