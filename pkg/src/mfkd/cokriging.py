"""Autoregressive co-kriging: ``high(x) = rho * low(x) + delta(x)``.

The low-fidelity GP and the discrepancy GP ``delta`` are separate models with
no shared parameters. ``rho`` is chosen by profile likelihood: for each
candidate on a 1-D grid the discrepancy GP's hyperparameters are re-optimized
and the candidate with the best residual log marginal likelihood wins.

Designs need not be nested. The low-fidelity value used in the residual is
always the low-fidelity posterior mean at the high-fidelity inputs.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from mfkd.gp import GpModel, HyperGrid, fit_gp, fit_gp_ml, lml_table, predict

DEFAULT_RHO_GRID = tuple(np.round(np.arange(-2.0, 3.0 + 1e-9, 0.25), 10))


@dataclass(frozen=True)
class FusionGrids:
    low: HyperGrid = HyperGrid()
    delta: HyperGrid = HyperGrid()
    rho: Sequence[float] = DEFAULT_RHO_GRID


def _pick_rho(rho_grid, best_per_rho: np.ndarray) -> int:
    # max likelihood, ties toward smaller |rho|, then earlier grid position
    top = best_per_rho.max()
    tied = [j for j in range(len(rho_grid)) if best_per_rho[j] == top]
    return min(tied, key=lambda j: (abs(rho_grid[j]), j))


def fit_residual_level(prev_mean_at_x: np.ndarray, x, y, delta_grid, rho_grid):
    """Profile-likelihood fit of ``(rho, delta)`` against a lower level's mean.

    Returns ``(rho, gp_delta)``. ``gp_delta`` is trained on
    ``y - rho * prev_mean_at_x``.
    """
    y = np.asarray(y, dtype=float).ravel()
    prev_mean_at_x = np.asarray(prev_mean_at_x, dtype=float).ravel()
    rho_grid = [float(r) for r in rho_grid]
    if not rho_grid:
        raise ValueError("rho grid is empty")
    residuals = y[:, None] - np.outer(prev_mean_at_x, rho_grid)
    configs, table = lml_table(x, residuals, delta_grid)
    if not np.isfinite(table).any():
        raise np.linalg.LinAlgError("all discrepancy fits failed")
    best_cfg = np.argmax(table, axis=0)
    best_val = table[best_cfg, np.arange(len(rho_grid))]
    j = _pick_rho(rho_grid, best_val)
    rho = rho_grid[j]
    gp_delta = fit_gp(x, y - rho * prev_mean_at_x, configs[int(best_cfg[j])])
    return rho, gp_delta


@dataclass(frozen=True, eq=False)
class CoKrigingModel:
    gp_low: GpModel
    rho: float
    gp_delta: GpModel
    x1: np.ndarray
    y1: np.ndarray
    x2: np.ndarray
    y2: np.ndarray

    def predict(self, x):
        return predict_high(self, x)


def fit_cokriging(x1, y1, x2, y2, grids: FusionGrids = FusionGrids(),
                  gp_low: Optional[GpModel] = None) -> CoKrigingModel:
    """Fit the two-fidelity fusion model.

    ``gp_low`` may be passed to reuse an already fitted low-fidelity GP; it
    must have been fitted on ``(x1, y1)`` with ``grids.low``, which makes the
    result identical to a fresh fit.
    """
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    y1 = np.asarray(y1, dtype=float).ravel()
    y2 = np.asarray(y2, dtype=float).ravel()
    if x1.shape[0] == 0 or x2.shape[0] == 0:
        raise ValueError("both fidelity datasets must be non-empty")
    if x1.shape[1] != x2.shape[1]:
        raise ValueError(f"dimension mismatch: {x1.shape[1]} vs {x2.shape[1]}")
    if gp_low is None:
        gp_low = fit_gp_ml(x1, y1, grids.low)
    mu_low, _ = predict(gp_low, x2)
    rho, gp_delta = fit_residual_level(mu_low, x2, y2, grids.delta, grids.rho)
    return CoKrigingModel(gp_low, rho, gp_delta, x1, y1, x2, y2)


def predict_high(model: CoKrigingModel, x):
    """Mean ``rho*mu_low + mu_delta`` and variance ``rho^2*var_low + var_delta``."""
    m_low, v_low = predict(model.gp_low, x)
    m_d, v_d = predict(model.gp_delta, x)
    mean = model.rho * m_low + m_d
    var = np.maximum(model.rho ** 2 * v_low + v_d, 0.0)
    if np.ndim(mean) == 0:
        return float(mean), float(var)
    return mean, var


def update_high(model: CoKrigingModel, x, y: float,
                grids: FusionGrids = FusionGrids()) -> CoKrigingModel:
    """Refit with one more high-fidelity observation; low-fidelity data is untouched."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    x2 = np.vstack([model.x2, x])
    y2 = np.append(model.y2, float(y))
    return fit_cokriging(model.x1, model.y1, x2, y2, grids, gp_low=model.gp_low)


@dataclass(frozen=True, eq=False)
class MultiLevelModel:
    """Recursive stack: level 0 is a plain GP, level l adds ``rho_l * prev + delta_l``."""

    base: GpModel
    levels: tuple  # ((rho, gp_delta, x, y), ...)

    @property
    def rhos(self) -> list:
        return [lvl[0] for lvl in self.levels]

    def predict(self, x, level: Optional[int] = None):
        return predict_multilevel(self, x, level)


def predict_multilevel(model: MultiLevelModel, x, level: Optional[int] = None):
    """Posterior moments at ``level`` (default: the top level)."""
    top = len(model.levels) if level is None else level
    mean, var = predict(model.base, x)
    for rho, gp_delta, _, _ in model.levels[:top]:
        m_d, v_d = predict(gp_delta, x)
        mean = rho * mean + m_d
        var = np.maximum(rho ** 2 * var + v_d, 0.0)
    if np.ndim(mean) == 0:
        return float(mean), float(var)
    return mean, var


def fit_multilevel(datasets, grids: FusionGrids = FusionGrids(),
                   base: Optional[GpModel] = None,
                   level_grids: Optional[Sequence[FusionGrids]] = None) -> MultiLevelModel:
    """Fit a Markov chain of fidelities, cheapest first.

    ``datasets`` is an ordered sequence of ``(X_l, y_l)``. ``level_grids``
    optionally gives per-level grids for levels 1..L-1; ``grids.low`` is used
    for the base GP.
    """
    datasets = list(datasets)
    if len(datasets) < 2:
        raise ValueError("multi-level fusion needs at least two fidelity levels")
    for X, y in datasets:
        if len(y) == 0:
            raise ValueError("every fidelity level needs at least one observation")
    x0, y0 = datasets[0]
    if base is None:
        base = fit_gp_ml(x0, y0, grids.low)
    model = MultiLevelModel(base, ())
    for i, (X, y) in enumerate(datasets[1:]):
        g = grids if level_grids is None else level_grids[i]
        X = np.atleast_2d(np.asarray(X, dtype=float))
        prev_mean, _ = predict_multilevel(model, X)
        rho, gp_delta = fit_residual_level(prev_mean, X, y, g.delta, g.rho)
        model = MultiLevelModel(base, model.levels + ((rho, gp_delta, X, np.asarray(y, float)),))
    return model
