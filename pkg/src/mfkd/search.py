"""Multi-fidelity architecture search with co-kriging and UCB selection.

The loop: random warm-up at each fidelity (cheapest first), fit the fusion
model, then repeatedly score a random candidate pool with
``mean + beta * uncertainty`` under the top-fidelity posterior, evaluate the
winner at top fidelity and refit, while budget remains. The returned
architecture is the best top-fidelity *validation* result seen, with its
final test accuracy reported alongside.
"""

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from mfkd.cokriging import FusionGrids, fit_cokriging, fit_multilevel, update_high
from mfkd.gp import HyperGrid, fit_gp_ml
from mfkd.harness.budget import HIGH, LOW, LOW_LOGISTIC, BudgetMeter, Fidelity, evaluate_index
from mfkd.space import Architecture, arch_at, encode_indices, sample_indices

UNCERTAINTY_MODES = ("variance", "stddev")


@dataclass(frozen=True)
class SearchConfig:
    n1: int = 100
    n2: int = 20
    e1: int = 1
    e2: int = 12
    candidate_pool: int = 5000
    budget: float = 12000.0
    ucb_beta: float = 1.0
    uncertainty: str = "variance"
    grids: FusionGrids = FusionGrids()

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("n1 and n2 must be at least 1")
        if self.candidate_pool < 1:
            raise ValueError("candidate_pool must be at least 1")
        if not self.budget > 0:
            raise ValueError("budget must be positive")
        if not self.ucb_beta >= 0:
            raise ValueError("ucb_beta must be non-negative")
        if self.uncertainty not in UNCERTAINTY_MODES:
            raise ValueError(f"uncertainty must be one of {UNCERTAINTY_MODES}")

    def to_dict(self) -> dict:
        return {"n1": self.n1, "n2": self.n2, "e1": self.e1, "e2": self.e2,
                "candidate_pool": self.candidate_pool, "budget": self.budget,
                "ucb_beta": self.ucb_beta, "uncertainty": self.uncertainty,
                "rho_grid": list(self.grids.rho)}


@dataclass
class SearchResult:
    best_arch: Optional[Architecture]
    best_val_acc: float
    best_test_acc: float
    trajectory: list
    model_final: object = None
    method: str = "mfkd"
    warmup_over_budget: bool = False
    ucb_iterations: int = 0
    best_index: int = -1
    top_fidelity: str = "high"

    @property
    def empty(self) -> bool:
        return self.best_arch is None

    def best_so_far(self, bench) -> list:
        """``(spent_after, best_val, test_acc_of_best)`` after each top-fidelity evaluation."""
        test = bench.column("test_acc_final")
        out = []
        best_val, best_test = -np.inf, np.nan
        for rec in self.trajectory:
            if rec.fidelity != self.top_fidelity:
                continue
            if rec.val_acc > best_val:
                best_val, best_test = rec.val_acc, float(test[rec.index])
            out.append((rec.spent_after, best_val, best_test))
        return out


def ucb_scores(mean, var, ucb_beta: float, uncertainty: str = "variance") -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    if uncertainty == "variance":
        return mean + ucb_beta * var
    if uncertainty == "stddev":
        return mean + ucb_beta * np.sqrt(var)
    raise ValueError(f"unknown uncertainty mode {uncertainty!r}")


def ucb_select(model, candidates, ucb_beta: float, uncertainty: str = "variance") -> int:
    """Index of the candidate maximizing the UCB score (lowest index on ties).

    ``model`` is anything with ``predict(X) -> (mean, var)``; the literal
    default scores ``mean + beta * variance``.
    """
    X = np.asarray(candidates, dtype=float)
    if X.ndim == 1 and X.size:
        X = X[None, :]
    if X.shape[0] == 0:
        raise ValueError("candidate set is empty")
    mean, var = model.predict(X)
    return int(np.argmax(ucb_scores(mean, var, ucb_beta, uncertainty)))


def best_high(bench, trajectory, tag: str = "high") -> tuple:
    """(index, val, test) of the first top-fidelity record with the maximal validation score."""
    best = None
    for rec in trajectory:
        if rec.fidelity == tag and (best is None or rec.val_acc > best.val_acc):
            best = rec
    if best is None:
        return -1, np.nan, np.nan
    return best.index, best.val_acc, float(bench.column("test_acc_final")[best.index])


def _result(bench, meter, model, method, warmup_over, iterations, tag) -> SearchResult:
    idx, val, test = best_high(bench, meter.records, tag)
    arch = None if idx < 0 else arch_at(idx, bench.spec)
    return SearchResult(arch, val, test, list(meter.records), model, method,
                        warmup_over, iterations, idx, tag)


class _GpSurrogate:
    """Single-fidelity GP refit from scratch after every observation."""

    def __init__(self, grid: HyperGrid, x, y):
        self.grid = grid
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.model = fit_gp_ml(self.x, self.y, grid)

    def predict(self, X):
        return self.model.predict(X)

    def update(self, x, y):
        return _GpSurrogate(self.grid, np.vstack([self.x, x[None, :]]), np.append(self.y, y))


class _CoKrigingSurrogate:
    def __init__(self, grids: FusionGrids, model):
        self.grids = grids
        self.model = model

    def predict(self, X):
        return self.model.predict(X)

    def update(self, x, y):
        return _CoKrigingSurrogate(self.grids, update_high(self.model, x, y, self.grids))


class _MultiLevelSurrogate:
    def __init__(self, grids: FusionGrids, datasets, base=None):
        self.grids = grids
        self.datasets = datasets
        self.model = fit_multilevel(datasets, grids, base=base)

    def predict(self, X):
        return self.model.predict(X)

    def update(self, x, y):
        *lower, (X, Y) = self.datasets
        data = lower + [(np.vstack([X, x[None, :]]), np.append(Y, y))]
        return _MultiLevelSurrogate(self.grids, data, base=self.model.base)


def run_levels(bench, meter: BudgetMeter, config: SearchConfig, rng,
               levels: Sequence[Fidelity], warmup_sizes: Sequence[int],
               method: str = "mfkd") -> SearchResult:
    """Shared search loop over one or more fidelity levels, cheapest first.

    One level is plain GP-UCB; two levels use co-kriging; more levels use the
    recursive multi-level model. UCB always targets the last level.
    """
    rng = np.random.default_rng(rng)
    spec = bench.spec
    levels = list(levels)
    if len(levels) != len(warmup_sizes):
        raise ValueError("one warm-up size is needed per level")
    for lvl in levels:
        bench.column(lvl.acc_column)
        bench.column(lvl.cost_column)
    top = levels[-1]

    data = []
    for lvl, n in zip(levels, warmup_sizes):
        idx = sample_indices(spec, n, rng)
        vals = np.array([evaluate_index(bench, meter, i, lvl).val_acc for i in idx])
        data.append((encode_indices(idx, spec), vals, idx))
    warmup_over = meter.spent > meter.limit

    if len(levels) == 1:
        surrogate = _GpSurrogate(config.grids.delta, data[0][0], data[0][1])
    elif len(levels) == 2:
        model = fit_cokriging(data[0][0], data[0][1], data[1][0], data[1][1], config.grids)
        surrogate = _CoKrigingSurrogate(config.grids, model)
    else:
        surrogate = _MultiLevelSurrogate(config.grids, [(x, y) for x, y, _ in data])

    evaluated = np.zeros(spec.size, dtype=bool)
    evaluated[data[-1][2]] = True
    iterations = 0
    while meter.spent < meter.limit:
        remaining = np.flatnonzero(~evaluated)
        if remaining.size == 0:
            break
        if config.candidate_pool >= remaining.size:
            pool = remaining
        else:
            pool = rng.choice(remaining, size=config.candidate_pool, replace=False)
        X = encode_indices(pool, spec)
        j = ucb_select(surrogate, X, config.ucb_beta, config.uncertainty)
        chosen = int(pool[j])
        rec = evaluate_index(bench, meter, chosen, top)
        evaluated[chosen] = True
        surrogate = surrogate.update(X[j], rec.val_acc)
        iterations += 1

    return _result(bench, meter, surrogate.model, method, warmup_over, iterations, top.tag)


def run_mfkd(bench, config: SearchConfig = SearchConfig(), rng=None,
             meter: Optional[BudgetMeter] = None) -> SearchResult:
    """Two-fidelity search: KD low-fidelity warm-up, high-fidelity warm-up, co-kriging UCB loop."""
    meter = BudgetMeter(config.budget) if meter is None else meter
    return run_levels(bench, meter, config, rng, [LOW, HIGH], [config.n1, config.n2], "mfkd")


def run_mfkd_multilevel(bench, levels: Sequence[Fidelity], config: SearchConfig = SearchConfig(),
                        rng=None, warmup_sizes: Optional[Sequence[int]] = None,
                        meter: Optional[BudgetMeter] = None) -> SearchResult:
    """Search over two or more fidelity columns of one benchmark, cheapest first.

    Warm-up sizes default to ``n1`` for every level below the top and ``n2``
    for the top. With two levels this is exactly :func:`run_mfkd`.
    """
    levels = list(levels)
    if len(levels) < 2:
        raise ValueError("multi-level search needs at least two fidelity levels")
    if warmup_sizes is None:
        warmup_sizes = [config.n1] * (len(levels) - 1) + [config.n2]
    meter = BudgetMeter(config.budget) if meter is None else meter
    return run_levels(bench, meter, config, rng, levels, warmup_sizes, "mfkd-multilevel")


def with_budget(config: SearchConfig, budget: float) -> SearchConfig:
    return replace(config, budget=float(budget))
