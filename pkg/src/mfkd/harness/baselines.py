"""Reference searchers for the ablation and baseline comparisons."""

import numpy as np

from mfkd.harness.budget import HIGH, LOW_LOGISTIC, BudgetMeter, evaluate_index
from mfkd.search import SearchConfig, SearchResult, _result, run_levels


def run_random_search(bench, meter: BudgetMeter, rng=None) -> SearchResult:
    """Evaluate distinct random architectures at high fidelity while the next one is affordable.

    Unlike the model-based searchers this never overshoots the budget, so a
    budget below one high-fidelity cost yields an empty result.
    """
    rng = np.random.default_rng(rng)
    cost = bench.column(HIGH.cost_column)
    for idx in rng.permutation(bench.size):
        if meter.spent + cost[idx] > meter.limit:
            break
        evaluate_index(bench, meter, idx, HIGH)
    return _result(bench, meter, None, "random", False, 0, HIGH.tag)


def run_gpr_single_fidelity(bench, meter: BudgetMeter, config: SearchConfig = SearchConfig(),
                            rng=None) -> SearchResult:
    """GP-UCB on high-fidelity data only: ``n2`` random warm-up evaluations, then the same loop."""
    return run_levels(bench, meter, config, rng, [HIGH], [config.n2], "gpr")


def run_mf_no_kd(bench, meter: BudgetMeter, config: SearchConfig = SearchConfig(),
                 rng=None) -> SearchResult:
    """The multi-fidelity search fed by the logistic-loss low-fidelity column."""
    if not bench.has_column(LOW_LOGISTIC.acc_column):
        raise KeyError(f"benchmark {bench.name!r} has no {LOW_LOGISTIC.acc_column!r} column")
    return run_levels(bench, meter, config, rng, [LOW_LOGISTIC, HIGH], [config.n1, config.n2],
                      "mf-no-kd")
