"""Repeated seeded runs of several searchers under one budget, with a significance test."""

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from mfkd.harness.baselines import run_gpr_single_fidelity, run_mf_no_kd, run_random_search
from mfkd.harness.budget import BudgetMeter
from mfkd.search import SearchConfig, run_mfkd, with_budget

ALPHA = 0.05


def _mfkd(bench, config, seed):
    return run_mfkd(bench, config, seed)


def _random(bench, config, seed):
    return run_random_search(bench, BudgetMeter(config.budget), seed)


def _gpr(bench, config, seed):
    return run_gpr_single_fidelity(bench, BudgetMeter(config.budget), config, seed)


def _mf_no_kd(bench, config, seed):
    return run_mf_no_kd(bench, BudgetMeter(config.budget), config, seed)


METHODS = {"mfkd": _mfkd, "random": _random, "gpr": _gpr, "mf-no-kd": _mf_no_kd}


def run_method(name: str, bench, config: SearchConfig, seed: int):
    try:
        runner = METHODS[name]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; choose from {sorted(METHODS)}") from None
    return runner(bench, config, seed)


def _run_summary(args):
    name, bench, config, seed = args
    res = run_method(name, bench, config, seed)
    return {
        "best_arch": None if res.empty else str(res.best_arch),
        "best_val_acc": None if res.empty else res.best_val_acc,
        "best_test_acc": None if res.empty else res.best_test_acc,
        "evaluations": len(res.trajectory),
        "ucb_iterations": res.ucb_iterations,
        "spent": res.trajectory[-1].spent_after if res.trajectory else 0.0,
        "warmup_over_budget": res.warmup_over_budget,
        "curve": res.best_so_far(bench),
        "trajectory": [(r.index, r.fidelity, r.val_acc, r.cost, r.spent_after, r.over_budget)
                       for r in res.trajectory],
    }


def run_replicates(name: str, bench, config: SearchConfig, runs: int, seed: int,
                   parallel: int = 1) -> list:
    """Run ``runs`` replicates with seeds ``seed + i``; results come back in run order."""
    jobs = [(name, bench, config, seed + i) for i in range(runs)]
    if parallel > 1 and runs > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(_run_summary, jobs))
    return [_run_summary(job) for job in jobs]


@dataclass
class MethodSummary:
    name: str
    values: list
    runs: list = field(repr=False, default_factory=list)

    @property
    def valid(self) -> np.ndarray:
        return np.array([v for v in self.values if v is not None], dtype=float)

    @property
    def mean(self) -> float:
        v = self.valid
        return float(v.mean()) if v.size else float("nan")

    @property
    def std(self) -> float:
        v = self.valid
        return float(v.std(ddof=1)) if v.size > 1 else 0.0


@dataclass
class Report:
    methods: list
    budget: float
    seed: int
    significance: Optional[dict] = None
    note: str = ""

    def by_name(self, name: str) -> MethodSummary:
        for m in self.methods:
            if m.name == name:
                return m
        raise KeyError(name)

    def curves(self) -> list:
        rows = []
        for m in self.methods:
            for run, res in enumerate(m.runs):
                for spent, _, test in res["curve"]:
                    rows.append((m.name, run, spent, test))
        return rows

    def to_dict(self) -> dict:
        return {
            "budget": self.budget,
            "seed": self.seed,
            "methods": [{"name": m.name, "runs": len(m.values), "mean_best_test_acc": _num(m.mean),
                         "std_best_test_acc": _num(m.std), "best_test_acc": m.values}
                        for m in self.methods],
            "significance": self.significance,
            "note": self.note,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        width = max(len("method"), *(len(m.name) for m in self.methods))
        lines = [f"{'method':<{width}}  {'runs':>4}  {'mean %':>8}  {'std %':>7}"]
        for m in sorted(self.methods, key=lambda m: -_sort_key(m.mean)):
            lines.append(f"{m.name:<{width}}  {len(m.values):>4}  {100 * m.mean:8.3f}  {100 * m.std:7.3f}")
        if self.significance is not None:
            s = self.significance
            verdict = "significant" if s["significant"] else "not significant"
            lines.append(f"{s['first']} vs {s['second']}: Welch t={_fmt(s['t'])}, "
                         f"p={_fmt(s['p_value'])} -> {verdict} at alpha={ALPHA}")
        if self.note:
            lines.append(self.note)
        return "\n".join(lines) + "\n"


def _num(x):
    return None if x is None or (isinstance(x, float) and not math.isfinite(x)) else x


def _fmt(x):
    return "nan" if x is None else f"{x:.4g}"


def _sort_key(x):
    return -math.inf if math.isnan(x) else x


def welch_test(a, b) -> tuple:
    """Two-sided Welch t-test; ``(t, p)`` with ``p = 1`` when both samples are constant and equal."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.var() == 0 and b.var() == 0:
        return (0.0, 1.0) if a.mean() == b.mean() else (math.copysign(math.inf, a.mean() - b.mean()), 0.0)
    res = stats.ttest_ind(a, b, equal_var=False)
    return float(res.statistic), float(res.pvalue)


def compare_methods(bench, methods, runs: int, budget: float, rng: int = 0,
                    config: SearchConfig = SearchConfig(), parallel: int = 1) -> Report:
    """Per-method mean/std of best test accuracy over ``runs`` paired seeds.

    Replicate ``i`` of every method uses seed ``rng + i``. With at least two
    runs a Welch test compares the two methods with the highest means.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    methods = list(methods)
    if len(set(methods)) != len(methods):
        raise ValueError("method names must be unique")
    for name in methods:
        if name not in METHODS:
            raise ValueError(f"unknown method {name!r}; choose from {sorted(METHODS)}")
    seed = int(rng)
    config = with_budget(config, budget)
    summaries = []
    for name in methods:
        results = run_replicates(name, bench, config, runs, seed, parallel)
        summaries.append(MethodSummary(name, [r["best_test_acc"] for r in results], results))

    report = Report(summaries, float(budget), seed)
    if len(summaries) >= 2 and runs >= 2:
        ranked = sorted(summaries, key=lambda m: -_sort_key(m.mean))
        first, second = ranked[0], ranked[1]
        t, p = welch_test(first.valid, second.valid)
        report.significance = {"first": first.name, "second": second.name, "t": _num(t),
                               "p_value": _num(p), "significant": bool(p < ALPHA)}
    elif len(summaries) >= 2:
        report.note = "significance test skipped: needs at least 2 runs per method"
    return report
