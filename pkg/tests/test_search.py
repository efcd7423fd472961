import numpy as np
import pytest

from mfkd.cokriging import FusionGrids, fit_cokriging
from mfkd.gp import HyperGrid, KernelConfig
from mfkd.harness.baselines import run_gpr_single_fidelity, run_mf_no_kd, run_random_search
from mfkd.harness.benchmark import Benchmark, generate_synthetic
from mfkd.harness.budget import HIGH, LOW, BudgetMeter, Fidelity
from mfkd.harness.compare import METHODS, compare_methods, welch_test
from mfkd.search import (SearchConfig, run_mfkd, run_mfkd_multilevel, ucb_scores, ucb_select)
from mfkd.space import SpaceSpec, encode_indices


class _Fixed:
    def __init__(self, mean, var):
        self.mean, self.var = np.asarray(mean, float), np.asarray(var, float)

    def predict(self, X):
        return self.mean[: len(X)], self.var[: len(X)]


SMALL = SearchConfig(n1=20, n2=5, candidate_pool=50, budget=20 + 60 + 8 * 12.0)


@pytest.fixture(scope="module")
def bench():
    return generate_synthetic(SpaceSpec(3, 5), 0.47, rng=5)


class TestUcb:
    def test_variance_term(self):
        assert ucb_select(_Fixed([0.5, 0.4], [0.0, 0.2]), np.zeros((2, 3)), 1.0) == 1

    def test_beta_zero_is_mean_argmax(self):
        assert ucb_select(_Fixed([0.5, 0.4], [0.0, 0.2]), np.zeros((2, 3)), 0.0) == 0

    def test_ties_lowest_index(self):
        assert ucb_select(_Fixed([0.3] * 4, [0.1] * 4), np.zeros((4, 2)), 1.0) == 0

    def test_stddev_mode(self):
        m = _Fixed([0.5, 0.4], [0.0, 0.04])
        assert ucb_select(m, np.zeros((2, 1)), 1.0) == 0
        assert ucb_select(m, np.zeros((2, 1)), 1.0, "stddev") == 1

    def test_empty(self):
        with pytest.raises(ValueError):
            ucb_select(_Fixed([], []), np.zeros((0, 2)), 1.0)

    def test_argmax_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            s = ucb_scores(rng.normal(size=30), rng.uniform(size=30), 1.0)
            assert np.argmax(np.exp(3 * s) + 7) == np.argmax(s)

    def test_exact_model_picks_optimum(self, bench):
        spec = bench.spec
        X = encode_indices(np.arange(spec.size), spec)
        tiny = HyperGrid((1.0, 2.0), (0.1, 1.0), (1e-8,))
        model = fit_cokriging(X, bench.column("val_acc_low"), X, bench.column("val_acc_high"),
                              FusionGrids(tiny, tiny))
        assert ucb_select(model, X, 0.0) == int(np.argmax(bench.column("val_acc_high")))


class TestRunMfkd:
    def test_budget_equal_to_warmup(self, bench):
        cfg = SearchConfig(n1=10, n2=4, budget=10 * 1.0 + 4 * 12.0)
        res = run_mfkd(bench, cfg, 3)
        assert res.ucb_iterations == 0
        assert len(res.trajectory) == 14
        highs = [r for r in res.trajectory if r.fidelity == "high"]
        assert res.best_val_acc == max(r.val_acc for r in highs)
        assert not res.warmup_over_budget

    def test_warmup_over_budget(self, bench):
        res = run_mfkd(bench, SearchConfig(n1=10, n2=4, budget=20.0), 3)
        assert res.warmup_over_budget and res.ucb_iterations == 0
        assert not res.empty

    def test_exhaustive_small_space(self):
        b = generate_synthetic(SpaceSpec(1, 10), 0.47, rng=1, logistic_tau=None)
        res = run_mfkd(b, SearchConfig(n1=4, n2=2, budget=1e4), 0)
        assert res.best_index == int(np.argmax(b.column("val_acc_high")))
        assert res.ucb_iterations == 8

    @pytest.mark.parametrize("seed", range(5))
    def test_invariants(self, bench, seed):
        res = run_mfkd(bench, SMALL, seed)
        traj = res.trajectory
        assert len(traj) == SMALL.n1 + SMALL.n2 + res.ucb_iterations
        spent = [r.spent_after for r in traj]
        assert spent == sorted(spent)
        for tag in ("low", "high"):
            seen = [r.index for r in traj if r.fidelity == tag]
            assert len(seen) == len(set(seen))
        best = [v for _, v, _ in res.best_so_far(bench)]
        assert best == list(np.maximum.accumulate(best))
        highs = [r for r in traj if r.fidelity == "high"]
        assert res.best_val_acc == max(r.val_acc for r in highs)
        assert res.best_test_acc == bench.column("test_acc_final")[res.best_index]
        assert sum(1 for r in traj if r.over_budget and not r is traj[-1]) == 0

    def test_deterministic(self, bench):
        a = run_mfkd(bench, SMALL, 11)
        b = run_mfkd(bench, SMALL, 11)
        assert [(r.index, r.fidelity) for r in a.trajectory] == [(r.index, r.fidelity) for r in b.trajectory]

    def test_config_validation(self):
        for kwargs in (dict(n1=0), dict(candidate_pool=0), dict(budget=0), dict(ucb_beta=-1),
                       dict(uncertainty="sd")):
            with pytest.raises(ValueError):
                SearchConfig(**kwargs)


class TestMultiLevelSearch:
    def test_two_levels_match_run_mfkd(self, bench):
        a = run_mfkd(bench, SMALL, 4)
        b = run_mfkd_multilevel(bench, [LOW, HIGH], SMALL, 4)
        assert a.trajectory == b.trajectory

    def test_one_level_rejected(self, bench):
        with pytest.raises(ValueError):
            run_mfkd_multilevel(bench, [HIGH], SMALL, 0)

    def test_redundant_middle_level(self):
        b = generate_synthetic(SpaceSpec(3, 6), 0.47, rng=8, logistic_tau=None)
        cols = dict(b.columns)
        cols["val_acc_mid"] = cols["val_acc_high"]
        cols["cost_mid"] = cols["cost_low"]
        b3 = Benchmark(b.spec, cols, "three-level")
        mid = Fidelity("mid", "val_acc_mid", "cost_mid")
        cfg = SearchConfig(n1=30, n2=10, candidate_pool=200, budget=30 + 10 + 120 + 12 * 12.0)
        two = [run_mfkd(b3, cfg, s).best_test_acc for s in range(50)]
        three = [run_mfkd_multilevel(b3, [LOW, mid, HIGH], cfg, s, warmup_sizes=[30, 10, 10]).best_test_acc
                 for s in range(50)]
        assert abs(np.mean(three) - np.mean(two)) <= np.std(two, ddof=1)


class TestBaselines:
    def test_random_empty(self, bench):
        res = run_random_search(bench, BudgetMeter(11.0), 0)
        assert res.empty and res.trajectory == []

    def test_random_exhaustion(self, bench):
        res = run_random_search(bench, BudgetMeter(12.0 * bench.size), 0)
        assert len(res.trajectory) == bench.size
        assert res.best_index == int(np.argmax(bench.column("val_acc_high")))

    def test_random_never_overshoots(self, bench):
        m = BudgetMeter(100.0)
        res = run_random_search(bench, m, 1)
        assert len(res.trajectory) == 8 and m.spent <= m.limit

    def test_random_deterministic(self, bench):
        a = run_random_search(bench, BudgetMeter(200.0), 5)
        b = run_random_search(bench, BudgetMeter(200.0), 5)
        assert a.trajectory == b.trajectory

    def test_gpr_warmup_only(self, bench):
        res = run_gpr_single_fidelity(bench, BudgetMeter(5 * 12.0), SMALL, 0)
        assert res.ucb_iterations == 0 and len(res.trajectory) == 5
        assert all(r.fidelity == "high" for r in res.trajectory)

    def test_gpr_deterministic(self, bench):
        a = run_gpr_single_fidelity(bench, BudgetMeter(150.0), SMALL, 2)
        b = run_gpr_single_fidelity(bench, BudgetMeter(150.0), SMALL, 2)
        assert a.trajectory == b.trajectory

    def test_mf_no_kd_reads_logistic_column(self, bench):
        res = run_mf_no_kd(bench, BudgetMeter(SMALL.budget), SMALL, 3)
        logistic = bench.column("val_acc_low_logistic")
        for r in res.trajectory:
            if r.fidelity == "low":
                assert r.val_acc == logistic[r.index]
        again = run_mf_no_kd(bench, BudgetMeter(SMALL.budget), SMALL, 3)
        assert res.trajectory == again.trajectory

    def test_mf_no_kd_missing_column(self):
        b = generate_synthetic(SpaceSpec(2, 3), 0.47, rng=0, logistic_tau=None)
        with pytest.raises(KeyError):
            run_mf_no_kd(b, BudgetMeter(100.0), SMALL, 0)


class TestCompare:
    def test_single_run(self, bench):
        rep = compare_methods(bench, ["mfkd"], 1, SMALL.budget, rng=6, config=SMALL)
        res = run_mfkd(bench, SMALL, 6)
        assert rep.by_name("mfkd").values == [res.best_test_acc]
        assert rep.significance is None

    def test_one_run_two_methods_notes_skip(self, bench):
        rep = compare_methods(bench, ["mfkd", "random"], 1, SMALL.budget, rng=0, config=SMALL)
        assert rep.significance is None and "skipped" in rep.note
        assert "skipped" in rep.to_text()

    def test_identical_methods_not_significant(self, bench, monkeypatch):
        monkeypatch.setitem(METHODS, "mfkd-copy", METHODS["mfkd"])
        rep = compare_methods(bench, ["mfkd", "mfkd-copy"], 5, SMALL.budget, rng=0, config=SMALL)
        assert rep.by_name("mfkd").values == rep.by_name("mfkd-copy").values
        assert rep.significance["p_value"] == 1.0 and not rep.significance["significant"]

    def test_parallel_matches_serial(self, bench):
        a = compare_methods(bench, ["mfkd", "random"], 3, SMALL.budget, rng=2, config=SMALL)
        b = compare_methods(bench, ["mfkd", "random"], 3, SMALL.budget, rng=2, config=SMALL, parallel=2)
        assert a.to_json() == b.to_json()

    def test_curves(self, bench):
        rep = compare_methods(bench, ["random", "gpr"], 2, SMALL.budget, rng=0, config=SMALL)
        rows = rep.curves()
        assert {r[0] for r in rows} == {"random", "gpr"}
        for name in ("random", "gpr"):
            for run in (0, 1):
                seq = [r[2] for r in rows if r[0] == name and r[1] == run]
                assert seq == sorted(seq)

    def test_errors(self, bench):
        with pytest.raises(ValueError):
            compare_methods(bench, ["mfkd"], 0, 100.0)
        with pytest.raises(ValueError):
            compare_methods(bench, ["mfkd", "bohb"], 1, 100.0)

    def test_welch(self):
        assert welch_test([1.0, 1.0], [1.0, 1.0]) == (0.0, 1.0)
        t, p = welch_test([0.1, 0.2, 0.3, 0.25], [0.9, 0.8, 0.85, 0.95])
        assert t < 0 and p < 0.05


@pytest.mark.slow
class TestDirectional:
    def test_gpr_not_better_than_mfkd(self, desk_report):
        assert desk_report.by_name("gpr").mean <= desk_report.by_name("mfkd").mean

    def test_kd_column_not_worse_than_logistic(self, desk_report):
        assert desk_report.by_name("mfkd").mean >= desk_report.by_name("mf-no-kd").mean
