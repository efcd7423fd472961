import json

import numpy as np
import pytest

from mfkd.harness.benchmark import (Benchmark, CalibrationError, IncompleteTableError,
                                    calibrate_noise, dump_benchmark, generate_synthetic, gp_surface,
                                    load_benchmark, save_benchmark)
from mfkd.harness.budget import BudgetMeter, evaluate
from mfkd.harness.stats import correlate_fidelities, kendall_tau
from mfkd.space import SpaceSpec, encode_indices
from oracles import dense_gram

HEADER = {"spec": {"num_edges": 2, "num_ops": 2}, "name": "tiny"}


def _row(arch, hi=0.5):
    return {"arch": arch, "val_acc_low": 0.3, "val_acc_high": hi, "test_acc_final": 0.6,
            "cost_low": 1.0, "cost_high": 10.0}


def _write(tmp_path, rows, header=HEADER):
    p = tmp_path / "bench.jsonl"
    p.write_text("\n".join(json.dumps(r) for r in [header] + rows) + "\n")
    return p


ARCHS = ["0,0", "0,1", "1,0", "1,1"]


class TestLoad:
    def test_well_formed(self, tmp_path):
        b = load_benchmark(_write(tmp_path, [_row(a, 0.1 * i) for i, a in enumerate(ARCHS)]))
        assert b.size == 4 and len(b.rows) == 4
        assert b.row("1,0").val_acc_high == pytest.approx(0.2)
        assert b.name == "tiny"

    def test_missing_row_named(self, tmp_path):
        p = _write(tmp_path, [_row(a) for a in ARCHS if a != "1,0"])
        with pytest.raises(IncompleteTableError, match='"1,0"') as err:
            load_benchmark(p)
        assert err.value.missing == ["1,0"]

    def test_out_of_range(self, tmp_path):
        rows = [_row(a) for a in ARCHS]
        rows[2]["val_acc_high"] = 1.2
        with pytest.raises(ValueError, match="out of range"):
            load_benchmark(_write(tmp_path, rows))

    def test_duplicate(self, tmp_path):
        with pytest.raises(ValueError, match="duplicate"):
            load_benchmark(_write(tmp_path, [_row(a) for a in ARCHS] + [_row("0,1")]))

    def test_parse_errors(self, tmp_path):
        p = tmp_path / "bad.jsonl"
        p.write_text(json.dumps(HEADER) + "\n{not json\n")
        with pytest.raises(ValueError, match="parse"):
            load_benchmark(p)
        with pytest.raises(ValueError):
            load_benchmark(_write(tmp_path, [_row("0,2")]))

    def test_percent(self, tmp_path):
        rows = [dict(_row(a), val_acc_high=55.0, val_acc_low=30.0, test_acc_final=60.0) for a in ARCHS]
        b = load_benchmark(_write(tmp_path, rows), percent=True)
        assert b.row("0,0").val_acc_high == pytest.approx(0.55)
        assert b.row("0,0").cost_high == 10.0

    def test_round_trip(self, tmp_path):
        b = generate_synthetic(SpaceSpec(3, 3), 0.47, rng=1)
        save_benchmark(b, tmp_path / "s.jsonl")
        b2 = load_benchmark(tmp_path / "s.jsonl")
        assert dump_benchmark(b2) == dump_benchmark(b)
        for k in b.columns:
            np.testing.assert_array_equal(b.column(k), b2.column(k))

    def test_unknown_column(self):
        b = generate_synthetic(SpaceSpec(2, 3), 0.47, rng=0, logistic_tau=None)
        assert not b.has_column("val_acc_low_logistic")
        with pytest.raises(KeyError):
            b.column("val_acc_low_logistic")


class TestSynthetic:
    @pytest.mark.parametrize("target", [0.47, 0.17])
    @pytest.mark.parametrize("spec", [SpaceSpec(6, 3), SpaceSpec(3, 10)])
    def test_tau_closure(self, target, spec):
        b = generate_synthetic(spec, target, rng=3, logistic_tau=None)
        assert abs(correlate_fidelities(b) - target) <= 0.02

    def test_logistic_column(self):
        b = generate_synthetic(SpaceSpec(6, 3), 0.47, rng=4, logistic_tau=0.17)
        assert abs(correlate_fidelities(b, "val_acc_low_logistic") - 0.17) <= 0.02

    def test_deterministic(self):
        a = generate_synthetic(SpaceSpec(4, 4), 0.47, rng=9)
        b = generate_synthetic(SpaceSpec(4, 4), 0.47, rng=9)
        assert dump_benchmark(a) == dump_benchmark(b)
        c = generate_synthetic(SpaceSpec(4, 4), 0.47, rng=10)
        assert dump_benchmark(a) != dump_benchmark(c)

    def test_ranges_and_costs(self):
        b = generate_synthetic(SpaceSpec(4, 4), 0.47, rng=2, cost_model=(2.0, 30.0))
        for k in ("val_acc_low", "val_acc_high", "test_acc_final", "val_acc_low_logistic"):
            col = b.column(k)
            assert col.min() == pytest.approx(0.3) and col.max() == pytest.approx(0.95)
        assert set(b.column("cost_low")) == {2.0} and set(b.column("cost_high")) == {30.0}

    def test_identical_fidelities_correlate_perfectly(self):
        b = generate_synthetic(SpaceSpec(3, 3), 0.47, rng=0)
        cols = dict(b.columns)
        cols["val_acc_low"] = cols["val_acc_high"]
        assert correlate_fidelities(Benchmark(b.spec, cols)) == 1.0

    def test_gp_surface_matches_dense_cholesky(self):
        spec = SpaceSpec(3, 3)
        X = encode_indices(np.arange(spec.size), spec)
        L = np.linalg.cholesky(dense_gram(X, X, 2.0, 1.0))
        z = np.random.default_rng(0).standard_normal(spec.size)
        np.testing.assert_allclose(gp_surface(spec, z), L @ z, atol=1e-10)

    def test_calibration_failure(self):
        # four points cannot realize a tau within 0.02 of 0.5
        signal = np.array([0.0, 1.0, 2.0, 3.0])
        noise = np.random.default_rng(0).standard_normal(4)
        with pytest.raises(CalibrationError):
            calibrate_noise(signal, noise, 0.5)

    def test_bad_target(self):
        with pytest.raises(ValueError):
            generate_synthetic(SpaceSpec(2, 2), 1.0)


class TestEvaluate:
    def setup_method(self):
        self.bench = generate_synthetic(SpaceSpec(3, 3), 0.47, rng=0, cost_model=(1.5, 12.25))

    def test_additivity(self):
        m = BudgetMeter(100.0)
        r1 = evaluate(self.bench, m, "0,1,2", "low")
        r2 = evaluate(self.bench, m, "2,1,0", "high")
        assert m.spent == 1.5 + 12.25
        assert r2.spent_after == m.spent and r1.spent_after == 1.5
        assert m.spent == sum(r.cost for r in m.records)

    def test_tags(self):
        m = BudgetMeter(100.0)
        a = evaluate(self.bench, m, "1,1,1", "low")
        b = evaluate(self.bench, m, "1,1,1", "high")
        assert (a.fidelity, b.fidelity) == ("low", "high")
        assert a.arch == b.arch
        assert a.val_acc == self.bench.row("1,1,1").val_acc_low
        assert b.val_acc == self.bench.row("1,1,1").val_acc_high

    def test_over_budget_flag(self):
        m = BudgetMeter(13.0)
        assert not evaluate(self.bench, m, "0,0,0", "high").over_budget
        r = evaluate(self.bench, m, "0,0,1", "high")
        assert r.over_budget and m.exhausted
        assert evaluate(self.bench, m, "0,0,2", "low").over_budget
        assert len(m.records) == 3

    def test_unknown(self):
        with pytest.raises(KeyError):
            evaluate(self.bench, BudgetMeter(1.0), "0,0,3")
        with pytest.raises(ValueError):
            evaluate(self.bench, BudgetMeter(1.0), "0,0,0", "medium")

    def test_low_high_tau_close_to_kendall(self):
        b = self.bench
        assert correlate_fidelities(b) == kendall_tau(b.column("val_acc_low"), b.column("val_acc_high"))
