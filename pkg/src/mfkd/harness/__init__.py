from mfkd.harness.stats import correlate_fidelities, count_inversions, kendall_tau
from mfkd.harness.benchmark import (BenchRow, Benchmark, CalibrationError, IncompleteTableError,
                                    generate_synthetic, load_benchmark, save_benchmark)
from mfkd.harness.budget import (HIGH, LOW, LOW_LOGISTIC, BudgetMeter, EvalRecord, Fidelity,
                                 evaluate)

__all__ = [
    "BenchRow", "Benchmark", "BudgetMeter", "CalibrationError", "EvalRecord", "Fidelity", "HIGH",
    "IncompleteTableError", "LOW", "LOW_LOGISTIC", "correlate_fidelities", "count_inversions",
    "evaluate", "generate_synthetic", "kendall_tau", "load_benchmark", "save_benchmark",
]
