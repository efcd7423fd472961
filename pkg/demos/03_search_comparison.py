"""Multi-fidelity search against its ablations on a synthetic benchmark.

Every method gets the same simulated budget: the warm-up of the multi-fidelity
search plus 25 expensive evaluations. Replicate i of every method uses seed i.

Run: python3 demos/03_search_comparison.py [runs]
"""

import sys

from mfkd import SearchConfig, SpaceSpec, compare_methods, generate_synthetic

runs = int(sys.argv[1]) if len(sys.argv) > 1 else 20
bench = generate_synthetic(SpaceSpec(3, 10), target_tau=0.47, rng=2024, logistic_tau=0.17)
config = SearchConfig()
budget = config.n1 * 1.0 + config.n2 * 12.0 + 25 * 12.0

report = compare_methods(bench, ["mfkd", "mf-no-kd", "gpr", "random"], runs, budget, rng=0,
                         config=config)
print(f"budget {budget:g} s, {runs} runs per method, global best test accuracy "
      f"{100 * bench.column('test_acc_final').max():.2f} %\n")
print(report.to_text())

# Best-so-far test accuracy averaged over runs at a few budget checkpoints.
checkpoints = [budget * f for f in (0.5, 0.75, 1.0)]
print("spent    " + "  ".join(f"{m.name:>9}" for m in report.methods))
for cut in checkpoints:
    cells = []
    for m in report.methods:
        vals = []
        for r in m.runs:
            seen = [t for s, _, t in r["curve"] if s <= cut]
            if seen:
                vals.append(seen[-1])
        cells.append(f"{100 * sum(vals) / len(vals):9.2f}" if vals else f"{'-':>9}")
    print(f"{cut:7.0f}  " + "  ".join(cells))
