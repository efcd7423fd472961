"""Multi-fidelity neural architecture search with co-kriging and knowledge-distillation losses."""

from mfkd.space import (Architecture, SpaceSpec, decode, encode, enumerate_all, format_arch,
                        parse_arch, sample_uniform)
from mfkd.gp import (GpModel, HyperGrid, KernelConfig, fit_gp, kernel_eval,
                     log_marginal_likelihood, optimize_hyperparams, predict)
from mfkd.cokriging import (CoKrigingModel, FusionGrids, MultiLevelModel, fit_cokriging,
                            fit_multilevel, predict_high, update_high)
from mfkd.kd import (KdConfig, MmdKernelSpec, cross_entropy, kd_loss, mmd2, mmd2_subset,
                     nst_loss, softmax_temp)
from mfkd.harness import (Benchmark, BudgetMeter, EvalRecord, correlate_fidelities, evaluate,
                          generate_synthetic, kendall_tau, load_benchmark, save_benchmark)
from mfkd.search import SearchConfig, SearchResult, run_mfkd, run_mfkd_multilevel, ucb_select
from mfkd.harness.baselines import run_gpr_single_fidelity, run_mf_no_kd, run_random_search
from mfkd.harness.compare import Report, compare_methods

__version__ = "0.1.0"
