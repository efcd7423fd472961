"""Command-line front end.

Subcommands: ``search``, ``correlate``, ``synth``, ``kd-eval``, ``compare``.
Exit status is 0 on success, 1 on runtime errors and 2 on usage errors.
"""

import argparse
import csv
import io
import json
import os
import secrets
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from mfkd import __version__
from mfkd.harness.benchmark import (CalibrationError, IncompleteTableError, dump_benchmark,
                                    generate_synthetic, load_benchmark)
from mfkd.harness.compare import METHODS, compare_methods, run_replicates
from mfkd.harness.stats import kendall_tau
from mfkd.kd import KdConfig, MmdKernelSpec, kd_loss, mmd2, mmd2_subset, nst_loss
from mfkd.matrix_io import read_blocks
from mfkd.search import SearchConfig, with_budget
from mfkd.space import SpaceSpec, arch_at

DATA_DIR_ENV = "MFKD_DATA_DIR"


class UsageError(Exception):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _resolve_seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbelow(2 ** 31)
        print(f"no --seed given; using generated seed {args.seed}", file=sys.stderr)
    return args.seed


def _space_for_size(size: int) -> SpaceSpec:
    # prefer the most edges (up to 6) whose operation count is an integer >= 2
    for edges in range(6, 0, -1):
        ops = round(size ** (1.0 / edges))
        for cand in (ops - 1, ops, ops + 1):
            if cand >= 2 and cand ** edges == size:
                return SpaceSpec(edges, cand)
    raise UsageError(f"size {size} is not an integer power; give edges= and ops= instead")


def parse_synthetic(text: str, default_seed: int) -> dict:
    """Parse ``tau=0.47,size=1000[,edges=..,ops=..,seed=..,logistic_tau=..,cost_low=..,cost_high=..]``."""
    opts = {}
    for item in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in item:
            raise UsageError(f"bad --synthetic item {item!r}; expected key=value")
        key, value = item.split("=", 1)
        opts[key.strip()] = value.strip()
    allowed = {"tau", "size", "edges", "ops", "seed", "logistic_tau", "cost_low", "cost_high"}
    unknown = set(opts) - allowed
    if unknown:
        raise UsageError(f"unknown --synthetic keys: {sorted(unknown)}")
    try:
        if "edges" in opts or "ops" in opts:
            spec = SpaceSpec(int(opts.get("edges", 6)), int(opts.get("ops", 5)))
            if "size" in opts and int(opts["size"]) != spec.size:
                raise UsageError(f"size={opts['size']} disagrees with edges/ops ({spec.size})")
        else:
            spec = _space_for_size(int(opts.get("size", 15625)))
        logistic = opts.get("logistic_tau", "0.17")
        return {
            "spec": spec,
            "target_tau": float(opts.get("tau", 0.47)),
            "rng": int(opts.get("seed", default_seed)),
            "cost_model": (float(opts.get("cost_low", 1.0)), float(opts.get("cost_high", 12.0))),
            "logistic_tau": None if logistic.lower() == "none" else float(logistic),
        }
    except ValueError as exc:
        raise UsageError(f"bad --synthetic value: {exc}") from exc


def _resolve_bench_path(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    data_dir = os.environ.get(DATA_DIR_ENV)
    if data_dir and not p.is_absolute() and (Path(data_dir) / p).exists():
        return Path(data_dir) / p
    raise FileNotFoundError(f"benchmark file not found: {path}")


def _load_bench(args, seed: int):
    if args.bench and args.synthetic:
        raise UsageError("give either --bench or --synthetic, not both")
    if args.bench:
        return load_benchmark(_resolve_bench_path(args.bench), percent=args.percent)
    if args.synthetic:
        return generate_synthetic(**parse_synthetic(args.synthetic, seed))
    raise UsageError("one of --bench or --synthetic is required")


def _search_config(args) -> SearchConfig:
    if args.runs < 1:
        raise UsageError("--runs must be at least 1")
    if args.parallel < 1:
        raise UsageError("--parallel must be at least 1")
    kwargs = {}
    for flag, key in (("n1", "n1"), ("n2", "n2"), ("pool", "candidate_pool"), ("budget", "budget"),
                      ("ucb_beta", "ucb_beta"), ("uncertainty", "uncertainty")):
        value = getattr(args, flag, None)
        if value is not None:
            kwargs[key] = value
    return SearchConfig(**kwargs)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _manifest(command, args, started, config=None, bench=None, extra=None) -> dict:
    man = {
        "command": command,
        "argv": getattr(args, "_argv", None),
        "seed": getattr(args, "seed", None),
        "benchmark_name": None if bench is None else bench.name,
        "config": None if config is None else config.to_dict(),
        "tool_version": __version__,
        "started_at": started,
        "finished_at": _now(),
    }
    if extra:
        man.update(extra)
    return man


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _mean_std(values):
    v = np.array([x for x in values if x is not None], dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


def cmd_search(args) -> int:
    started = _now()
    config = _search_config(args)
    seed = _resolve_seed(args)
    bench = _load_bench(args, seed)
    results = run_replicates(args.method, bench, config, args.runs, seed, args.parallel)
    values = [r["best_test_acc"] for r in results]
    mean, std = _mean_std(values)
    summary = {
        "method": args.method,
        "benchmark": bench.name,
        "runs": args.runs,
        "seed": seed,
        "config": config.to_dict(),
        "mean_best_test_acc": None if np.isnan(mean) else mean,
        "std_best_test_acc": None if np.isnan(std) else std,
        "empty_runs": sum(v is None for v in values),
        "results": [{k: v for k, v in r.items() if k not in ("curve", "trajectory")} | {"run": i}
                    for i, r in enumerate(results)],
    }
    if args.out:
        out = Path(args.out)
        _write(out / "results.json", _json(summary))
        rows = []
        for run, r in enumerate(results):
            for step, (idx, fid, val, cost, spent, over) in enumerate(r["trajectory"]):
                rows.append((args.method, run, step, ",".join(map(str, _arch_of(bench, idx))),
                             fid, repr(val), repr(cost), repr(spent), int(over)))
        _write(out / "trajectory.csv", _csv(
            ["method", "run", "step", "arch", "fidelity", "val_acc", "cost", "spent_after",
             "over_budget"], rows))
        curve_rows = [(args.method, run, repr(s), repr(t))
                      for run, r in enumerate(results) for s, _, t in r["curve"]]
        _write(out / "curves.csv", _csv(["method", "run", "spent_seconds", "best_test_acc"], curve_rows))
        _write(out / "manifest.json", _json(_manifest("search", args, started, config, bench)))
    print(f"{args.method} on {bench.name}: best test accuracy {100 * mean:.3f} +/- {100 * std:.3f} % "
          f"over {args.runs} run(s), budget {config.budget:g} s")
    return 0


def _arch_of(bench, idx):
    return arch_at(int(idx), bench.spec).edge_ops


def cmd_correlate(args) -> int:
    seed = args.seed if args.seed is not None else 0
    bench = _load_bench(args, seed)
    rows = []
    for col in sorted(bench.columns):
        if col.startswith("val_acc_low") or (col.startswith("val_acc") and col != "val_acc_high"):
            tau = kendall_tau(bench.column(col), bench.column("val_acc_high"))
            rows.append((col, tau))
            print(f"kendall_tau({col}, val_acc_high) = {tau:.4f}")
    if args.csv:
        _write(Path(args.csv), _csv(["low_fidelity_column", "kendall_tau"],
                                    [(c, repr(t)) for c, t in rows]))
    return 0


def cmd_synth(args) -> int:
    started = _now()
    seed = _resolve_seed(args)
    spec = SpaceSpec(args.edges, args.ops)
    bench = generate_synthetic(spec, args.tau, seed, (args.cost_low, args.cost_high),
                               logistic_tau=args.logistic_tau, name=args.name)
    _write(Path(args.out), dump_benchmark(bench))
    tau = kendall_tau(bench.column("val_acc_low"), bench.column("val_acc_high"))
    msg = f"wrote {bench.size} architectures to {args.out}; kendall tau (low vs high) = {tau:.4f}"
    if bench.has_column("val_acc_low_logistic"):
        tau_l = kendall_tau(bench.column("val_acc_low_logistic"), bench.column("val_acc_high"))
        msg += f", logistic column = {tau_l:.4f}"
    print(msg)
    if args.manifest:
        _write(Path(args.manifest), _json(_manifest("synth", args, started, bench=bench,
                                                    extra={"achieved_tau": tau})))
    return 0


def _parse_subset(text):
    if text is None:
        return None
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"bad subset {text!r}: expected comma-separated indices") from exc


def cmd_kd_eval(args) -> int:
    started = _now()
    blocks = {"logits_student": [], "logits_teacher": [], "labels": [],
              "features_teacher": [], "features_student": []}
    sources = list(args.fixture or [])
    role_flags = (("student_logits", "logits_student"), ("teacher_logits", "logits_teacher"),
                  ("labels", "labels"), ("teacher_features", "features_teacher"),
                  ("student_features", "features_student"))
    for flag, role in role_flags:
        for path in getattr(args, flag) or []:
            for blk in read_blocks(path):
                blocks[role].append(blk.values)
    for path in sources:
        for blk in read_blocks(path):
            if not blk.role:
                raise ValueError(f"{path}: blocks passed via --fixture need a 'role'")
            blocks[blk.role].append(blk.values)

    cfg = KdConfig(tau=args.tau, lam=args.lam, nst_beta=args.nst_beta)
    kernel = MmdKernelSpec(c=args.kernel_c, b=args.kernel_b)
    subset_t, subset_s = _parse_subset(args.subset_t), _parse_subset(args.subset_s)
    ft, fs = blocks["features_teacher"], blocks["features_student"]
    if len(ft) != len(fs):
        raise ValueError(f"{len(ft)} teacher feature maps but {len(fs)} student feature maps")

    out = {"config": {"tau": cfg.tau, "lambda": cfg.lam, "nst_beta": cfg.nst_beta,
                      "kernel": {"kind": kernel.kind, "c": kernel.c, "b": kernel.b},
                      "reduction": args.reduction}}
    if ft:
        out["mmd2"] = [mmd2(t, s, kernel) for t, s in zip(ft, fs)]
        if subset_t is not None or subset_s is not None:
            out["mmd2_subset"] = [
                mmd2_subset(t, s, subset_t if subset_t is not None else range(t.shape[0]),
                            subset_s if subset_s is not None else range(s.shape[0]), kernel)
                for t, s in zip(ft, fs)]
    labels = np.concatenate([b.ravel() for b in blocks["labels"]]) if blocks["labels"] else None
    student = np.vstack(blocks["logits_student"]) if blocks["logits_student"] else None
    teacher = np.vstack(blocks["logits_teacher"]) if blocks["logits_teacher"] else None
    if student is not None and teacher is not None and labels is not None:
        out["kd_loss"] = kd_loss(student, teacher, labels, cfg, args.reduction)
    if student is not None and labels is not None and ft:
        subsets = None
        if subset_t is not None or subset_s is not None:
            subsets = [(subset_t if subset_t is not None else range(t.shape[0]),
                        subset_s if subset_s is not None else range(s.shape[0]))
                       for t, s in zip(ft, fs)]
        out["nst_loss"] = nst_loss(student, labels, ft, fs, cfg, kernel, subsets, args.reduction)
    if len(out) == 1:
        raise ValueError("nothing to evaluate: supply feature maps and/or logits with labels")

    for key in ("mmd2", "mmd2_subset"):
        for i, v in enumerate(out.get(key, [])):
            print(f"{key}[{i}] = {v!r}")
    for key in ("kd_loss", "nst_loss"):
        if key in out:
            print(f"{key} = {out[key]!r}")
    if args.out:
        d = Path(args.out)
        _write(d / "results.json", _json(out))
        _write(d / "manifest.json", _json(_manifest("kd-eval", args, started, extra=out["config"])))
    return 0


def cmd_compare(args) -> int:
    started = _now()
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if len(methods) < 2:
        raise UsageError("compare needs at least two methods")
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}; choose from {sorted(METHODS)}")
    config = _search_config(args)
    seed = _resolve_seed(args)
    bench = _load_bench(args, seed)
    report = compare_methods(bench, methods, args.runs, config.budget, seed, config, args.parallel)
    text = report.to_text()
    if args.out:
        out = Path(args.out)
        _write(out / "results.json", report.to_json())
        _write(out / "report.txt", text)
        _write(out / "curves.csv", _csv(["method", "run", "spent_seconds", "best_test_acc"],
                                        [(m, r, repr(s), repr(t)) for m, r, s, t in report.curves()]))
        _write(out / "manifest.json", _json(_manifest("compare", args, started,
                                                      with_budget(config, config.budget), bench,
                                                      extra={"methods": methods})))
    sys.stdout.write(text)
    return 0


def _add_bench_args(p):
    p.add_argument("--bench", help=f"benchmark JSONL file (relative paths also tried under ${DATA_DIR_ENV})")
    p.add_argument("--synthetic", metavar="KEY=VAL,...",
                   help="generate a synthetic benchmark, e.g. tau=0.47,size=1000")
    p.add_argument("--percent", action="store_true", help="benchmark accuracies are percentages")


def _add_search_args(p):
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--budget", type=float, help="per-run budget in seconds (default 12000)")
    p.add_argument("--seed", type=int)
    p.add_argument("--n1", type=int, help="low-fidelity warm-up size (default 100)")
    p.add_argument("--n2", type=int, help="high-fidelity warm-up size (default 20)")
    p.add_argument("--pool", type=int, help="UCB candidate pool size N (default 5000)")
    p.add_argument("--ucb-beta", type=float, dest="ucb_beta")
    p.add_argument("--uncertainty", choices=("variance", "stddev"))
    p.add_argument("--parallel", type=int, default=1, help="worker processes for replicates")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfkd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mfkd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="run a searcher for a number of seeded replicates")
    _add_bench_args(p)
    p.add_argument("--method", required=True, choices=sorted(METHODS))
    _add_search_args(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("correlate", help="Kendall tau of each low-fidelity column vs high fidelity")
    _add_bench_args(p)
    p.add_argument("--seed", type=int, help="seed for --synthetic (default 0)")
    p.add_argument("--csv", help="also write the taus to this CSV file")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("synth", help="write a synthetic benchmark calibrated to a Kendall tau")
    p.add_argument("--edges", type=int, default=6)
    p.add_argument("--ops", type=int, default=5)
    p.add_argument("--tau", type=float, default=0.47)
    p.add_argument("--logistic-tau", type=float, default=0.17, dest="logistic_tau")
    p.add_argument("--cost-low", type=float, default=1.0, dest="cost_low")
    p.add_argument("--cost-high", type=float, default=12.0, dest="cost_high")
    p.add_argument("--name")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", help="write a run manifest JSON here")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("kd-eval", help="evaluate distillation losses on matrix fixtures")
    p.add_argument("--fixture", action="append", help="fixture file whose blocks carry roles")
    p.add_argument("--teacher-features", action="append", dest="teacher_features")
    p.add_argument("--student-features", action="append", dest="student_features")
    p.add_argument("--student-logits", action="append", dest="student_logits")
    p.add_argument("--teacher-logits", action="append", dest="teacher_logits")
    p.add_argument("--labels", action="append")
    p.add_argument("--tau", type=float, default=KdConfig.tau)
    p.add_argument("--lambda", type=float, default=KdConfig.lam, dest="lam")
    p.add_argument("--nst-beta", type=float, default=KdConfig.nst_beta, dest="nst_beta")
    p.add_argument("--kernel-c", type=float, default=MmdKernelSpec.c, dest="kernel_c")
    p.add_argument("--kernel-b", type=int, default=MmdKernelSpec.b, dest="kernel_b")
    p.add_argument("--subset-t", dest="subset_t", help="teacher channel indices, e.g. 0,2,5")
    p.add_argument("--subset-s", dest="subset_s", help="student channel indices")
    p.add_argument("--reduction", choices=("sum", "mean"), default="sum")
    p.add_argument("--out", help="output directory for results.json and manifest.json")
    p.set_defaults(func=cmd_kd_eval)

    p = sub.add_parser("compare", help="compare searchers over paired seeded replicates")
    _add_bench_args(p)
    p.add_argument("--methods", required=True, help="comma-separated, e.g. mfkd,random,gpr,mf-no-kd")
    _add_search_args(p)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args._argv = argv
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mfkd: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, IndexError, CalibrationError, IncompleteTableError,
            np.linalg.LinAlgError) as exc:
        print(f"mfkd: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
