"""Tabular benchmarks: every architecture in a space mapped to its metrics.

Columns are stored as arrays in canonical (lexicographic) architecture order.
Accuracies are fractions in [0, 1]; costs are seconds.

On disk a benchmark is JSON Lines: a header object with the space spec and a
name, then one object per architecture::

    {"spec": {"num_edges": 6, "num_ops": 5}, "name": "nb201-cifar10"}
    {"arch": "4,3,2,1,0,4", "val_acc_low": 0.3112, "val_acc_high": 0.5531, ...}
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from mfkd.harness.stats import kendall_tau
from mfkd.space import (SpaceSpec, all_edge_ops, arch_at, as_architecture,
                        format_arch, index_of, parse_arch)

REQUIRED_COLUMNS = ("val_acc_low", "val_acc_high", "test_acc_final", "cost_low", "cost_high")
ACCURACY_COLUMNS = ("val_acc_low", "val_acc_low_logistic", "val_acc_high", "test_acc_final")
COST_COLUMNS = ("cost_low", "cost_high")

SYNTH_LENGTHSCALE = 2.0
SYNTH_RANGE = (0.3, 0.95)
SYNTH_TEST_NOISE = 0.1
TAU_TOLERANCE = 0.02


class IncompleteTableError(ValueError):
    def __init__(self, missing):
        self.missing = list(missing)
        shown = ", ".join(f'"{m}"' for m in self.missing[:10])
        more = f" (+{len(self.missing) - 10} more)" if len(self.missing) > 10 else ""
        super().__init__(f"benchmark is missing {len(self.missing)} architecture(s): {shown}{more}")


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class BenchRow:
    val_acc_low: float
    val_acc_high: float
    test_acc_final: float
    cost_low: float
    cost_high: float
    val_acc_low_logistic: Optional[float] = None
    extra: dict = field(default_factory=dict)


@dataclass(eq=False)
class Benchmark:
    spec: SpaceSpec
    columns: dict
    name: str = "benchmark"

    def __post_init__(self):
        size = self.spec.size
        cols = {}
        for key, values in self.columns.items():
            arr = np.asarray(values, dtype=float)
            if arr.shape != (size,):
                raise ValueError(f"column {key!r} has shape {arr.shape}, expected ({size},)")
            arr.setflags(write=False)
            cols[key] = arr
        missing = [c for c in REQUIRED_COLUMNS if c not in cols]
        if missing:
            raise ValueError(f"benchmark lacks required column(s) {missing}")
        for key, arr in cols.items():
            if key in ACCURACY_COLUMNS or key.startswith("val_acc") or key.startswith("test_acc"):
                bad = np.flatnonzero(~((arr >= 0.0) & (arr <= 1.0)))
                if bad.size:
                    raise ValueError(
                        f"accuracy out of range in {key!r} at {format_arch(arch_at(int(bad[0]), self.spec))}: "
                        f"{arr[bad[0]]}")
            elif key.startswith("cost"):
                if np.any(~(arr >= 0.0)):
                    raise ValueError(f"negative or missing cost in column {key!r}")
        self.columns = cols

    @property
    def size(self) -> int:
        return self.spec.size

    def column(self, key: str) -> np.ndarray:
        try:
            return self.columns[key]
        except KeyError:
            raise KeyError(f"benchmark {self.name!r} has no column {key!r}") from None

    def has_column(self, key: str) -> bool:
        return key in self.columns

    def row(self, arch) -> BenchRow:
        i = self.index(arch)
        known = {k: float(self.columns[k][i]) for k in REQUIRED_COLUMNS}
        logistic = self.columns.get("val_acc_low_logistic")
        extra = {k: float(v[i]) for k, v in self.columns.items()
                 if k not in REQUIRED_COLUMNS and k != "val_acc_low_logistic"}
        return BenchRow(**known,
                        val_acc_low_logistic=None if logistic is None else float(logistic[i]),
                        extra=extra)

    @property
    def rows(self) -> dict:
        return {arch_at(i, self.spec): self.row(arch_at(i, self.spec)) for i in range(self.size)}

    def index(self, arch) -> int:
        arch = as_architecture(arch)
        try:
            return index_of(arch, self.spec)
        except ValueError:
            raise KeyError(f"unknown architecture {format_arch(arch)}") from None


def load_benchmark(path, percent: bool = False) -> Benchmark:
    """Read a JSONL benchmark, rejecting duplicate, missing or out-of-range rows.

    With ``percent=True`` accuracy columns are divided by 100 on input.
    """
    path = Path(path)
    with open(path) as fh:
        lines = [(n, ln) for n, ln in enumerate(fh, 1) if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty benchmark file")
    try:
        header = json.loads(lines[0][1])
        spec = SpaceSpec(int(header["spec"]["num_edges"]), int(header["spec"]["num_ops"]))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValueError(f"{path}:{lines[0][0]}: bad header line: {exc}") from exc
    name = str(header.get("name", path.stem))
    size = spec.size
    columns = {}
    seen = np.zeros(size, dtype=bool)
    for lineno, text in lines[1:]:
        try:
            obj = json.loads(text)
            arch = parse_arch(obj.pop("arch"))
            i = index_of(arch, spec)
        except (json.JSONDecodeError, KeyError, ValueError, AttributeError) as exc:
            raise ValueError(f"{path}:{lineno}: parse error: {exc}") from exc
        if seen[i]:
            raise ValueError(f"{path}:{lineno}: duplicate architecture {format_arch(arch)}")
        seen[i] = True
        for key, value in obj.items():
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ValueError(f"{path}:{lineno}: non-numeric value for {key!r}")
            col = columns.get(key)
            if col is None:
                col = columns[key] = np.full(size, np.nan)
            col[i] = float(value)
    if not seen.all():
        raise IncompleteTableError(format_arch(arch_at(int(i), spec)) for i in np.flatnonzero(~seen))
    for key, col in columns.items():
        if np.isnan(col).any():
            first = int(np.flatnonzero(np.isnan(col))[0])
            raise ValueError(f"{path}: column {key!r} missing for {format_arch(arch_at(first, spec))}")
        if percent and not key.startswith("cost"):
            columns[key] = col / 100.0
    return Benchmark(spec, columns, name)


def _column_order(bench: Benchmark) -> list:
    preferred = ["val_acc_low", "val_acc_low_logistic", "val_acc_high", "test_acc_final",
                 "cost_low", "cost_high"]
    keys = [k for k in preferred if k in bench.columns]
    return keys + sorted(k for k in bench.columns if k not in preferred)


def dump_benchmark(bench: Benchmark) -> str:
    keys = _column_order(bench)
    out = [json.dumps({"spec": {"num_edges": bench.spec.num_edges, "num_ops": bench.spec.num_ops},
                       "name": bench.name})]
    ops = all_edge_ops(bench.spec)
    for i in range(bench.size):
        row = {"arch": ",".join(str(k) for k in ops[i])}
        for k in keys:
            row[k] = float(bench.columns[k][i])
        out.append(json.dumps(row))
    return "\n".join(out) + "\n"


def save_benchmark(bench: Benchmark, path) -> None:
    Path(path).write_text(dump_benchmark(bench))


def gp_surface(spec: SpaceSpec, z: np.ndarray, lengthscale: float = SYNTH_LENGTHSCALE) -> np.ndarray:
    """Apply the Cholesky factor of the full RBF Gram matrix over encodings to ``z``.

    Two one-hot encodings differing on ``h`` edges are at squared distance
    ``2h``, so the RBF kernel factorizes over edges and the Gram matrix in
    lexicographic order is a Kronecker power of a ``num_ops x num_ops`` matrix.
    Its Cholesky factor is the Kronecker power of the small factor.
    """
    r = np.exp(-1.0 / lengthscale ** 2)
    k_edge = np.full((spec.num_ops, spec.num_ops), r)
    np.fill_diagonal(k_edge, 1.0)
    l_edge = np.linalg.cholesky(k_edge)
    t = np.asarray(z, dtype=float).reshape((spec.num_ops,) * spec.num_edges)
    for axis in range(spec.num_edges):
        t = np.moveaxis(np.tensordot(l_edge, t, axes=([1], [axis])), 0, axis)
    return t.reshape(-1)


def _standardize(v):
    return (v - v.mean()) / v.std()


def _rescale(v, lo=SYNTH_RANGE[0], hi=SYNTH_RANGE[1]):
    span = v.max() - v.min()
    if span == 0:
        return np.full_like(v, 0.5 * (lo + hi))
    return lo + (hi - lo) * (v - v.min()) / span


def calibrate_noise(signal: np.ndarray, noise: np.ndarray, target_tau: float,
                    tol: float = TAU_TOLERANCE, max_steps: int = 50) -> tuple:
    """Find a scale ``s`` with ``tau(signal + s*noise, signal)`` near the target.

    Bisection aims for half the tolerance and settles for the closest value
    within ``tol``. Returns ``(s, achieved_tau)``.
    """
    if not 0.0 < target_tau < 1.0:
        raise ValueError("target tau must lie in (0, 1)")

    def tau_at(s):
        return kendall_tau(signal + s * noise, signal)

    best = None

    def consider(s, t):
        nonlocal best
        if abs(t - target_tau) <= tol and (best is None or abs(t - target_tau) < abs(best[1] - target_tau)):
            best = (s, t)

    lo, hi = 0.0, 1.0
    t_hi = tau_at(hi)
    consider(hi, t_hi)
    expansions = 0
    while t_hi > target_tau:
        lo, hi = hi, hi * 2.0
        t_hi = tau_at(hi)
        consider(hi, t_hi)
        expansions += 1
        if expansions > 60:
            raise CalibrationError("could not bracket the target Kendall tau")
    for _ in range(max_steps):
        if best is not None and abs(best[1] - target_tau) <= tol / 2:
            return best
        mid = 0.5 * (lo + hi)
        t = tau_at(mid)
        consider(mid, t)
        if t > target_tau:
            lo = mid
        else:
            hi = mid
    if best is None:
        raise CalibrationError(
            f"no noise scale reaches Kendall tau {target_tau} +/- {tol} after {max_steps} bisection steps")
    return best


def generate_synthetic(spec: SpaceSpec, target_tau: float = 0.47, rng=0,
                       cost_model: tuple = (1.0, 12.0), logistic_tau: Optional[float] = 0.17,
                       name: Optional[str] = None) -> Benchmark:
    """Synthetic benchmark with a GP-sampled high-fidelity surface.

    The low-fidelity column is the standardized high-fidelity surface plus
    Gaussian noise whose scale is calibrated to ``target_tau``. When
    ``logistic_tau`` is given, a second low-fidelity column
    ``val_acc_low_logistic`` is calibrated the same way with independent noise.
    Final test accuracy is the high-fidelity surface plus a small independent
    perturbation. All accuracy columns are affinely mapped into [0.3, 0.95].
    """
    rng = np.random.default_rng(rng)
    size = spec.size
    z_high = rng.standard_normal(size)
    z_low = rng.standard_normal(size)
    z_logistic = rng.standard_normal(size)
    z_test = rng.standard_normal(size)

    high = _standardize(gp_surface(spec, z_high))
    s_low, _ = calibrate_noise(high, z_low, target_tau)
    columns = {
        "val_acc_low": _rescale(high + s_low * z_low),
        "val_acc_high": _rescale(high),
        "test_acc_final": _rescale(high + SYNTH_TEST_NOISE * z_test),
        "cost_low": np.full(size, float(cost_model[0])),
        "cost_high": np.full(size, float(cost_model[1])),
    }
    if logistic_tau is not None:
        s_log, _ = calibrate_noise(high, z_logistic, logistic_tau)
        columns["val_acc_low_logistic"] = _rescale(high + s_log * z_logistic)
    if name is None:
        name = f"synthetic-{spec.num_edges}x{spec.num_ops}-tau{target_tau:g}"
    return Benchmark(spec, columns, name)
