"""Knowledge-distillation losses evaluated numerically (no gradients).

Covers the temperature softmax, the classic teacher/student distillation loss,
and the neuron-selectivity-transfer loss built on a squared MMD between
row-normalized feature maps, including its channel-subset approximation.

Batch reduction is a sum unless ``reduction="mean"`` is requested.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

PROB_FLOOR = 1e-12
NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class MmdKernelSpec:
    """Polynomial kernel ``(x.y + c) ** b``."""

    c: float = 0.0
    b: int = 2
    kind: str = "polynomial"

    def __post_init__(self):
        if self.kind != "polynomial":
            raise ValueError(f"unsupported MMD kernel {self.kind!r}")
        if int(self.b) != self.b or self.b < 1:
            raise ValueError("polynomial degree b must be a positive integer")

    def gram(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return (a @ b.T + self.c) ** int(self.b)


@dataclass(frozen=True)
class KdConfig:
    tau: float = 32.0
    lam: float = 1.0
    nst_beta: float = 12.5

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("temperature tau must be positive")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if not self.nst_beta >= 0:
            raise ValueError("nst_beta must be non-negative")


def softmax_temp(z, tau: float = 1.0) -> np.ndarray:
    """Softmax of ``z / tau`` along the last axis, max-shifted for stability."""
    if not tau > 0:
        raise ValueError("temperature must be positive")
    z = np.asarray(z, dtype=float) / tau
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(p, q) -> float:
    """``-sum p log q``. Raises if ``p`` puts mass where ``q`` is exactly zero."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    support = p > 0
    if np.any(q[support] <= 0):
        raise ValueError("support mismatch: p > 0 where q = 0")
    return float(-(p[support] * np.log(q[support])).sum())


def _reduce(values: np.ndarray, reduction: str) -> float:
    if reduction == "sum":
        return float(values.sum())
    if reduction == "mean":
        return float(values.mean())
    raise ValueError(f"unknown reduction {reduction!r}")


def _check_logits(z, name):
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if not np.all(np.isfinite(z)):
        raise ValueError(f"{name} logits must be finite")
    return z


def _check_labels(labels, batch, classes):
    labels = np.asarray(labels).ravel()
    if labels.shape[0] != batch:
        raise ValueError(f"{labels.shape[0]} labels for a batch of {batch}")
    if np.any(labels != np.round(labels)):
        raise ValueError("labels must be integer class indices")
    labels = labels.astype(np.int64)
    if labels.min() < 0 or labels.max() >= classes:
        raise ValueError(f"label index out of range [0, {classes})")
    return labels


def label_cross_entropy(student, labels, reduction: str = "sum") -> float:
    """Cross-entropy of one-hot labels against ``softmax(student)`` (tau = 1)."""
    zs = _check_logits(student, "student")
    y = _check_labels(labels, zs.shape[0], zs.shape[1])
    q = softmax_temp(zs, 1.0)
    per_sample = -np.log(np.maximum(q[np.arange(len(y)), y], PROB_FLOOR))
    return _reduce(per_sample, reduction)


def soft_cross_entropy(student, teacher, tau: float, reduction: str = "sum") -> float:
    """Cross-entropy between the softened teacher and softened student."""
    zs = _check_logits(student, "student")
    zt = _check_logits(teacher, "teacher")
    if zs.shape != zt.shape:
        raise ValueError(f"student {zs.shape} and teacher {zt.shape} logits differ in shape")
    pt = softmax_temp(zt, tau)
    qs = np.maximum(softmax_temp(zs, tau), PROB_FLOOR)
    return _reduce(-(pt * np.log(qs)).sum(axis=1), reduction)


def kd_loss(student, teacher, labels, cfg: KdConfig = KdConfig(),
            reduction: str = "sum") -> float:
    """``(1 - lam) * CE(labels, student) + lam * tau^2 * CE(teacher_tau, student_tau)``."""
    zs = _check_logits(student, "student")
    zt = _check_logits(teacher, "teacher")
    if zs.shape != zt.shape:
        raise ValueError(f"student {zs.shape} and teacher {zt.shape} logits differ in shape")
    hard = label_cross_entropy(zs, labels, reduction)
    soft = soft_cross_entropy(zs, zt, cfg.tau, reduction)
    return (1.0 - cfg.lam) * hard + cfg.lam * cfg.tau ** 2 * soft


def normalize_rows(f) -> np.ndarray:
    """Scale each channel row to unit L2 norm, flooring tiny norms at 1e-12."""
    f = np.atleast_2d(np.asarray(f, dtype=float))
    if f.shape[0] < 1 or f.shape[1] < 1:
        raise ValueError("feature map needs at least one channel and one position")
    if not np.all(np.isfinite(f)):
        raise ValueError("feature map entries must be finite")
    zero = np.all(f == 0.0, axis=1)
    if zero.any():
        raise ValueError(f"all-zero feature row(s) at {np.flatnonzero(zero).tolist()}")
    norms = np.maximum(np.linalg.norm(f, axis=1), NORM_FLOOR)
    return f / norms[:, None]


def _mmd2_normalized(t_hat, s_hat, kernel: MmdKernelSpec) -> float:
    ct = t_hat.shape[0]
    cs = s_hat.shape[0]
    tt = kernel.gram(t_hat, t_hat).sum() / ct ** 2
    ss = kernel.gram(s_hat, s_hat).sum() / cs ** 2
    ts = kernel.gram(t_hat, s_hat).sum() * 2.0 / (ct * cs)
    return float(tt + ss - ts)


def _check_positions(ft, fs):
    if ft.shape[1] != fs.shape[1]:
        raise ValueError(
            f"positions mismatch: teacher has {ft.shape[1]}, student has {fs.shape[1]}")


def mmd2(ft, fs, kernel: MmdKernelSpec = MmdKernelSpec()) -> float:
    """Squared MMD between the row-normalized channels of two feature maps."""
    t_hat = normalize_rows(ft)
    s_hat = normalize_rows(fs)
    _check_positions(t_hat, s_hat)
    return _mmd2_normalized(t_hat, s_hat, kernel)


def _check_subset(subset, size, name) -> np.ndarray:
    idx = np.asarray(list(subset), dtype=np.int64).ravel()
    if idx.size == 0:
        raise ValueError(f"{name} subset is empty")
    if idx.min() < 0 or idx.max() >= size:
        raise IndexError(f"{name} subset index out of range [0, {size})")
    return idx


def mmd2_subset(ft, fs, subset_t, subset_s, kernel: MmdKernelSpec = MmdKernelSpec()) -> float:
    """Squared MMD restricted to chosen teacher and student channels.

    Normalizers use the subset sizes. With full subsets this is :func:`mmd2`.
    """
    ft = np.atleast_2d(np.asarray(ft, dtype=float))
    fs = np.atleast_2d(np.asarray(fs, dtype=float))
    it = _check_subset(subset_t, ft.shape[0], "teacher")
    js = _check_subset(subset_s, fs.shape[0], "student")
    return mmd2(ft[it], fs[js], kernel)


def nst_loss(student, labels, ft_list: Sequence, fs_list: Sequence,
             cfg: KdConfig = KdConfig(), kernel: MmdKernelSpec = MmdKernelSpec(),
             subsets: Sequence = None, reduction: str = "sum") -> float:
    """Label cross-entropy plus ``nst_beta`` times the summed MMD over paired maps.

    ``ft_list[k]`` is paired with ``fs_list[k]``; the caller decides whether the
    pairs are per sample or per layer. ``subsets`` optionally gives a
    ``(subset_t, subset_s)`` pair per map for the channel-subset variant.
    With ``reduction="mean"`` both the cross-entropy and the MMD sum are averaged.
    """
    ft_list = list(ft_list)
    fs_list = list(fs_list)
    if len(ft_list) != len(fs_list):
        raise ValueError(f"{len(ft_list)} teacher maps but {len(fs_list)} student maps")
    if subsets is not None and len(subsets) != len(ft_list):
        raise ValueError("one subset pair is required per feature-map pair")
    ce = label_cross_entropy(student, labels, reduction)
    terms = []
    for k, (ft, fs) in enumerate(zip(ft_list, fs_list)):
        if subsets is None:
            terms.append(mmd2(ft, fs, kernel))
        else:
            st, ss = subsets[k]
            terms.append(mmd2_subset(ft, fs, st, ss, kernel))
    mmd_total = _reduce(np.asarray(terms), reduction) if terms else 0.0
    return ce + cfg.nst_beta * mmd_total
