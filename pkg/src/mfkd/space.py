"""Discrete cell search space and its one-hot encoding.

An architecture is an assignment of one operation index to every edge of a
fixed cell. Only the assignment matters here; the cell topology is not
modelled. Architectures are indexed canonically by their lexicographic rank,
which is also the row order of every benchmark table.
"""

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DEFAULT_MAX_SPACE = 10_000_000


class InvalidArchitectureError(ValueError):
    """Raised for operation indices outside ``[0, num_ops)`` or wrong lengths."""


@dataclass(frozen=True)
class SpaceSpec:
    num_edges: int = 6
    num_ops: int = 5

    def __post_init__(self):
        if self.num_edges < 1 or self.num_ops < 1:
            raise ValueError("num_edges and num_ops must be positive")

    @property
    def size(self) -> int:
        return self.num_ops ** self.num_edges

    @property
    def dim(self) -> int:
        return self.num_edges * self.num_ops


@dataclass(frozen=True)
class Architecture:
    edge_ops: tuple

    def __post_init__(self):
        object.__setattr__(self, "edge_ops", tuple(int(k) for k in self.edge_ops))

    def __str__(self):
        return format_arch(self)

    def validate(self, spec: SpaceSpec) -> "Architecture":
        if len(self.edge_ops) != spec.num_edges:
            raise InvalidArchitectureError(
                f"expected {spec.num_edges} edges, got {len(self.edge_ops)}")
        for e, k in enumerate(self.edge_ops):
            if not 0 <= k < spec.num_ops:
                raise InvalidArchitectureError(
                    f"invalid operation index {k} on edge {e} (num_ops={spec.num_ops})")
        return self


def format_arch(arch: Architecture) -> str:
    """Text form used in benchmark files and CLI output, e.g. ``"4,3,2,1,0,4"``."""
    return ",".join(str(k) for k in arch.edge_ops)


def parse_arch(text: str) -> Architecture:
    try:
        return Architecture(tuple(int(tok) for tok in text.split(",")))
    except ValueError as exc:
        raise InvalidArchitectureError(f"cannot parse architecture {text!r}") from exc


def encode(arch: Architecture, spec: SpaceSpec) -> np.ndarray:
    """One-hot encode each edge's operation and concatenate the blocks.

    Position ``num_ops * e + edge_ops[e]`` is 1 for every edge ``e``.
    """
    arch.validate(spec)
    x = np.zeros(spec.dim)
    x[np.arange(spec.num_edges) * spec.num_ops + np.asarray(arch.edge_ops)] = 1.0
    return x


def decode(x: np.ndarray, spec: SpaceSpec) -> Architecture:
    blocks = np.asarray(x).reshape(spec.num_edges, spec.num_ops)
    if not np.all(blocks.sum(axis=1) == 1) or not np.all((blocks == 0) | (blocks == 1)):
        raise InvalidArchitectureError("not a valid one-hot encoding")
    return Architecture(tuple(np.argmax(blocks, axis=1)))


def index_of(arch: Architecture, spec: SpaceSpec) -> int:
    """Canonical (lexicographic) index of an architecture."""
    arch.validate(spec)
    idx = 0
    for k in arch.edge_ops:
        idx = idx * spec.num_ops + k
    return idx


def arch_at(index: int, spec: SpaceSpec) -> Architecture:
    if not 0 <= index < spec.size:
        raise IndexError(f"architecture index {index} out of range [0, {spec.size})")
    ops = []
    for _ in range(spec.num_edges):
        index, k = divmod(index, spec.num_ops)
        ops.append(k)
    return Architecture(tuple(reversed(ops)))


def all_edge_ops(spec: SpaceSpec, max_size: int = DEFAULT_MAX_SPACE) -> np.ndarray:
    """Integer matrix (size x num_edges) of every architecture in lexicographic order."""
    if spec.size > max_size:
        raise ValueError(f"space too large: {spec.size} architectures exceeds cap {max_size}")
    grids = np.indices((spec.num_ops,) * spec.num_edges)
    return grids.reshape(spec.num_edges, -1).T.copy()


def enumerate_all(spec: SpaceSpec, max_size: int = DEFAULT_MAX_SPACE) -> list:
    return [Architecture(tuple(row)) for row in all_edge_ops(spec, max_size)]


def encode_indices(indices: Iterable[int], spec: SpaceSpec) -> np.ndarray:
    """Encodings (n x dim) for a batch of canonical indices, without building Architecture objects."""
    indices = np.asarray(list(indices) if not isinstance(indices, np.ndarray) else indices,
                         dtype=np.int64)
    ops = np.empty((indices.size, spec.num_edges), dtype=np.int64)
    rest = indices.copy()
    for e in range(spec.num_edges - 1, -1, -1):
        rest, ops[:, e] = np.divmod(rest, spec.num_ops)
    x = np.zeros((indices.size, spec.dim))
    rows = np.repeat(np.arange(indices.size), spec.num_edges)
    cols = (np.arange(spec.num_edges) * spec.num_ops + ops).ravel()
    x[rows, cols] = 1.0
    return x


def sample_indices(spec: SpaceSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > spec.size:
        raise ValueError(f"cannot sample {n} distinct architectures from a space of {spec.size}")
    return rng.choice(spec.size, size=n, replace=False)


def sample_uniform(spec: SpaceSpec, n: int, rng) -> list:
    """Draw ``n`` distinct architectures uniformly at random (no replacement within a call)."""
    rng = np.random.default_rng(rng)
    return [arch_at(int(i), spec) for i in sample_indices(spec, n, rng)]


def as_architecture(arch) -> Architecture:
    if isinstance(arch, Architecture):
        return arch
    if isinstance(arch, str):
        return parse_arch(arch)
    if isinstance(arch, Sequence) or isinstance(arch, np.ndarray):
        return Architecture(tuple(arch))
    raise TypeError(f"cannot interpret {arch!r} as an architecture")
