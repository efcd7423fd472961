"""Rank correlation between fidelities."""

import math

import numpy as np


def _tie_pairs(sorted_values: np.ndarray) -> int:
    """Number of tied pairs in an already sorted 1-D array."""
    if sorted_values.size == 0:
        return 0
    change = np.flatnonzero(sorted_values[1:] != sorted_values[:-1]) + 1
    bounds = np.concatenate(([0], change, [sorted_values.size]))
    t = np.diff(bounds).astype(np.int64)
    return int((t * (t - 1) // 2).sum())


def _joint_tie_pairs(a_sorted, b_sorted) -> int:
    if a_sorted.size == 0:
        return 0
    change = np.flatnonzero((a_sorted[1:] != a_sorted[:-1]) | (b_sorted[1:] != b_sorted[:-1])) + 1
    bounds = np.concatenate(([0], change, [a_sorted.size]))
    t = np.diff(bounds).astype(np.int64)
    return int((t * (t - 1) // 2).sum())


def count_inversions(values) -> int:
    """Pairs ``i < j`` with ``values[i] > values[j]`` (ties are not inversions).

    Bottom-up merge sort; each level merges all runs at once with a stable
    lexsort that puts left-run elements before equal right-run elements.
    """
    r = np.asarray(values)
    n = r.size
    if n < 2:
        return 0
    r = np.unique(r, return_inverse=True)[1].astype(np.int64)
    idx = np.arange(n)
    inversions = 0
    width = 1
    while width < n:
        block = idx // (2 * width)
        side = (idx // width) % 2
        order = np.lexsort((side, r, block))
        blk_sorted = block[order]
        right = side[order] == 1
        merged_pos = (idx - blk_sorted * 2 * width)[right]
        pos_in_right = order[right] - (blk_sorted[right] * 2 * width + width)
        # left elements not yet placed when a right element lands are the ones greater than it
        inversions += int((width - (merged_pos - pos_in_right)).sum())
        r = r[order]
        width *= 2
    return inversions


def kendall_counts(a, b) -> tuple:
    """Integer pieces of tau-b: ``(concordant - discordant, n0, ties_a, ties_b)``."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("Kendall tau needs at least two observations")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("Kendall tau inputs must be finite")
    n = a.size
    n0 = n * (n - 1) // 2
    order = np.lexsort((b, a))
    a_s, b_s = a[order], b[order]
    n1 = _tie_pairs(a_s)
    n2 = _tie_pairs(np.sort(b))
    n3 = _joint_tie_pairs(a_s, b_s)
    discordant = count_inversions(b_s)
    return n0 - n1 - n2 + n3 - 2 * discordant, n0, n1, n2


def kendall_tau(a, b) -> float:
    """Tie-corrected Kendall tau-b, computed in O(n log^2 n) from exact integer counts."""
    s, n0, n1, n2 = kendall_counts(a, b)
    if n1 == n0 or n2 == n0:
        raise ValueError("Kendall tau is undefined when every value in a vector is tied")
    return s / math.sqrt((n0 - n1) * (n0 - n2))


def correlate_fidelities(bench, low_column: str = "val_acc_low",
                         high_column: str = "val_acc_high") -> float:
    return kendall_tau(bench.column(low_column), bench.column(high_column))
