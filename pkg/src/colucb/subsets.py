"""Vectorized tables indexed by every arm subset ``S`` (bit ``a`` of the index = arm ``a``)."""
from __future__ import annotations

import numpy as np

from .core import ENUMERATION_CAP, GroupStructure


class EnumerationCapError(ValueError):
    pass


def check_cap(num_arms: int, force: bool) -> None:
    if num_arms > ENUMERATION_CAP and not force:
        raise EnumerationCapError(
            f"{num_arms} arms exceeds the enumeration cap of {ENUMERATION_CAP}; pass force=True to override"
        )


def popcounts(n: int) -> np.ndarray:
    return np.bitwise_count(np.arange(1 << n, dtype=np.uint64)).astype(np.int64)


def subset_sum(arr: np.ndarray, n: int) -> np.ndarray:
    """``out[X] = sum over Y subset of X of arr[Y]``."""
    out = arr.copy()
    for i in range(n):
        v = out.reshape(-1, 2, 1 << i)
        v[:, 1, :] += v[:, 0, :]
    return out


def superset_min(arr: np.ndarray, n: int) -> np.ndarray:
    """``out[X] = min over Y superset of X of arr[Y]``."""
    out = arr.copy()
    for i in range(n):
        v = out.reshape(-1, 2, 1 << i)
        np.minimum(v[:, 0, :], v[:, 1, :], out=v[:, 0, :])
    return out


def contained_counts(structure: GroupStructure) -> np.ndarray:
    """``N[X]``: number of groups whose arm set lies inside ``X``."""
    n = structure.num_arms
    cnt = np.zeros(1 << n, dtype=np.int64)
    np.add.at(cnt, np.array(structure.arm_sets, dtype=np.int64), 1)
    return subset_sum(cnt, n)


def touch_counts(structure: GroupStructure) -> np.ndarray:
    """``touch[S]``: number of groups meeting ``S``."""
    N = contained_counts(structure)
    full = (1 << structure.num_arms) - 1
    idx = np.arange(1 << structure.num_arms, dtype=np.int64)
    return structure.num_groups - N[full ^ idx]


def min_cover_sizes(structure: GroupStructure) -> np.ndarray:
    """``mc[S]``: fewest groups whose union contains ``S`` (value iteration over covers)."""
    n = structure.num_arms
    idx = np.arange(1 << n, dtype=np.int64)
    big = np.iinfo(np.int64).max // 2
    f = np.full(1 << n, big, dtype=np.int64)
    f[0] = 0
    masks = [np.int64(m) for m in structure.arm_sets]
    while True:
        new = f
        for m in masks:
            new = np.minimum(new, f[idx & ~m] + 1)
        if np.array_equal(new, f):
            return f
        f = new


class SubsetTables:
    """Precomputed per-subset counts for a structure: sizes, touching groups, min covers."""

    def __init__(self, structure: GroupStructure, force: bool = False):
        check_cap(structure.num_arms, force)
        self.structure = structure
        self.n = structure.num_arms
        self.size = popcounts(self.n)
        self.touch = touch_counts(structure)
        self.min_cover = min_cover_sizes(structure)

    def h1(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.touch / self.size

    def h2_minus(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.min_cover / self.size
