"""Chunked enumeration of Cartesian products of integer value lists.

Points come out in lexicographic order of the index tuple, so any split of
the first coordinate's values gives a partition of the whole product.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterator, List, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

CHUNK = 1 << 18


def product_size(value_lists: Sequence[Sequence[int]]) -> int:
    return math.prod(len(v) for v in value_lists)


def product_grid(value_lists: Sequence[Sequence[int]], chunk: int = CHUNK) -> Iterator[np.ndarray]:
    """Yield int64 arrays of shape (<=chunk, n) covering the product."""
    arrays = [np.asarray(v, dtype=np.int64) for v in value_lists]
    sizes = [len(a) for a in arrays]
    total = math.prod(sizes)
    n = len(arrays)
    if n == 0:
        if total:
            yield np.zeros((1, 0), dtype=np.int64)
        return
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        out = np.empty((len(idx), n), dtype=np.int64)
        for j in range(n - 1, -1, -1):
            idx, digit = np.divmod(idx, sizes[j])
            out[:, j] = arrays[j][digit]
        yield out


def residue_grid(q: int, n: int, chunk: int = CHUNK) -> Iterator[np.ndarray]:
    return product_grid([range(q)] * n, chunk)


def split_first(value_lists: Sequence[Sequence[int]], parts: int) -> List[List[Sequence[int]]]:
    """Static partition of the product by slicing the first coordinate's values."""
    if not value_lists:
        return [list(value_lists)]
    first = list(value_lists[0])
    parts = max(1, min(parts, len(first) or 1))
    bounds = np.linspace(0, len(first), parts + 1).round().astype(int)
    return [[first[a:b], *value_lists[1:]] for a, b in zip(bounds[:-1], bounds[1:])]


def map_partitions(fn: Callable[[Sequence[Sequence[int]]], T], value_lists, workers: int = 1) -> List[T]:
    """Apply fn to each first-coordinate slice; results in slice order."""
    pieces = split_first(value_lists, max(1, workers))
    if workers <= 1 or len(pieces) == 1:
        return [fn(piece) for piece in pieces]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, pieces))
