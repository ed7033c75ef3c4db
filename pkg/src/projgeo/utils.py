"""Small shared helpers: extended reals, regions, deterministic parallel map."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np


class Unbounded:
    """Singleton marker for an infinite radius/reach/frontier value.

    Kept as an explicit variant instead of ``float('inf')`` so that callers
    must branch on it deliberately.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Unbounded"


UNBOUNDED = Unbounded()


def is_unbounded(x) -> bool:
    return isinstance(x, Unbounded) or (isinstance(x, float) and math.isinf(x))


def extended_to_float(x) -> float:
    """Map an extended value to a float for comparisons only."""
    return math.inf if is_unbounded(x) else float(x)


@dataclass(frozen=True)
class Region:
    """Closed axis-aligned box in ambient space."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("region lo/hi must be 1-d and of equal length")
        if np.any(hi <= lo):
            raise ValueError("region must have positive extent")

    @property
    def dim(self) -> int:
        return self.lo.size

    def grid(self, n: int) -> np.ndarray:
        """Regular n^d grid including the boundary, flattened to (n^d, d)."""
        axes = [np.linspace(self.lo[i], self.hi[i], n) for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def spacing(self, n: int) -> float:
        return float(np.max((self.hi - self.lo) / (n - 1)))


def parallel_map(fn, items, jobs: int | None = None) -> list:
    """Map preserving order; thread pool when jobs > 1, inline otherwise."""
    items = list(items)
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def fmt_float(x) -> str:
    """17-significant-digit decimal rendering used in all CSV output."""
    if is_unbounded(x):
        return "inf"
    return "%.17g" % float(x)


def chunked(n: int, chunk: int):
    """Yield (start, stop) index pairs covering range(n)."""
    for start in range(0, n, chunk):
        yield start, min(start + chunk, n)
