"""Brownian increments on uniform grids with exact coarsening.

All schemes compared in a strong-error experiment must see the same Brownian
path. Increments are drawn once on the finest grid and every coarser grid is
obtained by summing consecutive blocks.

Increments are rounded onto the dyadic lattice ``QUANTUM * Z``. Every partial
sum of lattice values (below ``2**21`` in magnitude) is then exactly
representable in float64, so coarsening and cumulative sums are exact and do
not depend on the order of summation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "QUANTUM",
    "TimeGrid",
    "IncrementArray",
    "path_stream",
    "generate_increments",
    "generate_batch",
    "coarsen",
    "cumulative",
]

QUANTUM = 2.0**-32


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = k T / n`` on ``[0, T]``."""

    horizon: float
    n: int

    def __post_init__(self):
        if not (self.horizon > 0 and np.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive, got {self.horizon!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"step count must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def step(self) -> float:
        return self.horizon / self.n

    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.horizon / self.n

    def index_of(self, u: float) -> int:
        """Index ``k`` with ``t_k <= u < t_{k+1}`` (clamped to ``n`` at ``u = T``)."""
        if not 0.0 <= u <= self.horizon:
            raise ValueError(f"time {u} outside [0, {self.horizon}]")
        return min(int(np.floor(u * self.n / self.horizon)), self.n)

    def coarsened(self, factor: int) -> "TimeGrid":
        if factor < 1 or self.n % factor:
            raise ValueError(f"factor {factor} does not divide n={self.n}")
        return TimeGrid(self.horizon, self.n // factor)


@dataclass(frozen=True)
class IncrementArray:
    """Brownian increments ``W_{t_{k+1}} - W_{t_k}`` on ``grid``."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise ValueError(
                f"expected {self.grid.n} increments, got shape {values.shape}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.grid.n


def path_stream(seed: int, index: int) -> np.random.Generator:
    """Independent counter-based stream for path ``index`` under ``seed``.

    The stream depends only on ``(seed, index)``, so paths can be generated
    in any order, by any number of workers.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def _quantize(x: np.ndarray) -> np.ndarray:
    return np.rint(x / QUANTUM) * QUANTUM


def generate_increments(grid: TimeGrid, stream: np.random.Generator) -> IncrementArray:
    """Draw ``grid.n`` i.i.d. N(0, h) increments from ``stream``."""
    z = stream.standard_normal(grid.n)
    return IncrementArray(grid, _quantize(np.sqrt(grid.step) * z))


def generate_batch(grid: TimeGrid, seed: int, start: int, stop: int) -> np.ndarray:
    """Increments for paths ``start .. stop-1`` stacked as rows.

    Row ``i`` is bit-identical to
    ``generate_increments(grid, path_stream(seed, start + i)).values``.
    """
    out = np.empty((stop - start, grid.n))
    for row, index in enumerate(range(start, stop)):
        out[row] = path_stream(seed, index).standard_normal(grid.n)
    out *= np.sqrt(grid.step)
    return _quantize(out)


def coarsen(fine: IncrementArray, factor: int) -> IncrementArray:
    """Sum blocks of ``factor`` consecutive increments."""
    if int(factor) != factor or factor < 1:
        raise ValueError(f"factor must be a positive integer, got {factor!r}")
    factor = int(factor)
    grid = fine.grid.coarsened(factor)
    if factor == 1:
        return fine
    blocks = fine.values.reshape(grid.n, factor)
    # left-to-right on each block
    return IncrementArray(grid, np.cumsum(blocks, axis=1)[:, -1])


def cumulative(inc: IncrementArray | np.ndarray) -> np.ndarray:
    """Brownian values at grid times, starting from ``W_0 = 0``.

    Accepts an :class:`IncrementArray` or a raw array whose last axis holds
    increments (rows are independent paths).
    """
    values = inc.values if isinstance(inc, IncrementArray) else np.asarray(inc, float)
    shape = values.shape[:-1] + (values.shape[-1] + 1,)
    out = np.zeros(shape)
    np.cumsum(values, axis=-1, out=out[..., 1:])
    return out
