"""Grünwald-Letnikov fractional derivatives of uniformly sampled signals.

Signals are taken to be identically zero before their first sample, so the
sum at step ``k`` runs over ``k+1`` samples (or the most recent ``memory+1``
when short-memory truncation is requested).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _backend
from .errors import InvalidArgument
from .signals import TimeSeries


@dataclass(frozen=True, eq=False)
class GlWeightTable:
    """Weights ``w_0..w_p`` of the GL sum for order ``lam``."""

    lam: float
    weights: np.ndarray

    @property
    def p(self) -> int:
        return self.weights.size - 1


def _check_order(lam: float) -> float:
    lam = float(lam)
    if not 0.0 < lam <= 1.0:
        raise InvalidArgument(f"fractional order must lie in (0, 1], got {lam!r}")
    return lam


@lru_cache(maxsize=64)
def _weights(lam: float, p: int) -> np.ndarray:
    w = np.empty(p + 1)
    w[0] = 1.0
    for j in range(1, p + 1):
        # (j - 1 - lam) keeps the subtraction exact near lam = 1
        w[j] = (j - 1 - lam) / j * w[j - 1]
    w.setflags(write=False)
    return w


def gl_weights(lam: float, p: int) -> GlWeightTable:
    """Binomial weights ``(-1)^j C(lam, j)`` via the first-order recursion.

    >>> gl_weights(0.5, 2).weights.tolist()
    [1.0, -0.5, -0.125]
    """
    lam = _check_order(lam)
    if p < 0:
        raise InvalidArgument(f"p must be non-negative, got {p!r}")
    return GlWeightTable(lam, _weights(lam, int(p)))


def memory_arg(memory: int | None) -> int:
    """Kernel encoding of a memory length: ``-1`` means unbounded."""
    if memory is None:
        return -1
    memory = int(memory)
    if memory < 1:
        raise InvalidArgument(f"memory must be >= 1 or None (unbounded), got {memory}")
    return memory


def table_length(m: int, memory: int | None) -> int:
    """Largest step index needed for a series of ``m`` samples."""
    return m - 1 if memory is None else min(m - 1, int(memory))


def _fft_filter(w: np.ndarray, f: np.ndarray) -> np.ndarray:
    m = f.size
    n = 1 << int(2 * m - 1).bit_length()
    out = np.fft.irfft(np.fft.rfft(w, n) * np.fft.rfft(f, n), n)[:m]
    return out


def gl_derivative(
    f: TimeSeries, lam: float, memory: int | None = None, method: str = "direct"
) -> TimeSeries:
    """Order-``lam`` GL derivative of ``f`` on its own grid.

    ``method="direct"`` evaluates every sum explicitly (O(M^2), exact recursion
    weights); ``"fft"`` computes the same causal convolution in O(M log M) with
    round-off at the 1e-13 relative level.
    """
    lam = _check_order(lam)
    mem = memory_arg(memory)
    m = len(f)
    w = _weights(lam, table_length(m, memory))
    if method == "direct":
        raw = _backend.kernels.gl_filter(w, f.values, mem)
    elif method == "fft":
        raw = _fft_filter(w, f.values)
    else:
        raise InvalidArgument(f"unknown method {method!r}")
    return f.with_values(raw / f.dt**lam, unit=f.unit + "/s^" + f"{lam:g}" if f.unit else "")


def gl_history_sum(h, lam: float, k: int, memory: int | None = None) -> float:
    """Lagged part ``sum_{i=1..min(k,memory)} w_i h[k-i]`` of the GL sum.

    ``h`` may be a :class:`TimeSeries` or any sequence holding at least
    samples ``0..k-1``; the current sample is excluded and no ``dt`` scaling is
    applied.
    """
    lam = _check_order(lam)
    if k < 0:
        raise InvalidArgument(f"step index must be non-negative, got {k}")
    mem = memory_arg(memory)
    values = h.values if isinstance(h, TimeSeries) else np.asarray(h, dtype=np.float64)
    if values.size < k:
        raise InvalidArgument(f"need samples 0..{k - 1}, got {values.size}")
    L = k if memory is None else min(k, int(memory))
    return float(_backend.kernels.history_sum(_weights(lam, L), values, int(k), mem))
