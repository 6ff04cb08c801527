"""Hysteresis-loop geometry: period detection, branch resampling, metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .signals import TimeSeries


def input_minima(u: np.ndarray, closure: float = 1e-3) -> np.ndarray:
    """Indices of the local minima of a sampled input.

    Plateaus count once. The first/last sample counts when the signal leaves
    it upward / arrives at it downward and its value is within ``closure`` (a
    fraction of the input range) of the neighbouring minimum, so truncated
    half-periods at either end are not mistaken for full ones.
    """
    u = np.asarray(u, dtype=np.float64)
    d = np.diff(u)
    nz = np.flatnonzero(d)
    if nz.size == 0:
        return np.empty(0, dtype=int)
    s = np.sign(d[nz])
    # sign flips from falling to rising: minimum sits right after the last falling step
    inner = (nz[np.flatnonzero((s[:-1] < 0) & (s[1:] > 0))] + 1).tolist()
    tol = closure * float(np.ptp(u))
    mins = list(inner)
    if s[0] > 0:
        ref = u[inner[0]] if inner else u[-1]
        if u[0] <= ref + tol:
            mins.insert(0, 0)
    if s[-1] < 0:
        ref = u[inner[-1]] if inner else u[mins[0]] if mins else u[0]
        if u[-1] <= ref + tol:
            mins.append(u.size - 1)
    return np.asarray(mins, dtype=int)


def periods(u: np.ndarray) -> list[tuple[int, int]]:
    """Consecutive ``(start, stop)`` index pairs between input minima (inclusive)."""
    m = input_minima(u)
    return [(int(a), int(b)) for a, b in zip(m[:-1], m[1:])]


def last_period(u: np.ndarray) -> tuple[int, int]:
    p = periods(u)
    if not p:
        raise InvalidArgument("series is shorter than one full input period")
    return p[-1]


def branches(u: np.ndarray, H: np.ndarray, start: int, stop: int):
    """Split one period into ascending (min to max) and descending (max to min) parts."""
    seg = u[start : stop + 1]
    top = start + int(np.argmax(seg))
    return (u[start : top + 1], H[start : top + 1]), (u[top : stop + 1], H[top : stop + 1])


def _interp_branch(ub, Hb, grid):
    order = np.argsort(ub, kind="stable")
    return np.interp(grid, ub[order], Hb[order])


def resample_branches(u: np.ndarray, H: np.ndarray, start: int, stop: int, points: int = 401):
    """Ascending and descending H on a shared interior u grid.

    Returns ``(grid, H_asc, H_desc)``. The grid excludes the turning points.
    """
    (ua, Ha), (ud, Hd) = branches(u, H, start, stop)
    lo = max(ua.min(), ud.min())
    hi = min(ua.max(), ud.max())
    if not hi > lo:
        raise InvalidArgument("branches do not overlap in u")
    grid = np.linspace(lo, hi, points + 2)[1:-1]
    return grid, _interp_branch(ua, Ha, grid), _interp_branch(ud, Hd, grid)


@dataclass(frozen=True)
class LoopMetrics:
    area: float
    max_width: float
    center_offset: float


def shoelace_area(x: np.ndarray, y: np.ndarray) -> float:
    """Signed area of the closed polygon; counter-clockwise is positive."""
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def loop_metrics(u: TimeSeries, H: TimeSeries, points: int = 401) -> LoopMetrics:
    """Area, widest branch gap and centroid asymmetry over the last full period."""
    if len(u) != len(H):
        raise InvalidArgument("u and H must have equal lengths")
    uv, Hv = u.values, H.values
    a, b = last_period(uv)
    x, y = uv[a : b + 1], Hv[a : b + 1]
    area = shoelace_area(x, y)
    _, Hasc, Hdesc = resample_branches(uv, Hv, a, b, points)
    width = float(np.max(np.abs(Hdesc - Hasc)))

    scale = max(np.ptp(x) * np.ptp(y), np.finfo(float).tiny)
    if abs(area) > 1e-12 * scale:
        cross = x * np.roll(y, -1) - np.roll(x, -1) * y
        cy = float(np.dot(y + np.roll(y, -1), cross)) / (6.0 * area)
    else:
        # degenerate (single-valued) curve: sample mean, closing sample dropped
        cy = float(y[:-1].mean()) if y.size > 1 else float(y[0])
    mid = 0.5 * (float(y.max()) + float(y.min()))
    return LoopMetrics(area=area, max_width=width, center_offset=cy - mid)
