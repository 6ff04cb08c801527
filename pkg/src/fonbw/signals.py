"""Uniformly sampled time series and the excitation/reference waveforms."""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, InvalidArgument

DEFAULT_DT = 1e-4
GRID_TOLERANCE = 1e-9

_HEADER_RE = re.compile(r"^\s*([A-Za-z_]\w*)\s*(?:\[([^\]]*)\])?\s*$")


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Signal sampled at ``t0 + k*dt``.

    ``values`` is stored as a read-only float64 array; ``unit`` is a free-form
    label and is never used for conversion.
    """

    t0: float
    dt: float
    values: np.ndarray
    unit: str = field(default="")

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidArgument(f"dt must be positive and finite, got {self.dt!r}")
        arr = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if arr.size < 1:
            raise InvalidArgument("a time series needs at least one sample")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))

    def __len__(self) -> int:
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) * self.dt

    def with_values(self, values, unit: str | None = None) -> "TimeSeries":
        """Same grid, new samples."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.values.shape:
            raise InvalidArgument(
                f"expected {len(self)} samples on this grid, got {values.size}"
            )
        return TimeSeries(self.t0, self.dt, values, self.unit if unit is None else unit)

    def same_grid(self, other: "TimeSeries") -> bool:
        return len(self) == len(other) and self.t0 == other.t0 and self.dt == other.dt

    @property
    def value_range(self) -> float:
        return float(self.values.max() - self.values.min())


def _grid(duration: float, dt: float) -> np.ndarray:
    if not dt > 0:
        raise InvalidArgument(f"dt must be positive, got {dt!r}")
    if not duration >= dt:
        raise InvalidArgument(f"duration {duration!r} is shorter than one step {dt!r}")
    # whole steps only; the small slack absorbs duration/dt landing a hair under an integer
    steps = int(math.floor(duration / dt * (1 + 1e-12)))
    return np.arange(steps + 1) * dt


def gen_sine_offset(
    amplitude: float, frequency: float, duration: float, dt: float = DEFAULT_DT, unit: str = "V"
) -> TimeSeries:
    """``a - a*cos(2*pi*f*t)``: starts at 0, peaks at ``2a`` every half period."""
    if not frequency > 0:
        raise InvalidArgument(f"frequency must be positive, got {frequency!r}")
    if amplitude < 0:
        raise InvalidArgument(f"amplitude must be non-negative, got {amplitude!r}")
    t = _grid(duration, dt)
    return TimeSeries(0.0, dt, amplitude - amplitude * np.cos(2 * np.pi * frequency * t), unit)


def gen_sweep_eq19(duration: float = 10.0, dt: float = DEFAULT_DT) -> TimeSeries:
    """Decaying, slowing sweep used for identification (volts)."""
    t = _grid(duration, dt)
    u = 60.0 * np.exp(-0.13 * t) * (np.cos(3 * np.pi * t * np.exp(-0.09 * t) - 3.15) + 1.0)
    return TimeSeries(0.0, dt, u, "V")


def gen_multifreq(duration: float = 1.0, dt: float = DEFAULT_DT) -> TimeSeries:
    """Multi-frequency variable-amplitude reference (micrometers), 1 s period."""
    t = _grid(duration, dt)
    h = (
        4.0
        - np.cos(2 * np.pi * t)
        - np.cos(6 * np.pi * t)
        - np.cos(10 * np.pi * t)
        - np.cos(20 * np.pi * t)
    )
    return TimeSeries(0.0, dt, h, "um")


GENERATORS = {
    "sine_offset": gen_sine_offset,
    "sweep": gen_sweep_eq19,
    "multifreq": gen_multifreq,
}


def _parse_header(row):
    names, units = [], []
    for cell in row:
        m = _HEADER_RE.match(cell)
        if not m:
            raise DataError(f"unreadable CSV header cell {cell!r}")
        names.append(m.group(1))
        units.append(m.group(2) or "")
    return names, units


def read_csv(path) -> tuple[TimeSeries, TimeSeries | None]:
    """Load ``t,u`` or ``t,u,H`` columns; unit labels may be given as ``u[V]``."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: empty file")
    names, units = _parse_header(rows[0])
    if names[:2] != ["t", "u"] or len(names) not in (2, 3) or (len(names) == 3 and names[2] != "H"):
        raise DataError(f"{path}: header must be 't,u' or 't,u,H', got {','.join(rows[0])!r}")
    body = rows[1:]
    if not body:
        raise DataError(f"{path}: no samples")
    try:
        data = np.array([[float(c) for c in r] for r in body], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric sample: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != len(names):
        raise DataError(f"{path}: every row needs {len(names)} columns")
    if not np.all(np.isfinite(data)):
        bad = int(np.argwhere(~np.isfinite(data))[0, 0])
        raise DataError(f"{path}: NaN/Inf sample in data row {bad + 1}")

    t = data[:, 0]
    t0 = float(t[0])
    if t.size == 1:
        raise DataError(f"{path}: a single row does not define a time step")
    dt = float((t[-1] - t0) / (t.size - 1))
    if not dt > 0:
        raise DataError(f"{path}: time column must increase")
    dev = np.abs(t - (t0 + np.arange(t.size) * dt))
    if dev.max() > GRID_TOLERANCE:
        k = int(dev.argmax())
        raise DataError(f"{path}: non-uniform time column at row {k + 1} (off by {dev[k]:.3g} s)")
    u = TimeSeries(t0, dt, data[:, 1], units[1])
    H = TimeSeries(t0, dt, data[:, 2], units[2]) if len(names) == 3 else None
    return u, H


def write_csv(path, u: TimeSeries, H: TimeSeries | None = None) -> None:
    """Write series using shortest round-trip float text."""
    if H is not None and not u.same_grid(H):
        raise InvalidArgument("u and H must share a grid")

    def head(name, s):
        return f"{name}[{s.unit}]" if s.unit else name

    header = ["t", head("u", u)] + ([head("H", H)] if H is not None else [])
    cols = [u.times, u.values] + ([H.values] if H is not None else [])
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([repr(float(x)) for x in row])
