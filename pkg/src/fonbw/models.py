"""Forward simulation of the Bouc-Wen family.

Integer-order models (CBW, NBW, asymmetric NBW, Zhu) are stepped with fixed-step
RK4 on the sample grid; the input rate is formed by central differences and
linearly interpolated at the half step. The fractional-order model uses a
semi-implicit Grünwald-Letnikov scheme with one scalar implicit solve per step.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import _backend
from .errors import InvalidArgument
from .fracdiff import _weights, gl_derivative, memory_arg, table_length
from .signals import TimeSeries

DIVERGENCE_GUARD = 1e12


def _positive_n(n):
    if not n >= 1:
        raise InvalidArgument(f"exponent n must be >= 1, got {n!r}")


def _finite(obj):
    for f in fields(obj):
        val = getattr(obj, f.name)
        if isinstance(val, float) and not math.isfinite(val):
            raise InvalidArgument(f"{type(obj).__name__}.{f.name} must be finite, got {val!r}")


class _Params:
    """Shared helpers for the parameter dataclasses."""

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise InvalidArgument(f"unknown {cls.__name__} fields: {sorted(extra)}")
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class CbwParams(_Params):
    alpha: float
    k: float
    D: float
    A: float
    beta: float
    gamma: float
    n: float
    h_init: float = 0.0

    def __post_init__(self):
        _finite(self)
        _positive_n(self.n)
        if self.D == 0:
            raise InvalidArgument("D must be non-zero")
        if not self.beta + self.gamma > 0:
            raise InvalidArgument("beta + gamma must be positive")
        if not self.A / (self.beta + self.gamma) > 0:
            raise InvalidArgument("A / (beta + gamma) must be positive")


@dataclass(frozen=True)
class CbwAuxParams(_Params):
    """CBW with ``k_a = alpha*k`` and ``k_b = (1-alpha)*k`` as free constants."""

    k_a: float
    k_b: float
    D: float
    A: float
    beta: float
    gamma: float
    n: float
    h_init: float = 0.0

    def __post_init__(self):
        _finite(self)
        _positive_n(self.n)
        if self.D == 0:
            raise InvalidArgument("D must be non-zero")

    @classmethod
    def from_cbw(cls, p: CbwParams) -> "CbwAuxParams":
        return cls(p.alpha * p.k, (1 - p.alpha) * p.k, p.D, p.A, p.beta, p.gamma, p.n, p.h_init)


@dataclass(frozen=True)
class NbwParams(_Params):
    # sigma is deliberately unconstrained: identified sets routinely leave (0, 1)
    k_u: float
    k_h: float
    rho: float
    sigma: float
    n: float
    hbar_init: float = 0.0

    def __post_init__(self):
        _finite(self)
        _positive_n(self.n)


@dataclass(frozen=True)
class PolynomialGain:
    """``g(u) = k_u1*u + k_u2*u**2 + ... + k_uN*u**N``."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(x) for x in self.coeffs)
        if len(c) < 1:
            raise InvalidArgument("polynomial needs at least the linear coefficient")
        if c[0] == 0 or not all(math.isfinite(x) for x in c):
            raise InvalidArgument("k_u1 must be finite and non-zero")
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self) -> int:
        return len(self.coeffs)

    def __call__(self, u):
        u = np.asarray(u, dtype=np.float64)
        # Horner, lowest power is u**1
        acc = np.zeros_like(u)
        for c in reversed(self.coeffs):
            acc = (acc + c) * u
        return acc


@dataclass(frozen=True)
class FonbwParams:
    poly: PolynomialGain
    k_h: float
    rho: float
    sigma: float
    n: float
    lambda1: float
    lambda2: float
    hbar_init: float = 0.0

    def __post_init__(self):
        if not isinstance(self.poly, PolynomialGain):
            object.__setattr__(self, "poly", PolynomialGain(tuple(self.poly)))
        for name in ("k_h", "rho", "sigma", "n", "lambda1", "lambda2", "hbar_init"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise InvalidArgument(f"FonbwParams.{name} must be finite")
            object.__setattr__(self, name, val)
        _positive_n(self.n)
        for name in ("lambda1", "lambda2"):
            if not 0 < getattr(self, name) <= 1:
                raise InvalidArgument(f"{name} must lie in (0, 1], got {getattr(self, name)!r}")

    def to_dict(self) -> dict:
        d = {"poly": list(self.poly.coeffs)}
        d.update({f.name: getattr(self, f.name) for f in fields(self) if f.name != "poly"})
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FonbwParams":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise InvalidArgument(f"unknown FonbwParams fields: {sorted(extra)}")
        poly = PolynomialGain(tuple(float(x) for x in d.pop("poly")))
        return cls(poly=poly, **{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class ZhuParams(_Params):
    m0: float
    c0: float
    k0: float
    k1: float
    tau: float
    A: float
    beta: float
    gamma: float
    delta: float
    n: float
    x0: float = 0.0

    def __post_init__(self):
        _finite(self)
        _positive_n(self.n)
        if not self.tau > 0:
            raise InvalidArgument("tau must be positive")


# ---------------------------------------------------------------- transforms


def scale_cbw(p: CbwParams, c: float) -> CbwParams:
    """Equivalent CBW set: beta, gamma scaled by ``c**n`` and D by ``c``."""
    if not c > 0:
        raise InvalidArgument(f"scale factor must be positive, got {c!r}")
    cn = c**p.n
    return replace(p, beta=cn * p.beta, gamma=cn * p.gamma, D=c * p.D, h_init=p.h_init / c)


def normalize_cbw(p: CbwParams) -> NbwParams:
    s = p.beta + p.gamma
    if not s > 0 or not p.A / s > 0:
        raise InvalidArgument("normalization needs beta + gamma > 0 and A / (beta + gamma) > 0")
    h0 = (p.A / s) ** (1.0 / p.n)
    return NbwParams(
        k_u=p.alpha * p.k,
        k_h=(1 - p.alpha) * p.D * p.k * h0,
        rho=p.A / (p.D * h0),
        sigma=p.beta / s,
        n=p.n,
        hbar_init=p.h_init / h0,
    )


# ---------------------------------------------------------------- simulation


def rate(u: TimeSeries) -> np.ndarray:
    """Central-difference derivative, one-sided at the ends."""
    if len(u) == 1:
        return np.zeros(1)
    return np.gradient(u.values, u.dt)


def _cbw_state(p, u: TimeSeries, guard: float) -> np.ndarray:
    return _backend.kernels.bw_rk4(
        rate(u), u.dt, p.A / p.D, p.beta / p.D, p.gamma / p.D, p.n, p.h_init, guard
    )


def simulate_cbw(p: CbwParams | CbwAuxParams, u: TimeSeries, guard: float = DIVERGENCE_GUARD) -> TimeSeries:
    h = _cbw_state(p, u, guard)
    if isinstance(p, CbwAuxParams):
        H = p.k_a * u.values + p.k_b * p.D * h
    else:
        H = p.alpha * p.k * u.values + (1 - p.alpha) * p.D * p.k * h
    return u.with_values(H, unit="um")


def nbw_state(p: NbwParams, u: TimeSeries, guard: float = DIVERGENCE_GUARD) -> np.ndarray:
    """Normalized hysteresis variable of the integer-order model."""
    return _backend.kernels.bw_rk4(
        rate(u), u.dt, p.rho, p.rho * p.sigma, p.rho * (1 - p.sigma), p.n, p.hbar_init, guard
    )


def simulate_nbw(p: NbwParams, u: TimeSeries, guard: float = DIVERGENCE_GUARD) -> TimeSeries:
    return u.with_values(p.k_u * u.values + p.k_h * nbw_state(p, u, guard), unit="um")


def simulate_anbw(
    poly: PolynomialGain, p: NbwParams, u: TimeSeries, guard: float = DIVERGENCE_GUARD
) -> TimeSeries:
    """NBW hysteresis with a polynomial input term; ``p.k_u`` is ignored."""
    if not isinstance(poly, PolynomialGain):
        poly = PolynomialGain(tuple(poly))
    return u.with_values(poly(u.values) + p.k_h * nbw_state(p, u, guard), unit="um")


def fonbw_states(
    p: FonbwParams,
    u: TimeSeries,
    memory: int | None = None,
    guard: float = DIVERGENCE_GUARD,
    closed_form: bool = True,
    method: str = "fft",
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(hbar, v)`` where ``v`` is the order-lambda1 derivative of ``u``.

    With ``n == 1`` and ``closed_form`` the four sign-selected closed-form
    updates are used; otherwise each step solves the implicit scalar equation
    by safeguarded Newton. The input is known in full, so its derivative is
    taken by FFT convolution unless ``method="direct"``.
    """
    mem = memory_arg(memory)
    v = gl_derivative(u, p.lambda1, memory, method).values
    w2 = _weights(p.lambda2, table_length(len(u), memory))
    hbar = _backend.kernels.fonbw_hbar(
        v, u.dt ** (-p.lambda2), w2, p.rho, p.sigma, p.n, p.hbar_init, mem, guard, closed_form
    )
    return hbar, v


def simulate_fonbw(
    p: FonbwParams,
    u: TimeSeries,
    memory: int | None = None,
    guard: float = DIVERGENCE_GUARD,
    closed_form: bool = True,
) -> TimeSeries:
    hbar, _ = fonbw_states(p, u, memory, guard, closed_form)
    return u.with_values(p.poly(u.values) + p.k_h * hbar, unit="um")


def simulate_zhu(p: ZhuParams, u: TimeSeries, guard: float = DIVERGENCE_GUARD) -> TimeSeries:
    if not p.m0 > 0:
        raise InvalidArgument("m0 must be positive to simulate the plant")
    x = _backend.kernels.zhu_rk4(
        u.t0, u.values, rate(u), u.dt,
        p.m0, p.c0, p.k0, p.k1, p.tau, p.x0, p.A, p.beta, p.gamma, p.delta, p.n, guard,
    )
    return u.with_values(x, unit="um")


class Branch(str, enum.Enum):
    POSITIVE_ASCENDING = "positive-ascending"
    POSITIVE_DESCENDING = "positive-descending"
    NEGATIVE_DESCENDING = "negative-descending"
    NEGATIVE_ASCENDING = "negative-ascending"


def classify_branch(hbar: float, v: float) -> Branch:
    """Loop quadrant from the signs of the hysteresis state and input derivative.

    Zeros resolve toward the positive and ascending labels.
    """
    if hbar >= 0:
        return Branch.POSITIVE_ASCENDING if v >= 0 else Branch.POSITIVE_DESCENDING
    return Branch.NEGATIVE_ASCENDING if v >= 0 else Branch.NEGATIVE_DESCENDING


MODEL_KINDS = ("CBW", "NBW", "ANBW", "FONBW", "ZHU")


def simulate(kind: str, params, u: TimeSeries, memory: int | None = None, guard: float = DIVERGENCE_GUARD) -> TimeSeries:
    """Dispatch on a model kind name."""
    kind = kind.upper()
    if kind == "CBW":
        return simulate_cbw(params, u, guard)
    if kind == "NBW":
        return simulate_nbw(params, u, guard)
    if kind == "ANBW":
        poly, nbw = params
        return simulate_anbw(poly, nbw, u, guard)
    if kind == "FONBW":
        return simulate_fonbw(params, u, memory, guard)
    if kind == "ZHU":
        return simulate_zhu(params, u, guard)
    raise InvalidArgument(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
