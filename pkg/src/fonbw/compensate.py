"""Feedforward hysteresis compensators and the cascade evaluation harness.

Every compensator closes its internal algebraic loop with a one-sample delay:
the hysteresis state used at step ``k`` is driven by the command up to step
``k-1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import InvalidArgument
from .fracdiff import _weights, memory_arg, table_length
from .identify import rms_error
from .models import (
    DIVERGENCE_GUARD,
    CbwAuxParams,
    CbwParams,
    FonbwParams,
    ZhuParams,
    simulate,
)
from .signals import TimeSeries

MAX_FIXED_POINT_ITERATIONS = 10


@dataclass(frozen=True, eq=False)
class CompensationReport:
    u_cmd: TimeSeries
    H_achieved: TimeSeries
    rms_tracking_error: float
    rms_input: float

    def to_dict(self) -> dict:
        return {"rms_tracking_error": self.rms_tracking_error, "rms_input": self.rms_input}


def compensate_fonbw(
    H_d: TimeSeries,
    p: FonbwParams,
    memory: int | None = None,
    iterations: int = 0,
    guard: float = DIVERGENCE_GUARD,
) -> TimeSeries:
    """Command ``u = (H_d - G)/k_u1`` from the model's own hysteresis terms.

    ``G`` collects ``k_h*hbar`` and the polynomial terms above first order.
    With ``iterations=0`` both are evaluated on the previous command. A positive
    ``iterations`` (at most 10) instead refines each sample by fixed-point
    iteration on the undelayed command; this only converges when the loop gain
    ``|dG/du| / |k_u1|`` is below one.
    """
    if p.poly.coeffs[0] == 0:
        raise InvalidArgument("k_u1 must be non-zero")
    if not 0 <= iterations <= MAX_FIXED_POINT_ITERATIONS:
        raise InvalidArgument(f"iterations must be in [0, {MAX_FIXED_POINT_ITERATIONS}]")
    m = len(H_d)
    L = table_length(m, memory)
    u, _ = _backend.kernels.fonbw_compensate(
        H_d.values,
        H_d.dt ** (-p.lambda1),
        _weights(p.lambda1, L),
        H_d.dt ** (-p.lambda2),
        _weights(p.lambda2, L),
        np.asarray(p.poly.coeffs),
        p.k_h,
        p.rho,
        p.sigma,
        p.n,
        p.hbar_init,
        memory_arg(memory),
        guard,
        int(iterations),
    )
    return H_d.with_values(u, unit="V")


def compensate_cbw(H_d: TimeSeries, p: CbwAuxParams | CbwParams, guard: float = DIVERGENCE_GUARD) -> TimeSeries:
    """``u = (H_d - k_b*D*h)/k_a`` with ``h`` integrated on the delayed command."""
    if isinstance(p, CbwParams):
        p = CbwAuxParams.from_cbw(p)
    if p.k_a == 0:
        raise InvalidArgument("k_a must be non-zero")
    u, _ = _backend.kernels.bw_compensate(
        H_d.values, H_d.dt, p.k_a, p.k_b * p.D,
        p.A / p.D, p.beta / p.D, p.gamma / p.D, p.n, p.h_init, guard,
    )
    return H_d.with_values(u, unit="V")


def compensate_zhu(H_d: TimeSeries, p: ZhuParams, guard: float = DIVERGENCE_GUARD) -> TimeSeries:
    """Inverse of the Zhu model: dynamics of ``H_d`` minus the hysteresis force.

    The gain ``tau*exp(t/tau)/k1`` grows without bound; once it overflows the
    run stops with :class:`DivergenceError`.
    """
    if p.k1 == 0:
        raise InvalidArgument("k1 must be non-zero")
    d1 = np.gradient(H_d.values, H_d.dt) if len(H_d) > 1 else np.zeros(1)
    d2 = np.gradient(d1, H_d.dt) if len(H_d) > 1 else np.zeros(1)
    u, _ = _backend.kernels.zhu_compensate(
        H_d.t0, H_d.values, d1, d2, H_d.dt,
        p.m0, p.c0, p.k0, p.k1, p.tau, p.x0, p.A, p.beta, p.gamma, p.delta, p.n, guard,
    )
    return H_d.with_values(u, unit="V")


COMPENSATOR_KINDS = ("FONBW", "CBW", "ZHU")


def compensate(kind: str, H_d: TimeSeries, params, memory: int | None = None, guard: float = DIVERGENCE_GUARD, **kw) -> TimeSeries:
    kind = kind.upper()
    if kind == "FONBW":
        return compensate_fonbw(H_d, params, memory=memory, guard=guard, **kw)
    if kind == "CBW":
        return compensate_cbw(H_d, params, guard=guard)
    if kind == "ZHU":
        return compensate_zhu(H_d, params, guard=guard)
    raise InvalidArgument(f"unknown compensator kind {kind!r}; expected one of {COMPENSATOR_KINDS}")


def evaluate_cascade(
    compensator_kind: str,
    plant_kind: str,
    comp_params,
    plant_params,
    H_d: TimeSeries,
    memory: int | None = None,
    guard: float = DIVERGENCE_GUARD,
    **comp_kw,
) -> CompensationReport:
    """Drive the plant model with the compensator's command and score tracking."""
    u = compensate(compensator_kind, H_d, comp_params, memory=memory, guard=guard, **comp_kw)
    H = simulate(plant_kind, plant_params, u, memory=memory, guard=guard)
    zero = u.with_values(np.zeros(len(u)))
    return CompensationReport(
        u_cmd=u,
        H_achieved=H,
        rms_tracking_error=rms_error(H_d, H),
        rms_input=rms_error(u, zero),
    )


def relative_rms(report: CompensationReport, H_d: TimeSeries) -> float:
    rng = H_d.value_range
    return report.rms_tracking_error / rng if rng > 0 else math.inf
