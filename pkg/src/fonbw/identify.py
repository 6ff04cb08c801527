"""Parameter identification by self-adaptive differential evolution.

The optimizer is DE/rand/1/bin with jDE-style self-adaptation: each individual
carries its own mutation factor F and crossover rate CR, regenerated with
probabilities ``tau1``/``tau2`` before producing a trial, and inherited by the
trial only when it survives selection.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DivergenceError, InvalidArgument, SolverError
from .fixtures import CBW_THETA_NAMES, FONBW_THETA_NAMES, ZHU_THETA_NAMES
from .models import (
    DIVERGENCE_GUARD,
    CbwAuxParams,
    FonbwParams,
    NbwParams,
    PolynomialGain,
    ZhuParams,
    simulate,
)
from .signals import TimeSeries

log = logging.getLogger(__name__)

PENALTY = 1e9

DEFAULT_THETA_NAMES = {
    "CBW": CBW_THETA_NAMES,
    "NBW": ("k_u", "k_h", "rho", "sigma", "n"),
    "ANBW": ("k_u1", "k_u2", "k_u3", "k_h", "rho", "sigma", "n"),
    "FONBW": FONBW_THETA_NAMES,
    "ZHU": ZHU_THETA_NAMES,
}


def rms_error(H_meas, H_model) -> float:
    """Root-mean-square difference between two equally long series."""
    a = H_meas.values if isinstance(H_meas, TimeSeries) else np.asarray(H_meas, dtype=np.float64)
    b = H_model.values if isinstance(H_model, TimeSeries) else np.asarray(H_model, dtype=np.float64)
    if a.shape != b.shape or a.size < 1:
        raise InvalidArgument(f"series lengths differ or are empty ({a.size} vs {b.size})")
    d = a - b
    return float(np.sqrt(np.dot(d, d) / d.size))


def _poly_names(names):
    return sorted((n for n in names if n.startswith("k_u") and n[3:].isdigit()), key=lambda n: int(n[3:]))


def build_params(kind: str, values: dict):
    """Model parameter object for ``kind`` from a name->value mapping."""
    kind = kind.upper()
    if kind == "CBW":
        return CbwAuxParams(**values)
    if kind == "NBW":
        return NbwParams(**values)
    if kind in ("ANBW", "FONBW"):
        values = dict(values)
        pnames = _poly_names(values)
        if [int(n[3:]) for n in pnames] != list(range(1, len(pnames) + 1)):
            raise InvalidArgument(f"polynomial coefficients must be k_u1..k_uN, got {pnames}")
        poly = PolynomialGain(tuple(values.pop(n) for n in pnames))
        if kind == "ANBW":
            return poly, NbwParams(k_u=poly.coeffs[0], **values)
        return FonbwParams(poly=poly, **values)
    if kind == "ZHU":
        return ZhuParams(**values)
    raise InvalidArgument(f"unknown model kind {kind!r}")


def params_to_theta(kind: str, params, names) -> np.ndarray:
    """Inverse of :func:`build_params` for the named entries."""
    kind = kind.upper()
    if kind == "ANBW":
        poly, nbw = params
        d = nbw.to_dict()
        d.update({f"k_u{i + 1}": c for i, c in enumerate(poly.coeffs)})
    elif kind == "FONBW":
        d = params.to_dict()
        d.update({f"k_u{i + 1}": c for i, c in enumerate(d.pop("poly"))})
    else:
        d = params.to_dict()
    return np.array([d[n] for n in names], dtype=np.float64)


@dataclass(frozen=True, eq=False)
class IdentificationProblem:
    model_kind: str
    data_u: TimeSeries
    data_H: TimeSeries
    theta_names: tuple[str, ...] | None = None
    memory: int | None = None
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        kind = self.model_kind.upper()
        if kind not in DEFAULT_THETA_NAMES:
            raise InvalidArgument(f"unknown model kind {self.model_kind!r}")
        object.__setattr__(self, "model_kind", kind)
        if not self.data_u.same_grid(self.data_H):
            raise InvalidArgument("data_u and data_H must share grid and length")
        names = tuple(self.theta_names or DEFAULT_THETA_NAMES[kind])
        if len(set(names)) != len(names):
            raise InvalidArgument("duplicate parameter names")
        object.__setattr__(self, "theta_names", names)

    @property
    def dim(self) -> int:
        return len(self.theta_names)

    def params(self, theta):
        theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        if theta.size != self.dim:
            raise InvalidArgument(f"theta has {theta.size} entries, expected {self.dim}")
        values = dict(self.fixed)
        values.update({n: float(x) for n, x in zip(self.theta_names, theta)})
        return build_params(self.model_kind, values)


def evaluate_candidate(problem: IdentificationProblem, theta) -> float:
    """RMS model error for ``theta``; unusable candidates score :data:`PENALTY`."""
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.size != problem.dim:
        raise InvalidArgument(f"theta has {theta.size} entries, expected {problem.dim}")
    try:
        params = problem.params(theta)
        H = simulate(problem.model_kind, params, problem.data_u, memory=problem.memory, guard=DIVERGENCE_GUARD)
        J = rms_error(problem.data_H, H)
    except (DivergenceError, SolverError, InvalidArgument, OverflowError, FloatingPointError, ZeroDivisionError):
        return PENALTY
    return J if math.isfinite(J) else PENALTY


@dataclass(frozen=True)
class DeConfig:
    population_size: int
    max_generations: int
    bounds: tuple[tuple[float, float], ...]
    f_init: float = 0.5
    cr_init: float = 0.9
    tau1: float = 0.1
    tau2: float = 0.1
    f_lo: float = 0.1
    f_hi: float = 0.9
    seed: int = 0
    target_objective: float | None = None
    workers: int = 1

    def __post_init__(self):
        b = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", b)
        if self.population_size < 4:
            raise InvalidArgument("population_size must be at least 4")
        if self.max_generations < 0:
            raise InvalidArgument("max_generations must be non-negative")
        for i, (lo, hi) in enumerate(b):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise InvalidArgument(f"bound {i} is infeasible: [{lo}, {hi}]")
        if not 0 <= self.cr_init <= 1:
            raise InvalidArgument("cr_init must lie in [0, 1]")
        if not (0 <= self.tau1 <= 1 and 0 <= self.tau2 <= 1):
            raise InvalidArgument("tau1 and tau2 are probabilities")
        if not 0 < self.f_lo <= self.f_hi:
            raise InvalidArgument("need 0 < f_lo <= f_hi")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bounds"] = [list(b) for b in self.bounds]
        return d


@dataclass(frozen=True, eq=False)
class IdentificationResult:
    theta_names: tuple[str, ...]
    best_theta: np.ndarray
    best_objective: float
    objective_trace: list[float]
    evaluations: int
    generations: int
    seed: int
    config: DeConfig

    def best_params_dict(self) -> dict:
        return {n: float(x) for n, x in zip(self.theta_names, self.best_theta)}

    def to_dict(self) -> dict:
        return {
            "best_parameters": self.best_params_dict(),
            "best_objective": self.best_objective,
            "objective_trace": list(self.objective_trace),
            "evaluations": self.evaluations,
            "generations": self.generations,
            "seed": self.seed,
            "config": self.config.to_dict(),
        }


def _evaluate_all(problem, thetas, pool):
    if pool is None:
        return np.array([evaluate_candidate(problem, t) for t in thetas])
    return np.array(list(pool.map(evaluate_candidate, [problem] * len(thetas), list(thetas))))


def _early_stop(best, target):
    return target is not None and math.isfinite(target) and best <= target


def identify(problem: IdentificationProblem, cfg: DeConfig) -> IdentificationResult:
    """Minimize the RMS objective over the box ``cfg.bounds``.

    A ``target_objective`` of ``None`` or a non-finite value disables early
    stopping, so exactly ``max_generations`` generations run. All random draws
    happen in this loop, in a fixed order, so results depend only on the seed
    and not on ``cfg.workers``.
    """
    dim = problem.dim
    if len(cfg.bounds) != dim:
        raise InvalidArgument(f"{len(cfg.bounds)} bounds given for {dim} parameters")
    rng = np.random.default_rng(cfg.seed)
    lo = np.array([b[0] for b in cfg.bounds])
    hi = np.array([b[1] for b in cfg.bounds])
    NP = cfg.population_size

    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        pop = lo + rng.random((NP, dim)) * (hi - lo)
        fit = _evaluate_all(problem, pop, pool)
        F = np.full(NP, cfg.f_init)
        CR = np.full(NP, cfg.cr_init)
        evaluations = NP
        trace = [float(fit.min())]
        gen = 0
        while gen < cfg.max_generations and not _early_stop(trace[-1], cfg.target_objective):
            Fn = np.where(rng.random(NP) < cfg.tau1, cfg.f_lo + rng.random(NP) * (cfg.f_hi - cfg.f_lo), F)
            CRn = np.where(rng.random(NP) < cfg.tau2, rng.random(NP), CR)
            trials = np.empty_like(pop)
            for i in range(NP):
                r = rng.choice(NP - 1, 3, replace=False)
                r[r >= i] += 1
                mutant = pop[r[0]] + Fn[i] * (pop[r[1]] - pop[r[2]])
                cross = rng.random(dim) < CRn[i]
                cross[rng.integers(dim)] = True
                trials[i] = np.clip(np.where(cross, mutant, pop[i]), lo, hi)
            tfit = _evaluate_all(problem, trials, pool)
            evaluations += NP
            keep = tfit <= fit
            pop[keep] = trials[keep]
            fit[keep] = tfit[keep]
            F[keep] = Fn[keep]
            CR[keep] = CRn[keep]
            gen += 1
            trace.append(float(fit.min()))
            if gen % 10 == 0:
                log.debug("generation %d best %.6g", gen, trace[-1])
    finally:
        if pool is not None:
            pool.shutdown()

    best = int(np.argmin(fit))
    return IdentificationResult(
        theta_names=problem.theta_names,
        best_theta=pop[best].copy(),
        best_objective=float(fit[best]),
        objective_trace=trace,
        evaluations=evaluations,
        generations=gen,
        seed=cfg.seed,
        config=cfg,
    )


def scaled_bounds(theta, low: float = 0.5, high: float = 2.0, clip: dict | None = None):
    """Box ``theta*[low, high]`` that keeps each entry's sign.

    ``clip`` maps an index to an ``(lo, hi)`` validity window intersected with
    the scaled box (e.g. fractional orders capped at 1).
    """
    out = []
    for i, x in enumerate(np.asarray(theta, dtype=np.float64)):
        a, b = sorted((x * low, x * high))
        if clip and i in clip:
            a, b = max(a, clip[i][0]), min(b, clip[i][1])
        out.append((a, b))
    return tuple(out)
