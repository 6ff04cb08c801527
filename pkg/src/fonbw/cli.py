"""Batch command-line front-end.

Each invocation runs one subcommand described by an optional TOML document;
a handful of flags override the document. Artifacts land in ``--out``:
series CSVs, ``report.json`` and, where it makes sense, ``loops.csv`` with
u-H pairs per input period for plotting.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver
divergence, 5 identification failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from . import _backend
from .compensate import COMPENSATOR_KINDS, compensate, evaluate_cascade
from .errors import (
    ConfigError,
    DataError,
    DivergenceError,
    IdentificationFailure,
    InvalidArgument,
    SolverError,
)
from .fixtures import FIXTURES
from .fracdiff import gl_derivative
from .identify import (
    DEFAULT_THETA_NAMES,
    PENALTY,
    DeConfig,
    IdentificationProblem,
    identify,
    params_to_theta,
    scaled_bounds,
)
from .loops import loop_metrics, periods
from .models import (
    DIVERGENCE_GUARD,
    MODEL_KINDS,
    CbwAuxParams,
    CbwParams,
    FonbwParams,
    NbwParams,
    PolynomialGain,
    ZhuParams,
    normalize_cbw,
    simulate,
)
from .signals import GENERATORS, TimeSeries, read_csv, write_csv

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("fonbw")

COMMANDS = ("simulate", "identify", "compensate", "fracdiff", "normalize", "metrics")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED, EXIT_IDENT = 0, 2, 3, 4, 5


@dataclass
class RunConfig:
    command: str
    model_kind: str | None = None
    params: dict = field(default_factory=dict)
    signal: dict = field(default_factory=dict)
    dt: float | None = None
    memory: int | None = None
    guard: float = DIVERGENCE_GUARD
    out: Path = Path(".")
    seed: int = 0
    plot_data: bool = True
    section: dict = field(default_factory=dict)  # command-specific table
    base: Path = Path(".")


# ---------------------------------------------------------------- parameters


def parse_memory(value) -> int | None:
    if value is None or (isinstance(value, str) and value.lower() == "unbounded"):
        return None
    try:
        mem = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"memory must be a positive integer or 'unbounded', got {value!r}")
    if mem < 1:
        raise ConfigError(f"memory must be >= 1, got {mem}")
    return mem


def params_from_doc(kind: str, doc: dict):
    """Parameter object from a config table (field names as in the dataclasses).

    ``fixture = "<name>"`` loads a shipped set; remaining keys override it.
    """
    kind = kind.upper()
    doc = dict(doc)
    name = doc.pop("fixture", None)
    if name is not None:
        try:
            base = FIXTURES[(kind, str(name))]
        except KeyError:
            known = sorted(n for k, n in FIXTURES if k == kind)
            raise ConfigError(f"no fixture {name!r} for {kind}; available: {known}")
        merged = params_to_doc(kind, base)
        merged.update(doc)
        doc = merged
    try:
        if kind == "CBW":
            cls = CbwParams if "alpha" in doc else CbwAuxParams
            return cls.from_dict(doc)
        if kind == "NBW":
            return NbwParams.from_dict(doc)
        if kind == "ANBW":
            poly = PolynomialGain(tuple(float(c) for c in doc.pop("poly")))
            return poly, NbwParams.from_dict({"k_u": poly.coeffs[0], **doc})
        if kind == "FONBW":
            return FonbwParams.from_dict(doc)
        if kind == "ZHU":
            return ZhuParams.from_dict(doc)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"incomplete {kind} parameter table: {exc}")
    except InvalidArgument as exc:
        raise ConfigError(str(exc))
    raise ConfigError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def params_to_doc(kind: str, params) -> dict:
    if kind.upper() == "ANBW":
        poly, nbw = params
        d = nbw.to_dict()
        d.pop("k_u")
        return {"poly": list(poly.coeffs), **d}
    return params.to_dict()


# ---------------------------------------------------------------- config


def _need_kind(cfg: RunConfig) -> str:
    if not cfg.model_kind:
        raise ConfigError(f"'{cfg.command}' needs model_kind")
    kind = cfg.model_kind.upper()
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model_kind {cfg.model_kind!r}; expected one of {MODEL_KINDS}")
    return kind


def load_config(args: argparse.Namespace) -> RunConfig:
    doc: dict = {}
    base = Path(".")
    if args.config:
        path = Path(args.config)
        try:
            with path.open("rb") as fh:
                doc = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}")
        base = path.parent
    command = args.command
    if doc.get("command", command) != command:
        raise ConfigError(f"config is for {doc['command']!r}, invoked as {command!r}")
    solver = doc.get("solver", {})
    output = doc.get("output", {})
    signal = dict(doc.get("signal", {}))
    if args.csv:
        signal = {"csv": args.csv}
    cfg = RunConfig(
        command=command,
        model_kind=args.model or doc.get("model_kind"),
        params=dict(doc.get("params", {})),
        signal=signal,
        dt=solver.get("dt"),
        memory=parse_memory(solver.get("memory")),
        guard=float(solver.get("guard", DIVERGENCE_GUARD)),
        out=Path(output.get("dir", ".")),
        seed=int(doc.get("seed", 0)),
        plot_data=bool(output.get("plot_data", True)),
        section=dict(doc.get(command, {})),
        base=base,
    )
    if args.fixture:
        cfg.params = {"fixture": args.fixture}
    if args.dt is not None:
        cfg.dt = args.dt
    if args.memory is not None:
        cfg.memory = parse_memory(args.memory)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = Path(args.out)
    if cfg.dt is not None and not (cfg.dt > 0 and math.isfinite(cfg.dt)):
        raise ConfigError(f"dt must be positive, got {cfg.dt!r}")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must fit in an unsigned 64-bit integer")
    if cfg.signal:
        sources = [k for k in ("csv", "generator") if k in cfg.signal]
        if len(sources) != 1:
            raise ConfigError("signal needs exactly one of 'csv' or 'generator'")
        if "csv" in cfg.signal:
            p = Path(cfg.signal["csv"])
            if not p.is_absolute() and args.csv is None:
                p = base / p
            if not p.is_file():
                raise ConfigError(f"signal file not found: {p}")
            cfg.signal["csv"] = str(p)
    return cfg


def load_csv(path):
    """Validated ``(u, H or None)`` pair from a ``t,u[,H]`` file."""
    return read_csv(path)


def load_signal(cfg: RunConfig) -> tuple[TimeSeries, TimeSeries | None]:
    sig = cfg.signal
    if not sig:
        raise ConfigError(f"'{cfg.command}' needs a signal (csv path or generator)")
    if "csv" in sig:
        u, H = load_csv(sig["csv"])
        if cfg.dt is not None and not math.isclose(cfg.dt, u.dt, rel_tol=1e-9):
            log.warning("dt=%g ignored; the CSV grid has dt=%g", cfg.dt, u.dt)
        return u, H
    name = sig["generator"]
    if name not in GENERATORS:
        raise ConfigError(f"unknown generator {name!r}; expected one of {sorted(GENERATORS)}")
    kwargs = {k: v for k, v in sig.items() if k != "generator"}
    if cfg.dt is not None:
        kwargs["dt"] = cfg.dt
    try:
        return GENERATORS[name](**kwargs), None
    except TypeError as exc:
        raise ConfigError(f"bad arguments for generator {name!r}: {exc}")
    except InvalidArgument as exc:
        raise ConfigError(str(exc))


# ---------------------------------------------------------------- output


def _versions() -> dict:
    try:
        pkg = metadata.version("fonbw")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"fonbw": pkg, "numpy": np.__version__, "python": platform.python_version(), "backend": _backend.NAME}


def _write_report(cfg: RunConfig, body: dict, dt: float | None) -> Path:
    report = {
        "command": cfg.command,
        "model_kind": cfg.model_kind.upper() if cfg.model_kind else None,
        "dt": dt,
        "memory": "unbounded" if cfg.memory is None else cfg.memory,
        "guard": cfg.guard,
        "seed": cfg.seed,
        "signal": cfg.signal,
        "versions": _versions(),
        **body,
    }
    path = cfg.out / "report.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return path


def write_loops(path, u: TimeSeries, H: TimeSeries) -> None:
    """``period,u,H`` rows, one block per full input period."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["period", "u", "H"])
        for i, (a, b) in enumerate(periods(u.values)):
            for k in range(a, b + 1):
                w.writerow([i, repr(float(u.values[k])), repr(float(H.values[k]))])


# ---------------------------------------------------------------- commands


def cmd_simulate(cfg: RunConfig) -> dict:
    kind = _need_kind(cfg)
    params = params_from_doc(kind, cfg.params)
    u, _ = load_signal(cfg)
    H = simulate(kind, params, u, memory=cfg.memory, guard=cfg.guard)
    write_csv(cfg.out / "series.csv", u, H)
    if cfg.plot_data:
        write_loops(cfg.out / "loops.csv", u, H)
    return {"parameters": params_to_doc(kind, params), "dt": u.dt, "output_range": H.value_range}


def cmd_identify(cfg: RunConfig) -> dict:
    kind = _need_kind(cfg)
    sec = cfg.section
    u, H = load_signal(cfg)
    if H is None:
        if not cfg.params:
            raise DataError("identification data has no H column and no parameters to synthesize it from")
        H = simulate(kind, params_from_doc(kind, cfg.params), u, memory=cfg.memory, guard=cfg.guard)
    names = tuple(sec.get("theta_names", DEFAULT_THETA_NAMES[kind]))
    fixed = dict(sec.get("fixed", {}))
    try:
        problem = IdentificationProblem(kind, u, H, names, cfg.memory, fixed)
    except InvalidArgument as exc:
        raise ConfigError(str(exc))
    if "bounds" in sec:
        bounds = [tuple(b) for b in sec["bounds"]]
    elif "bounds_scale" in sec and cfg.params:
        lo, hi = sec["bounds_scale"]
        ref = params_to_theta(kind, params_from_doc(kind, cfg.params), names)
        bounds = scaled_bounds(ref, lo, hi, {i: (-math.inf, 1.0) for i, n in enumerate(names) if n.startswith("lambda")})
    else:
        raise ConfigError("identify needs 'bounds' or 'bounds_scale' with a [params] reference")
    target = sec.get("target_objective")
    if target is None and "target_fraction" in sec:
        target = float(sec["target_fraction"]) * H.value_range
    try:
        de = DeConfig(
            population_size=int(sec.get("population_size", 50)),
            max_generations=int(sec.get("max_generations", 300)),
            bounds=tuple(bounds),
            seed=cfg.seed,
            target_objective=None if target is None else float(target),
            workers=int(sec.get("workers", 1)),
            **{k: float(sec[k]) for k in ("f_init", "cr_init", "tau1", "tau2", "f_lo", "f_hi") if k in sec},
        )
    except (InvalidArgument, TypeError, ValueError) as exc:
        raise ConfigError(f"bad identify settings: {exc}")
    result = identify(problem, de)
    body = {"identification": result.to_dict(), "dt": u.dt, "output_range": H.value_range}
    if result.best_objective >= PENALTY:
        _write_report(cfg, body, u.dt)
        raise IdentificationFailure("every candidate diverged")
    fit = simulate(kind, problem.params(result.best_theta), u, memory=cfg.memory, guard=cfg.guard)
    write_csv(cfg.out / "fit.csv", u, fit)
    accept = sec.get("accept_below")
    if accept is not None and result.best_objective > float(accept):
        _write_report(cfg, body, u.dt)
        raise IdentificationFailure(
            f"best objective {result.best_objective:.6g} above accept_below={accept}"
        )
    return body


def cmd_compensate(cfg: RunConfig) -> dict:
    kind = _need_kind(cfg)
    if kind not in COMPENSATOR_KINDS:
        raise ConfigError(f"no compensator for {kind}; expected one of {COMPENSATOR_KINDS}")
    sec = cfg.section
    params = params_from_doc(kind, cfg.params)
    H_d, _ = load_signal(cfg)
    kw = {"iterations": int(sec["iterations"])} if kind == "FONBW" and "iterations" in sec else {}
    body = {"parameters": params_to_doc(kind, params), "dt": H_d.dt}
    plant_kind = sec.get("plant_kind")
    if plant_kind is None:
        u = compensate(kind, H_d, params, memory=cfg.memory, guard=cfg.guard, **kw)
        write_csv(cfg.out / "command.csv", u, H_d)
        return body
    plant_kind = plant_kind.upper()
    plant = params_from_doc(plant_kind, sec.get("plant_params", cfg.params))
    rep = evaluate_cascade(kind, plant_kind, params, plant, H_d, memory=cfg.memory, guard=cfg.guard, **kw)
    write_csv(cfg.out / "command.csv", rep.u_cmd, H_d)
    write_csv(cfg.out / "cascade.csv", rep.u_cmd, rep.H_achieved)
    body.update(
        plant_kind=plant_kind,
        plant_parameters=params_to_doc(plant_kind, plant),
        cascade=rep.to_dict(),
        reference_range=H_d.value_range,
    )
    return body


def cmd_fracdiff(cfg: RunConfig) -> dict:
    sec = cfg.section
    if "order" not in sec:
        raise ConfigError("fracdiff needs [fracdiff] order")
    f, _ = load_signal(cfg)
    method = sec.get("method", "direct")
    try:
        d = gl_derivative(f, float(sec["order"]), memory=cfg.memory, method=method)
    except InvalidArgument as exc:
        raise ConfigError(str(exc))
    with (cfg.out / "derivative.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "f", "D"])
        for row in zip(f.times, f.values, d.values):
            w.writerow([repr(float(x)) for x in row])
    return {"order": float(sec["order"]), "method": method, "dt": f.dt}


def cmd_normalize(cfg: RunConfig) -> dict:
    if cfg.model_kind and cfg.model_kind.upper() != "CBW":
        raise ConfigError("normalize takes CBW parameters")
    cfg.model_kind = "CBW"
    p = params_from_doc("CBW", cfg.params)
    if not isinstance(p, CbwParams):
        raise ConfigError("normalize needs the (alpha, k, ...) CBW form")
    return {"parameters": p.to_dict(), "normalized": normalize_cbw(p).to_dict()}


def cmd_metrics(cfg: RunConfig) -> dict:
    u, H = load_signal(cfg)
    if H is None:
        raise DataError("metrics needs a CSV with an H column")
    try:
        m = loop_metrics(u, H, int(cfg.section.get("points", 401)))
    except InvalidArgument as exc:
        raise DataError(str(exc))
    if cfg.plot_data:
        write_loops(cfg.out / "loops.csv", u, H)
    return {"metrics": {"area": m.area, "max_width": m.max_width, "center_offset": m.center_offset}, "dt": u.dt}


HANDLERS = {
    "simulate": cmd_simulate,
    "identify": cmd_identify,
    "compensate": cmd_compensate,
    "fracdiff": cmd_fracdiff,
    "normalize": cmd_normalize,
    "metrics": cmd_metrics,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fonbw", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="TOML run document")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--dt", type=float)
        sp.add_argument("--memory", help="GL memory length N or 'unbounded'")
        sp.add_argument("--model", help="model kind, overrides the document")
        sp.add_argument("--fixture", help="shipped parameter set, e.g. table1")
        sp.add_argument("--csv", help="signal CSV, overrides the document")
    return ap


def run(cfg: RunConfig) -> int:
    """Execute one configured command; returns the exit status."""
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
        body = HANDLERS[cfg.command](cfg)
        _write_report(cfg, body, body.get("dt"))
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except (DivergenceError, SolverError) as exc:
        log.error("solver failure: %s", exc)
        return EXIT_DIVERGED
    except IdentificationFailure as exc:
        log.error("identification failed: %s", exc)
        return EXIT_IDENT
    except InvalidArgument as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
