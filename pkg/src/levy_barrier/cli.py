"""Command-line interface.

Every command reads one configuration, assembled from an optional JSON
file (``--config``) overridden by explicit flags, and writes a CSV, JSON or
SVG document to ``--out`` or standard output. JSON results embed the
configuration under ``"config"``; feeding such a result back through
``--config`` reproduces the run.

Exit codes: 0 success, 2 configuration error, 3 solver or numeric failure,
4 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional, Sequence

import numpy as np

from . import equilibrium, svg, valuation
from .levy import BrownianDrift, DomainError, JumpDiffusionExp, SolverError
from .numerics import AccuracyError, BracketError, NumericError, ParameterError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4

MODEL_DEFAULTS = {
    "bm": {"mu": -1.0, "sigma": 1.0, "p": 0.0, "eta": None},
    "jd": {"mu": -1.0, "sigma": 2.0, "p": 0.5, "eta": 1.0},
}
COMMANDS = ("barriers", "value", "loss", "bailout", "sweep", "simulate", "verify")
SWEEP_METRICS = ("b_e", "b_star", "loss_x0", "value_at_zero")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Problem parameters plus command options.

    ``mu``, ``sigma``, ``p`` and ``eta`` left as ``None`` take the defaults of
    the chosen model family.
    """

    model: str = "bm"
    mu: Optional[float] = None
    sigma: Optional[float] = None
    p: Optional[float] = None
    eta: Optional[float] = None
    delta: float = 0.05
    lam: float = 1.0
    beta: float = 0.9
    phi: float = 1.2
    seed: int = 20240101
    threads: Optional[int] = None
    out: Optional[str] = None
    format: Optional[str] = None
    # command options
    x0: Optional[float] = None
    barrier: str = "b_star"
    x_grid: Optional[str] = None
    parameter: Optional[str] = None
    grid: Optional[str] = None
    metrics: str = "b_star"
    paths: int = 0
    dt: float = 1e-3
    horizon: float = 10.0
    path_index: int = 0
    full: bool = False

    def resolved(self) -> "RunConfig":
        """Fill model parameters from the family defaults."""
        if self.model not in MODEL_DEFAULTS:
            raise ConfigError(f"model must be one of {sorted(MODEL_DEFAULTS)}, got {self.model!r}")
        defaults = MODEL_DEFAULTS[self.model]
        filled = {k: (getattr(self, k) if getattr(self, k) is not None else v)
                  for k, v in defaults.items()}
        return replace(self, **filled)

    def levy_model(self):
        c = self.resolved()
        if c.model == "bm":
            if c.p:
                raise ConfigError("the bm model has no jumps; drop p or use --model jd")
            return BrownianDrift(float(c.mu), float(c.sigma))
        return JumpDiffusionExp(float(c.mu), float(c.sigma), float(c.p), float(c.eta))

    def problem(self) -> valuation.Problem:
        return valuation.Problem(self.levy_model(), float(self.delta), float(self.lam),
                                 float(self.beta), float(self.phi))

    def to_json(self) -> dict:
        """Configuration as written into JSON results (flag names as keys).

        Execution-only settings (threads, output path) are left out so that
        results do not depend on them.
        """
        out = asdict(self.resolved())
        out["lambda"] = out.pop("lam")
        for key in ("threads", "out"):
            out.pop(key)
        return out


FIELD_NAMES = {f.name for f in fields(RunConfig)}
# JSON keys that differ from the dataclass field name
KEY_ALIASES = {"lambda": "lam"}


def parse_config_document(doc) -> dict:
    """Validate a JSON configuration document and map it to field values.

    A result document (one that carries a ``"config"`` object) is accepted
    and its configuration extracted. Unknown keys are rejected.
    """
    if isinstance(doc, dict) and isinstance(doc.get("config"), dict):
        doc = doc["config"]
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    values = {}
    for key, val in doc.items():
        name = KEY_ALIASES.get(key, key)
        if name not in FIELD_NAMES:
            raise ConfigError(f"unknown configuration key {key!r}")
        values[name] = val
    return values


def load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    return parse_config_document(doc)


def _coerce(values: dict) -> RunConfig:
    types = {f.name: f.type for f in fields(RunConfig)}
    clean = {}
    for name, val in values.items():
        t = str(types[name])
        if val is None:
            clean[name] = None
            continue
        try:
            if "float" in t:
                val = float(val)
            elif "int" in t:
                if isinstance(val, float) and not val.is_integer():
                    raise ValueError
                val = int(val)
            elif "bool" in t:
                if not isinstance(val, bool):
                    raise ValueError
            elif isinstance(val, list) and name in ("grid", "x_grid"):
                val = ",".join(repr(float(v)) for v in val)
            elif name == "barrier" and isinstance(val, (int, float)) \
                    and not isinstance(val, bool):
                val = repr(float(val))
            elif not isinstance(val, str):
                raise ValueError
        except (TypeError, ValueError):
            raise ConfigError(f"invalid value for {name}: {val!r}") from None
        clean[name] = val
    return RunConfig(**clean)


def parse_grid(text: Optional[str], what: str = "grid") -> list:
    """``"a:b:n"`` (``n`` evenly spaced points) or a comma-separated list."""
    if text is None or not str(text).strip():
        raise ConfigError(f"{what} is empty")
    text = str(text).strip()
    try:
        if ":" in text:
            lo, hi, n = text.split(":")
            n = int(n)
            if n < 1:
                raise ConfigError(f"{what} needs at least one point")
            return [float(v) for v in np.linspace(float(lo), float(hi), n)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse {what} {text!r}; use a:b:n or v1,v2,...") from None


# --------------------------------------------------------------------------
# output helpers

def _dump_json(doc: dict) -> str:
    return json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n"


def _plain(obj):
    """Convert numpy scalars and tuples to JSON-friendly Python values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _emit(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _sidecar(out: Optional[str], suffix: str) -> Optional[str]:
    if out is None or out == "-":
        return None
    root, _ = os.path.splitext(out)
    return root + suffix


def _format(cfg: RunConfig, default: str, allowed: Sequence[str]) -> str:
    fmt = cfg.format or default
    if fmt not in allowed:
        raise ConfigError(f"this command writes {'/'.join(allowed)}, not {fmt!r}")
    return fmt


# --------------------------------------------------------------------------
# commands

def cmd_barriers(cfg: RunConfig) -> int:
    _format(cfg, "json", ("json",))
    sol = equilibrium.b_star(cfg.problem())
    _emit(_dump_json({"config": cfg.to_json(), "b_e": sol.b_e, "b_star": sol.b_star,
                      "ell_at_be": sol.ell_at_be, "residuals": sol.residuals}), cfg.out)
    return EXIT_OK


def _barrier_value(cfg: RunConfig, sol) -> float:
    choice = str(cfg.barrier)
    if choice == "b_star":
        return sol.b_star
    if choice == "b_e":
        return sol.b_e
    try:
        b = float(choice)
    except ValueError:
        raise ConfigError(f"barrier must be b_star, b_e or a number, got {choice!r}") from None
    if not (b > 0 and math.isfinite(b)):
        raise ConfigError("an explicit barrier must be positive and finite")
    return b


def cmd_value(cfg: RunConfig) -> int:
    fmt = _format(cfg, "csv", ("csv", "json", "svg"))
    prob = cfg.problem()
    sol = equilibrium.b_star(prob)
    b = _barrier_value(cfg, sol)
    if b <= 0:
        raise ConfigError("the chosen barrier is 0 (phi = 1); pass an explicit barrier")
    xs = parse_grid(cfg.x_grid, "x_grid") if cfg.x_grid else \
        [float(v) for v in valuation.default_grid(b)]
    exp_curve = valuation.value_curve(prob, b, "exponential", xs)
    quasi_curve = valuation.value_curve(prob, b, "quasi_hyperbolic", xs)
    if sol.b_star > 0:
        losses = [valuation.loss(prob, x, sol.b_e, sol.b_star) for x in xs]
    else:
        losses = [0.0] * len(xs)
    if fmt == "csv":
        rows = zip(xs, exp_curve.values, quasi_curve.values, losses)
        _emit(_csv(("x", "exponential", "quasi_hyperbolic", "loss"), list(rows)), cfg.out)
    elif fmt == "json":
        _emit(_dump_json({"config": cfg.to_json(), "barrier": b, "b_e": sol.b_e,
                          "b_star": sol.b_star, "x": xs, "exponential": exp_curve.values,
                          "quasi_hyperbolic": quasi_curve.values, "loss": losses}), cfg.out)
    else:
        _emit(svg.line_chart(xs, {"exponential": exp_curve.values,
                                  "quasi-hyperbolic": quasi_curve.values},
                             title=f"Value of the barrier strategy, b = {b:.4g}",
                             x_label="surplus x", y_label="value"), cfg.out)
    return EXIT_OK


def cmd_loss(cfg: RunConfig) -> int:
    fmt = _format(cfg, "json", ("json", "csv"))
    prob = cfg.problem()
    sol = equilibrium.b_star(prob)
    if cfg.x_grid:
        xs = parse_grid(cfg.x_grid, "x_grid")
    else:
        xs = [cfg.x0 if cfg.x0 is not None else equilibrium.default_x0(prob)]

    def one(x):
        return 0.0 if sol.b_star == sol.b_e else valuation.loss(prob, x, sol.b_e, sol.b_star)

    values = [one(x) for x in xs]
    if fmt == "csv":
        _emit(_csv(("x", "loss"), list(zip(xs, values))), cfg.out)
    else:
        _emit(_dump_json({"config": cfg.to_json(), "b_e": sol.b_e, "b_star": sol.b_star,
                          "x": xs, "loss": values}), cfg.out)
    return EXIT_OK


def cmd_bailout(cfg: RunConfig) -> int:
    _format(cfg, "json", ("json",))
    prob = cfg.problem()
    verdict = equilibrium.bailout_check(prob)
    doc = {"config": cfg.to_json(), **asdict(verdict)}
    _emit(_dump_json(doc), cfg.out)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    fmt = _format(cfg, "csv", ("csv", "json", "svg"))
    if cfg.parameter is None:
        raise ConfigError("sweep needs --parameter")
    if cfg.parameter not in equilibrium.SWEEP_PARAMETERS:
        raise ConfigError(f"parameter must be one of {equilibrium.SWEEP_PARAMETERS}")
    grid = parse_grid(cfg.grid, "grid")
    if not grid:
        raise ConfigError("grid is empty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ConfigError("grid must be sorted")
    metrics = [m.strip() for m in str(cfg.metrics).split(",") if m.strip()]
    bad = [m for m in metrics if m not in SWEEP_METRICS]
    if bad or not metrics:
        raise ConfigError(f"metrics must be drawn from {SWEEP_METRICS}")
    prob = cfg.problem()
    from .simulate.engine import worker_count
    rows = equilibrium.sweep(prob, cfg.parameter, grid, cfg.x0, worker_count(cfg.threads))
    cols = equilibrium.SWEEP_COLUMNS
    if fmt == "json":
        _emit(_dump_json({"config": cfg.to_json(), "rows": rows}), cfg.out)
        return EXIT_OK
    table = _csv(cols, [[r[c] for c in cols] for r in rows])
    if fmt == "csv":
        _emit(table, cfg.out)
        return EXIT_OK
    # svg: the CSV is the canonical output and goes next to the charts
    xs = [r["parameter"] for r in rows]
    charts = {m: svg.line_chart(xs, {m: [r[m] for r in rows]},
                                title=f"{m} against {cfg.parameter}",
                                x_label=cfg.parameter, y_label=m) for m in metrics}
    if cfg.out is None or cfg.out == "-":
        if len(charts) > 1:
            raise ConfigError("several SVG metrics need --out to name the files")
        _emit(next(iter(charts.values())), None)
        return EXIT_OK
    _emit(table, _sidecar(cfg.out, ".csv"))
    if len(charts) == 1:
        _emit(next(iter(charts.values())), cfg.out)
    else:
        for m, text in charts.items():
            _emit(text, _sidecar(cfg.out, f".{m}.svg"))
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    """One controlled path (CSV or SVG, lump events in a JSON sidecar) and,
    with ``paths > 0``, Monte Carlo estimates of both values at ``x0``."""
    from .simulate import (SimConfig, estimate_value_exponential, estimate_value_quasi,
                           simulate_controlled)
    fmt = _format(cfg, "csv", ("csv", "svg"))
    prob = cfg.problem()
    sol = equilibrium.b_star(prob)
    b = _barrier_value(cfg, sol)
    if b <= 0:
        raise ConfigError("the chosen barrier is 0 (phi = 1); pass an explicit barrier")
    x0 = cfg.x0 if cfg.x0 is not None else equilibrium.default_x0(prob)
    if cfg.paths < 0:
        raise ConfigError("paths must be nonnegative")
    sim = SimConfig(dt=cfg.dt, horizon=cfg.horizon, n_paths=max(cfg.paths, 1), seed=cfg.seed,
                    workers=cfg.threads)
    path = simulate_controlled(prob.model, x0, b, sim, cfg.path_index)
    if fmt == "csv":
        _emit(path.to_csv(), cfg.out)
    else:
        _emit(svg.line_chart(list(path.times), {"surplus": list(path.u)},
                             title=f"Controlled surplus, b = {b:.4g}", x_label="time",
                             y_label="surplus"), cfg.out)
    lumps = _sidecar(cfg.out, ".lumps.json")
    if lumps:
        _emit(path.lumps_json(), lumps)
    if cfg.paths > 0:
        # the estimates need a long horizon for the truncation error to vanish
        est_cfg = replace(sim, horizon=max(cfg.horizon, 200.0))
        ve = estimate_value_exponential(prob, b, x0, est_cfg)
        vq = estimate_value_quasi(prob, b, x0, est_cfg)
        doc = {"config": cfg.to_json(), "barrier": b, "x0": x0,
               "exponential": {"mean": ve.mean, "std_error": ve.std_error, "n": ve.n,
                               "closed_form": valuation.v_exponential(prob, b, x0)},
               "quasi_hyperbolic": {"mean": vq.mean, "std_error": vq.std_error, "n": vq.n,
                                    "closed_form": valuation.v_quasi(prob, b, x0)}}
        target = _sidecar(cfg.out, ".estimate.json")
        if target:
            _emit(_dump_json(doc), target)
        else:
            sys.stderr.write(_dump_json(doc))
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    from . import verify
    results = verify.run(full=cfg.full)
    lines = []
    failed = 0
    for c in results:
        tag = "PASS" if c.passed else ("INFO" if c.informational else "FAIL")
        if not c.passed and not c.informational:
            failed += 1
        lines.append(f"{tag}  {c.name:<28} {c.seconds:7.2f}s  {c.detail}")
    lines.append(f"{len(results) - failed}/{len(results)} checks passed")
    _emit("\n".join(lines) + "\n", cfg.out)
    return EXIT_OK if failed == 0 else EXIT_VERIFY


HANDLERS = {"barriers": cmd_barriers, "value": cmd_value, "loss": cmd_loss,
            "bailout": cmd_bailout, "sweep": cmd_sweep, "simulate": cmd_simulate,
            "verify": cmd_verify}


# --------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("problem")
    g.add_argument("--config", metavar="PATH", help="JSON configuration; flags override it")
    g.add_argument("--model", choices=sorted(MODEL_DEFAULTS))
    for name in ("mu", "sigma", "p", "eta", "delta", "beta", "phi"):
        g.add_argument(f"--{name}", type=float)
    g.add_argument("--lambda", dest="lam", type=float, help="rate of the present period")
    o = common.add_argument_group("output and execution")
    o.add_argument("--seed", type=int)
    o.add_argument("--threads", type=int, help="worker threads (capped by LEVY_BARRIER_THREADS)")
    o.add_argument("--out", metavar="PATH")
    o.add_argument("--format", choices=("csv", "json", "svg"))

    parser = argparse.ArgumentParser(
        prog="levy-barrier",
        description="Dividend barriers under exponential and quasi-hyperbolic discounting.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("barriers", parents=[common], help="b^E, b* and solver diagnostics")
    p = sub.add_parser("value", parents=[common], help="value curves on an x grid")
    p.add_argument("--barrier", help="b_star, b_e or a number")
    p.add_argument("--x-grid", dest="x_grid", help="a:b:n or v1,v2,...")
    p = sub.add_parser("loss", parents=[common], help="present-bias loss")
    p.add_argument("--x0", type=float)
    p.add_argument("--x-grid", dest="x_grid")
    sub.add_parser("bailout", parents=[common], help="whether injecting at 0 is optimal")
    p = sub.add_parser("sweep", parents=[common], help="barriers and losses over a grid")
    p.add_argument("--parameter", choices=equilibrium.SWEEP_PARAMETERS)
    p.add_argument("--grid", help="a:b:n or v1,v2,...")
    p.add_argument("--x0", type=float, help="surplus at which the loss is reported")
    p.add_argument("--metrics", help=f"comma list of {', '.join(SWEEP_METRICS)} (SVG output)")
    p = sub.add_parser("simulate", parents=[common], help="a controlled path and MC values")
    p.add_argument("--barrier")
    p.add_argument("--x0", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--paths", type=int, help="Monte Carlo paths for value estimates (0: none)")
    p.add_argument("--path-index", dest="path_index", type=int)
    p = sub.add_parser("verify", parents=[common], help="run the invariant and oracle suite")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--fast", dest="full", action="store_false", default=None,
                      help="skip the Monte Carlo checks (default)")
    mode.add_argument("--full", dest="full", action="store_true", default=None)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = load_config_file(args.config) if args.config else {}
    for name in FIELD_NAMES:
        val = getattr(args, name, None)
        if val is not None:
            values[name] = val
    cfg = _coerce(values)
    cfg = cfg.resolved()
    cfg.problem()               # validate the problem before dispatch
    if cfg.threads is not None and cfg.threads < 1:
        raise ConfigError("threads must be at least 1")
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:          # argparse reports usage errors with code 2
        return int(exc.code or 0)
    try:
        cfg = config_from_args(args)
    except (ConfigError, ParameterError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return HANDLERS[args.command](cfg)
    except (SolverError, NumericError, AccuracyError, BracketError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ParameterError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
