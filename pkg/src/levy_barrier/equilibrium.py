"""Equilibrium barrier, bailout check and parameter sweeps.

The equilibrium barrier ``b*`` is the smallest positive root of

    l(x) = Z_q(x) - phi - lam * beta * int_0^x V^E_{0,x}'(y) W_q(y) dy,

where the barrier of the inner exponential value equals the upper limit of
the integral.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import scale
from .levy import JumpDiffusionExp, SolverError
from .numerics import Bracket, QuadConfig, find_root, integrate
from .valuation import (Problem, QuasiParts, b_exponential, bases, exp_value_sum, loss,
                        pair_integrals, quasi_parts, quasi_parts_at_exponential_barrier,
                        v_exponential_prime, v_quasi, zero_barrier_value)

GRID_POINTS = 1024
ELL_FLOOR = -1e-9


@dataclass(frozen=True)
class EllEvaluator:
    """Evaluates ``l`` either from exponential sums or by quadrature."""

    problem: Problem
    mode: str = "closed_form"
    quad: QuadConfig = QuadConfig()

    def __post_init__(self):
        if self.mode not in ("closed_form", "quadrature"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def basis_delta(self):
        return bases(self.problem)[0]

    @property
    def basis_q(self):
        return bases(self.problem)[1]

    def __call__(self, x: float) -> float:
        return ell(self, x)

    def scaled(self, x: float) -> float:
        return ell(self, x, scaled=True)


def ell(evaluator: EllEvaluator, x: float, scaled: bool = False) -> float:
    """``l(x)``; ``l(0) = 1 - phi`` exactly.

    With ``scaled=True`` returns ``l(x) exp(-zeta x)`` for the largest root
    ``zeta`` of ``psi = q``. It has the sign of ``l`` but stays of order one
    for large ``x``, which is what the root search needs.
    """
    p = evaluator.problem
    if x < 0:
        raise ValueError("l is defined for x >= 0")
    if x == 0:
        return 1.0 - p.phi
    if p.lam == 0:
        return scale.z(evaluator.basis_delta, x) - p.phi
    if evaluator.mode == "closed_form":
        parts = quasi_parts(p, x)
        return parts.ell_scaled if scaled else parts.ell
    bq = evaluator.basis_q
    integral = integrate(lambda y: v_exponential_prime(p, x, y) * scale.w(bq, y), 0.0, x,
                         evaluator.quad)
    val = scale.z(bq, x) - p.phi - p.lam * p.beta * integral
    return val * math.exp(-bq.zetas[-1] * x) if scaled else val


def ell_at_exponential_barrier(problem: Problem, scaled: bool = False) -> float:
    """``l(b^E)`` using ``Z_delta(b^E) = phi`` exactly."""
    if problem.phi == 1:
        return 0.0
    if problem.lam == 0:
        return 0.0
    parts = quasi_parts_at_exponential_barrier(problem)
    return parts.ell_scaled if scaled else parts.ell


@dataclass(frozen=True)
class BarrierSolution:
    b_e: float
    b_star: float
    ell_at_be: float
    residuals: dict = field(default_factory=dict)
    bracket_trace: tuple = ()

    def __post_init__(self):
        if not (0 <= self.b_star <= self.b_e * (1 + 1e-12) + 1e-15):
            raise SolverError(f"b*={self.b_star} outside [0, b^E={self.b_e}]")


def b_star(problem: Problem, mode: str = "closed_form") -> BarrierSolution:
    """Equilibrium barrier by a grid scan for the first sign change of
    ``l`` on ``[0, b^E]`` followed by Brent refinement."""
    b_e = b_exponential(problem)
    if problem.phi == 1:
        return BarrierSolution(0.0, 0.0, 0.0, {"note": "phi = 1: both barriers are 0"})
    ev = EllEvaluator(problem, mode)
    if mode == "closed_form":
        ell_be = ell_at_exponential_barrier(problem)
        ell_be_scaled = ell_at_exponential_barrier(problem, scaled=True)
    else:
        ell_be = ev(b_e)
        ell_be_scaled = ev.scaled(b_e)
    if ell_be < ELL_FLOOR:
        raise SolverError(f"l(b^E) = {ell_be:.3e} is negative; inputs b^E={b_e}")
    if problem.lam == 0:
        return BarrierSolution(b_e, b_e, ell_be, {"ell_at_b_star": ell_be, "method": "lam = 0"})
    grid = np.linspace(0.0, b_e, GRID_POINTS)

    def target(x):
        return ell_be_scaled if x == b_e else ev.scaled(x)

    prev_x, prev_v = 0.0, target(0.0)
    trace = []
    for x in grid[1:]:
        x = float(x)
        v = target(x)
        if v >= 0.0:
            trace.append((prev_x, x, prev_v, v))
            if v == 0.0:
                root = x
            else:
                root = find_root(target, Bracket(prev_x, x, prev_v, v), tol=1e-14)
            return BarrierSolution(b_e, root, ell_be,
                                   {"ell_at_b_star": ev(root),
                                    "ell_scaled_at_b_star": ev.scaled(root),
                                    "grid_points": GRID_POINTS},
                                   tuple(trace))
        prev_x, prev_v = x, v
    # l(b^E) lies in [-1e-9, 0): the root sits at b^E within solver tolerance
    return BarrierSolution(b_e, b_e, ell_be,
                           {"ell_at_b_star": ell_be, "note": "root at b^E within tolerance"},
                           tuple(trace))


@dataclass(frozen=True)
class BailoutVerdict:
    value_at_zero: float
    inject_optimal: bool
    route_a: float
    route_b: float
    b_star: float = math.nan


def value_at_zero_direct(problem: Problem, b: float) -> float:
    """``V_{0,b}(0)`` with the W-ratio term dropped, valid when ``l(b) = 0``:

    ``-Zbar_q(b) - psi'(0)/q + lam beta/q [V^E(0) + int_0^b V^E'(y) Z_q(y) dy]``.

    For large ``b`` the ``exp(zeta b)`` terms of this expression cancel to
    ``-(w+/zeta) D exp(zeta b)``, which ``l(b) = 0`` turns into
    ``l_rest(b)/zeta`` (see ``QuasiParts``).
    """
    bq = bases(problem)[1]
    q = bq.q
    if problem.lam > 0:
        parts = quasi_parts(problem, b)
        if parts.split:
            return _reduced_value_at_zero(problem, parts)
    val = -scale.z_bar(bq, b) - bq.psi0_prime / q
    if problem.lam > 0:
        slope = quasi_parts(problem, b).slope
        zc = np.array([q * w / z for w, z in zip(bq.weights, bq.zetas)])
        conv = float(np.asarray(slope.coefs) @ pair_integrals(slope.rates, bq.zetas, b) @ zc)
        val += problem.lam * problem.beta / q * (exp_value_sum(problem, b)(b) + conv)
    return val


def _reduced_value_at_zero(problem: Problem, parts: QuasiParts) -> float:
    bq = bases(problem)[1]
    q = bq.q
    b = parts.b
    lb = problem.lam * problem.beta
    zk = np.asarray(bq.zetas)
    wk = np.asarray(bq.weights)
    zt, wt = zk[-1], wk[-1]
    zr, wr = zk[:-1], wk[:-1]
    a = np.asarray(parts.slope.rates)
    c = np.asarray(parts.slope.coefs)
    val = parts.ell_rest / zt - float(np.sum(q * wr / zr ** 2 * np.exp(zr * b)))
    val += lb / q * parts.exp_value(b)
    val += lb * float(c @ pair_integrals(a, zr, b) @ (wr / zr))
    val -= lb * wt / zt * float(np.sum(c * np.exp(a * b) / (zt - a)))
    return val


def bailout_check(problem: Problem, solution: BarrierSolution | None = None) -> BailoutVerdict:
    """Whether injecting capital at 0 remains an equilibrium: ``V_{0,b*}(0) >= 0``."""
    sol = solution if solution is not None else b_star(problem)
    if sol.b_star == 0:
        v = zero_barrier_value(problem, "quasi")
        return BailoutVerdict(v, v >= 0, v, v, 0.0)
    route_a = value_at_zero_direct(problem, sol.b_star)
    route_b = v_quasi(problem, sol.b_star, 0.0)
    route_a, route_b = float(route_a), float(route_b)
    return BailoutVerdict(route_a, route_a >= 0, route_a, route_b, sol.b_star)


# --------------------------------------------------------------------------
# sweeps

SWEEP_PARAMETERS = ("beta", "lambda", "phi", "mu")
SWEEP_COLUMNS = ("parameter", "b_e", "b_star", "loss_x0", "value_at_zero", "errors")


def default_x0(problem: Problem) -> float:
    return 2.0 if isinstance(problem.model, JumpDiffusionExp) and problem.model.p > 0 else 1.0


def _with_parameter(template: Problem, name: str, value: float) -> Problem:
    if name == "beta":
        return template.replace(beta=value)
    if name == "lambda":
        return template.replace(lam=value)
    if name == "phi":
        return template.replace(phi=value)
    if name == "mu":
        from dataclasses import replace
        return template.replace(model=replace(template.model, mu=value))
    raise ValueError(f"cannot sweep {name!r}; choose one of {SWEEP_PARAMETERS}")


def sweep_row(template: Problem, parameter: str, value: float, x0: float) -> dict:
    row = {"parameter": float(value), "b_e": math.nan, "b_star": math.nan,
           "loss_x0": math.nan, "value_at_zero": math.nan, "errors": ""}
    try:
        prob = _with_parameter(template, parameter, value)
        sol = b_star(prob)
        row["b_e"], row["b_star"] = sol.b_e, sol.b_star
        row["loss_x0"] = loss(prob, x0, sol.b_e, sol.b_star)
        row["value_at_zero"] = bailout_check(prob, sol).value_at_zero
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        row["errors"] = f"{type(exc).__name__}: {exc}"
    return row


def sweep(template: Problem, parameter: str, grid: Sequence[float], x0: float | None = None,
          workers: int = 1) -> list[dict]:
    """One row per grid value; failures are recorded in the ``errors`` column."""
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"cannot sweep {parameter!r}; choose one of {SWEEP_PARAMETERS}")
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("empty sweep grid")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("sweep grid must be sorted")
    x0 = default_x0(template) if x0 is None else x0
    if workers <= 1:
        return [sweep_row(template, parameter, g, x0) for g in grid]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda g: sweep_row(template, parameter, g, x0), grid))
