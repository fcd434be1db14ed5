"""Self-verification suite behind the ``verify`` command.

Each check returns a :class:`Check` with a pass flag and a one-line detail.
The fast suite uses closed forms, quadrature and finite differences only;
the full suite adds the Monte Carlo oracles.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import scale
from .equilibrium import EllEvaluator, b_star, bailout_check, sweep
from .levy import BrownianDrift, JumpDiffusionExp, psi
from .numerics import QuadConfig, bisect, fd_derivatives, integrate
from .valuation import (Problem, b_exponential, basis, hjb_residual_exponential,
                        hjb_residual_quasi, loss, v_exponential, v_exponential_prime, v_quasi,
                        v_quasi_prime)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    informational: bool = False


BM = BrownianDrift(-1.0, 1.0)
JD = JumpDiffusionExp(-1.0, 2.0, 0.5, 1.0)


def standard_problem(model=BM) -> Problem:
    return Problem(model, delta=0.05, lam=1.0, beta=0.9, phi=1.2)


def local_convention(model):
    """The model whose dual-convention results equal the local-convention
    formulas for ``model`` (drift sign flipped)."""
    return replace(model, mu=-model.mu)


def laplace_gap(model, q: float, s: float) -> float:
    """Relative gap between ``int_0^X e^{-s x} W_q(x) dx`` and ``1/(psi(s) - q)``."""
    b = basis(model, q)
    top = max(b.zetas)
    lead = sum(abs(w) for w in b.weights)
    k = s - top
    upper = math.log(max(lead, 1e-300) / (k * 1e-13)) / k
    val = integrate(lambda x: math.exp(-s * x) * scale.w(b, x), 0.0, upper,
                    QuadConfig(1e-14, 1e-12, 60))
    exact = 1.0 / (psi(model, s) - q)
    return abs(val - exact) / abs(exact)


def _random_problems(n: int, seed: int, lam_range=(0.0, 5.0)) -> list:
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        model = BM if i % 2 == 0 else JD
        out.append(Problem(model, delta=float(rng.uniform(0.01, 0.2)),
                           lam=float(rng.uniform(*lam_range)),
                           beta=float(rng.uniform(0.05, 1.0)),
                           phi=float(rng.uniform(1.01, 2.0))))
    return out


# --------------------------------------------------------------------------
# fast checks

def check_laplace() -> Check:
    worst = 0.0
    for model in (BM, JD):
        for q in (0.05, 1.05):
            top = max(basis(model, q).zetas)
            for ds in (0.5, 1.0, 2.0):
                worst = max(worst, laplace_gap(model, q, top + ds))
    return Check("laplace_identity", worst <= 1e-6, f"max relative gap {worst:.2e} (tol 1e-6)")


def check_be_oracle() -> Check:
    p = Problem(BM, 0.05, 0.0, 1.0, 1.2)
    be = b_exponential(p)
    bd = basis(BM, 0.05)
    ref = bisect(lambda b: scale.z(bd, b) - 1.2, 0.0, 64.0, 1e-12)
    res = abs(scale.z(bd, be) - 1.2)
    ok = abs(be - ref) <= 1e-8 and res <= 1e-10
    return Check("b_e_oracle", ok, f"b_e={be:.10f} bisection={ref:.10f} residual={res:.1e}")


def check_reductions() -> Check:
    worst_b, worst_v = 0.0, 0.0
    for p in _random_problems(6, 11):
        p0 = p.replace(lam=0.0)
        sol = b_star(p0)
        worst_b = max(worst_b, abs(sol.b_star - sol.b_e))
        for x in np.linspace(-0.5, sol.b_e + 1.0, 12):
            worst_v = max(worst_v, abs(v_quasi(p0, sol.b_e, float(x))
                                       - v_exponential(p0, sol.b_e, float(x))))
    gap_beta = max(abs(b_star(standard_problem(m).replace(beta=1.0)).b_star
                       - b_exponential(standard_problem(m))) for m in (BM, JD))
    ok = worst_b <= 1e-9 and worst_v <= 1e-9 and gap_beta <= 1e-6
    return Check("reductions", ok, f"lam=0: |b*-bE|={worst_b:.1e}, |Vq-VE|={worst_v:.1e}; "
                                   f"beta=1: |b*-bE|={gap_beta:.1e}")


def check_barrier_bounds(n: int = 24) -> Check:
    bad = []
    for p in _random_problems(n, 5):
        sol = b_star(p)
        ev = EllEvaluator(p)
        if not (0 < sol.b_star <= sol.b_e and sol.ell_at_be >= -1e-9
                and ev(0.0) == 1.0 - p.phi):
            bad.append(p)
    return Check("barrier_bounds", not bad, f"{n - len(bad)}/{n} problems satisfy 0<b*<=bE, "
                                            f"l(0)=1-phi, l(bE)>=-1e-9")


def check_hjb() -> Check:
    worst = {}
    for model, tol in ((BM, 1e-6), (JD, 1e-4)):
        p = standard_problem(model)
        sol = b_star(p)
        xs_e = np.linspace(0, sol.b_e, 52)[1:-1]
        xs_q = np.linspace(0, sol.b_star, 52)[1:-1]
        re = max(abs(hjb_residual_exponential(p, sol.b_e, float(x))) for x in xs_e)
        rq = max(abs(hjb_residual_quasi(p, sol.b_star, float(x))) for x in xs_q)
        worst[type(model).__name__] = (max(re, rq), tol)
    ok = all(v <= t for v, t in worst.values())
    return Check("hjb_residuals", ok, ", ".join(f"{k}: {v:.1e} (tol {t:.0e})"
                                                for k, (v, t) in worst.items()))


def check_ell_modes() -> Check:
    p = standard_problem()
    be = b_exponential(p)
    a, q = EllEvaluator(p), EllEvaluator(p, "quadrature")
    gap = max(abs(a(float(x)) - q(float(x))) / max(1.0, abs(a(float(x))))
              for x in np.linspace(0, be, 25))
    return Check("ell_modes_agree", gap <= 1e-8, f"max relative gap {gap:.1e} (tol 1e-8)")


def check_smooth_fit() -> Check:
    worst = 0.0
    for model in (BM, JD):
        p = standard_problem(model)
        sol = b_star(p)
        worst = max(worst, abs(v_exponential_prime(p, sol.b_e, sol.b_e) - 1.0),
                    abs(v_quasi_prime(p, sol.b_star, sol.b_star) - 1.0),
                    abs(v_quasi_prime(p, sol.b_star, 0.0) - p.phi),
                    abs(v_exponential_prime(p, sol.b_e, 0.0) - p.phi))
        for x in np.linspace(0.05, sol.b_star - 0.05, 5):
            d1, _ = fd_derivatives(lambda t: v_quasi(p, sol.b_star, t), float(x), 1e-4)
            worst = max(worst, abs(d1 - v_quasi_prime(p, sol.b_star, float(x))))
    return Check("smooth_fit_and_slopes", bool(worst <= 1e-6), f"max deviation {worst:.1e}")


def check_bailout_routes(n: int = 20) -> Check:
    worst = 0.0
    for p in _random_problems(n, 9):
        v = bailout_check(p)
        worst = max(worst, abs(v.route_a - v.route_b) / max(1.0, abs(v.route_a)))
    return Check("bailout_routes", worst <= 1e-10, f"max relative gap {worst:.1e} (tol 1e-10)")


def _monotone(vals, direction, tol=1e-9):
    d = np.diff(np.asarray(vals, dtype=float))
    return bool(np.all(d >= -tol)) if direction > 0 else bool(np.all(d <= tol))


def check_sweeps(n: int = 8) -> Check:
    p = standard_problem()
    rows_b = sweep(p, "beta", np.linspace(0.05, 1.0, n))
    rows_l = sweep(p, "lambda", np.linspace(0.0, 5.0, n))
    rows_f = sweep(p, "phi", np.linspace(1.01, 2.0, n))
    col = lambda rows, k: [r[k] for r in rows]  # noqa: E731
    ok = {
        "b*(beta) up": _monotone(col(rows_b, "b_star"), +1),
        "b*(lambda) down": _monotone(col(rows_l, "b_star"), -1),
        "bE(phi) up": _monotone(col(rows_f, "b_e"), +1),
        "b*(phi) up": _monotone(col(rows_f, "b_star"), +1),
        "loss(beta) down": _monotone(col(rows_b, "loss_x0"), -1),
        "loss(lambda) up": _monotone(col(rows_l, "loss_x0"), +1),
        "loss>=0": min(col(rows_b, "loss_x0") + col(rows_l, "loss_x0")) >= -1e-9,
        "phi=1 barrier 0": b_star(p.replace(phi=1.0)).b_star == 0.0,
    }
    failed = [k for k, v in ok.items() if not v]
    return Check("sweep_shapes", not failed,
                 "all trends hold" if not failed else "failed: " + ", ".join(failed))


# --------------------------------------------------------------------------
# Monte Carlo checks

def check_mc_values(n_paths: int = 20_000, seed: int = 1) -> list:
    from .simulate import (SimConfig, dt_allowance, estimate_value_exponential,
                           estimate_value_quasi)
    p = standard_problem()
    sol = b_star(p)
    cfg = SimConfig(dt=1e-3, horizon=200.0, n_paths=n_paths, seed=seed)
    out = []
    for name, est, target in (
            ("mc_value_exponential", estimate_value_exponential(p, sol.b_star, 1.0, cfg),
             v_exponential(p, sol.b_star, 1.0)),
            ("mc_value_quasi", estimate_value_quasi(p, sol.b_star, 1.0, cfg),
             v_quasi(p, sol.b_star, 1.0))):
        tol = max(3 * est.std_error, 0.01 * abs(target) + dt_allowance(p, cfg.dt))
        out.append(Check(name, abs(est.mean - target) <= tol,
                         f"MC {est.mean:.4f} +- {est.std_error:.4f} vs closed form {target:.4f}"))
    return out


def check_convention(n_paths: int = 20_000, seed: int = 3) -> Check:
    """Arbitrate the sign convention: ``V^E_{0,b^E}(b^E)`` against Monte Carlo."""
    from .simulate import SimConfig, estimate_value_exponential
    p = Problem(BM, 0.05, 0.0, 1.0, 1.2)
    be = b_exponential(p)
    dual = v_exponential(p, be, be)
    pl = p.replace(model=local_convention(BM))
    local = v_exponential(pl, b_exponential(pl), b_exponential(pl))
    est = estimate_value_exponential(p, be, be, SimConfig(dt=1e-3, horizon=200.0,
                                                          n_paths=n_paths, seed=seed))
    tol = max(3 * est.std_error, 0.01 * abs(dual) + 0.05)
    ok = abs(est.mean - dual) <= tol and abs(est.mean - local) > tol
    return Check("sign_convention", ok, f"MC {est.mean:.3f}; dual convention {dual:.3f} "
                                        f"(adopted), local convention {local:.3f}")


def check_ruin(n_paths: int = 40_000, seed: int = 2) -> Check:
    from .simulate import SimConfig, estimate_ruin_laplace
    p = standard_problem()
    b = b_star(p).b_star
    bq = basis(p.model, p.q)
    cfg = SimConfig(dt=1e-3, horizon=30.0, n_paths=n_paths, seed=seed)
    worst = 0.0
    for x in (b / 4, b / 2, 3 * b / 4):
        est = estimate_ruin_laplace(p.model, p.q, b, x, cfg)
        target = scale.z(bq, b - x) / scale.z(bq, b)
        worst = max(worst, abs(est.mean - target) / est.std_error)
    return Check("ruin_laplace", worst <= 3.0, f"max deviation {worst:.2f} SE (tol 3)")


def check_domination(n_paths: int = 20_000, seed: int = 5) -> Check:
    from .simulate import SimConfig, domination_probe
    p = standard_problem()
    sol = b_star(p)
    rec = domination_probe(p, [0.5 * sol.b_star, 0.75 * sol.b_star, sol.b_e, 1.25 * sol.b_e],
                           SimConfig(dt=1e-3, horizon=200.0, n_paths=n_paths, seed=seed),
                           x0=1.0, b_star=sol.b_star)
    ex = rec.max_excess_in_se()
    return Check("domination_probe", ex <= 3.0, f"largest challenger gain {ex:.2f} SE (tol 3)")


def check_bailout_crossing(n: int = 12) -> Check:
    p = standard_problem(JD)
    rows = sweep(p, "phi", np.linspace(1.01, 2.0, n))
    vals = [r["value_at_zero"] for r in rows]
    signs = {v >= 0 for v in vals}
    return Check("bailout_sign_crossing", len(signs) == 2,
                 f"V_(0,b*)(0) ranges over [{min(vals):.3f}, {max(vals):.3f}] for phi in "
                 f"[1.01, 2]")


FAST: tuple[Callable[[], Check], ...] = (
    check_laplace, check_be_oracle, check_reductions, check_barrier_bounds, check_hjb,
    check_ell_modes, check_smooth_fit, check_bailout_routes, check_sweeps)


def run(full: bool = False) -> list:
    results = []
    for fn in FAST:
        t = time.perf_counter()
        c = fn()
        results.append(replace(c, seconds=time.perf_counter() - t))
    if full:
        for fn in (check_mc_values, check_convention, check_ruin, check_domination,
                   check_bailout_crossing):
            t = time.perf_counter()
            got = fn()
            for c in (got if isinstance(got, list) else [got]):
                results.append(replace(c, seconds=time.perf_counter() - t))
    return results
