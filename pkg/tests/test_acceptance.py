"""Acceptance criteria, one test per criterion.

Each test prints a ``PASS``/``FAIL`` line (also collected in the pytest
terminal summary) and then asserts. Run directly with
``python tests/test_acceptance.py`` for the verdict lines alone.
"""
import math
import time

import numpy as np
import pytest
from scipy.integrate import quad

from levy_barrier import cli, scale
from levy_barrier.equilibrium import EllEvaluator, b_star, bailout_check, sweep
from levy_barrier.levy import BrownianDrift, JumpDiffusionExp, psi
from levy_barrier.simulate import (SimConfig, domination_probe, dt_allowance,
                                   estimate_ruin_laplace, estimate_value_exponential,
                                   estimate_value_quasi)
from levy_barrier.valuation import (Problem, b_exponential, basis, hjb_residual_exponential,
                                    hjb_residual_quasi, loss, v_exponential, v_quasi)

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:          # run as a script from elsewhere
    ACCEPTANCE_LINES = []

BM = BrownianDrift(-1.0, 1.0)
JD = JumpDiffusionExp(-1.0, 2.0, 0.5, 1.0)


def standard(model):
    return Problem(model, 0.05, 1.0, 0.9, 1.2)


def report(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def random_problems(n, seed, lam=(0.0, 5.0)):
    rng = np.random.default_rng(seed)
    return [Problem(BM if i % 2 == 0 else JD, float(rng.uniform(0.01, 0.2)),
                    float(rng.uniform(*lam)), float(rng.uniform(0.05, 1.0)),
                    float(rng.uniform(1.01, 2.0))) for i in range(n)]


# 1 ------------------------------------------------------------------------------

def test_criterion_1_laplace_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for model in (BM, JD):
        for q in (0.05, 1.05):
            bq = basis(model, q)
            top = max(bq.zetas)
            for s in (top + 0.5, top + 1.0, top + 2.0):
                # truncate where the integrand falls below 1e-16 of its scale
                upper = 40.0 / (s - top)
                val, _ = quad(lambda x: math.exp(-s * x) * scale.w(bq, x), 0.0, upper,
                              limit=500, epsabs=1e-14, epsrel=1e-12)
                exact = 1.0 / (psi(model, s) - q)
                worst = max(worst, abs(val - exact) / abs(exact))
    secs = time.perf_counter() - t0
    report(1, worst <= 1e-6 and secs < 5,
           f"Laplace identity max relative gap {worst:.2e} (tol 1e-6), {secs:.2f}s (limit 5s)")


# 2 ------------------------------------------------------------------------------

def _bm_z(q, x):
    """Z_q for drift -1, unit volatility, written out from the two roots."""
    d = math.sqrt(1.0 + 2.0 * q)
    rp, rm = -1.0 + d, -1.0 - d
    return 1.0 + q * ((math.exp(rp * x) - 1.0) / rp - (math.exp(rm * x) - 1.0) / rm) / d


def test_criterion_2_exponential_barrier_oracle():
    p = Problem(BM, 0.05, 0.0, 1.0, 1.2)
    be = b_exponential(p)
    lo, hi = 0.0, 64.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _bm_z(0.05, mid) - 1.2 < 0:
            lo = mid
        else:
            hi = mid
    ref = 0.5 * (lo + hi)
    res = abs(scale.z(basis(BM, 0.05), be) - 1.2)
    ok = abs(be - ref) <= 1e-8 and res <= 1e-10 and abs(be - 4.22) < 0.01
    report(2, ok, f"b_E={be:.10f}, bisection={ref:.10f}, |Z-1.2|={res:.1e}")


# 3 ------------------------------------------------------------------------------

def test_criterion_3_reductions():
    worst_b = worst_v = 0.0
    for p in random_problems(10, 31):
        p0 = p.replace(lam=0.0)
        sol = b_star(p0)
        worst_b = max(worst_b, abs(sol.b_star - sol.b_e))
        for x in np.linspace(-0.5, sol.b_e + 1.0, 50):
            worst_v = max(worst_v, abs(v_quasi(p0, sol.b_e, float(x))
                                       - v_exponential(p0, sol.b_e, float(x))))
    gap = max(abs(b_star(standard(m).replace(beta=1.0)).b_star - b_exponential(standard(m)))
              for m in (BM, JD))
    ok = worst_b <= 1e-9 and worst_v <= 1e-9 and gap <= 1e-6
    report(3, ok, f"lambda=0: |b*-b_E|<={worst_b:.1e}, |V-V_E|<={worst_v:.1e}; "
                  f"beta=1: |b*-b_E|<={gap:.1e}")


# 4 ------------------------------------------------------------------------------

def test_criterion_4_barrier_bounds():
    t0 = time.perf_counter()
    bad = 0
    worst_ell = math.inf
    problems = random_problems(200, 41)
    for p in problems:
        sol = b_star(p)
        worst_ell = min(worst_ell, sol.ell_at_be)
        if not (0 < sol.b_star <= sol.b_e and sol.ell_at_be >= -1e-9
                and EllEvaluator(p)(0.0) == 1.0 - p.phi):
            bad += 1
    secs = time.perf_counter() - t0
    report(4, bad == 0 and secs < 60,
           f"{len(problems) - bad}/{len(problems)} draws satisfy 0<b*<=b_E, l(0)=1-phi, "
           f"l(b_E)>=-1e-9 (min l(b_E)={worst_ell:.1e}), {secs:.1f}s (limit 60s)")


# 5 ------------------------------------------------------------------------------

def test_criterion_5_hjb_residuals():
    parts, ok = [], True
    for name, model, tol in (("BM", BM, 1e-6), ("JD", JD, 1e-4)):
        p = standard(model)
        sol = b_star(p)
        re = max(abs(hjb_residual_exponential(p, sol.b_e, float(x)))
                 for x in np.linspace(0, sol.b_e, 52)[1:-1])
        rq = max(abs(hjb_residual_quasi(p, sol.b_star, float(x)))
                 for x in np.linspace(0, sol.b_star, 52)[1:-1])
        ok = ok and re <= tol and rq <= tol
        parts.append(f"{name} exponential {re:.1e}, quasi {rq:.1e} (tol {tol:.0e})")
    report(5, ok, "HJB residuals " + "; ".join(parts))


# 6 ------------------------------------------------------------------------------

def test_criterion_6_monte_carlo_values():
    t0 = time.perf_counter()
    p = standard(BM)
    b = b_star(p).b_star
    cfg = SimConfig(dt=1e-3, horizon=200.0, n_paths=200_000, seed=20240101)
    allowance = dt_allowance(p, cfg.dt)
    parts, ok = [], True
    for name, est, target in (
            ("exponential", estimate_value_exponential(p, b, 1.0, cfg),
             v_exponential(p, b, 1.0)),
            ("quasi", estimate_value_quasi(p, b, 1.0, cfg), v_quasi(p, b, 1.0))):
        tol = max(3 * est.std_error, 0.01 * abs(target) + allowance)
        good = abs(est.mean - target) <= tol
        ok = ok and good
        parts.append(f"{name} MC {est.mean:.4f}+-{est.std_error:.4f} vs {target:.4f} "
                     f"(tol {tol:.3f})")
        if name == "exponential":
            # the same estimate read against the formula with the drift sign flipped
            pl = p.replace(model=BrownianDrift(1.0, 1.0))
            local = v_exponential(pl, b, 1.0)
            parts.append(f"local-convention closed form {local:.4f} "
                         f"{'rejected' if abs(est.mean - local) > tol else 'NOT rejected'}")
            ok = ok and abs(est.mean - local) > tol
    secs = time.perf_counter() - t0
    ok = ok and secs < 120
    report(6, ok, "; ".join(parts) + f"; {secs:.0f}s (limit 120s)")


# 7 ------------------------------------------------------------------------------

def test_criterion_7_ruin_laplace():
    p = standard(BM)
    b = b_star(p).b_star
    bq = basis(BM, p.q)
    cfg = SimConfig(dt=1e-3, horizon=30.0, n_paths=40_000, seed=7)
    worst = 0.0
    for x in (b / 4, b / 2, 3 * b / 4):
        est = estimate_ruin_laplace(BM, p.q, b, x, cfg)
        target = scale.z(bq, b - x) / scale.z(bq, b)
        worst = max(worst, abs(est.mean - target) / est.std_error)
    report(7, worst <= 3.0, f"ruin Laplace transform max deviation {worst:.2f} SE (tol 3)")


# 8 ------------------------------------------------------------------------------

def _mono(xs, up, tol=1e-10):
    return all((b - a if up else a - b) >= -tol for a, b in zip(xs, xs[1:]))


def test_criterion_8_figure_shapes():
    checks = {}
    bm, jd = standard(BM), standard(JD)
    for name, p in (("BM", bm), ("JD", jd)):
        x0 = 1.0 if name == "BM" else 2.0
        rb = sweep(p, "beta", np.linspace(0.05, 1.0, 20), x0)
        rl = sweep(p, "lambda", np.linspace(0.0, 5.0, 20), x0)
        rp = sweep(p, "phi", np.linspace(1.01, 2.0, 20), x0)
        col = lambda rows, k: [r[k] for r in rows]
        checks[f"{name} b*(beta) up"] = _mono(col(rb, "b_star"), True)
        checks[f"{name} b*(lambda) down"] = _mono(col(rl, "b_star"), False)
        checks[f"{name} b_E(phi) up"] = _mono(col(rp, "b_e"), True)
        checks[f"{name} b*(phi) up"] = _mono(col(rp, "b_star"), True)
        checks[f"{name} loss>=0"] = all(v >= 0 for v in col(rb + rl + rp, "loss_x0"))
        checks[f"{name} loss(lambda) up"] = _mono(col(rl, "loss_x0"), True)
        checks[f"{name} loss(beta) down"] = _mono(col(rb, "loss_x0"), False)
        at_one = b_star(p.replace(phi=1.0))
        checks[f"{name} phi=1 gives 0"] = at_one.b_e == 0.0 and at_one.b_star == 0.0
        checks[f"{name} loss at b*"] = loss(p, x0) >= 0
    failed = [k for k, v in checks.items() if not v]
    report(8, not failed, f"{len(checks) - len(failed)}/{len(checks)} shape checks hold"
                          + (f"; failed: {', '.join(failed)}" if failed else ""))


# 9 ------------------------------------------------------------------------------

def test_criterion_9_bailout_consistency():
    worst = 0.0
    for p in random_problems(50, 91):
        v = bailout_check(p)
        worst = max(worst, abs(v.route_a - v.route_b) / max(1.0, abs(v.route_b)))
    rows = sweep(standard(JD), "phi", np.linspace(1.01, 2.0, 40))
    vals = [r["value_at_zero"] for r in rows]
    crossing = min(vals) < 0 <= max(vals)
    report(9, worst <= 1e-10 and crossing,
           f"route gap {worst:.1e} (tol 1e-10); V(0) over phi in [1.01, 2] spans "
           f"[{min(vals):.3f}, {max(vals):.3f}], sign crossing "
           f"{'found' if crossing else 'absent'}")


# 10 -----------------------------------------------------------------------------

def test_criterion_10_domination_probe():
    p = standard(BM)
    sol = b_star(p)
    challengers = [0.5 * sol.b_star, 0.75 * sol.b_star, sol.b_e, 1.25 * sol.b_e]
    rec = domination_probe(p, challengers, SimConfig(dt=1e-3, horizon=200.0, n_paths=20_000,
                                                     seed=10), x0=1.0, b_star=sol.b_star)
    ex = rec.max_excess_in_se()
    gains = ", ".join(f"{c:.2f}:{g.mean:+.4f}" for c, g in zip(challengers, rec.gains))
    report(10, ex <= 3.0, f"largest challenger gain {ex:.2f} SE (tol 3); gains {gains}")


# 11 -----------------------------------------------------------------------------

def test_criterion_11_determinism(tmp_path):
    outputs = {}
    for t in (1, 2, 8):
        d = tmp_path / f"t{t}"
        d.mkdir()
        sim = ["simulate", "--model", "jd", "--seed", "99", "--horizon", "5", "--paths", "2000",
               "--threads", str(t), "--out", str(d / "path.csv")]
        swp = ["sweep", "--model", "jd", "--parameter", "beta", "--grid", "0.05:1:20",
               "--threads", str(t), "--out", str(d / "sweep.csv")]
        assert cli.main(sim) == 0 and cli.main(swp) == 0
        outputs[t] = {f.name: f.read_bytes() for f in sorted(d.iterdir())}
    same = outputs[1] == outputs[2] == outputs[8]
    report(11, same and len(outputs[1]) == 4,
           f"simulate and sweep outputs ({', '.join(outputs[1])}) byte-identical across "
           f"1, 2, 8 threads: {same}")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s"]))
