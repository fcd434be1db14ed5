import math

import numpy as np
import pytest

from levy_barrier import equilibrium as E
from levy_barrier import scale
from levy_barrier.levy import BrownianDrift, JumpDiffusionExp, SolverError
from levy_barrier.numerics import bisect
from levy_barrier.valuation import Problem, b_exponential, v_quasi, zero_barrier_value

BM = BrownianDrift(-1.0, 1.0)
JD = JumpDiffusionExp(-1.0, 2.0, 0.5, 1.0)
STD_BM = Problem(BM, 0.05, 1.0, 0.9, 1.2)
STD_JD = Problem(JD, 0.05, 1.0, 0.9, 1.2)


def random_problems(n, seed):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        m = BM if i % 2 else JD
        out.append(Problem(m, rng.uniform(0.01, 0.2), rng.uniform(0, 5), rng.uniform(0.05, 1),
                           rng.uniform(1.01, 2)))
    return out


# -- the function l ----------------------------------------------------------

def test_ell_at_zero():
    assert E.ell(E.EllEvaluator(STD_BM), 0.0) == pytest.approx(-0.2, abs=1e-15)
    assert E.ell(E.EllEvaluator(STD_JD, "quadrature"), 0.0) == 1 - 1.2


def test_ell_lambda_zero_is_scale_equation():
    p = STD_BM.replace(lam=0.0)
    bd = scale.make_basis(BM, 0.05)
    for x in (0.3, 2.0, 6.0):
        assert E.ell(E.EllEvaluator(p), x) == scale.z(bd, x) - 1.2


@pytest.mark.parametrize("problem", [STD_BM, STD_JD])
def test_ell_modes_agree(problem):
    cf = E.EllEvaluator(problem)
    qd = E.EllEvaluator(problem, "quadrature")
    for x in np.linspace(0.0, b_exponential(problem), 100):
        a, b = cf(float(x)), qd(float(x))
        assert abs(a - b) <= 1e-8 * max(abs(b), 1.0)


def test_ell_scaled_has_same_sign():
    ev = E.EllEvaluator(STD_JD)
    for x in np.linspace(0.1, 5.0, 25):
        assert np.sign(ev.scaled(float(x))) == np.sign(ev(float(x)))


def test_ell_rejects_negative_argument():
    with pytest.raises(ValueError):
        E.ell(E.EllEvaluator(STD_BM), -1.0)
    with pytest.raises(ValueError):
        E.EllEvaluator(STD_BM, "series")


# -- equilibrium barrier -----------------------------------------------------

def test_lambda_zero_gives_exponential_barrier():
    sol = E.b_star(STD_BM.replace(lam=0.0))
    assert sol.b_star == pytest.approx(sol.b_e, abs=1e-9)


@pytest.mark.parametrize("problem", [STD_BM, STD_JD])
def test_beta_one_gives_exponential_barrier(problem):
    sol = E.b_star(problem.replace(beta=1.0))
    assert abs(sol.b_star - sol.b_e) <= 1e-6


def test_present_bias_lowers_barrier_against_independent_oracle():
    sol = E.b_star(STD_BM)
    assert sol.b_star < sol.b_e
    # oracle: coarse scan of the quadrature-mode l, then plain bisection
    qd = E.EllEvaluator(STD_BM, "quadrature")
    grid = np.linspace(0.0, sol.b_e, 200)
    vals = [qd(float(x)) for x in grid]
    k = next(i for i, v in enumerate(vals) if v >= 0)
    oracle = bisect(qd, float(grid[k - 1]), float(grid[k]), width=1e-11)
    assert sol.b_star == pytest.approx(oracle, abs=1e-9)
    assert sol.b_star == pytest.approx(2.17196, abs=1e-5)


def test_phi_one_gives_zero_barriers():
    sol = E.b_star(STD_BM.replace(phi=1.0))
    assert (sol.b_e, sol.b_star) == (0.0, 0.0)


def test_solution_invariant():
    with pytest.raises(SolverError):
        E.BarrierSolution(b_e=1.0, b_star=1.5, ell_at_be=0.0)


def test_barrier_bounds_on_random_problems():
    for p in random_problems(40, 3):
        sol = E.b_star(p)
        assert 0 < sol.b_star <= sol.b_e
        assert sol.ell_at_be >= -1e-9
        assert E.ell(E.EllEvaluator(p), 0.0) == 1 - p.phi


def test_barrier_bounds_at_domain_corners():
    for m in (BM, JD):
        for d in (0.01, 0.2):
            for lam in (1e-6, 5.0):
                for beta in (0.05, 1.0):
                    for phi in (1.01, 2.0):
                        sol = E.b_star(Problem(m, d, lam, beta, phi))
                        assert 0 < sol.b_star <= sol.b_e
                        assert sol.ell_at_be >= -1e-9


# -- bailout -------------------------------------------------------------------

def test_bailout_routes_agree():
    for p in random_problems(30, 11):
        v = E.bailout_check(p)
        assert abs(v.route_a - v.route_b) <= 1e-10 * max(1.0, abs(v.route_b))
        assert v.inject_optimal == (v.route_a >= 0)


def test_bailout_route_b_is_value_at_zero():
    v = E.bailout_check(STD_BM)
    assert v.route_b == v_quasi(STD_BM, v.b_star, 0.0)


def test_bailout_large_phi_jump_example():
    assert not E.bailout_check(STD_JD.replace(phi=2.0)).inject_optimal


def test_bailout_phi_one_is_analytic():
    p = STD_JD.replace(phi=1.0)
    v = E.bailout_check(p)
    assert v.value_at_zero == zero_barrier_value(p, "quasi")
    assert v.b_star == 0.0


def test_value_at_zero_nonincreasing_in_phi():
    rows = E.sweep(STD_JD, "phi", np.linspace(1.01, 2.0, 12))
    vals = [r["value_at_zero"] for r in rows]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


# -- sweeps --------------------------------------------------------------------

def column(rows, name):
    return [r[name] for r in rows]


def nondecreasing(xs, tol=1e-10):
    return all(b >= a - tol for a, b in zip(xs, xs[1:]))


def test_beta_sweep():
    rows = E.sweep(STD_BM, "beta", np.linspace(0.05, 1.0, 20))
    assert nondecreasing(column(rows, "b_star"))
    assert rows[-1]["b_star"] == pytest.approx(rows[-1]["b_e"], abs=1e-6)
    assert nondecreasing([-v for v in column(rows, "loss_x0")])


def test_lambda_sweep():
    rows = E.sweep(STD_JD, "lambda", np.linspace(0.0, 5.0, 12))
    assert nondecreasing([-v for v in column(rows, "b_star")])
    assert nondecreasing(column(rows, "loss_x0"))
    assert rows[0]["loss_x0"] == 0.0


def test_phi_sweep():
    rows = E.sweep(STD_BM, "phi", np.linspace(1.0, 2.0, 11))
    assert rows[0]["b_e"] == 0.0 and rows[0]["b_star"] == 0.0
    assert nondecreasing(column(rows, "b_e"))
    assert nondecreasing(column(rows, "b_star"))
    assert all(v >= 0 for v in column(rows, "loss_x0"))


def test_sweep_row_failures_are_annotated():
    rows = E.sweep(STD_BM, "phi", [0.5, 1.2])
    assert "ParameterError" in rows[0]["errors"] and math.isnan(rows[0]["b_star"])
    assert rows[1]["errors"] == ""


@pytest.mark.parametrize("grid", [[], [2.0, 1.0]])
def test_sweep_rejects_bad_grids(grid):
    with pytest.raises(ValueError):
        E.sweep(STD_BM, "beta", grid)


def test_sweep_rejects_unknown_parameter():
    with pytest.raises(ValueError):
        E.sweep(STD_BM, "sigma", [1.0])


def test_sweep_independent_of_workers():
    grid = np.linspace(0.1, 1.0, 7)
    one = E.sweep(STD_JD, "beta", grid, workers=1)
    many = E.sweep(STD_JD, "beta", grid, workers=4)
    assert one == many


def test_default_reference_points():
    assert E.default_x0(STD_BM) == 1.0
    assert E.default_x0(STD_JD) == 2.0
