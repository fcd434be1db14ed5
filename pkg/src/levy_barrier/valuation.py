"""Value functions of double-barrier dividend/injection strategies.

Notation: ``delta`` is the exponential discount rate, ``lam`` the rate at
which the present period ends, ``beta`` the extra factor on future cash
flows, ``phi`` the cost of one unit of injected capital, and
``q = delta + lam``. For a barrier ``b`` and surplus ``x`` in ``[0, b]`` all
value functions are exponential sums in ``u = b - x``; outside ``[0, b]``
they are linear (slope 1 above ``b``, slope ``phi`` below 0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.special import exprel

from . import scale
from .levy import DomainError, LevyModel, SolverError, mean
from .numerics import Bracket, ParameterError, QuadConfig, find_root, integrate
from .scale import ExpSum, ScaleBasis


@dataclass(frozen=True)
class Problem:
    """A control problem: model, discounting and injection cost."""

    model: LevyModel
    delta: float
    lam: float = 0.0
    beta: float = 1.0
    phi: float = 1.2

    def __post_init__(self):
        for name in ("delta", "lam", "beta", "phi"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ParameterError(f"{name} must be a finite real, got {v!r}")
        if not self.delta > 0:
            raise ParameterError("delta must be positive")
        if self.lam < 0:
            raise ParameterError("lambda must be nonnegative")
        if not 0 < self.beta <= 1:
            raise ParameterError("beta must lie in (0, 1]")
        if self.phi < 1:
            raise ParameterError("phi must be at least 1")

    @property
    def q(self) -> float:
        return self.delta + self.lam

    def replace(self, **changes) -> "Problem":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass(frozen=True)
class ValueCurve:
    xs: tuple
    values: tuple
    barrier: float
    kind: str

    def __post_init__(self):
        if len(self.xs) != len(self.values):
            raise ParameterError("xs and values differ in length")
        if self.kind not in ("exponential", "quasi_hyperbolic"):
            raise ParameterError(f"unknown curve kind {self.kind!r}")


@lru_cache(maxsize=256)
def basis(model: LevyModel, q: float) -> ScaleBasis:
    """Cached scale basis; models are immutable and hashable."""
    return scale.make_basis(model, q)


def bases(problem: Problem) -> tuple[ScaleBasis, ScaleBasis]:
    """``(basis at delta, basis at delta + lambda)``."""
    return basis(problem.model, problem.delta), basis(problem.model, problem.q)


def _check_barrier(b: float) -> None:
    if not (isinstance(b, (int, float)) and b > 0 and math.isfinite(b)):
        raise DomainError(f"barrier must be positive and finite, got {b!r}")


# --------------------------------------------------------------------------
# exponential discounting

def b_exponential(problem: Problem) -> float:
    """Root of ``Z_delta(b) = phi``; 0 when ``phi = 1``."""
    if problem.phi == 1:
        return 0.0
    bd = basis(problem.model, problem.delta)

    def f(b):
        return scale.z(bd, b) - problem.phi

    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
        if hi > 2.0 ** 60:
            raise SolverError("no upper bracket for Z_delta(b) = phi")
    return find_root(f, Bracket.of(f, 0.0, hi), tol=1e-13)


def _slope_coef(bd: ScaleBasis, phi: float, b: float) -> float:
    """``K = (Z_delta(b) - phi) / (delta W_delta(b))``."""
    return (scale.z(bd, b) - phi) / (bd.q * scale.w(bd, b))


@lru_cache(maxsize=4096)
def exp_value_sum(problem: Problem, b: float, k: Optional[float] = None) -> ExpSum:
    """``V^E_{0,b}`` on ``[0, b]`` as an exponential sum in ``u = b - x``.

    ``k`` overrides the slope constant ``K`` (used at ``b^E``, where it is 0).
    """
    _check_barrier(b)
    bd = basis(problem.model, problem.delta)
    if k is None:
        k = _slope_coef(bd, problem.phi, b)
    d = bd.q
    coefs = tuple(d * w * (k / a - 1.0 / a ** 2) for w, a in zip(bd.weights, bd.zetas))
    return ExpSum(bd.zetas, coefs, 0.0)


@lru_cache(maxsize=4096)
def exp_slope_sum(problem: Problem, b: float, k: Optional[float] = None) -> ExpSum:
    """``V^E_{0,b}'`` on ``[0, b]`` as an exponential sum in ``u = b - y``.

    Equals ``Z_delta(u) + c W_delta(u)`` with ``c = (phi - Z_delta(b))/W_delta(b)``.
    """
    _check_barrier(b)
    bd = basis(problem.model, problem.delta)
    if k is None:
        k = _slope_coef(bd, problem.phi, b)
    d = bd.q
    return ExpSum(bd.zetas, tuple(d * w * (1.0 / a - k) for w, a in zip(bd.weights, bd.zetas)))


def v_exponential(problem: Problem, b: float, x: float) -> float:
    """``V^E_{0,b}(x)``: value of the double barrier ``(0, b)`` at rate ``delta``."""
    _check_barrier(b)
    vs = exp_value_sum(problem, b)
    if x > b:
        return x - b + vs(0.0)
    if x < 0:
        return problem.phi * x + vs(b)
    return vs(b - x)


def v_exponential_direct(problem: Problem, b: float, x: float) -> float:
    """Same value assembled from ``Z``, ``Zbar`` and ``W`` term by term."""
    _check_barrier(b)
    bd = basis(problem.model, problem.delta)
    xc = min(max(x, 0.0), b)
    u = b - xc
    val = (-scale.z_bar(bd, u) - bd.psi0_prime / bd.q
           + scale.z(bd, u) * (scale.z(bd, b) - problem.phi) / (bd.q * scale.w(bd, b)))
    if x > b:
        return val + x - b
    if x < 0:
        return val + problem.phi * x
    return val


def v_exponential_prime(problem: Problem, b: float, x: float) -> float:
    _check_barrier(b)
    if x > b:
        return 1.0
    if x < 0:
        return problem.phi
    return exp_slope_sum(problem, b)(b - x)


def v_exponential_second(problem: Problem, b: float, x: float) -> float:
    _check_barrier(b)
    if x > b or x < 0:
        return 0.0
    return -exp_slope_sum(problem, b).derivative(b - x, 1)


# --------------------------------------------------------------------------
# quasi-hyperbolic discounting

def pair_integrals(alphas: np.ndarray, zetas: np.ndarray, u: float) -> np.ndarray:
    """``E[j, k] = int_0^u exp(alpha_j (u - s)) exp(zeta_k s) ds``.

    Written as ``u exp(alpha u) exprel((zeta - alpha) u)`` so that equal
    rates (the case ``lam = 0``) are exact.
    """
    a = np.asarray(alphas)[:, None]
    z = np.asarray(zetas)[None, :]
    return u * np.exp(a * u) * exprel((z - a) * u)


# Once the top root at rate q outgrows the top root at rate delta by this
# much over [0, b], the growing mode exp(zeta_top u) is handled analytically.
SPLIT_AT = 0.5


@dataclass(frozen=True)
class QuasiParts:
    """Ingredients of ``V_{0,b}`` that depend on ``b`` only.

    With ``zeta`` the largest root at rate ``q`` and ``w+`` its weight,
    ``l(b) = w+ D exp(zeta b) + l_rest(b)`` where

        D = (1 - beta) q / zeta + beta delta K,

    ``K`` is the slope constant of ``V^E_{0,b}`` and ``l_rest`` only holds
    terms that grow no faster than ``exp(alpha b)`` for the top root
    ``alpha`` at rate ``delta``. The identity follows from the partial
    fractions of ``1/(psi(s) - delta)`` evaluated at ``s = zeta``, where it
    equals ``1/lam``. For large ``b`` every quantity below is assembled
    from these pieces, so nothing of size ``exp(zeta b)`` is ever
    subtracted.
    """

    b: float
    slope: ExpSum          # V^E_{0,b}' in u
    exp_value: ExpSum      # V^E_{0,b} in u
    big_i: float           # int_0^b V^E' (y) W_q(y) dy
    ell: float             # Z_q(b) - phi - lam beta I
    w_q_b: float
    ell_scaled: float = math.nan   # l(b) exp(-zeta b), same sign as l(b)
    ratio: float = math.nan        # l(b) / (q W_q(b))
    split: bool = False
    lead: float = math.nan         # D
    ell_rest: float = math.nan
    growth: float = math.nan       # coefficient of exp(-zeta x) in V_{0,b}(x)


def _quasi_parts(problem: Problem, b: float, k: Optional[float]) -> QuasiParts:
    _check_barrier(b)
    bd, bq = bases(problem)
    q = bq.q
    slope = exp_slope_sum(problem, b, k)
    a = np.asarray(slope.rates)
    c = np.asarray(slope.coefs)
    zk = np.asarray(bq.zetas)
    wk = np.asarray(bq.weights)
    e = pair_integrals(a, zk, b)
    big_i = float(c @ e @ wk)
    w_q_b = scale.w(bq, b)
    lb = problem.lam * problem.beta
    if problem.lam == 0:
        ell = scale.z(bq, b) - problem.phi
        return QuasiParts(b, slope, exp_value_sum(problem, b, k), big_i, ell, w_q_b,
                          ell * math.exp(-bq.zetas[-1] * b), ell / (q * w_q_b))
    zt, wt = float(zk[-1]), float(wk[-1])
    zr, wr = zk[:-1], wk[:-1]
    kk = _slope_coef(bd, problem.phi, b) if k is None else k
    lead = (1.0 - problem.beta) * q / zt + problem.beta * problem.delta * kk
    i_rest = float(c @ e[:, :-1] @ wr)
    s_top = float(np.sum(c * np.exp(a * b) / (zt - a)))
    z_rest = float(np.sum(q * wr / zr * np.exp(zr * b)))
    w_rest = float(np.sum(wr * np.exp(zr * b)))
    ell_rest = lb * wt * s_top + z_rest - problem.phi - lb * i_rest
    damp = math.exp(-zt * b)
    scaled = wt * lead + ell_rest * damp
    denom = wt + w_rest * damp                       # W_q(b) exp(-zeta b)
    ratio = scaled / (q * denom)
    growth = wt / zt * (ell_rest - w_rest * lead) / denom
    split = (zt - float(a.max())) * b >= SPLIT_AT
    if split:
        ell = (math.copysign(math.inf, scaled) if zt * b > 700.0
               else wt * lead * math.exp(zt * b) + ell_rest)
    else:
        ell = scale.z(bq, b) - problem.phi - lb * big_i
        scaled = ell * damp
        ratio = ell / (q * w_q_b)
    return QuasiParts(b, slope, exp_value_sum(problem, b, k), big_i, ell, w_q_b,
                      scaled, ratio, split, lead, ell_rest, growth)


@lru_cache(maxsize=4096)
def quasi_parts(problem: Problem, b: float) -> QuasiParts:
    return _quasi_parts(problem, b, None)


def quasi_parts_at_exponential_barrier(problem: Problem) -> QuasiParts:
    """``quasi_parts`` at ``b^E`` with ``K`` set to its defining value 0.

    Near ``b^E`` the computed ``K`` carries rounding of order ``1e-16``,
    which ``exp(zeta b)`` would amplify without bound.
    """
    return _quasi_parts(problem, b_exponential(problem), 0.0)


def v_quasi(problem: Problem, b: float, x: float, method: str = "closed_form") -> float:
    """``V_{0,b}(x)``: value of the double barrier ``(0, b)`` under
    stochastic quasi-hyperbolic discounting.

    ``method="quadrature"`` evaluates the two integrals of ``V^E'`` against
    ``Z_q`` and ``W_q`` numerically instead of in closed form.
    """
    _check_barrier(b)
    if x > b:
        return x - b + v_quasi(problem, b, b, method)
    if x < 0:
        return problem.phi * x + v_quasi(problem, b, 0.0, method)
    if method == "quadrature":
        return _v_quasi_quadrature(problem, b, x)
    if method != "closed_form":
        raise ParameterError(f"unknown method {method!r}")
    parts = quasi_parts(problem, b)
    if parts.split:
        return _split_derivative(problem, parts, x, 0)
    bq = basis(problem.model, problem.q)
    q = bq.q
    u = b - x
    lb = problem.lam * problem.beta
    val = -scale.z_bar(bq, u) - bq.psi0_prime / q
    if lb != 0.0:
        zc = np.array([q * w / z for w, z in zip(bq.weights, bq.zetas)])
        e = pair_integrals(parts.slope.rates, bq.zetas, u)
        conv = float(np.asarray(parts.slope.coefs) @ e @ zc)
        val += lb / q * (parts.exp_value(u) + conv)
    val += scale.z(bq, u) * parts.ratio
    return val


def _split_derivative(problem: Problem, parts: QuasiParts, x: float, order: int) -> float:
    """``order``-th x-derivative of ``V_{0,b}`` on ``[0, b]`` in split form:

        growth exp(-zeta x) + sum over the remaining roots and the
        exponential-value rates, all bounded on ``[0, b]``.
    """
    bq = basis(problem.model, problem.q)
    q = bq.q
    lb = problem.lam * problem.beta
    u = parts.b - x
    sign = -1.0 if order % 2 else 1.0
    zk = np.asarray(bq.zetas)
    wk = np.asarray(bq.weights)
    zt, wt = zk[-1], wk[-1]
    zr, wr = zk[:-1], wk[:-1]
    a = np.asarray(parts.slope.rates)
    c = np.asarray(parts.slope.coefs)
    er = np.exp(zr * u)
    val = parts.growth * (-zt) ** order * math.exp(-zt * x)
    rest = float(np.sum((parts.ratio * q * wr / zr - q * wr / zr ** 2) * zr ** order * er))
    rest += lb / q * parts.exp_value.derivative(u, order)
    rest -= lb * wt / zt * float(np.sum(c * a ** order * np.exp(a * u) / (zt - a)))
    e = pair_integrals(a, zr, u)
    ea = np.exp(a * u)[:, None]
    if order >= 1:
        e1 = ea + zr[None, :] * e
        e = e1 if order == 1 else a[:, None] * ea + zr[None, :] * e1
    rest += lb * float(c @ e @ (wr / zr))
    return val + sign * rest


def _v_quasi_quadrature(problem: Problem, b: float, x: float,
                        cfg: QuadConfig = QuadConfig()) -> float:
    bq = basis(problem.model, problem.q)
    q = bq.q
    u = b - x
    lb = problem.lam * problem.beta

    def slope(y):
        return v_exponential_prime(problem, b, y)

    big_i = integrate(lambda y: slope(y) * scale.w(bq, y), 0.0, b, cfg)
    conv = integrate(lambda y: slope(y) * scale.z(bq, y - x), 0.0, b, cfg, knots=(x,))
    val = -scale.z_bar(bq, u) - bq.psi0_prime / q
    val += lb / q * (v_exponential(problem, b, 0.0) + conv)
    val += scale.z(bq, u) / (q * scale.w(bq, b)) * (scale.z(bq, b) - problem.phi - lb * big_i)
    return val


def _h_terms(problem: Problem, b: float, u: float):
    """``H`` and its first two u-derivatives, where
    ``H(x) = int_x^b V^E'(y) W_q(y - x) dy``."""
    bq = basis(problem.model, problem.q)
    slope = exp_slope_sum(problem, b)
    a = np.asarray(slope.rates)
    c = np.asarray(slope.coefs)
    zk = np.asarray(bq.zetas)
    wk = np.asarray(bq.weights)
    e = pair_integrals(a, zk, u)
    ea = np.exp(a * u)[:, None]
    e1 = ea + zk[None, :] * e                       # dE/du
    e2 = a[:, None] * ea + zk[None, :] * e1         # d2E/du2
    return float(c @ e @ wk), float(c @ e1 @ wk), float(c @ e2 @ wk)


def v_quasi_prime(problem: Problem, b: float, x: float) -> float:
    """Derivative of ``V_{0,b}``:
    ``Z_q(u) - lam beta H(x) - W_q(u)/W_q(b) * l(b)`` on ``[0, b]``."""
    _check_barrier(b)
    if x > b:
        return 1.0
    if x < 0:
        return problem.phi
    parts = quasi_parts(problem, b)
    if parts.split:
        return _split_derivative(problem, parts, x, 1)
    bq = basis(problem.model, problem.q)
    u = b - x
    h, _, _ = _h_terms(problem, b, u)
    return (scale.z(bq, u) - problem.lam * problem.beta * h
            - scale.w(bq, u) / parts.w_q_b * parts.ell)


def v_quasi_second(problem: Problem, b: float, x: float) -> float:
    _check_barrier(b)
    if x > b or x < 0:
        return 0.0
    parts = quasi_parts(problem, b)
    if parts.split:
        return _split_derivative(problem, parts, x, 2)
    bq = basis(problem.model, problem.q)
    u = b - x
    _, h1, _ = _h_terms(problem, b, u)
    return (-bq.q * scale.w(bq, u) + problem.lam * problem.beta * h1
            + scale.w_prime(bq, u) / parts.w_q_b * parts.ell)


@lru_cache(maxsize=1024)
def quasi_value_sum(problem: Problem, b: float) -> ExpSum:
    """``V_{0,b}`` on ``[0, b]`` expanded into plain exponentials in ``u``.

    Needs ``zeta_k != alpha_j``, which holds whenever ``lam > 0``; with
    ``lam = 0`` the exponential value sum is returned.
    """
    _check_barrier(b)
    if problem.lam == 0:
        return exp_value_sum(problem, b)
    bq = basis(problem.model, problem.q)
    parts = quasi_parts(problem, b)
    q = bq.q
    lb = problem.lam * problem.beta
    rates: list = []
    coefs: list = []
    m = parts.ratio
    pairs = list(zip(bq.weights, bq.zetas))
    if parts.split:
        wt, zt = pairs.pop()
        rates.append(zt)
        coefs.append(parts.growth * math.exp(-zt * b))
        for a, cj in zip(parts.slope.rates, parts.slope.coefs):
            rates.append(a)
            coefs.append(-lb * wt / zt * cj / (zt - a))
    for w, z in pairs:
        rates.append(z)
        coefs.append(-q * w / z ** 2 + m * q * w / z)
    for a, ce in zip(parts.exp_value.rates, parts.exp_value.coefs):
        rates.append(a)
        coefs.append(lb / q * ce)
    for a, cj in zip(parts.slope.rates, parts.slope.coefs):
        for w, z in pairs:
            k = lb / q * cj * (q * w / z) / (z - a)
            rates += [z, a]
            coefs += [k, -k]
    return ExpSum(tuple(rates), tuple(coefs), 0.0)


# --------------------------------------------------------------------------
# generator residuals

def _generator(problem: Problem, vs: ExpSum, b: float, x: float) -> float:
    """``(sigma^2/2) V'' + mu V' + p int (V(x+y) - V(x)) eta e^{-eta y} dy``
    for ``V`` equal to ``vs(b - x)`` on ``[0, b]`` and linear above ``b``."""
    m = problem.model
    u = b - x
    v = vs(u)
    v1 = -vs.derivative(u, 1)
    v2 = vs.derivative(u, 2)
    out = 0.5 * m.sigma ** 2 * v2 + m.mu * v1
    if m.p > 0:
        eta = m.eta
        tail = math.exp(-eta * u)
        jump = vs.const * (1.0 - tail)
        for r, c in zip(vs.rates, vs.coefs):
            jump += c * eta * (math.exp(r * u) - tail) / (r + eta)
        jump += tail * (vs(0.0) + 1.0 / eta)
        out += m.p * (jump - v)
    return out


def _check_interior(b: float, x: float) -> None:
    _check_barrier(b)
    if not 0 < x < b:
        raise DomainError(f"residual defined for 0 < x < b, got x={x}, b={b}")


def hjb_residual_exponential(problem: Problem, b: float, x: float) -> float:
    """``(A - delta) V^E_{0,b}(x)`` for ``0 < x < b``."""
    _check_interior(b, x)
    vs = exp_value_sum(problem, b)
    return _generator(problem, vs, b, x) - problem.delta * vs(b - x)


def hjb_residual_quasi(problem: Problem, b: float, x: float) -> float:
    """``A V_{0,b}(x) - (delta + lam) V_{0,b}(x) + lam beta V^E_{0,b}(x)``."""
    _check_interior(b, x)
    if problem.lam == 0:
        return hjb_residual_exponential(problem, b, x)
    vs = quasi_value_sum(problem, b)
    return (_generator(problem, vs, b, x) - problem.q * vs(b - x)
            + problem.lam * problem.beta * v_exponential(problem, b, x))


# --------------------------------------------------------------------------
# curves and losses

def default_grid(b: float, n: int = 401) -> np.ndarray:
    return np.linspace(-0.5, b + 2.0, n)


def value_curve(problem: Problem, b: float, kind: str = "exponential",
                xs: Optional[Sequence[float]] = None) -> ValueCurve:
    _check_barrier(b)
    xs = default_grid(b) if xs is None else np.asarray(xs, dtype=float)
    f = v_exponential if kind == "exponential" else v_quasi
    if kind not in ("exponential", "quasi_hyperbolic"):
        raise ParameterError(f"unknown curve kind {kind!r}")
    return ValueCurve(tuple(float(x) for x in xs), tuple(f(problem, b, float(x)) for x in xs),
                      float(b), kind)


def zero_barrier_value(problem: Problem, kind: str = "exponential") -> float:
    """Value at surplus 0 of the degenerate strategy ``b = 0`` with ``phi = 1``.

    All earnings are paid or refunded at once, so the payoff rate is
    ``E[X(1)]``; this is the limit of the barrier formulas as ``b -> 0``.
    """
    if problem.phi != 1:
        raise DomainError("the zero barrier is optimal only when phi = 1")
    m = mean(problem.model)
    if kind == "exponential":
        return m / problem.delta
    return m / problem.q * (1.0 + problem.lam * problem.beta / problem.delta)


def loss(problem: Problem, x: float, b_e: Optional[float] = None,
         b_star: Optional[float] = None) -> float:
    """Present-bias loss ``V^E_{0,b^E}(x) - V^E_{0,b*}(x)``."""
    if b_e is None:
        b_e = b_exponential(problem)
    if b_star is None:
        from .equilibrium import b_star as solve
        b_star = solve(problem).b_star
    if b_e == b_star:
        return 0.0
    if b_star <= 0 or b_e <= 0:
        raise DomainError("loss requires positive barriers (phi > 1)")
    return v_exponential(problem, b_e, x) - v_exponential(problem, b_star, x)
