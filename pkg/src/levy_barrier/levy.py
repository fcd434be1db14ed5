"""Parametric spectrally positive Lévy models.

The Laplace exponent is taken in the dual form

    E[exp(-theta X(t))] = exp(psi(theta) t),

so that ``psi`` is convex with ``psi(0) = 0`` and ``psi'(0) = -E[X(1)]``.
Two families are supported: Brownian motion with drift and a jump diffusion
with exponentially distributed upward jumps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .numerics import Bracket, NumericError, ParameterError, find_root


class DomainError(ValueError):
    """Argument outside the domain of the Laplace exponent."""


class SolverError(RuntimeError):
    """A root or barrier solver failed."""


@dataclass(frozen=True)
class BrownianDrift:
    """``X(t) = mu t + sigma B(t)``."""

    mu: float
    sigma: float

    def __post_init__(self):
        _check_finite(self, ("mu", "sigma"))
        if not self.sigma > 0:
            raise ParameterError("sigma must be positive")

    @property
    def p(self) -> float:
        return 0.0

    @property
    def eta(self) -> float:
        return math.inf


@dataclass(frozen=True)
class JumpDiffusionExp:
    """``X(t) = mu t + sigma B(t) + sum of N(t) Exp(eta) jumps``.

    ``p`` is the jump intensity and ``1/eta`` the mean jump size.
    """

    mu: float
    sigma: float
    p: float
    eta: float

    def __post_init__(self):
        _check_finite(self, ("mu", "sigma", "p", "eta"))
        if not self.sigma > 0:
            raise ParameterError("sigma must be positive")
        if self.p < 0:
            raise ParameterError("jump intensity p must be nonnegative")
        if not self.eta > 0:
            raise ParameterError("jump rate eta must be positive")


LevyModel = Union[BrownianDrift, JumpDiffusionExp]


def _check_finite(obj, names):
    for n in names:
        v = getattr(obj, n)
        if not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ParameterError(f"{n} must be a finite real, got {v!r}")


def _has_jumps(model: LevyModel) -> bool:
    return isinstance(model, JumpDiffusionExp)


def _check_domain(model: LevyModel, theta: float) -> None:
    if _has_jumps(model) and not theta > -model.eta:
        raise DomainError(f"psi is defined for theta > -eta = {-model.eta}, got {theta}")


def psi(model: LevyModel, theta: float) -> float:
    """Laplace exponent ``log E[exp(-theta X(1))]``."""
    _check_domain(model, theta)
    return psi_rational(model, theta)


def psi_rational(model: LevyModel, theta: float) -> float:
    """Rational continuation of ``psi`` to every ``theta != -eta``.

    The scale-function basis uses the root of ``psi = q`` lying below the
    pole, where the Laplace transform itself does not exist.
    """
    val = 0.5 * model.sigma ** 2 * theta ** 2 - model.mu * theta
    if _has_jumps(model):
        val += model.p * (model.eta / (model.eta + theta) - 1.0)
    return val


def psi_prime(model: LevyModel, theta: float) -> float:
    _check_domain(model, theta)
    return psi_prime_rational(model, theta)


def psi_prime_rational(model: LevyModel, theta: float) -> float:
    val = model.sigma ** 2 * theta - model.mu
    if _has_jumps(model):
        val -= model.p * model.eta / (model.eta + theta) ** 2
    return val


def psi_second(model: LevyModel, theta: float) -> float:
    _check_domain(model, theta)
    val = model.sigma ** 2
    if _has_jumps(model):
        val += 2.0 * model.p * model.eta / (model.eta + theta) ** 3
    return val


def mean(model: LevyModel) -> float:
    """``E[X(1)]``."""
    if _has_jumps(model):
        return model.mu + model.p / model.eta
    return model.mu


@dataclass(frozen=True)
class RootSet:
    """Real solutions of ``psi(zeta) = q``, sorted ascending."""

    q: float
    roots: tuple
    psi_prime_at_roots: tuple


_MAX_BRACKET = 2.0 ** 60


def _expand(g, start: float, direction: float) -> float:
    """Double ``|B|`` from ``start`` until ``g`` changes sign relative to 0."""
    bound = max(1.0, abs(start))
    while bound <= _MAX_BRACKET:
        if g(direction * bound) > 0:
            return direction * bound
        bound *= 2.0
    raise SolverError("bracket expansion exceeded 2**60")


def solve_roots(model: LevyModel, q: float) -> RootSet:
    """All real roots of ``psi(theta) = q`` for ``q > 0``.

    Brownian motion has two roots ``z1 < 0 < z2``; the jump diffusion has
    three, ``z1 < -eta < z2 < 0 < z3``.
    """
    if not (isinstance(q, (int, float)) and math.isfinite(q) and q > 0):
        raise ParameterError(f"q must be a positive finite real, got {q!r}")
    if not _has_jumps(model) or model.p == 0:
        s2 = model.sigma ** 2
        disc = math.sqrt(model.mu ** 2 + 2.0 * s2 * q)
        # the cancellation-free pair: one root by the formula, the other by Vieta
        if model.mu >= 0:
            hi = (model.mu + disc) / s2
            lo = -2.0 * q / (s2 * hi)
        else:
            lo = (model.mu - disc) / s2
            hi = -2.0 * q / (s2 * lo)
        # with p = 0 the jump model has no pole and reduces to two roots
        roots = (lo, hi)
    else:
        eta = model.eta
        eps = 1e-9 * max(1.0, eta)

        def g(t):
            return psi_rational(model, t) - q

        try:
            hi_end = _expand(g, 1.0, 1.0)
            r_hi = find_root(g, Bracket.of(g, 0.0, hi_end), tol=1e-15)
            lo_end = _expand(g, 2.0 * (eta + eps), -1.0)
            r_lo = find_root(g, Bracket.of(g, lo_end, -eta - eps), tol=1e-15)
            r_mid = find_root(g, Bracket.of(g, -eta + eps, 0.0), tol=1e-15)
        except (NumericError, ValueError) as exc:
            raise SolverError(f"root bracketing failed: {exc}") from exc
        roots = (r_lo, r_mid, r_hi)
    roots = tuple(float(r) for r in roots)
    return RootSet(q=float(q), roots=roots,
                   psi_prime_at_roots=tuple(psi_prime_rational(model, r) for r in roots))
