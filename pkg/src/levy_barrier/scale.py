"""Scale functions as finite exponential sums.

For the two supported models ``1/(psi(s) - q)`` is rational with simple
poles at the roots ``zeta_i`` of ``psi = q``, so partial fractions give

    W_q(x) = sum_i w_i exp(zeta_i x),          w_i = 1 / psi'(zeta_i),
    Z_q(x) = sum_i (q w_i / zeta_i) exp(zeta_i x),
    Zbar_q(x) = sum_i (q w_i / zeta_i**2) exp(zeta_i x) - psi'(0) / q,

for ``x >= 0``. The constants follow from ``sum w_i / zeta_i = 1/q`` and
``sum w_i / zeta_i**2 = psi'(0)/q**2``. Below zero ``W = 0``, ``Z = 1`` and
``Zbar(x) = x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .levy import LevyModel, RootSet, psi_prime, solve_roots
from .numerics import ParameterError

_FACTOR_AT = 30.0


@dataclass(frozen=True)
class ExpSum:
    """``const + sum_i coefs[i] * exp(rates[i] * x)``.

    Evaluation factors out the largest positive rate once its exponent
    passes 30, so that large arguments lose no accuracy to cancellation.
    """

    rates: tuple
    coefs: tuple
    const: float = 0.0

    def __post_init__(self):
        if len(self.rates) != len(self.coefs):
            raise ParameterError("rates and coefficients differ in length")

    def __call__(self, x: float) -> float:
        return self.derivative(x, 0)

    def derivative(self, x: float, order: int = 1) -> float:
        """``order``-th derivative at scalar ``x``."""
        top = max(self.rates) if self.rates else 0.0
        if top > 0 and top * x > _FACTOR_AT:
            s = 0.0
            for r, c in zip(self.rates, self.coefs):
                s += c * r ** order * math.exp((r - top) * x)
            val = math.exp(top * x) * s
        else:
            val = 0.0
            for r, c in zip(self.rates, self.coefs):
                val += c * r ** order * math.exp(r * x)
        return val + (self.const if order == 0 else 0.0)

    def evaluate(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        rates = np.asarray(self.rates)
        coefs = np.asarray(self.coefs)
        return np.exp(np.multiply.outer(xs, rates)) @ coefs + self.const

    def scaled(self, k: float) -> "ExpSum":
        return ExpSum(self.rates, tuple(k * c for c in self.coefs), k * self.const)


@dataclass(frozen=True)
class ScaleBasis:
    """Precomputed roots and weights of the q-scale functions of a model."""

    q: float
    roots: RootSet
    weights: tuple
    psi0_prime: float

    @property
    def zetas(self) -> tuple:
        return self.roots.roots

    @property
    def w_sum(self) -> ExpSum:
        return ExpSum(self.zetas, self.weights)

    @property
    def z_sum(self) -> ExpSum:
        return ExpSum(self.zetas, tuple(self.q * w / z for w, z in zip(self.weights, self.zetas)))

    @property
    def zbar_sum(self) -> ExpSum:
        return ExpSum(self.zetas,
                      tuple(self.q * w / z ** 2 for w, z in zip(self.weights, self.zetas)),
                      -self.psi0_prime / self.q)


def make_basis(model: LevyModel, q: float) -> ScaleBasis:
    roots = solve_roots(model, q)
    weights = tuple(1.0 / d for d in roots.psi_prime_at_roots)
    return ScaleBasis(q=roots.q, roots=roots, weights=weights, psi0_prime=psi_prime(model, 0.0))


def w(basis: ScaleBasis, x: float) -> float:
    """``W_q(x)``; zero for ``x < 0``."""
    if x < 0:
        return 0.0
    return basis.w_sum(x)


def w_prime(basis: ScaleBasis, x: float) -> float:
    """Right derivative of ``W_q``; zero for ``x < 0``."""
    if x < 0:
        return 0.0
    return basis.w_sum.derivative(x, 1)


def w_second(basis: ScaleBasis, x: float) -> float:
    if x < 0:
        return 0.0
    return basis.w_sum.derivative(x, 2)


def z(basis: ScaleBasis, x: float) -> float:
    """``Z_q(x) = 1 + q int_0^x W_q``."""
    if x <= 0:
        return 1.0
    return basis.z_sum(x)


def z_prime(basis: ScaleBasis, x: float) -> float:
    return basis.q * w(basis, x)


def z_bar(basis: ScaleBasis, x: float) -> float:
    """``Zbar_q(x) = int_0^x Z_q``."""
    if x <= 0:
        return float(x)
    return basis.zbar_sum(x)


def w_grid(basis: ScaleBasis, xs: Sequence[float]) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    return np.where(xs < 0, 0.0, basis.w_sum.evaluate(np.maximum(xs, 0.0)))


def z_grid(basis: ScaleBasis, xs: Sequence[float]) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    return np.where(xs <= 0, 1.0, basis.z_sum.evaluate(np.maximum(xs, 0.0)))
