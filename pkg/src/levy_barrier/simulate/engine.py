"""Monte Carlo estimators built on the path kernels.

Every path ``i`` draws from its own streams keyed by ``(seed, i)``, paths
are processed in fixed-size chunks, and chunk results are concatenated in
path order before any reduction. Estimates are therefore bit-identical for
any number of worker threads.

Two estimator designs are used for infinite-horizon discounted payoffs:

* killing: the path is stopped at an independent ``Exp(rate)`` time and
  cash flows are summed undiscounted, since
  ``E[int_0^T dC] = E[int_0^inf e^{-rate t} dC]`` for ``T ~ Exp(rate)``;
* present period: the path is stopped at ``tau ~ Exp(lam)``, flows before
  ``tau`` are discounted at ``delta`` and the continuation value is added
  in closed form.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .. import scale
from ..levy import LevyModel, mean
from ..numerics import ParameterError, RngStream
from ..valuation import (Problem, basis, exp_value_sum, v_exponential)
from . import _pykernel, backend

CHUNK = 2048


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    horizon: float = 200.0
    n_paths: int = 10_000
    seed: int = 20240101
    antithetic: bool = False
    workers: Optional[int] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError("dt must be positive")
        if not self.horizon >= self.dt:
            raise ParameterError("horizon must be at least dt")
        if not (isinstance(self.n_paths, int) and self.n_paths >= 1):
            raise ParameterError("n_paths must be a positive integer")
        if not 0 <= self.seed < 2 ** 64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        if self.workers is not None and self.workers < 1:
            raise ParameterError("workers must be at least 1")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n: int
    truncation_bound: float
    details: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_samples(cls, samples: np.ndarray, truncation_bound: float, **details) -> "McEstimate":
        n = samples.size
        sd = float(np.std(samples, ddof=1)) if n > 1 else math.inf
        return cls(float(np.mean(samples)), sd / math.sqrt(n), n, float(truncation_bound),
                   details)

    def within(self, target: float, k: float = 3.0, slack: float = 0.0) -> bool:
        return abs(self.mean - target) <= max(k * self.std_error, slack)


@dataclass(frozen=True)
class ControlledPath:
    times: np.ndarray
    u: np.ndarray
    l_cum: np.ndarray
    r_cum: np.ndarray
    lump_events: tuple

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["time", "u", "l_cum", "r_cum"])
        for row in zip(self.times, self.u, self.l_cum, self.r_cum):
            wr.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def lumps_json(self) -> str:
        events = [{"time": t, "kind": k, "amount": a} for t, k, a in self.lump_events]
        return json.dumps({"lump_events": events}, indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# execution

def worker_count(requested: Optional[int] = None) -> int:
    """Workers to use: ``requested`` (default: CPU count) capped by the
    ``LEVY_BARRIER_THREADS`` environment variable."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get("LEVY_BARRIER_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ParameterError(f"LEVY_BARRIER_THREADS must be an integer, got {cap!r}")
    return max(1, n)


def _run_chunked(fn: Callable[[int, int], object], n_paths: int, workers: Optional[int],
                 chunk: int = CHUNK) -> list:
    """Apply ``fn(first, count)`` to consecutive chunks; results in path order."""
    if chunk % 2:
        chunk += 1          # keep antithetic pairs inside one chunk
    starts = list(range(0, n_paths, chunk))
    tasks = [(s, min(chunk, n_paths - s)) for s in starts]
    nw = min(worker_count(workers), len(tasks))
    if nw <= 1:
        return [fn(s, c) for s, c in tasks]
    with ThreadPoolExecutor(max_workers=nw) as pool:
        return list(pool.map(lambda t: fn(*t), tasks))


def reflected_samples(model: LevyModel, b: float, x0: float, cfg: SimConfig, stop_rate: float,
                      disc_rate: float, occupation=None) -> np.ndarray:
    """Per-path ``(dividends, injections, occupation, stop time, final u)``.

    ``occupation`` is an optional exponential sum ``g`` in ``b - u``; the
    kernel accumulates ``int_0^T e^{-disc t} g(b - U(t)) dt``.
    """
    if not b > 0:
        raise ParameterError("upper barrier must be positive")
    rates = list(occupation.rates) if occupation is not None else []
    coefs = list(occupation.coefs) if occupation is not None else []
    const = float(occupation.const) if occupation is not None else 0.0
    p = float(model.p)
    eta = float(model.eta) if p > 0 else 1.0

    def run(first, count):
        return backend.reflected_batch(float(model.mu), float(model.sigma), p, eta, float(b),
                                       float(x0), cfg.dt, cfg.horizon, float(stop_rate),
                                       float(disc_rate), rates, coefs, const, cfg.seed, first,
                                       count, bool(cfg.antithetic))

    return np.concatenate(_run_chunked(run, cfg.n_paths, cfg.workers), axis=1)


# --------------------------------------------------------------------------
# single controlled path

def simulate_controlled(model: LevyModel, x0: float, b_upper: float, cfg: SimConfig,
                        stream: RngStream | int = 0) -> ControlledPath:
    """One doubly reflected path on ``[0, b_upper]`` over ``[0, cfg.horizon]``.

    ``stream`` selects the path's random streams, either as a path index
    under ``cfg.seed`` or as an explicit ``RngStream``.
    """
    if not b_upper > 0:
        raise ParameterError("b_upper must be positive")
    if x0 < 0:
        raise ParameterError("x0 must be nonnegative")
    seed, path = (stream.seed, stream.stream_id) if isinstance(stream, RngStream) \
        else (cfg.seed, int(stream))
    p = float(model.p)
    eta = float(model.eta) if p > 0 else 1.0
    *_, trace = _pykernel.reflected_path(float(model.mu), float(model.sigma), p, eta,
                                         float(b_upper), float(x0), cfg.dt, cfg.horizon, 0.0,
                                         0.0, [], [], 0.0, seed, path, False, record=True)
    return ControlledPath(np.array(trace["time"]), np.array(trace["u"]),
                          np.array(trace["l_cum"]), np.array(trace["r_cum"]),
                          tuple(trace["lumps"]))


# --------------------------------------------------------------------------
# value estimators

def flow_rate_bound(model: LevyModel, b: float) -> float:
    """Heuristic bound on the long-run rate of dividends plus injections."""
    return abs(model.mu) + model.sigma * math.sqrt(2.0 / math.pi) + model.p / (
        model.eta if model.p > 0 else 1.0) + b


def dt_allowance(problem: Problem, dt: float) -> float:
    """Allowance for the Euler reflection bias, ``O(sqrt(dt))``.

    Discrete reflection misses the local time accrued between grid points;
    the overshoot constant ``E[max of Gaussian walk] ~ 0.5826 sigma sqrt(dt)``
    times the largest marginal cash-flow weight ``phi``, with a safety
    factor 3.
    """
    return 3.0 * problem.phi * 0.5826 * problem.model.sigma * math.sqrt(dt)


def estimate_value_exponential(problem: Problem, b: float, x0: float, cfg: SimConfig,
                               discount: float | None = None) -> McEstimate:
    """``E_x[int_0^inf e^{-delta t} (dL - phi dR)]`` under the barrier ``(0, b)``.

    Uses killing at rate ``delta`` (or ``discount``) truncated at the horizon.
    """
    rate = problem.delta if discount is None else discount
    s = reflected_samples(problem.model, b, x0, cfg, stop_rate=rate, disc_rate=0.0)
    payoff = s[0] - problem.phi * s[1]
    bound = math.exp(-rate * cfg.horizon) * (
        b + (1.0 + problem.phi) * flow_rate_bound(problem.model, b) / rate)
    return McEstimate.from_samples(payoff, bound, method="killing",
                                   truncated_paths=int(np.sum(s[3] >= cfg.horizon)))


def _present_period_payoff(problem: Problem, b_now: float, b_future: float, x0: float,
                           cfg: SimConfig) -> tuple[np.ndarray, float]:
    s = reflected_samples(problem.model, b_now, x0, cfg, stop_rate=problem.lam,
                          disc_rate=problem.delta)
    tau, u_tau = s[3], s[4]
    ended = tau < cfg.horizon
    cont = np.array([v_exponential(problem, b_future, float(u)) for u in u_tau])
    payoff = s[0] - problem.phi * s[1] + np.where(
        ended, problem.beta * np.exp(-problem.delta * tau) * cont, 0.0)
    bound = math.exp(-problem.q * cfg.horizon) * (
        b_future + (1.0 + problem.phi) * flow_rate_bound(problem.model, b_future) / problem.delta)
    return payoff, bound


def estimate_value_quasi(problem: Problem, b: float, x0: float, cfg: SimConfig,
                         route: str = "present") -> McEstimate:
    """Quasi-hyperbolic value of the barrier ``(0, b)``.

    ``route="present"`` simulates the present period ``tau ~ Exp(lam)`` and
    adds ``beta e^{-delta tau} V^E_{0,b}(U(tau))``. ``route="resolvent"``
    uses ``E[int e^{-q t}(dL - phi dR) + lam beta int e^{-q t} V^E(U(t)) dt]``
    with killing at ``q = delta + lam``.
    """
    if problem.lam == 0:
        return estimate_value_exponential(problem, b, x0, cfg)
    if route == "present":
        payoff, bound = _present_period_payoff(problem, b, b, x0, cfg)
        return McEstimate.from_samples(payoff, bound, method="present")
    if route != "resolvent":
        raise ParameterError(f"unknown route {route!r}")
    occ = exp_value_sum(problem, b)
    s = reflected_samples(problem.model, b, x0, cfg, stop_rate=problem.q, disc_rate=0.0,
                          occupation=occ)
    payoff = s[0] - problem.phi * s[1] + problem.lam * problem.beta * s[2]
    bound = math.exp(-problem.q * cfg.horizon) * (
        b + (1.0 + problem.phi) * flow_rate_bound(problem.model, b) / problem.delta)
    return McEstimate.from_samples(payoff, bound, method="resolvent")


# --------------------------------------------------------------------------
# first passage

@dataclass(frozen=True)
class OccupationDensity:
    """Histogram estimate of ``int_0^inf e^{-q t} P(U(t) in dy, t < zeta) dt / dy``."""

    edges: np.ndarray
    density: np.ndarray
    std_error: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])


def _ruin(model: LevyModel, q: float, b: float, x0: float, cfg: SimConfig, edges):
    p = float(model.p)
    eta = float(model.eta) if p > 0 else 1.0

    def run(first, count):
        return backend.ruin_batch(float(model.mu), float(model.sigma), p, eta, float(b),
                                  float(x0), float(q), cfg.dt, cfg.horizon, cfg.seed, first,
                                  count, edges)

    parts = _run_chunked(run, cfg.n_paths, cfg.workers)
    zeta = np.concatenate([z for z, _ in parts])
    return zeta, parts


def estimate_ruin_laplace(model: LevyModel, q: float, b: float, x0: float,
                          cfg: SimConfig) -> McEstimate:
    """``E_x[exp(-q zeta)]`` for the process reflected from above at ``b``
    and stopped on its first passage below 0.

    Paths not ruined by the horizon contribute 0; the resulting bias is at
    most ``exp(-q horizon)`` and is reported as the truncation bound.
    """
    if not 0 <= x0 <= b:
        raise ParameterError("x0 must lie in [0, b]")
    if not q > 0:
        raise ParameterError("q must be positive")
    zeta, _ = _ruin(model, q, b, x0, cfg, np.empty(0))
    vals = np.where(np.isfinite(zeta), np.exp(-q * np.where(np.isfinite(zeta), zeta, 0.0)), 0.0)
    return McEstimate.from_samples(vals, math.exp(-q * cfg.horizon),
                                   unruined=int(np.sum(~np.isfinite(zeta))))


def occupation_density(model: LevyModel, q: float, b: float, x0: float, cfg: SimConfig,
                       edges: Sequence[float]) -> OccupationDensity:
    """Discounted pre-ruin occupation density on the bins ``edges``.

    Chunk histograms are summed in path order. The standard error uses the
    spread between chunk means, so it needs several chunks.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ParameterError("edges must be an increasing sequence of at least 2 points")
    if not np.allclose(np.diff(edges), edges[1] - edges[0]):
        raise ParameterError("edges must be uniformly spaced")
    _, parts = _ruin(model, q, b, x0, cfg, edges)
    width = edges[1] - edges[0]
    sizes = np.array([z.size for z, _ in parts], dtype=float)
    hists = np.array([h for _, h in parts]) / width
    density = hists.sum(axis=0) / cfg.n_paths
    if len(parts) > 1:
        per = hists / sizes[:, None]
        var = np.sum(sizes[:, None] * (per - density) ** 2, axis=0) / (cfg.n_paths * (len(parts) - 1))
        se = np.sqrt(var)
    else:
        se = np.full_like(density, np.nan)
    return OccupationDensity(edges, density, se)


def resolvent_density(model: LevyModel, q: float, b: float, x: float, y: float) -> float:
    """``Z_q(b-x)/Z_q(b) W_q(y) - W_q(y-x)`` for ``y`` in ``[0, b]``."""
    bq = basis(model, q)
    if not 0 <= y <= b:
        return 0.0
    return scale.z(bq, b - x) / scale.z(bq, b) * scale.w(bq, y) - scale.w(bq, y - x)


# --------------------------------------------------------------------------
# equilibrium probe

@dataclass(frozen=True)
class DominationRecord:
    """Deviation payoffs ``P(x; pi^{0,c}, pi^{0,b*})`` for challenger barriers."""

    x0: float
    b_star: float
    challengers: tuple
    estimates: tuple          # McEstimate per challenger
    gains: tuple              # McEstimate of payoff(c) - payoff(b*) on common numbers
    baseline: McEstimate

    def max_excess_in_se(self) -> float:
        """Largest gain over ``b*`` measured in standard errors of the gain."""
        out = -math.inf
        for g in self.gains:
            if g.std_error > 0:
                out = max(out, g.mean / g.std_error)
            elif g.mean > 0:
                out = math.inf
        return out


def domination_probe(problem: Problem, challengers: Sequence[float], cfg: SimConfig,
                     x0: float = 1.0, b_star: float | None = None) -> DominationRecord:
    """Compare the deviation payoff of each challenger barrier with ``b*``.

    The current self plays ``(0, c)`` during the present period; future
    selves play ``(0, b*)``, whose value enters through ``V^E_{0,b*}``.
    All barriers share the same random numbers.
    """
    if b_star is None:
        from ..equilibrium import b_star as solve
        b_star = solve(problem).b_star

    def payoff(c):
        if problem.lam == 0:
            s = reflected_samples(problem.model, c, x0, cfg, stop_rate=problem.delta,
                                  disc_rate=0.0)
            return s[0] - problem.phi * s[1], 0.0
        return _present_period_payoff(problem, c, b_star, x0, cfg)

    base, bound = payoff(b_star)
    baseline = McEstimate.from_samples(base, bound)
    ests, gains = [], []
    for c in challengers:
        pay, bd = (base, bound) if c == b_star else payoff(float(c))
        ests.append(McEstimate.from_samples(pay, bd))
        gains.append(McEstimate.from_samples(pay - base, bd + bound))
    return DominationRecord(float(x0), float(b_star), tuple(float(c) for c in challengers),
                            tuple(ests), tuple(gains), baseline)


def theoretical_value_at_barrier(problem: Problem) -> float:
    """``V^E_{0,b^E}(b^E) = E[X(1)] / delta``."""
    return mean(problem.model) / problem.delta
