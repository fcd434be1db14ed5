"""Pure-Python simulation kernel.

Reference semantics for the compiled kernel in ``_ckernel.pyx``: both
consume the same counter-based streams in the same order, so their per-path
outputs agree to rounding.
"""
import math

import numpy as np

from ..numerics import (SUB_BRIDGE, SUB_BRIDGE_MAX, SUB_CLOCK, SUB_JUMP_SIZE, SUB_JUMP_TIME,
                        SUB_NORMAL, Xoshiro256, stream_seed_state)
from .ziggurat import FI, KI, WI, ZIG_INV_R, ZIG_R

NAME = "python"

_KI = [int(k) for k in KI]
_WI = [float(w) for w in WI]
_FI = [float(f) for f in FI]
_U53 = 2.0 ** -53


class _Stream:
    __slots__ = ("_gen",)

    def __init__(self, seed, stream_id, sub):
        self._gen = Xoshiro256(stream_seed_state(seed, stream_id, sub))

    def word(self):
        return self._gen.next()

    def uniform(self):
        return ((self.word() >> 11) + 0.5) * _U53

    def exponential(self, rate):
        return -math.log(self.uniform()) / rate

    def normal(self):
        while True:
            r = self.word()
            idx = r & 0xFF
            r >>= 8
            sign = r & 1
            rabs = (r >> 1) & 0x000FFFFFFFFFFFFF
            x = rabs * _WI[idx]
            if sign:
                x = -x
            if rabs < _KI[idx]:
                return x
            if idx == 0:
                while True:
                    xx = -ZIG_INV_R * math.log(self.uniform())
                    yy = -math.log(self.uniform())
                    if yy + yy > xx * xx:
                        return -(ZIG_R + xx) if (rabs >> 8) & 1 else ZIG_R + xx
            elif (_FI[idx - 1] - _FI[idx]) * self.uniform() + _FI[idx] < math.exp(-0.5 * x * x):
                return x


def words(seed, stream_id, sub, n):
    st = _Stream(seed, stream_id, sub)
    return np.array([st.word() for _ in range(n)], dtype=np.uint64)


def uniforms(seed, stream_id, sub, n):
    st = _Stream(seed, stream_id, sub)
    return np.array([st.uniform() for _ in range(n)], dtype=np.float64)


def normals(seed, stream_id, sub, n):
    st = _Stream(seed, stream_id, sub)
    return np.array([st.normal() for _ in range(n)], dtype=np.float64)


def _expsum(rates, coefs, const, arg):
    s = const
    for r, c in zip(rates, coefs):
        s += c * math.exp(r * arg)
    return s


def reflected_path(mu, sigma, p, eta, b, x0, dt, horizon, stop_rate, disc_rate,
                   occ_rates, occ_coefs, occ_const, seed, path, antithetic, record=False):
    """One doubly reflected path on ``[0, b]``.

    Returns ``(dividends, injections, occupation, stop_time, u_final)`` and,
    when ``record`` is set, a trace dictionary as a sixth element.
    """
    if antithetic and path % 2 == 1:
        zn = _Stream(seed, path - 1, SUB_NORMAL)
        zsign = -1.0
    else:
        zn = _Stream(seed, path, SUB_NORMAL)
        zsign = 1.0
    jt = _Stream(seed, path, SUB_JUMP_TIME)
    js = _Stream(seed, path, SUB_JUMP_SIZE)
    clk = _Stream(seed, path, SUB_CLOCK)
    n_occ = len(occ_rates)

    divs = 0.0
    inj = 0.0
    occ = 0.0
    u = x0
    if u > b:
        divs += u - b
        u = b
    elif u < 0.0:
        inj += -u
        u = 0.0
    if record:
        trace = {"time": [0.0], "u": [u], "l_cum": [divs], "r_cum": [inj], "lumps": []}
        if x0 > b:
            trace["lumps"].append((0.0, "dividend", x0 - b))
        elif x0 < 0.0:
            trace["lumps"].append((0.0, "injection", -x0))

    T = horizon
    if stop_rate > 0.0:
        T = clk.exponential(stop_rate)
        if T > horizon:
            T = horizon
    next_jump = jt.exponential(p) if p > 0.0 else math.inf

    n_full = int(T / dt)
    rem = T - n_full * dt
    n_steps = n_full + 1 if rem > 1e-12 * dt else n_full
    sdt = math.sqrt(dt)
    step_disc = math.exp(-disc_rate * dt)
    disc = 1.0
    t = 0.0
    for k in range(1, n_steps + 1):
        if k <= n_full:
            h = dt
            sh = sdt
            t_new = k * dt
            disc_new = disc * step_disc if disc_rate > 0.0 else 1.0
        else:
            h = rem
            sh = math.sqrt(rem)
            t_new = T
            disc_new = math.exp(-disc_rate * T)
        if n_occ:
            occ += disc * h * _expsum(occ_rates, occ_coefs, occ_const, b - u)
        z = zn.normal() * zsign
        u += mu * h + sigma * sh * z
        if u > b:
            divs += disc_new * (u - b)
            u = b
        elif u < 0.0:
            inj += disc_new * (-u)
            u = 0.0
        while next_jump <= t_new:
            u += js.exponential(eta)
            if u > b:
                w = math.exp(-disc_rate * next_jump) if disc_rate > 0.0 else 1.0
                if record:
                    trace["lumps"].append((next_jump, "dividend", u - b))
                divs += w * (u - b)
                u = b
            next_jump += jt.exponential(p)
        t = t_new
        disc = disc_new
        if record:
            trace["time"].append(t)
            trace["u"].append(u)
            trace["l_cum"].append(divs)
            trace["r_cum"].append(inj)
    if record:
        return divs, inj, occ, T, u, trace
    return divs, inj, occ, T, u


def reflected_batch(mu, sigma, p, eta, b, x0, dt, horizon, stop_rate, disc_rate,
                    occ_rates, occ_coefs, occ_const, seed, first_path, n_paths, antithetic):
    out = np.empty((5, n_paths), dtype=np.float64)
    occ_rates = [float(r) for r in occ_rates]
    occ_coefs = [float(c) for c in occ_coefs]
    for i in range(n_paths):
        out[:, i] = reflected_path(mu, sigma, p, eta, b, x0, dt, horizon, stop_rate, disc_rate,
                                   occ_rates, occ_coefs, occ_const, seed, first_path + i,
                                   antithetic)
    return out


def ruin_path(mu, sigma, p, eta, b, x0, q, dt, horizon, seed, path, edges, hist):
    """First passage below 0 of the process reflected from above at ``b``.

    Crossings of 0 between grid points are detected with the Brownian-bridge
    probability ``exp(-2 u0 u1 / (sigma^2 dt))``. The reflection at ``b`` uses
    a sampled bridge maximum ``M`` of the step, removing ``max(0, M - b)``,
    which is the exact one-step Skorokhod map for the Gaussian part. ``hist`` accumulates the
    discounted occupation time ``exp(-q t) dt`` on the bins ``edges``.
    """
    zn = _Stream(seed, path, SUB_NORMAL)
    jt = _Stream(seed, path, SUB_JUMP_TIME)
    js = _Stream(seed, path, SUB_JUMP_SIZE)
    br = _Stream(seed, path, SUB_BRIDGE)
    bm = _Stream(seed, path, SUB_BRIDGE_MAX)
    u = x0 if x0 < b else b
    if u <= 0.0:
        return 0.0
    next_jump = jt.exponential(p) if p > 0.0 else math.inf
    n_max = int(horizon / dt)
    sdt = math.sqrt(dt)
    s2dt = sigma * sigma * dt
    step_disc = math.exp(-q * dt)
    disc = 1.0
    n_bins = len(edges) - 1
    lo = edges[0] if n_bins > 0 else 0.0
    width = (edges[-1] - edges[0]) / n_bins if n_bins > 0 else 1.0
    for k in range(n_max):
        t = k * dt
        if n_bins:
            j = int((u - lo) / width)
            if 0 <= j < n_bins:
                hist[j] += disc * dt
        u1 = u + mu * dt + sigma * sdt * zn.normal()
        if u1 <= 0.0:
            return t + dt * u / (u - u1)
        if s2dt > 0.0:
            e = 2.0 * u * u1 / s2dt
            if e < 50.0 and br.uniform() < math.exp(-e):
                return t + 0.5 * dt
            if u1 >= b or 2.0 * (b - u) * (b - u1) / s2dt < 50.0:
                d = u1 - u
                m = 0.5 * (u + u1 + math.sqrt(d * d - 2.0 * s2dt * math.log(bm.uniform())))
                if m > b:
                    u1 -= m - b
        if u1 > b:
            u1 = b
        t_new = t + dt
        while next_jump <= t_new:
            u1 += js.exponential(eta)
            if u1 > b:
                u1 = b
            next_jump += jt.exponential(p)
        u = u1
        disc *= step_disc
    return math.inf


def ruin_batch(mu, sigma, p, eta, b, x0, q, dt, horizon, seed, first_path, n_paths, edges):
    edges = [float(e) for e in edges]
    hist = [0.0] * max(len(edges) - 1, 0)
    zeta = np.empty(n_paths, dtype=np.float64)
    for i in range(n_paths):
        zeta[i] = ruin_path(mu, sigma, p, eta, b, x0, q, dt, horizon, seed, first_path + i,
                            edges, hist)
    return zeta, np.array(hist, dtype=np.float64)
