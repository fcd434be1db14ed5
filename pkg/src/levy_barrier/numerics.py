"""Small numerical kernel: bracketed roots, adaptive quadrature, finite
differences and a counter-based random stream.

Random streams are split by construction: a Philox-4x32-10 counter
generator keyed by the seed maps (stream id, sub-stream tag) to the starting
state of an xoshiro256** sequence. Streams therefore do not depend on the
order in which they are created, and the compiled simulation kernel
implements the same construction, so both backends see the same numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq


class NumericError(ArithmeticError):
    """A function returned a non-finite value."""


class BracketError(ValueError):
    """The supplied interval does not bracket a sign change."""


class AccuracyError(ArithmeticError):
    """Adaptive quadrature hit its depth limit.

    The partial estimate is kept on ``estimate``.
    """

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


class ParameterError(ValueError):
    pass


# --------------------------------------------------------------------------
# root finding

@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    f_lo: float
    f_hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise BracketError(f"empty bracket [{self.lo}, {self.hi}]")
        if self.f_lo * self.f_hi > 0:
            raise BracketError(
                f"no sign change on [{self.lo}, {self.hi}]: "
                f"f={self.f_lo:.3e}, {self.f_hi:.3e}")

    @classmethod
    def of(cls, f: Callable[[float], float], lo: float, hi: float) -> "Bracket":
        return cls(lo, hi, _finite(f, lo), _finite(f, hi))


def _finite(f, x):
    y = f(x)
    if not math.isfinite(y):
        raise NumericError(f"non-finite value {y!r} at x={x!r}")
    return float(y)


def find_root(f: Callable[[float], float], bracket: Bracket, tol: float = 1e-12) -> float:
    """Brent root of ``f`` inside ``bracket``.

    Returns a point with ``|f(x)| <= tol`` or located to within ``tol``.
    """
    if bracket.f_lo == 0.0:
        return bracket.lo
    if bracket.f_hi == 0.0:
        return bracket.hi

    def checked(x):
        return _finite(f, x)

    x = brentq(checked, bracket.lo, bracket.hi, xtol=tol, rtol=4 * np.finfo(float).eps,
               maxiter=500)
    return min(max(x, bracket.lo), bracket.hi)


def bisect(f: Callable[[float], float], lo: float, hi: float, width: float = 1e-12) -> float:
    """Plain bisection down to ``width``; used as an independent oracle."""
    flo = _finite(f, lo)
    fhi = _finite(f, hi)
    if flo * fhi > 0:
        raise BracketError(f"no sign change on [{lo}, {hi}]")
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        fm = _finite(f, mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if mid in (lo, hi) and hi - lo <= 2 * np.spacing(mid):
            break
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# quadrature

@dataclass(frozen=True)
class QuadConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_depth: int = 50

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ParameterError("quadrature tolerances must be positive")
        if self.max_depth < 1:
            raise ParameterError("max_depth must be >= 1")


def _simpson(fa, fm, fb, h):
    return h / 6.0 * (fa + 4.0 * fm + fb)


def _adaptive(f, a, b, fa, fm, fb, whole, tol, depth, state):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = _finite(f, lm)
    frm = _finite(f, rm)
    left = _simpson(fa, flm, fm, m - a)
    right = _simpson(fm, frm, fb, b - m)
    delta = left + right - whole
    if abs(delta) <= 15.0 * tol or b - a <= 4 * np.spacing(max(abs(a), abs(b))):
        return left + right + delta / 15.0
    if depth <= 0:
        state["exhausted"] = True
        return left + right + delta / 15.0
    return (_adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, state)
            + _adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, state))


def integrate(f: Callable[[float], float], a: float, b: float,
              cfg: QuadConfig = QuadConfig(), knots: Sequence[float] = ()) -> float:
    """Adaptive Simpson quadrature of ``f`` over ``[a, b]``.

    ``knots`` are interior points where ``f`` may have kinks; the interval is
    split there before refinement.
    """
    if b < a:
        raise ParameterError("integrate requires a <= b")
    if a == b:
        return 0.0
    points = sorted({a, b, *(k for k in knots if a < k < b)})
    # a coarse pass sets the scale for the relative tolerance
    coarse = 0.0
    for lo, hi in zip(points[:-1], points[1:]):
        coarse += _simpson(_finite(f, lo), _finite(f, 0.5 * (lo + hi)), _finite(f, hi), hi - lo)
    tol_total = max(cfg.abs_tol, cfg.rel_tol * abs(coarse))
    total = 0.0
    state = {"exhausted": False}
    for lo, hi in zip(points[:-1], points[1:]):
        fa, fm, fb = _finite(f, lo), _finite(f, 0.5 * (lo + hi)), _finite(f, hi)
        whole = _simpson(fa, fm, fb, hi - lo)
        tol = tol_total * (hi - lo) / (b - a)
        total += _adaptive(f, lo, hi, fa, fm, fb, whole, tol, cfg.max_depth, state)
    if state["exhausted"]:
        raise AccuracyError(f"max_depth={cfg.max_depth} exceeded on [{a}, {b}]", total)
    return total


# --------------------------------------------------------------------------
# finite differences

def fd_derivatives(f: Callable[[float], float], x: float, h: float = 1e-4) -> tuple[float, float]:
    """Central first and second differences of ``f`` at ``x``."""
    if not h > 0:
        raise ParameterError("step must be positive")
    fm = _finite(f, x - h)
    f0 = _finite(f, x)
    fp = _finite(f, x + h)
    return (fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h)


# --------------------------------------------------------------------------
# counter-based random numbers

_MASK32 = np.uint64(0xFFFFFFFF)
_PHILOX_M0 = np.uint64(0xD2511F53)
_PHILOX_M1 = np.uint64(0xCD9E8D57)
_PHILOX_W0 = 0x9E3779B9
_PHILOX_W1 = 0xBB67AE85

# sub-stream tags used by the simulator
SUB_NORMAL = 0
SUB_JUMP_TIME = 1
SUB_JUMP_SIZE = 2
SUB_CLOCK = 3
SUB_BRIDGE = 4
SUB_BRIDGE_MAX = 5


def philox4x32(counters: np.ndarray, key: tuple[int, int]) -> np.ndarray:
    """Philox-4x32-10 applied to an ``(n, 4)`` array of 32-bit counter words."""
    c = np.asarray(counters, dtype=np.uint64) & _MASK32
    c0, c1, c2, c3 = (c[:, i].copy() for i in range(4))
    k0, k1 = key[0] & 0xFFFFFFFF, key[1] & 0xFFFFFFFF
    for _ in range(10):
        p0 = c0 * _PHILOX_M0
        p1 = c2 * _PHILOX_M1
        hi0, lo0 = p0 >> np.uint64(32), p0 & _MASK32
        hi1, lo1 = p1 >> np.uint64(32), p1 & _MASK32
        c0, c1, c2, c3 = (hi1 ^ c1 ^ np.uint64(k0), lo1, hi0 ^ c3 ^ np.uint64(k1), lo0)
        k0 = (k0 + _PHILOX_W0) & 0xFFFFFFFF
        k1 = (k1 + _PHILOX_W1) & 0xFFFFFFFF
    return np.stack([c0, c1, c2, c3], axis=1).astype(np.uint32)


_M64 = 0xFFFFFFFFFFFFFFFF


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _M64


def stream_seed_state(seed: int, stream_id: int, sub: int) -> tuple[int, int, int, int]:
    """xoshiro256** state for one stream: Philox blocks 0 and 1 of its counter."""
    ctr = np.zeros((2, 4), dtype=np.uint64)
    ctr[:, 0] = [0, 1]
    ctr[:, 1] = sub << 24
    ctr[:, 2] = stream_id & 0xFFFFFFFF
    ctr[:, 3] = stream_id >> 32
    out = philox4x32(ctr, (seed & 0xFFFFFFFF, seed >> 32)).astype(np.uint64)
    words = [int(out[i, 2 * j]) | (int(out[i, 2 * j + 1]) << 32) for i in range(2) for j in range(2)]
    if not any(words):
        words[0] = 1
    return tuple(words)


class Xoshiro256:
    """Scalar xoshiro256** generator; reference for the compiled kernel."""

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, state):
        self.s0, self.s1, self.s2, self.s3 = state

    def next(self) -> int:
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        result = (_rotl((s1 * 5) & _M64, 7) * 9) & _M64
        t = (s1 << 17) & _M64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, _rotl(s3, 45)
        return result


@dataclass(frozen=True)
class RngStream:
    """Immutable descriptor of one reproducible random sequence.

    The sequence is xoshiro256** started from a state drawn by Philox keyed
    with ``seed`` at a counter built from ``stream_id`` and ``sub``, so any
    stream can be created directly without touching the others.
    """

    seed: int
    stream_id: int
    sub: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= v < 2 ** 64:
                raise ParameterError(f"{name} must be a 64-bit unsigned integer")
        if not 0 <= self.sub < 256:
            raise ParameterError("sub-stream tag must fit in 8 bits")

    def substream(self, sub: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, sub)

    def uint64(self, n: int) -> np.ndarray:
        """The first ``n`` raw 64-bit words of the stream."""
        from .simulate import backend

        if n <= 0:
            return np.empty(0, dtype=np.uint64)
        return backend.words(self.seed, self.stream_id, self.sub, n)


def words_to_uniform(words: np.ndarray) -> np.ndarray:
    """Map 64-bit words to doubles strictly inside (0, 1)."""
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def rng_uniform(stream: RngStream, n: int) -> np.ndarray:
    from .simulate import backend

    return backend.uniforms(stream.seed, stream.stream_id, stream.sub, n)


def rng_exponential(stream: RngStream, rate: float, n: int) -> np.ndarray:
    if not rate > 0:
        raise ParameterError("exponential rate must be positive")
    return -np.log(rng_uniform(stream, n)) / rate


def rng_normal(stream: RngStream, n: int) -> np.ndarray:
    """Standard normals by the 256-layer ziggurat shared with the kernels."""
    from .simulate import backend

    return backend.normals(stream.seed, stream.stream_id, stream.sub, n)
