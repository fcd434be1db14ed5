# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernel.

Mirrors ``_pykernel`` step for step: same Philox-seeded xoshiro256**
streams, same ziggurat, same draw order. The batch loops run without the GIL so a thread pool can
spread chunks of paths over cores.
"""
import numpy as np

from libc.math cimport exp, log, sqrt, INFINITY
from libc.stdint cimport int64_t, uint32_t, uint64_t

from .ziggurat import KI as _KI_PY, WI as _WI_PY, FI as _FI_PY, ZIG_R as _R_PY, ZIG_INV_R as _INVR_PY

NAME = "compiled"

cdef uint64_t KI[256]
cdef double WI[256]
cdef double FI[256]
cdef double ZIG_R = _R_PY
cdef double ZIG_INV_R = _INVR_PY

cdef int _i
for _i in range(256):
    KI[_i] = <uint64_t>int(_KI_PY[_i])
    WI[_i] = float(_WI_PY[_i])
    FI[_i] = float(_FI_PY[_i])

cdef enum:
    SUB_NORMAL = 0
    SUB_JUMP_TIME = 1
    SUB_JUMP_SIZE = 2
    SUB_CLOCK = 3
    SUB_BRIDGE = 4
    SUB_BRIDGE_MAX = 5

cdef double U53 = 1.0 / 9007199254740992.0


cdef struct Stream:
    uint64_t s0, s1, s2, s3


cdef inline void philox_block(uint32_t* c, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t n0, n2
    cdef int r
    for r in range(10):
        p0 = <uint64_t>c[0] * 0xD2511F53ULL
        p1 = <uint64_t>c[2] * 0xCD9E8D57ULL
        n0 = (<uint32_t>(p1 >> 32)) ^ c[1] ^ k0
        n2 = (<uint32_t>(p0 >> 32)) ^ c[3] ^ k1
        c[1] = <uint32_t>p1
        c[3] = <uint32_t>p0
        c[0] = n0
        c[2] = n2
        k0 = k0 + 0x9E3779B9U
        k1 = k1 + 0xBB67AE85U


cdef inline void stream_init(Stream* s, uint64_t seed, uint64_t stream_id, uint32_t sub) noexcept nogil:
    cdef uint32_t a[4]
    cdef uint32_t b[4]
    cdef uint32_t k0 = <uint32_t>(seed & 0xFFFFFFFFULL)
    cdef uint32_t k1 = <uint32_t>(seed >> 32)
    a[0] = 0; a[1] = sub << 24
    a[2] = <uint32_t>(stream_id & 0xFFFFFFFFULL); a[3] = <uint32_t>(stream_id >> 32)
    b[0] = 1; b[1] = a[1]; b[2] = a[2]; b[3] = a[3]
    philox_block(a, k0, k1)
    philox_block(b, k0, k1)
    s.s0 = (<uint64_t>a[0]) | ((<uint64_t>a[1]) << 32)
    s.s1 = (<uint64_t>a[2]) | ((<uint64_t>a[3]) << 32)
    s.s2 = (<uint64_t>b[0]) | ((<uint64_t>b[1]) << 32)
    s.s3 = (<uint64_t>b[2]) | ((<uint64_t>b[3]) << 32)
    if s.s0 == 0 and s.s1 == 0 and s.s2 == 0 and s.s3 == 0:
        s.s0 = 1


cdef inline uint64_t rotl(uint64_t x, int k) noexcept nogil:
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t next_word(Stream* s) noexcept nogil:
    cdef uint64_t result = rotl(s.s1 * 5, 7) * 9
    cdef uint64_t t = s.s1 << 17
    s.s2 ^= s.s0
    s.s3 ^= s.s1
    s.s1 ^= s.s2
    s.s0 ^= s.s3
    s.s2 ^= t
    s.s3 = rotl(s.s3, 45)
    return result


cdef inline double next_uniform(Stream* s) noexcept nogil:
    return (<double><int64_t>(next_word(s) >> 11) + 0.5) * U53


cdef inline double next_exp(Stream* s, double rate) noexcept nogil:
    return -log(next_uniform(s)) / rate


cdef inline double next_normal(Stream* s) noexcept nogil:
    cdef uint64_t r, rabs
    cdef int idx, sign
    cdef double x, xx, yy
    while True:
        r = next_word(s)
        idx = <int>(r & 0xFF)
        r >>= 8
        sign = <int>(r & 1)
        rabs = (r >> 1) & 0x000FFFFFFFFFFFFFULL
        x = <double><int64_t>rabs * WI[idx]
        if sign:
            x = -x
        if rabs < KI[idx]:
            return x
        if idx == 0:
            while True:
                xx = -ZIG_INV_R * log(next_uniform(s))
                yy = -log(next_uniform(s))
                if yy + yy > xx * xx:
                    if (rabs >> 8) & 1:
                        return -(ZIG_R + xx)
                    return ZIG_R + xx
        elif (FI[idx - 1] - FI[idx]) * next_uniform(s) + FI[idx] < exp(-0.5 * x * x):
            return x


def words(uint64_t seed, uint64_t stream_id, int sub, Py_ssize_t n):
    cdef Stream s
    cdef Py_ssize_t i
    out = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] o = out
    stream_init(&s, seed, stream_id, <uint32_t>sub)
    with nogil:
        for i in range(n):
            o[i] = next_word(&s)
    return out


def uniforms(uint64_t seed, uint64_t stream_id, int sub, Py_ssize_t n):
    cdef Stream s
    cdef Py_ssize_t i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    stream_init(&s, seed, stream_id, <uint32_t>sub)
    with nogil:
        for i in range(n):
            o[i] = next_uniform(&s)
    return out


def normals(uint64_t seed, uint64_t stream_id, int sub, Py_ssize_t n):
    cdef Stream s
    cdef Py_ssize_t i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    stream_init(&s, seed, stream_id, <uint32_t>sub)
    with nogil:
        for i in range(n):
            o[i] = next_normal(&s)
    return out


cdef struct ReflParams:
    double mu, sigma, p, eta, b, x0, dt, horizon, stop_rate, disc_rate
    double occ_const
    int n_occ
    const double* occ_rates
    const double* occ_coefs
    uint64_t seed
    int antithetic


cdef void reflected_one(const ReflParams* P, uint64_t path, double* res) noexcept nogil:
    cdef Stream zn, jt, js, clk
    cdef double zsign = 1.0
    cdef double divs = 0.0, inj = 0.0, occ = 0.0, u, T, next_jump
    cdef double rem, sdt, step_disc, disc, disc_new, h, sh, t_new, z, f, w
    cdef long n_full, n_steps, k
    cdef int j
    if P.antithetic and path % 2 == 1:
        stream_init(&zn, P.seed, path - 1, SUB_NORMAL)
        zsign = -1.0
    else:
        stream_init(&zn, P.seed, path, SUB_NORMAL)
    stream_init(&jt, P.seed, path, SUB_JUMP_TIME)
    stream_init(&js, P.seed, path, SUB_JUMP_SIZE)
    stream_init(&clk, P.seed, path, SUB_CLOCK)

    u = P.x0
    if u > P.b:
        divs += u - P.b
        u = P.b
    elif u < 0.0:
        inj += -u
        u = 0.0
    T = P.horizon
    if P.stop_rate > 0.0:
        T = next_exp(&clk, P.stop_rate)
        if T > P.horizon:
            T = P.horizon
    next_jump = next_exp(&jt, P.p) if P.p > 0.0 else INFINITY

    n_full = <long>(T / P.dt)
    rem = T - n_full * P.dt
    n_steps = n_full + 1 if rem > 1e-12 * P.dt else n_full
    sdt = sqrt(P.dt)
    step_disc = exp(-P.disc_rate * P.dt)
    disc = 1.0
    for k in range(1, n_steps + 1):
        if k <= n_full:
            h = P.dt
            sh = sdt
            t_new = k * P.dt
            disc_new = disc * step_disc if P.disc_rate > 0.0 else 1.0
        else:
            h = rem
            sh = sqrt(rem)
            t_new = T
            disc_new = exp(-P.disc_rate * T)
        if P.n_occ:
            f = P.occ_const
            for j in range(P.n_occ):
                f += P.occ_coefs[j] * exp(P.occ_rates[j] * (P.b - u))
            occ += disc * h * f
        z = next_normal(&zn) * zsign
        u += P.mu * h + P.sigma * sh * z
        if u > P.b:
            divs += disc_new * (u - P.b)
            u = P.b
        elif u < 0.0:
            inj += disc_new * (-u)
            u = 0.0
        while next_jump <= t_new:
            u += next_exp(&js, P.eta)
            if u > P.b:
                w = exp(-P.disc_rate * next_jump) if P.disc_rate > 0.0 else 1.0
                divs += w * (u - P.b)
                u = P.b
            next_jump += next_exp(&jt, P.p)
        disc = disc_new
    res[0] = divs
    res[1] = inj
    res[2] = occ
    res[3] = T
    res[4] = u


def reflected_batch(double mu, double sigma, double p, double eta, double b, double x0,
                    double dt, double horizon, double stop_rate, double disc_rate,
                    occ_rates, occ_coefs, double occ_const, uint64_t seed,
                    uint64_t first_path, Py_ssize_t n_paths, bint antithetic):
    cdef double[::1] rates = np.ascontiguousarray(occ_rates, dtype=np.float64)
    cdef double[::1] coefs = np.ascontiguousarray(occ_coefs, dtype=np.float64)
    cdef ReflParams P
    cdef Py_ssize_t i
    cdef double res[5]
    out = np.empty((5, n_paths), dtype=np.float64)
    cdef double[:, ::1] o = out
    if rates.shape[0] != coefs.shape[0]:
        raise ValueError("occupation rates and coefficients differ in length")
    P.mu = mu; P.sigma = sigma; P.p = p; P.eta = eta; P.b = b; P.x0 = x0
    P.dt = dt; P.horizon = horizon; P.stop_rate = stop_rate; P.disc_rate = disc_rate
    P.occ_const = occ_const
    P.n_occ = <int>rates.shape[0]
    P.occ_rates = &rates[0] if P.n_occ else NULL
    P.occ_coefs = &coefs[0] if P.n_occ else NULL
    P.seed = seed
    P.antithetic = antithetic
    with nogil:
        for i in range(n_paths):
            reflected_one(&P, first_path + i, res)
            o[0, i] = res[0]
            o[1, i] = res[1]
            o[2, i] = res[2]
            o[3, i] = res[3]
            o[4, i] = res[4]
    return out


cdef double ruin_one(double mu, double sigma, double p, double eta, double b, double x0,
                     double q, double dt, double horizon, uint64_t seed, uint64_t path,
                     const double* edges, int n_bins, double* hist) noexcept nogil:
    cdef Stream zn, jt, js, br, bm
    cdef double u, u1, next_jump, sdt, s2dt, step_disc, disc, lo, width, t, t_new, e, d, m
    cdef long n_max, k, j
    stream_init(&zn, seed, path, SUB_NORMAL)
    stream_init(&jt, seed, path, SUB_JUMP_TIME)
    stream_init(&js, seed, path, SUB_JUMP_SIZE)
    stream_init(&br, seed, path, SUB_BRIDGE)
    stream_init(&bm, seed, path, SUB_BRIDGE_MAX)
    u = x0 if x0 < b else b
    if u <= 0.0:
        return 0.0
    next_jump = next_exp(&jt, p) if p > 0.0 else INFINITY
    n_max = <long>(horizon / dt)
    sdt = sqrt(dt)
    s2dt = sigma * sigma * dt
    step_disc = exp(-q * dt)
    disc = 1.0
    lo = edges[0] if n_bins > 0 else 0.0
    width = (edges[n_bins] - edges[0]) / n_bins if n_bins > 0 else 1.0
    for k in range(n_max):
        t = k * dt
        if n_bins:
            j = <long>((u - lo) / width)
            if 0 <= j < n_bins:
                hist[j] += disc * dt
        u1 = u + mu * dt + sigma * sdt * next_normal(&zn)
        if u1 <= 0.0:
            return t + dt * u / (u - u1)
        if s2dt > 0.0:
            e = 2.0 * u * u1 / s2dt
            if e < 50.0 and next_uniform(&br) < exp(-e):
                return t + 0.5 * dt
            if u1 >= b or 2.0 * (b - u) * (b - u1) / s2dt < 50.0:
                d = u1 - u
                m = 0.5 * (u + u1 + sqrt(d * d - 2.0 * s2dt * log(next_uniform(&bm))))
                if m > b:
                    u1 -= m - b
        if u1 > b:
            u1 = b
        t_new = t + dt
        while next_jump <= t_new:
            u1 += next_exp(&js, eta)
            if u1 > b:
                u1 = b
            next_jump += next_exp(&jt, p)
        u = u1
        disc *= step_disc
    return INFINITY


def ruin_batch(double mu, double sigma, double p, double eta, double b, double x0, double q,
               double dt, double horizon, uint64_t seed, uint64_t first_path,
               Py_ssize_t n_paths, edges):
    cdef double[::1] ed = np.ascontiguousarray(edges, dtype=np.float64)
    cdef int n_bins = <int>ed.shape[0] - 1 if ed.shape[0] > 1 else 0
    hist_arr = np.zeros(max(n_bins, 1), dtype=np.float64)
    cdef double[::1] hist = hist_arr
    zeta_arr = np.empty(n_paths, dtype=np.float64)
    cdef double[::1] zeta = zeta_arr
    cdef double dummy = 0.0
    cdef const double* ep = &ed[0] if ed.shape[0] > 0 else &dummy
    cdef Py_ssize_t i
    with nogil:
        for i in range(n_paths):
            zeta[i] = ruin_one(mu, sigma, p, eta, b, x0, q, dt, horizon, seed, first_path + i,
                               ep, n_bins, &hist[0])
    return zeta_arr, hist_arr[:n_bins].copy()
