"""Jitted inner loops: noise-field fillers and surface update stencils.

This module mirrors the hashing scheme of `streams` (the two must agree
bit for bit; tests enforce it) and adds the hot per-site loops.  Heights
live in flat (replica, site) float64 arrays over the full geometry grid;
a step touches only the `active` linear indices, so the same kernels
serve the shrinking exact cone and the torus.

The gaussian sampler is a 256-layer ziggurat over the half-normal
magnitude with the sign taken from a spare hash bit.  Draws that miss
the rectangle fast path (about 2%) are resolved in a scalar fixup pass;
extra randomness for wedge/tail tests comes from rehashing the draw's
own word, so a draw is still a pure function of (seed, replica, time,
site).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

from .streams import ZIG_SALT

_U = np.uint64
_M1 = _U(0xBF58476D1CE4E5B9)
_M2 = _U(0x94D049BB133111EB)
_S30 = _U(30)
_S27 = _U(27)
_S31 = _U(31)
_S11 = _U(11)
_S8 = _U(8)
_ONE = _U(1)
_LAYER_MASK = _U(255)
_ZIG = _U(ZIG_SALT)
_U53 = 2.0 ** -53

#: kind codes shared with the pure-python layer
KIND_FREE, KIND_CLIP, KIND_FREEZE, KIND_DRIFT = 0, 1, 2, 3

# 256-layer ziggurat for exp(-x^2/2); standard right edge for N=256.
ZIG_R = 3.6541528853610088


def _build_zig_tables():
    # Layer areas are all V; x[0] is the virtual base-box edge covering
    # the tail, x[256] closes at 0 (residual checked here).
    r = ZIG_R
    f_r = math.exp(-0.5 * r * r)
    tail = math.sqrt(math.pi / 2.0) * math.erfc(r / math.sqrt(2.0))
    v = r * f_r + tail
    x = np.zeros(257)
    x[0] = v / f_r
    x[1] = r
    for i in range(1, 256):
        arg = math.exp(-0.5 * x[i] * x[i]) + v / x[i]
        x[i + 1] = math.sqrt(-2.0 * math.log(min(arg, 1.0)))
    if x[256] > 1e-5:
        raise AssertionError("ziggurat table failed to close")
    x[256] = 0.0
    y = np.exp(-0.5 * x * x)
    y[256] = 1.0
    return x, y


ZIG_X, ZIG_Y = _build_zig_tables()


@njit(cache=True, inline="always")
def _mix(x):
    x ^= x >> _S30
    x *= _M1
    x ^= x >> _S27
    x *= _M2
    x ^= x >> _S31
    return x


@njit(cache=True, inline="always")
def _unit(dk):
    return np.float64(dk >> _S11) * _U53


@njit(cache=True, inline="always")
def _sign(dk):
    return 1.0 - 2.0 * np.float64((dk >> _S8) & _ONE)


@njit(cache=True)
def _zig_magnitude(dk, xt, yt):
    # Full half-normal magnitude from one hash word; rehash for any
    # extra uniforms the wedge/tail tests need.
    while True:
        i = np.int64(dk & _LAYER_MASK)
        u = _unit(dk)
        x = u * xt[i]
        if x < xt[i + 1]:
            return x
        if i == 0:
            # tail beyond ZIG_R, Marsaglia's exponential method
            while True:
                dk = _mix(dk ^ _ZIG)
                u1 = (np.float64(dk >> _S11) + 1.0) * _U53
                dk = _mix(dk ^ _ZIG)
                u2 = (np.float64(dk >> _S11) + 1.0) * _U53
                xx = -math.log(u1) / ZIG_R
                yy = -math.log(u2)
                if yy + yy >= xx * xx:
                    return ZIG_R + xx
        else:
            dk = _mix(dk ^ _ZIG)
            u2 = _unit(dk)
            if yt[i] + u2 * (yt[i + 1] - yt[i]) < math.exp(-0.5 * x * x):
                return x
            dk = _mix(dk ^ _ZIG)


@njit(cache=True, parallel=True)
def fill_gaussian(e, fail, tk, skeys, sigma, xt, yt):
    n_rep = e.shape[0]
    n_site = e.shape[1]
    for r in prange(n_rep):
        t = tk[r]
        for s in range(n_site):
            dk = _mix(t ^ skeys[s])
            i = np.int64(dk & _LAYER_MASK)
            x = _unit(dk) * xt[i]
            e[r, s] = sigma * _sign(dk) * x
            fail[r, s] = np.uint8(x >= xt[i + 1])
        for s in range(n_site):
            if fail[r, s]:
                dk = _mix(t ^ skeys[s])
                e[r, s] = sigma * _sign(dk) * _zig_magnitude(dk, xt, yt)


@njit(cache=True, parallel=True)
def fill_unit_sign(u, sgn, tk, skeys):
    # [0,1) uniform and fair +-1 sign per draw; the family transform
    # (inverse CDF of |eps|) is applied to u in numpy afterwards.
    n_rep = u.shape[0]
    n_site = u.shape[1]
    for r in prange(n_rep):
        t = tk[r]
        for s in range(n_site):
            dk = _mix(t ^ skeys[s])
            u[r, s] = _unit(dk)
            sgn[r, s] = _sign(dk)


@njit(cache=True, parallel=True)
def stencil_cone(hp, hn, e, act, delta, w, kind):
    # Neighbors via linear deltas; valid because the active box shrinks
    # by the kernel range each step, so all reads stay interior.
    n_rep = hp.shape[0]
    n_act = act.shape[0]
    n_off = w.shape[0]
    for r in prange(n_rep):
        for a in range(n_act):
            s = act[a]
            m = 0.0
            for k in range(n_off):
                m += w[k] * hp[r, s + delta[k]]
            x = m + e[r, a]
            if kind == 0:
                hn[r, s] = x
            elif kind == 1:
                hn[r, s] = x if x > 0.0 else 0.0
            elif kind == 2:
                hn[r, s] = x if x > 0.0 else hp[r, s]
            else:
                hn[r, s] = x if x > 0.0 else m


@njit(cache=True, parallel=True)
def stencil_torus(hp, hn, e, nb, w, kind):
    n_rep = hp.shape[0]
    n_site = hp.shape[1]
    n_off = w.shape[0]
    for r in prange(n_rep):
        for s in range(n_site):
            m = 0.0
            for k in range(n_off):
                m += w[k] * hp[r, nb[s, k]]
            x = m + e[r, s]
            if kind == 0:
                hn[r, s] = x
            elif kind == 1:
                hn[r, s] = x if x > 0.0 else 0.0
            elif kind == 2:
                hn[r, s] = x if x > 0.0 else hp[r, s]
            else:
                hn[r, s] = x if x > 0.0 else m


@njit(cache=True, parallel=True)
def count_below(hi, lo, act, out):
    # Per-replica count of active sites where hi < lo (order violations).
    n_rep = hi.shape[0]
    n_act = act.shape[0]
    for r in prange(n_rep):
        c = 0
        for a in range(n_act):
            s = act[a]
            if hi[r, s] < lo[r, s]:
                c += 1
        out[r] = c


def gaussian_from_keys(keys: np.ndarray, sigma: float) -> np.ndarray:
    """Ziggurat normals from an array of final hash words.

    Used by sequential streams; the engine path goes through
    `fill_gaussian` with per-replica time keys instead.
    """
    keys = np.ascontiguousarray(keys, dtype=np.uint64).reshape(1, -1)
    e = np.empty_like(keys, dtype=np.float64)
    fail = np.empty_like(keys, dtype=np.uint8)
    _gaussian_resolve(e, fail, keys, sigma, ZIG_X, ZIG_Y)
    return e[0]


@njit(cache=True, parallel=True)
def _gaussian_resolve(e, fail, keys, sigma, xt, yt):
    n_rep = e.shape[0]
    n_site = e.shape[1]
    for r in prange(n_rep):
        for s in range(n_site):
            dk = keys[r, s]
            i = np.int64(dk & _LAYER_MASK)
            x = _unit(dk) * xt[i]
            if x >= xt[i + 1]:
                x = _zig_magnitude(dk, xt, yt)
            e[r, s] = sigma * _sign(dk) * x
