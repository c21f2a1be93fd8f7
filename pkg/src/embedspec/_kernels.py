"""Compiled integration kernels.

A DOP853 driver (coefficients and error norm as in scipy's implementation)
specialised for long oscillatory traces, plus the right-hand sides it runs:
the Hill system for the fundamental pair and the Prüfer systems used by
synthesis and verification.

Right-hand sides share the signature ``rhs(x, y, xmid, args, dy)``. ``xmid``
is the midpoint of the current step; piecewise data (potential segments,
activation switches) is selected from it, so a step never straddles a jump
as long as every jump is declared as an output stop.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit
from numba.extending import overload
from scipy.integrate._ivp import dop853_coefficients as _dop

_NS = _dop.N_STAGES
_A = np.ascontiguousarray(_dop.A[:_NS, :_NS])
_B = np.ascontiguousarray(_dop.B)
_C = np.ascontiguousarray(_dop.C[:_NS])
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_EXPONENT = -1.0 / 8.0
_TWO_PI = 2.0 * math.pi

OK, UNDERFLOW, NONFINITE, TOO_MANY_STEPS = 0, 1, 2, 3


@njit(cache=True)
def dop853(args, x0, y0, stops, rtol, atol, h0, hmax, max_steps):
    """Integrate from ``x0`` through every position in ``stops``.

    Returns ``(status, x_reached, out, n_steps)`` where ``out[i]`` is the
    state at ``stops[i]`` (filled up to the failure point).
    """
    n = y0.size
    ns = stops.size
    out = np.zeros((ns, n))
    K = np.empty((_NS + 1, n))
    y = y0.copy()
    ynew = np.empty(n)
    ytmp = np.empty(n)
    f = np.empty(n)
    x = x0
    h_prop = min(h0, hmax)
    i_stop = 0
    while i_stop < ns and stops[i_stop] <= x0:
        out[i_stop] = y
        i_stop += 1
    need_f = True
    steps = 0
    rejected = False
    while i_stop < ns:
        target = stops[i_stop]
        remaining = target - x
        clamped = h_prop >= remaining
        h = remaining if clamped else h_prop
        hmin = 1e-14 * max(1.0, abs(x))
        if h < hmin and not clamped:
            return UNDERFLOW, x, out, steps
        xmid = x + 0.5 * h
        if need_f:
            rhs_call(args, x, y, xmid, f)
            need_f = False
        for c in range(n):
            K[0, c] = f[c]
        for s in range(1, _NS):
            for c in range(n):
                acc = 0.0
                for r in range(s):
                    acc += _A[s, r] * K[r, c]
                ytmp[c] = y[c] + h * acc
            rhs_call(args, x + _C[s] * h, ytmp, xmid, K[s])
        finite = True
        for c in range(n):
            acc = 0.0
            for r in range(_NS):
                acc += _B[r] * K[r, c]
            ynew[c] = y[c] + h * acc
            if not math.isfinite(ynew[c]):
                finite = False
        if finite:
            rhs_call(args, x + h, ynew, xmid, K[_NS])
            e5 = 0.0
            e3 = 0.0
            for c in range(n):
                sc = atol + max(abs(y[c]), abs(ynew[c])) * rtol
                a5 = 0.0
                a3 = 0.0
                for r in range(_NS + 1):
                    a5 += _E5[r] * K[r, c]
                    a3 += _E3[r] * K[r, c]
                e5 += (a5 / sc) ** 2
                e3 += (a3 / sc) ** 2
            den = math.sqrt((e5 + 0.01 * e3) * n)
            err = 0.0 if den == 0.0 else h * e5 / den
            if not math.isfinite(err):
                finite = False
        steps += 1
        if steps > max_steps:
            return TOO_MANY_STEPS, x, out, steps
        if finite and err < 1.0:
            if err == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = min(_MAX_FACTOR, _SAFETY * err ** _EXPONENT)
            if rejected:
                factor = min(1.0, factor)
            rejected = False
            if clamped:
                x = target
                h_prop = min(hmax, max(h_prop, h * factor))
            else:
                x = x + h
                h_prop = min(hmax, h * factor)
            for c in range(n):
                y[c] = ynew[c]
                f[c] = K[_NS, c]
            if clamped:
                out[i_stop] = y
                i_stop += 1
                need_f = True
        else:
            if not finite:
                if h <= hmin:
                    return NONFINITE, x, out, steps
                h_prop = h * _MIN_FACTOR
            else:
                h_prop = h * max(_MIN_FACTOR, _SAFETY * err ** _EXPONENT)
                if h_prop < hmin:
                    return UNDERFLOW, x, out, steps
            rejected = True
    return OK, x, out, steps


# ---------------------------------------------------------------------------
# periodic background

@njit(cache=True)
def v0_value(x, xmid, c0, acos, asin, breaks, coefs):
    """Fourier part plus piecewise-polynomial part of the background."""
    v = c0
    for m in range(acos.size):
        w = _TWO_PI * (m + 1) * x
        v += acos[m] * math.cos(w) + asin[m] * math.sin(w)
    nseg = breaks.size - 1
    if nseg > 0:
        cell = math.floor(xmid)
        fm = xmid - cell
        lo = 0
        hi = nseg - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if breaks[mid] <= fm:
                lo = mid
            else:
                hi = mid - 1
        t = x - cell - breaks[lo]
        acc = 0.0
        for d in range(coefs.shape[1] - 1, -1, -1):
            acc = acc * t + coefs[lo, d]
        v += acc
    return v


@njit(cache=True)
def rhs_hill(x, y, xmid, args, dy):
    """C, C', S, S' (and optionally their E-derivatives)."""
    c0, acos, asin, breaks, coefs, E = args
    q = v0_value(x, xmid, c0, acos, asin, breaks, coefs) - E
    dy[0] = y[1]
    dy[1] = q * y[0]
    dy[2] = y[3]
    dy[3] = q * y[2]
    if y.size == 8:
        dy[4] = y[5]
        dy[5] = q * y[4] - y[0]
        dy[6] = y[7]
        dy[7] = q * y[6] - y[2]


# ---------------------------------------------------------------------------
# Floquet frame lookup
#
# A frame pack is the tuple
#   (nodes, P, dP, el, ep, offs, unif, omega, k)
# with per-component node blocks concatenated; component j owns
# nodes[offs[j]:offs[j+1]]. P = |phi|^2 and dP its derivative; el is the
# local phase (integral of eta' corrected so that eta(1) is exactly k mod 2pi)
# and ep its derivative.

@njit(cache=True)
def frame_eval(nodes, P, dP, el, ep, offs, unif, j, f):
    o = offs[j]
    m = offs[j + 1] - o - 1
    if unif[j]:
        i = int(f * m)
        if i >= m:
            i = m - 1
        if i < 0:
            i = 0
    else:
        lo = 0
        hi = m - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if nodes[o + mid] <= f:
                lo = mid
            else:
                hi = mid - 1
        i = lo
    a = nodes[o + i]
    h = nodes[o + i + 1] - a
    t = (f - a) / h
    t1 = 1.0 - t
    h00 = (1.0 + 2.0 * t) * t1 * t1
    h10 = t * t1 * t1 * h
    h01 = t * t * (3.0 - 2.0 * t)
    h11 = -t * t * t1 * h
    p = h00 * P[o + i] + h10 * dP[o + i] + h01 * P[o + i + 1] + h11 * dP[o + i + 1]
    e = h00 * el[o + i] + h10 * ep[o + i] + h01 * el[o + i + 1] + h11 * ep[o + i + 1]
    return p, e


@njit(cache=True)
def _phase_terms(fr, j, x, psi):
    """Return (eta', sin 2Theta, cos 2Theta) for component j."""
    nodes, P, dP, el, ep, offs, unif, omega, kq = fr
    cell = math.floor(x)
    f = x - cell
    p, e = frame_eval(nodes, P, dP, el, ep, offs, unif, j, f)
    etap = omega[j] / (2.0 * p)
    ph = np.fmod(2.0 * cell * kq[j], _TWO_PI) + 2.0 * e + 2.0 * psi
    return etap, math.sin(ph), math.cos(ph)


@njit(cache=True)
def _prufer_update(K, y, V, etap, s2, c2, j, dy):
    dy[j] = -V * (1.0 - c2) / (2.0 * etap)
    dy[K + j] = V * s2 / (2.0 * etap)


@njit(cache=True)
def rhs_synth(x, y, xmid, args, dy):
    """Self-consistent coupled system; V is built from the states."""
    fr, amp, sgn, T, work = args
    K = amp.size
    V = 0.0
    for j in range(K):
        etap, s2, c2 = _phase_terms(fr, j, x, y[j])
        work[0, j] = etap
        work[1, j] = s2
        work[2, j] = c2
        if xmid >= T[j]:
            V += sgn[j] * amp[j] * s2
    V /= 1.0 + x
    for j in range(K):
        _prufer_update(K, y, V, work[0, j], work[1, j], work[2, j], j, dy)


@njit(cache=True)
def _bsearch(xs, x):
    lo = 0
    hi = xs.size - 2
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if xs[mid] <= x:
            lo = mid
        else:
            hi = mid - 1
    return lo


@njit(cache=True)
def table_value(xs, vs, coef, x):
    """Piecewise cubic in local power form, constant beyond the ends."""
    if x <= xs[0]:
        return vs[0]
    if x >= xs[-1]:
        return vs[-1]
    i = _bsearch(xs, x)
    d = x - xs[i]
    return ((coef[0, i] * d + coef[1, i]) * d + coef[2, i]) * d + coef[3, i]


@njit(cache=True)
def rhs_table(x, y, xmid, args, dy):
    """Traced components under a piecewise-polynomial sampled V."""
    fr, xs, vs, coef = args
    K = y.size // 2
    V = table_value(xs, vs, coef, x)
    for j in range(K):
        etap, s2, c2 = _phase_terms(fr, j, x, y[j])
        _prufer_update(K, y, V, etap, s2, c2, j, dy)


@njit(cache=True)
def rhs_recon(x, y, xmid, args, dy):
    """Traced components under V rebuilt from stored source phases.

    ``grid``/``psi`` hold the source components' phase offsets (Theta minus
    eta) on the export grid; ``dpl``/``dpr`` are their slopes as the left and
    right end of a grid interval (they differ only at activation points).
    The offsets are interpolated by cubic Hermite.
    """
    fr, src, grid, psi, dpl, dpr, amp, sgn, T = args
    L = amp.size
    V = 0.0
    if xmid <= grid[0]:
        i = 0
    elif xmid >= grid[-1]:
        i = grid.size - 2
    else:
        i = _bsearch(grid, xmid)
    a = grid[i]
    h = grid[i + 1] - a
    t = (x - a) / h
    t1 = 1.0 - t
    h00 = (1.0 + 2.0 * t) * t1 * t1
    h10 = t * t1 * t1 * h
    h01 = t * t * (3.0 - 2.0 * t)
    h11 = -t * t * t1 * h
    for l in range(L):
        if xmid >= T[l]:
            ps = h00 * psi[l, i] + h10 * dpl[l, i] + h01 * psi[l, i + 1] + h11 * dpr[l, i + 1]
            etap, s2, c2 = _phase_terms(src, l, x, ps)
            V += sgn[l] * amp[l] * s2
    V /= 1.0 + x
    K = y.size // 2
    for j in range(K):
        etap, s2, c2 = _phase_terms(fr, j, x, y[j])
        _prufer_update(K, y, V, etap, s2, c2, j, dy)


@njit(cache=True)
def rhs_sines(x, y, xmid, args, dy):
    """Traced components under V = sum a sin(nu x + phi) / (1+x)^p, x >= x_on."""
    fr, amps, freqs, phases, powers, x_on = args
    V = 0.0
    if xmid >= x_on:
        for i in range(amps.size):
            V += amps[i] * math.sin(freqs[i] * x + phases[i]) / (1.0 + x) ** powers[i]
    K = y.size // 2
    for j in range(K):
        etap, s2, c2 = _phase_terms(fr, j, x, y[j])
        _prufer_update(K, y, V, etap, s2, c2, j, dy)


@njit(cache=True)
def rhs_direct(x, y, xmid, args, dy):
    """-u'' + (V0 + V) u = E u with V a piecewise-polynomial table."""
    c0, acos, asin, breaks, coefs, E, xs, vs, coef = args
    q = v0_value(x, xmid, c0, acos, asin, breaks, coefs) + table_value(xs, vs, coef, x) - E
    dy[0] = y[1]
    dy[1] = q * y[0]


# ---------------------------------------------------------------------------
# cached entry points
#
# Passing a jitted function as an argument defeats numba's disk cache, so the
# driver calls ``rhs_call``, whose implementation is chosen at typing time from
# the dtype of an empty marker array stored first in ``args``.

HILL = np.zeros(0, np.int8)
SYNTH = np.zeros(0, np.int16)
TABLE = np.zeros(0, np.int32)
RECON = np.zeros(0, np.uint8)
SINES = np.zeros(0, np.uint16)
DIRECT = np.zeros(0, np.int64)


def rhs_call(args, x, y, xmid, dy):  # pragma: no cover - typing stub
    raise NotImplementedError


@overload(rhs_call, jit_options={"cache": True})
def _rhs_call_impl(args, x, y, xmid, dy):
    name = str(args.types[0].dtype)
    table = {
        "int8": rhs_hill, "int16": rhs_synth, "int32": rhs_table,
        "uint8": rhs_recon, "uint16": rhs_sines, "int64": rhs_direct,
    }
    fn = table[name]

    def impl(args, x, y, xmid, dy):
        fn(x, y, xmid, args[1:], dy)

    return impl


@njit(cache=True)
def solve(args, x0, y0, stops, rtol, atol, h0, hmax, max_steps):
    return dop853(args, x0, y0, stops, rtol, atol, h0, hmax, max_steps)
