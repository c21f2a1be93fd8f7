"""Closed-form constants from the quantitative estimates.

Every function here is a direct evaluation of a displayed formula; nothing
is integrated or solved. Quasimomenta are in radians, band indices are
positive integers.
"""

from __future__ import annotations

import math
from typing import Sequence

E3 = math.exp(3.0)


def _check_k(k: float) -> None:
    if not 0.0 < k < math.pi:
        raise ValueError(f"quasimomentum {k!r} outside (0, pi)")


def sine_product(k: float) -> float:
    """sin(99k/100) * sin((pi + 99k)/100), the factor shared by k and pi-k."""
    return math.sin(99.0 * k / 100.0) * math.sin((math.pi + 99.0 * k) / 100.0)


def anchor(k: float, n: int) -> float:
    """Free-model anchor for sqrt(E_n^k)."""
    _check_k(k)
    if n < 1:
        raise ValueError("band index must be >= 1")
    return n * math.pi - k if n % 2 == 0 else (n - 1) * math.pi + k


def delta_n(A: float, k: float, n: int) -> float:
    """Deviation radius for |sqrt(E_n^k) - a_n^k|."""
    _check_k(k)
    return A * E3 / (n * math.sin(k) * sine_product(k))


def eigen_threshold(A: float, k: float) -> float:
    """Band index above which the eigenvalue asymptotics hold.

    Uses sin k (not sin^3 k) in the denominator, as in the asymptotics
    statement; compare :func:`big_l`.
    """
    _check_k(k)
    return 1.0 + A / (k * (math.pi - k) / 1e4 * math.sin(k) * sine_product(k))


def big_l(A: float, k: float) -> float:
    """Band threshold L(k) governing the eta' and eta'' bounds."""
    _check_k(k)
    return 1.0 + A / (k * (math.pi - k) / 1e4 * math.sin(k) ** 3 * sine_product(k))


def big_delta(A: float, k: float) -> float:
    """Smallness scale delta(k)."""
    _check_k(k)
    return 40.0 * math.pi * A * E3 / (math.sin(k) ** 3 * sine_product(k))


def s_const(a: float, beta: float, C: float) -> float:
    """Start threshold s(|a|, beta, C) of the oscillatory-integral estimate."""
    a = abs(a)
    return (100.0 * C * a ** (beta - 1.0) + 1e4) ** (1.0 / beta) / a


def r_const(a: float, beta: float, C: float) -> float:
    """Numerator r(|a|, beta, C) of the oscillatory-integral estimate."""
    a = abs(a)
    return 30.0 * C / beta * a ** (beta - 1.0) + 10.0 * math.pi


def osc_rhs(a: float, beta: float, C: float, x0: float) -> float:
    """Right side r(|a|,beta,C) / (|a|^beta x0^beta)."""
    return r_const(a, beta, C) / (abs(a) ** beta * x0**beta)


def r_alpha(alpha: float) -> float:
    """Threshold r(alpha) of the periodic-weight estimate; inf for alpha=inf."""
    if math.isinf(alpha):
        return 0.0
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    b = 2.0 / 3.0
    return s_const(alpha, b, 1.0) + 4.0 * r_const(alpha, b, 1.0) * math.sqrt(
        alpha ** (-4.0 / 3.0) + 3.0
    )


def dist_2pi(a: float) -> float:
    """min_n |a - 2 pi n|."""
    r = math.fmod(abs(a), 2.0 * math.pi)
    return min(r, 2.0 * math.pi - r)


def alpha_one(ki: float, kj: float) -> float:
    """Separation min{2|ki-kj|, 2|ki+kj-pi|} for a non-resonant pair."""
    return min(2.0 * abs(ki - kj), 2.0 * abs(ki + kj - math.pi))


def alpha_two(k: float) -> float:
    """Separation min{4k, |4k-2pi|, 4pi-4k} for the 4theta variant."""
    return min(4.0 * k, abs(4.0 * k - 2.0 * math.pi), 4.0 * math.pi - 4.0 * k)


def s3_lhs(ns: Sequence[int], i: int) -> float:
    """Left side of the cross-band summability condition for member i."""
    ni = ns[i]
    total = 1.0 / (2.0 * ni)
    for l, nl in enumerate(ns):
        if l == i:
            continue
        if nl == ni:
            return math.inf
        total += nl / (ni * abs(ni - nl))
    return total


def s3_threshold(delta: float) -> float:
    """Right side 1 / (50 pi + 50 pi delta)."""
    if math.isinf(delta):
        return 0.0
    return 1.0 / (50.0 * math.pi + 50.0 * math.pi * delta)
