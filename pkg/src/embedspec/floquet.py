"""Floquet analysis of the unperturbed periodic operator -u'' + V0 u.

Fundamental solutions, discriminant, band edges, quasimomentum
eigenvalues, Floquet frames (|phi|^2, eta', eta''), and audits of the
asymptotic estimates for these objects.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from . import _kernels, bounds
from .numerics import BracketError, find_root_bracketed, integrate_function

TWO_PI = 2.0 * math.pi
K_MIN = 1e-3
HILL_RTOL = 1e-12
HILL_ATOL = 1e-14


class FloquetError(RuntimeError):
    """Numerical failure inside the Floquet machinery."""


class BandError(FloquetError):
    """A band edge could not be bracketed."""


class FrameError(FloquetError):
    """A Floquet frame could not be assembled."""


# ---------------------------------------------------------------------------
# periodic background

@dataclass(frozen=True)
class PeriodicPotential:
    """1-periodic background: trigonometric part plus piecewise polynomials.

    ``V0(x) = c0 + sum_m acos[m] cos(2 pi (m+1) x) + asin[m] sin(2 pi (m+1) x)
    + poly_s(x - breaks[s])`` on segment ``s`` of [0, 1).

    Attributes:
        kind: Label used in configuration records.
        c0: Constant term.
        acos, asin: Cosine / sine coefficients for harmonics 1, 2, ...
        breaks: Segment boundaries, starting at 0 and ending at 1, or empty.
        coefs: Per-segment polynomial coefficients (ascending powers of the
            offset from the segment start).
        A: L1 norm over one period, computed by quadrature.
    """

    kind: str = "fourier"
    c0: float = 0.0
    acos: tuple = ()
    asin: tuple = ()
    breaks: tuple = ()
    coefs: tuple = ()
    A: float = field(init=False, compare=False)

    def __post_init__(self):
        n = max(len(self.acos), len(self.asin))
        object.__setattr__(self, "acos", tuple(float(v) for v in self.acos) + (0.0,) * (n - len(self.acos)))
        object.__setattr__(self, "asin", tuple(float(v) for v in self.asin) + (0.0,) * (n - len(self.asin)))
        if self.breaks:
            br = tuple(float(b) for b in self.breaks)
            if br[0] != 0.0 or br[-1] != 1.0 or any(b1 <= b0 for b0, b1 in zip(br, br[1:])):
                raise ValueError("breaks must increase strictly from 0 to 1")
            if len(self.coefs) != len(br) - 1:
                raise ValueError("need one coefficient list per segment")
            object.__setattr__(self, "breaks", br)
            object.__setattr__(self, "coefs", tuple(tuple(float(c) for c in row) for row in self.coefs))
        object.__setattr__(self, "A", self._l1_norm())

    # constructors -----------------------------------------------------------
    @classmethod
    def zero(cls) -> "PeriodicPotential":
        return cls(kind="zero")

    @classmethod
    def constant(cls, c: float) -> "PeriodicPotential":
        return cls(kind="fourier", c0=c)

    @classmethod
    def cosine(cls, amplitude: float, offset: float = 0.0) -> "PeriodicPotential":
        """``offset + amplitude * cos(2 pi x)``."""
        return cls(kind="cosine", c0=offset, acos=(amplitude,))

    @classmethod
    def fourier(cls, c0=0.0, acos=(), asin=()) -> "PeriodicPotential":
        return cls(kind="fourier", c0=c0, acos=tuple(acos), asin=tuple(asin))

    @classmethod
    def piecewise(cls, breaks: Sequence[float], coefs) -> "PeriodicPotential":
        """Piecewise polynomial; a scalar per segment means a constant."""
        rows = [tuple(np.atleast_1d(c).tolist()) for c in coefs]
        return cls(kind="piecewise", breaks=tuple(breaks), coefs=tuple(rows))

    @classmethod
    def from_dict(cls, d: dict) -> "PeriodicPotential":
        kind = d.get("kind")
        if kind == "zero":
            return cls.zero()
        if kind == "cosine":
            return cls.cosine(float(d.get("amplitude", 1.0)), float(d.get("offset", 0.0)))
        if kind == "fourier":
            return cls.fourier(float(d.get("c0", 0.0)), d.get("cos", ()), d.get("sin", ()))
        if kind == "piecewise":
            return cls.piecewise(d["breaks"], d["coefs"])
        raise ValueError(f"unknown potential kind {kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "zero":
            return {"kind": "zero"}
        if self.kind == "cosine":
            return {"kind": "cosine", "amplitude": self.acos[0], "offset": self.c0}
        if self.kind == "piecewise":
            return {"kind": "piecewise", "breaks": list(self.breaks),
                    "coefs": [list(c) for c in self.coefs]}
        return {"kind": "fourier", "c0": self.c0, "cos": list(self.acos), "sin": list(self.asin)}

    # evaluation -------------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return (self.c0 == 0.0 and not any(self.acos) and not any(self.asin)
                and not any(any(r) for r in self.coefs))

    @property
    def interior_breaks(self) -> tuple:
        return self.breaks[1:-1] if self.breaks else ()

    def kernel_args(self, E: float) -> tuple:
        coefs = np.array(self.coefs, dtype=float) if self.coefs else np.zeros((0, 1))
        if coefs.ndim == 1:
            coefs = coefs[:, None]
        return (
            _kernels.HILL, float(self.c0), np.array(self.acos, dtype=float),
            np.array(self.asin, dtype=float), np.array(self.breaks, dtype=float),
            np.ascontiguousarray(coefs), float(E),
        )

    def evaluate(self, x, side_ref=None):
        """Evaluate V0 at ``x``; ``side_ref`` picks the segment (default x)."""
        x = np.asarray(x, dtype=float)
        v = np.full(x.shape, self.c0)
        for m, (a, b) in enumerate(zip(self.acos, self.asin), start=1):
            w = TWO_PI * m * x
            v = v + a * np.cos(w) + b * np.sin(w)
        if self.breaks:
            ref = x if side_ref is None else np.asarray(side_ref, dtype=float)
            cell = np.floor(ref)
            seg = np.searchsorted(self.breaks, ref - cell, side="right") - 1
            seg = np.clip(seg, 0, len(self.coefs) - 1)
            t = x - cell - np.asarray(self.breaks)[seg]
            width = max(len(r) for r in self.coefs)
            table = np.zeros((len(self.coefs), width))
            for s, row in enumerate(self.coefs):
                table[s, : len(row)] = row
            acc = np.zeros(x.shape)
            for d in range(width - 1, -1, -1):
                acc = acc * t + table[seg, d]
            v = v + acc
        return v

    def __call__(self, x):
        return self.evaluate(x)

    def mean(self) -> float:
        m = self.c0
        for s, row in enumerate(self.coefs):
            h = self.breaks[s + 1] - self.breaks[s]
            m += sum(c * h ** (d + 1) / (d + 1) for d, c in enumerate(row))
        return m

    def sample_min(self) -> float:
        xs = np.linspace(0.0, 1.0, 4097)
        return float(np.min(self.evaluate(xs)))

    def _l1_norm(self) -> float:
        if self.is_zero:
            return 0.0
        pts = list(self.interior_breaks)
        # zeros of V0 are kinks of |V0|; let quad find them but give it room
        return integrate_function(lambda t: abs(float(self.evaluate(t))), 0.0, 1.0,
                                  tol=1e-12, breakpoints=pts, limit=2000)


# ---------------------------------------------------------------------------
# fundamental pair

def _with_breaks(V0: PeriodicPotential, stops: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge requested stops with every breakpoint copy in range."""
    stops = np.asarray(stops, dtype=float)
    ib = V0.interior_breaks
    if not ib or stops.size == 0:
        return stops, np.arange(stops.size)
    xmax = stops.max()
    cells = np.arange(0, math.ceil(xmax) + 1)
    extra = (cells[:, None] + np.asarray(ib)[None, :]).ravel()
    extra = np.concatenate([extra, cells[1:]])
    extra = extra[(extra > 0) & (extra < xmax)]
    merged = np.union1d(stops, extra)
    return merged, np.searchsorted(merged, stops)


def hill_solve(V0: PeriodicPotential, E: float, stops, with_derivative: bool = False,
               rtol: float = HILL_RTOL, atol: float = HILL_ATOL) -> np.ndarray:
    """States (C, C', S, S'[, dC/dE, dC'/dE, dS/dE, dS'/dE]) at each stop."""
    merged, idx = _with_breaks(V0, stops)
    y0 = np.zeros(8 if with_derivative else 4)
    y0[0] = 1.0
    y0[3] = 1.0
    h0 = 0.05 / max(1.0, math.sqrt(abs(E)))
    status, xr, out, _ = _kernels.solve(V0.kernel_args(E), 0.0, y0, merged, rtol, atol,
                                        h0, np.inf, 50_000_000)
    if status != _kernels.OK:
        raise FloquetError(f"Hill integration failed at x={xr:.17g} (E={E:.17g}, status {status})")
    return out[idx]


@dataclass(frozen=True)
class FundamentalPair:
    """Samples of C, C', S, S' for one energy, with Hermite evaluation.

    Attributes:
        E: Energy.
        x: Sample positions (start at 0).
        C, Cp, S, Sp: Solution values at ``x``.
    """

    E: float
    x: np.ndarray
    C: np.ndarray
    Cp: np.ndarray
    S: np.ndarray
    Sp: np.ndarray
    V0: PeriodicPotential = field(repr=False)

    def wronskian_deviation(self) -> float:
        return float(np.max(np.abs(self.C * self.Sp - self.Cp * self.S - 1.0)))

    def __call__(self, xq):
        """Interpolate (C, C', S, S') at ``xq`` using second derivatives from the ODE."""
        xq = np.asarray(xq, dtype=float)
        i = np.clip(np.searchsorted(self.x, xq, side="right") - 1, 0, self.x.size - 2)
        a, b = self.x[i], self.x[i + 1]
        mid = 0.5 * (a + b)
        qa = self.V0.evaluate(a, side_ref=mid) - self.E
        qb = self.V0.evaluate(b, side_ref=mid) - self.E
        out = []
        for y, yp, ypp_a, ypp_b in (
            (self.C, self.Cp, None, None), (self.Cp, None, qa * self.C[i], qb * self.C[i + 1]),
            (self.S, self.Sp, None, None), (self.Sp, None, qa * self.S[i], qb * self.S[i + 1]),
        ):
            if yp is not None:
                da, db = yp[i], yp[i + 1]
            else:
                da, db = ypp_a, ypp_b
            out.append(_hermite(a, b, y[i], y[i + 1], da, db, xq))
        return tuple(out)


def _hermite(a, b, ya, yb, da, db, x):
    h = b - a
    t = (x - a) / h
    t1 = 1.0 - t
    return ((1 + 2 * t) * t1 * t1 * ya + t * t1 * t1 * h * da
            + t * t * (3 - 2 * t) * yb - t * t * t1 * h * db)


def fundamental_pair(V0: PeriodicPotential, E: float, x_max: float = 1.0,
                     per_unit: int | None = None) -> FundamentalPair:
    """Fundamental solutions sampled densely on [0, x_max]."""
    if x_max < 1:
        raise ValueError("x_max must be >= 1")
    if per_unit is None:
        per_unit = max(256, int(math.ceil(8 * math.sqrt(abs(E)))))
    n = int(math.ceil(x_max * per_unit))
    xs = np.linspace(0.0, x_max, n + 1)
    xs, _ = _with_breaks(V0, xs)
    try:
        st = hill_solve(V0, E, xs)
    except FloquetError as exc:
        raise FloquetError(f"{exc} [fundamental pair, E={E!r}]") from exc
    return FundamentalPair(E=float(E), x=xs, C=st[:, 0], Cp=st[:, 1], S=st[:, 2],
                           Sp=st[:, 3], V0=V0)


def monodromy(V0: PeriodicPotential, E: float) -> tuple[float, float, float, float]:
    """(C(1), C'(1), S(1), S'(1))."""
    st = hill_solve(V0, E, np.array([1.0]))[0]
    return float(st[0]), float(st[1]), float(st[2]), float(st[3])


def discriminant(V0: PeriodicPotential, E: float) -> float:
    """D(E) = C(1, E) + S'(1, E)."""
    st = hill_solve(V0, E, np.array([1.0]))[0]
    return float(st[0] + st[3])


def discriminant_with_derivative(V0: PeriodicPotential, E: float) -> tuple[float, float]:
    st = hill_solve(V0, E, np.array([1.0]), with_derivative=True)[0]
    return float(st[0] + st[3]), float(st[4] + st[7])


# ---------------------------------------------------------------------------
# bands

@dataclass(frozen=True)
class Band:
    """One spectral band.

    Attributes:
        n: Band index (1-based).
        lower, upper: Edges.
        direction: ``"decreasing"`` for odd n, ``"increasing"`` for even n.
    """

    n: int
    lower: float
    upper: float
    direction: str

    def to_dict(self) -> dict:
        return {"n": self.n, "lower": self.lower, "upper": self.upper, "direction": self.direction}


def _march(fn, start: float, step: float, direction: float, limit: int = 60):
    """Walk from ``start`` until ``fn`` changes sign; returns a bracket."""
    f0 = fn(start)
    prev, fprev = start, f0
    s = step
    for _ in range(limit):
        cur = prev + direction * s
        fc = fn(cur)
        if fc == 0.0 or (fc > 0) != (fprev > 0):
            return (prev, cur) if direction > 0 else (cur, prev)
        prev, fprev = cur, fc
        s *= 1.5
    raise BandError(f"no sign change found marching from {start:.6g}")


@functools.lru_cache(maxsize=4096)
def _ground_edge(V0: PeriodicPotential) -> float:
    lo = V0.sample_min() - 1.0
    fn = lambda e: discriminant(V0, e) - 2.0
    if fn(lo) <= 0:
        raise BandError("discriminant not above 2 below min V0")
    # D decreases on (-inf, top of band 1]; small steps keep band 1 inside a step
    width = 0.1
    a = lo
    while True:
        b = a + width
        if fn(b) <= 0:
            break
        a = b
        if a > lo + 1e6:
            raise BandError("ground edge not found")
    return find_root_bracketed(fn, a, b, tol=1e-13 * max(1.0, abs(b)))


@functools.lru_cache(maxsize=100_000)
def gap(V0: PeriodicPotential, n: int, e_ceiling: float = math.inf) -> tuple[float, float]:
    """Gap between bands n and n+1 as (upper edge of n, lower edge of n+1).

    A closed gap returns equal values (the touching point).
    """
    if n < 1:
        raise ValueError("gap index must be >= 1")
    s = -1.0 if n % 2 == 1 else 1.0  # D goes to -2 after odd bands
    e_star = (n * math.pi) ** 2 + V0.mean()
    if e_star > e_ceiling:
        raise BandError(f"gap {n} lies above the energy ceiling {e_ceiling:.6g}")
    w = 4.0 * V0.A + 1.0
    dfun = lambda e: discriminant_with_derivative(V0, e)[1]
    ext = None
    for _ in range(8):
        grid = np.linspace(e_star - w, e_star + w, 33)
        vals = np.array([dfun(e) for e in grid])
        # odd n: D' from - to + (minimum); even n: + to - (maximum)
        cand = []
        for i in range(grid.size - 1):
            a, b = vals[i], vals[i + 1]
            if s < 0 and a < 0 <= b or s > 0 and a > 0 >= b:
                cand.append(i)
        if cand:
            i = min(cand, key=lambda i: abs(0.5 * (grid[i] + grid[i + 1]) - e_star))
            ext = find_root_bracketed(dfun, grid[i], grid[i + 1],
                                      tol=1e-14 * max(1.0, abs(grid[i])))
            break
        w *= 2.0
    if ext is None:
        raise BandError(f"extremum of D near gap {n} not bracketed")
    d_ext = discriminant(V0, ext)
    if s * d_ext <= 2.0 + 1e-10:
        return ext, ext
    fn = lambda e: discriminant(V0, e) - 2.0 * s
    step = max(1e-6, w / 64.0)
    tol = 1e-14 * max(1.0, abs(ext))
    lo_br = _march(fn, ext, step, -1.0)
    hi_br = _march(fn, ext, step, +1.0)
    left = find_root_bracketed(fn, *lo_br, tol=tol)
    right = find_root_bracketed(fn, *hi_br, tol=tol)
    return left, right


def band(V0: PeriodicPotential, n: int, e_ceiling: float = math.inf) -> Band:
    lower = _ground_edge(V0) if n == 1 else gap(V0, n - 1, e_ceiling)[1]
    upper = gap(V0, n, e_ceiling)[0]
    return Band(n=n, lower=lower, upper=upper,
                direction="decreasing" if n % 2 == 1 else "increasing")


def band_structure(V0: PeriodicPotential, n_max: int,
                   e_ceiling: float = math.inf) -> list[Band]:
    """First ``n_max`` bands, edges refined to |D| = 2."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    return [band(V0, n, e_ceiling) for n in range(1, n_max + 1)]


# ---------------------------------------------------------------------------
# eigenvalues

@dataclass(frozen=True)
class QuasiEigenvalue:
    """Root of D(E) = 2 cos k inside band n."""

    k: float
    n: int
    E: float

    def to_dict(self) -> dict:
        return {"k": self.k, "n": self.n, "E": self.E}


def asymptotic_anchor(A: float, k: float, n: int) -> tuple[float, float]:
    """(a_n^k, delta_n(k))."""
    return bounds.anchor(k, n), bounds.delta_n(A, k, n)


def lk_thresholds(A: float, k: float) -> tuple[float, float]:
    """(L(k), delta(k))."""
    return bounds.big_l(A, k), bounds.big_delta(A, k)


@functools.lru_cache(maxsize=100_000)
def eigenvalue(V0: PeriodicPotential, k: float, n: int, k_min: float = K_MIN) -> QuasiEigenvalue:
    """Unique root of D(E) - 2cos k inside band n."""
    k = float(k)
    if not (k_min <= k <= math.pi - k_min):
        raise ValueError(f"k={k!r} outside [{k_min}, pi - {k_min}]")
    if n < 1:
        raise ValueError("band index must be >= 1")
    target = 2.0 * math.cos(k)
    fn = lambda e: discriminant(V0, e) - target
    a, dn = asymptotic_anchor(V0.A, k, n)
    E = None
    if n > bounds.eigen_threshold(V0.A, k):
        # asymptotic regime: the root sits within delta_n of the anchor
        w = 0.5 * min(k, math.pi - k)
        lo, hi = (a - w) ** 2, (a + w) ** 2
        try:
            E = find_root_bracketed(fn, lo, hi, tol=1e-15 * hi)
        except BracketError:
            E = None
    if E is None:
        b = band(V0, n)
        E = find_root_bracketed(fn, b.lower, b.upper, tol=1e-15 * max(1.0, abs(b.upper)))
    return QuasiEigenvalue(k=k, n=n, E=float(E))


def quasimomentum(V0: PeriodicPotential, E: float) -> float:
    """arccos(D(E)/2) for E inside a band."""
    d = discriminant(V0, E)
    return float(math.acos(max(-1.0, min(1.0, d / 2.0))))


# ---------------------------------------------------------------------------
# Floquet frames

def _frame_nodes(V0: PeriodicPotential, E: float, M: int | None) -> tuple[np.ndarray, bool]:
    if M is None:
        M = max(1024, int(math.ceil(16.0 * math.sqrt(abs(E)))))
    ib = V0.interior_breaks
    if not ib:
        return np.linspace(0.0, 1.0, M + 1), True
    br = (0.0, *ib, 1.0)
    parts = []
    for a, b in zip(br[:-1], br[1:]):
        m = max(4, int(math.ceil(M * (b - a))))
        parts.append(np.linspace(a, b, m + 1)[:-1])
    parts.append(np.array([1.0]))
    return np.concatenate(parts), False


@dataclass(frozen=True)
class FloquetFrame:
    """Floquet solution data at one quasi-eigenvalue.

    ``phi = C + b S`` with ``b = (e^{ik} - C(1))/S(1)``, normalised so that
    ``phi(0) = 1``. Node arrays cover one period [0, 1].

    Attributes:
        qe: The quasi-eigenvalue.
        S1: S(1, E).
        C1: C(1, E).
        omega: 2 sin k / S(1, E).
        eta1: Exact phase advance over one period (k + 2 pi m).
        eta_max, eta_min: max and min of |eta'| over a period.
        wronskian_dev: max |C S' - C' S - 1| on nodes.
        omega_dev: max |2 Im(conj(phi) phi') - omega| / |omega| at 32 points.
    """

    qe: QuasiEigenvalue
    S1: float
    C1: float
    omega: float
    eta1: float
    eta_max: float
    eta_min: float
    wronskian_dev: float
    omega_dev: float
    V0: PeriodicPotential = field(repr=False)
    nodes: np.ndarray = field(repr=False)
    uniform: bool = field(repr=False)
    C: np.ndarray = field(repr=False)
    Cp: np.ndarray = field(repr=False)
    S: np.ndarray = field(repr=False)
    Sp: np.ndarray = field(repr=False)
    P: np.ndarray = field(repr=False)
    dP: np.ndarray = field(repr=False)
    el: np.ndarray = field(repr=False)
    ep: np.ndarray = field(repr=False)

    @property
    def k(self) -> float:
        return self.qe.k

    @property
    def n(self) -> int:
        return self.qe.n

    @property
    def E(self) -> float:
        return self.qe.E

    @property
    def b(self) -> complex:
        return (complex(math.cos(self.k), math.sin(self.k)) - self.C1) / self.S1

    # interpolation helpers ---------------------------------------------------
    def _locate(self, f):
        m = self.nodes.size - 1
        if self.uniform:
            i = np.clip((f * m).astype(np.int64), 0, m - 1)
        else:
            i = np.clip(np.searchsorted(self.nodes, f, side="right") - 1, 0, m - 1)
        return i

    def _split(self, x):
        x = np.asarray(x, dtype=float)
        cell = np.floor(x)
        return cell, x - cell

    def phi_sq(self, x):
        """|phi(x)|^2 (1-periodic)."""
        _, f = self._split(x)
        i = self._locate(f)
        return _hermite(self.nodes[i], self.nodes[i + 1], self.P[i], self.P[i + 1],
                        self.dP[i], self.dP[i + 1], f)

    def eta_prime(self, x):
        return self.omega / (2.0 * self.phi_sq(x))

    def _fundamental(self, f):
        i = self._locate(f)
        a, b = self.nodes[i], self.nodes[i + 1]
        mid = 0.5 * (a + b)
        qa = self.V0.evaluate(a, side_ref=mid) - self.E
        qb = self.V0.evaluate(b, side_ref=mid) - self.E
        C = _hermite(a, b, self.C[i], self.C[i + 1], self.Cp[i], self.Cp[i + 1], f)
        S = _hermite(a, b, self.S[i], self.S[i + 1], self.Sp[i], self.Sp[i + 1], f)
        Cp = _hermite(a, b, self.Cp[i], self.Cp[i + 1], qa * self.C[i], qb * self.C[i + 1], f)
        Sp = _hermite(a, b, self.Sp[i], self.Sp[i + 1], qa * self.S[i], qb * self.S[i + 1], f)
        return C, Cp, S, Sp

    def phi(self, x):
        """Complex Floquet solution and derivative at ``x``."""
        cell, f = self._split(x)
        C, Cp, S, Sp = self._fundamental(f)
        b = self.b
        mult = np.exp(1j * self.k * cell)
        return mult * (C + b * S), mult * (Cp + b * Sp)

    def eta_second(self, x):
        """eta'' = -omega (|phi|^2)' / (2 |phi|^4), from C, C', S, S'."""
        _, f = self._split(x)
        C, Cp, S, Sp = self._fundamental(f)
        b = self.b
        re, im = C + b.real * S, b.imag * S
        rep, imp = Cp + b.real * Sp, b.imag * Sp
        P = re * re + im * im
        dP = 2.0 * (re * rep + im * imp)
        return -self.omega * dP / (2.0 * P * P)

    def eta_local(self, f):
        """Phase accumulated over [0, f] for f in [0, 1], drift-corrected."""
        f = np.asarray(f, dtype=float)
        i = self._locate(f)
        return _hermite(self.nodes[i], self.nodes[i + 1], self.el[i], self.el[i + 1],
                        self.ep[i], self.ep[i + 1], f)

    def eta(self, x):
        """Unreduced Floquet phase eta(x) with eta(0) = 0."""
        cell, f = self._split(x)
        return cell * self.eta1 + self.eta_local(f)

    def two_eta_mod(self, x):
        """2 eta(x) reduced mod 2 pi, accurate for large x."""
        cell, f = self._split(x)
        return np.fmod(2.0 * cell * self.k, TWO_PI) + 2.0 * self.eta_local(f)

    def eta_prime_l2_inv(self) -> float:
        """|| 1/eta' ||_2 over one period."""
        w = np.diff(self.nodes)
        g = (2.0 * self.P / self.omega) ** 2
        return float(math.sqrt(np.sum(0.5 * w * (g[:-1] + g[1:]))))

    def harmonic_mean_eta(self) -> float:
        """1 / <1/|eta'|> over one period."""
        w = np.diff(self.nodes)
        g = 2.0 * self.P / abs(self.omega)
        return float(1.0 / np.sum(0.5 * w * (g[:-1] + g[1:])))


def floquet_frame(V0: PeriodicPotential, qe: QuasiEigenvalue, M: int | None = None) -> FloquetFrame:
    """Assemble the normalised Floquet frame at ``qe``."""
    return _frame_cached(V0, qe, M)


@functools.lru_cache(maxsize=64)
def _frame_cached(V0, qe, M):
    k, n, E = qe.k, qe.n, qe.E
    nodes, uniform = _frame_nodes(V0, E, M)
    st = hill_solve(V0, E, nodes[1:])
    st = np.vstack([[1.0, 0.0, 0.0, 1.0], st])
    C, Cp, S, Sp = st.T
    C1, S1 = C[-1], S[-1]
    if abs(S1) < 1e-12:
        raise FrameError(f"|S(1,E)| = {abs(S1):.3g} too small at E={E!r}: too close to a band edge")
    b = (complex(math.cos(k), math.sin(k)) - C1) / S1
    re, im = C + b.real * S, b.imag * S
    rep, imp = Cp + b.real * Sp, b.imag * Sp
    P = re * re + im * im
    dP = 2.0 * (re * rep + im * imp)
    P[0] = 1.0
    omega = 2.0 * math.sin(k) / S1
    if not (-1) ** (n + 1) * omega > 0:
        raise FrameError(f"sign rule violated at (k={k}, n={n}, E={E}): wrong band index")
    if np.any(P <= 0):
        raise FrameError("|phi|^2 vanished")
    etap = omega / (2.0 * P)
    etapp = -omega * dP / (2.0 * P * P)
    h = np.diff(nodes)
    seg = 0.5 * h * (etap[:-1] + etap[1:]) + h * h * (etapp[:-1] - etapp[1:]) / 12.0
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    eta1_raw = cum[-1]
    m = round((eta1_raw - k) / TWO_PI)
    eta1 = k + TWO_PI * m
    if abs(eta1 - eta1_raw) > 1e-6 * max(1.0, abs(eta1)):
        raise FrameError(f"phase advance {eta1_raw!r} does not match k mod 2pi")
    corr = eta1 - eta1_raw
    el = cum + corr * nodes
    ep = etap + corr
    wdev = float(np.max(np.abs(C * Sp - Cp * S - 1.0)))
    idx = np.linspace(0, nodes.size - 1, 32).astype(int)
    w_im = 2.0 * (re[idx] * imp[idx] - im[idx] * rep[idx])
    odev = float(np.max(np.abs(w_im - omega)) / abs(omega))

    frame = FloquetFrame(
        qe=qe, S1=float(S1), C1=float(C1), omega=float(omega), eta1=float(eta1),
        eta_max=0.0, eta_min=0.0, wronskian_dev=wdev, omega_dev=odev, V0=V0,
        nodes=nodes, uniform=uniform, C=C, Cp=Cp, S=S, Sp=Sp, P=P, dP=dP, el=el, ep=ep,
    )
    pmin, pmax = _refine_extrema(frame)
    object.__setattr__(frame, "eta_max", abs(omega) / (2.0 * pmin))
    object.__setattr__(frame, "eta_min", abs(omega) / (2.0 * pmax))
    return frame


def _refine_extrema(frame: FloquetFrame) -> tuple[float, float]:
    nodes, P = frame.nodes, frame.P
    out = []
    for sign in (1.0, -1.0):
        i = int(np.argmin(sign * P))
        lo, hi = nodes[max(i - 1, 0)], nodes[min(i + 1, nodes.size - 1)]
        best = P[i]
        if hi > lo:
            res = optimize.minimize_scalar(lambda t: sign * float(frame.phi_sq(t)),
                                           bounds=(lo, hi), method="bounded",
                                           options={"xatol": 1e-12})
            cand = float(frame.phi_sq(res.x))
            best = min(best, cand) if sign > 0 else max(best, cand)
        out.append(best)
    return out[0], out[1]


def frame_pack(frames: Sequence[FloquetFrame]) -> tuple:
    """Concatenate frames into the tuple layout used by the kernels."""
    if not frames:
        z = np.zeros(0)
        return (z, z, z, z, z, np.zeros(1, np.int64), np.zeros(0, np.bool_), z, z)
    offs = np.concatenate([[0], np.cumsum([f.nodes.size for f in frames])]).astype(np.int64)
    cat = lambda attr: np.ascontiguousarray(np.concatenate([getattr(f, attr) for f in frames]))
    return (
        cat("nodes"), cat("P"), cat("dP"), cat("el"), cat("ep"), offs,
        np.array([f.uniform for f in frames], dtype=np.bool_),
        np.array([f.omega for f in frames]), np.array([f.k for f in frames]),
    )


# ---------------------------------------------------------------------------
# audits

@dataclass(frozen=True)
class AuditItem:
    """One inequality ``lhs <= rhs`` (numerical slack ``tol``)."""

    label: str
    lhs: float
    rhs: float
    applicable: bool
    tol: float = 1e-9

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return (not self.applicable) or self.lhs <= self.rhs + self.tol

    def to_dict(self) -> dict:
        return {"label": self.label, "lhs": self.lhs, "rhs": self.rhs, "margin": self.margin,
                "applicable": self.applicable, "passed": self.passed}


@dataclass(frozen=True)
class AuditReport:
    """Collection of inequality checks; passes iff every applicable item holds."""

    name: str
    items: tuple
    notes: tuple = ()

    @property
    def passed(self) -> bool:
        return all(it.passed for it in self.items)

    @property
    def applicable(self) -> bool:
        return any(it.applicable for it in self.items)

    def __getitem__(self, label: str) -> AuditItem:
        for it in self.items:
            if it.label == label:
                return it
        raise KeyError(label)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed,
                "items": [it.to_dict() for it in self.items], "notes": list(self.notes)}


def audit_asymptotic_bounds(V0: PeriodicPotential, qe: QuasiEigenvalue, grid=None,
                            tol: float = 1e-9) -> AuditReport:
    """Check the fundamental-solution asymptotics and endpoint bounds at ``qe``."""
    grid = np.linspace(0.0, 1.0, 65) if grid is None else np.asarray(grid, dtype=float)
    A, k, n, E = V0.A, qe.k, qe.n, qe.E
    pts = np.union1d(grid[grid > 0], [1.0])
    st = hill_solve(V0, E, pts)
    st = np.vstack([[1.0, 0.0, 0.0, 1.0], st]) if grid.min() <= 0 else st
    xs = np.concatenate([[0.0], pts]) if grid.min() <= 0 else pts
    C, Cp, S, Sp = st.T
    items = []
    notes = []
    rho = math.sqrt(E) if E > 0 else 0.0
    ok21 = E > 0 and rho > max(1.0, 2.0 * A)
    if not ok21:
        notes.append("fundamental asymptotics: |rho| <= max(1, 2A), not applicable")
    rx = rho * xs
    items += [
        AuditItem("C-cos", float(np.max(np.abs(C - np.cos(rx)))), 2 * A / rho if rho else 0.0, ok21, tol),
        AuditItem("C'+rho sin", float(np.max(np.abs(Cp + rho * np.sin(rx)))), 2 * A, ok21, tol),
        AuditItem("S-sin/rho", float(np.max(np.abs(S - np.sin(rx) / rho))) if rho else 0.0,
                  2 * A / rho**2 if rho else 0.0, ok21, tol),
        AuditItem("S'-cos", float(np.max(np.abs(Sp - np.cos(rx)))), 2 * A / rho if rho else 0.0, ok21, tol),
    ]
    a, dn = asymptotic_anchor(A, k, n)
    ok22 = n > bounds.eigen_threshold(A, k)
    if not ok22:
        notes.append("eigenvalue asymptotics: n below threshold, endpoint bounds not applicable")
    sq = math.sqrt(E) if E > 0 else 0.0
    C1, S1 = C[-1], S[-1]
    sgn = (-1) ** (n + 1)
    items += [
        AuditItem("|sqrtE-a|", abs(sq - a), dn, ok22, tol),
        AuditItem("|C(x)|", float(np.max(np.abs(C))), 1 + dn, ok22, tol),
        AuditItem("|sqrtE S(x)|", float(np.max(np.abs(sq * S))), 1 + dn, ok22, tol),
        AuditItem("C^2-cos^2", float(np.max(np.abs(C**2 - np.cos(sq * xs) ** 2))), dn, ok22, tol),
        AuditItem("E S^2-sin^2", float(np.max(np.abs(E * S**2 - np.sin(sq * xs) ** 2))), dn, ok22, tol),
        AuditItem("C(1)-cos k", abs(C1 - math.cos(k)), 2 * dn, ok22, tol),
        AuditItem("C(1)^2-cos^2 k", abs(C1**2 - math.cos(k) ** 2), 2 * dn, ok22, tol),
        AuditItem("sqrtE S(1)-sgn sin k", abs(sq * S1 - sgn * math.sin(k)), 2 * dn, ok22, tol),
        AuditItem("E S(1)^2-sin^2 k", abs(E * S1**2 - math.sin(k) ** 2), 2 * dn, ok22, tol),
    ]
    return AuditReport("asymptotic_bounds", tuple(items), tuple(notes))


def audit_eta_bounds(frame: FloquetFrame, A: float | None = None, grid=None,
                     tol: float = 1e-9) -> AuditReport:
    """Check the two-sided eta' bound and the eta'' bound on ``grid``."""
    A = frame.V0.A if A is None else A
    grid = np.linspace(0.0, 1.0, 1024, endpoint=False) if grid is None else np.asarray(grid)
    k, n = frame.k, frame.n
    L, dk = lk_thresholds(A, k)
    ok = n > L
    sep = (-1) ** (n + 1) * frame.eta_prime(grid)
    epp = np.abs(frame.eta_second(grid))
    centre, radius = (n - 0.5) * math.pi, 0.5 * math.pi + dk
    items = (
        AuditItem("eta' lower", float(np.max((n - 1) * math.pi - dk - sep)), 0.0, ok, tol),
        AuditItem("eta' upper", float(np.max(sep - n * math.pi - dk)), 0.0, ok, tol),
        AuditItem("|eta'-centre|", float(np.max(np.abs(sep - centre))), radius, ok, tol),
        AuditItem("|eta''|", float(np.max(epp)), n * math.pi * dk, ok, tol),
    )
    notes = () if ok else (f"n={n} <= L(k)={L:.6g}: not applicable",)
    return AuditReport("eta_bounds", items, notes)


def measured_delta(frame: FloquetFrame, grid=None) -> float:
    """Smallest delta for which the eta' and eta'' bounds hold on ``grid``."""
    grid = np.linspace(0.0, 1.0, 1024, endpoint=False) if grid is None else np.asarray(grid)
    n = frame.n
    sep = (-1) ** (n + 1) * frame.eta_prime(grid)
    d33 = max(0.0, float(np.max((n - 1) * math.pi - sep)), float(np.max(sep - n * math.pi)))
    d34 = float(np.max(np.abs(frame.eta_second(grid)))) / (n * math.pi)
    return max(d33, d34)
