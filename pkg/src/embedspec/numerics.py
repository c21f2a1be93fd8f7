"""Generic numerical primitives shared by the rest of the package.

Thin, contract-checking wrappers around scipy: adaptive DOP853 integration
with dense output and breakpoint restarts, bracketed Brent refinement,
adaptive quadrature, least-squares line fits, and a composite Gauss-Legendre
accumulator for long oscillatory integrals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize


class NumericsError(RuntimeError):
    """Base class for numerical failures."""


class IntegrationError(NumericsError):
    """Raised when an initial-value integration cannot proceed.

    Attributes:
        position: x at which the integrator stopped.
    """

    def __init__(self, message: str, position: float):
        super().__init__(f"{message} (at x={position:.17g})")
        self.position = float(position)


class BracketError(NumericsError):
    """Raised when a root bracket shows no sign change."""


class QuadratureError(NumericsError):
    """Raised when adaptive quadrature exhausts its subdivision budget."""


class FitError(NumericsError):
    """Raised for degenerate least-squares input."""


@dataclass(frozen=True)
class DenseTrajectory:
    """Piecewise dense solution of an initial-value problem.

    Attributes:
        knots: Accepted step positions, strictly increasing.
        states: State vector at each knot, shape (len(knots), dimension).
        pieces: Per-segment scipy dense interpolants, one per restart interval.
        piece_bounds: Segment boundaries, ``len(pieces) + 1`` values.
    """

    knots: np.ndarray
    states: np.ndarray
    pieces: tuple = field(repr=False)
    piece_bounds: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.states.shape[1]

    def __call__(self, x):
        """Evaluate the state at ``x`` (scalar or array).

        Returns an array of shape (dimension,) for scalar input and
        (len(x), dimension) otherwise. Knot positions return stored states
        exactly.
        """
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        lo, hi = self.knots[0], self.knots[-1]
        if np.any(xs < lo) or np.any(xs > hi):
            raise ValueError(f"evaluation outside [{lo}, {hi}]")
        out = np.empty((xs.size, self.dimension))
        seg = np.searchsorted(self.piece_bounds, xs, side="right") - 1
        seg = np.clip(seg, 0, len(self.pieces) - 1)
        for s in np.unique(seg):
            sel = seg == s
            out[sel] = self.pieces[s](xs[sel]).T
        idx = np.searchsorted(self.knots, xs)
        idx = np.minimum(idx, self.knots.size - 1)
        exact = self.knots[idx] == xs
        out[exact] = self.states[idx[exact]]
        return out[0] if np.ndim(x) == 0 else out


def integrate_ivp(
    field_fn: Callable[[float, np.ndarray], np.ndarray],
    x0: float,
    x1: float,
    state0: Sequence[float],
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-12,
    breakpoints: Sequence[float] = (),
    max_step: float = np.inf,
) -> DenseTrajectory:
    """Integrate ``y' = field_fn(x, y)`` on [x0, x1] with DOP853.

    The integration restarts at every breakpoint inside (x0, x1) so that
    jump discontinuities of the field are never stepped across.

    Raises:
        IntegrationError: On step-size underflow or a non-finite derivative.
    """
    if not x1 > x0:
        raise ValueError("x1 must exceed x0")
    if not (0 < rel_tol < 1 and 0 < abs_tol < 1):
        raise ValueError("tolerances must lie in (0, 1)")
    y = np.asarray(state0, dtype=float).copy()
    bps = sorted(b for b in set(float(b) for b in breakpoints) if x0 < b < x1)
    bounds = [float(x0), *bps, float(x1)]

    def segment_field(a, b):
        # ends are nudged inside so a jump at a breakpoint is seen one-sided
        lo, hi = np.nextafter(a, b), np.nextafter(b, a)

        def checked(x, yy):
            dy = np.asarray(field_fn(min(max(x, lo), hi), yy), dtype=float)
            if not np.all(np.isfinite(dy)):
                raise IntegrationError("non-finite derivative", x)
            return dy

        return checked

    knots, states, pieces = [np.array([x0])], [y[None, :]], []
    for a, b in zip(bounds[:-1], bounds[1:]):
        sol = integrate.solve_ivp(
            segment_field(a, b), (a, b), y, method="DOP853", rtol=rel_tol, atol=abs_tol,
            dense_output=True, max_step=max_step,
        )
        if sol.status != 0:
            raise IntegrationError(sol.message, sol.t[-1])
        knots.append(sol.t[1:])
        states.append(sol.y[:, 1:].T)
        pieces.append(sol.sol)
        y = sol.y[:, -1].copy()
    return DenseTrajectory(
        knots=np.concatenate(knots),
        states=np.vstack(states),
        pieces=tuple(pieces),
        piece_bounds=np.asarray(bounds),
    )


def find_root_bracketed(
    f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12
) -> float:
    """Brent root refinement inside a sign-changing bracket.

    Raises:
        BracketError: If ``f(lo)`` and ``f(hi)`` share a strict sign.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if flo * fhi > 0:
        raise BracketError(
            f"no sign change on [{lo:.17g}, {hi:.17g}]: f={flo:.6g}, {fhi:.6g}"
        )
    root = optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps,
                           maxiter=500)
    return float(min(max(root, min(lo, hi)), max(lo, hi)))


def integrate_function(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
    breakpoints: Sequence[float] = (),
    limit: int = 500,
) -> float:
    """Adaptive Gauss-Kronrod quadrature with declared breakpoints.

    Raises:
        QuadratureError: If the error estimate exceeds ``tol * (1 + |result|)``.
    """
    if a == b:
        return 0.0
    pts = [p for p in breakpoints if min(a, b) < p < max(a, b)] or None
    res, err, info = integrate.quad(
        f, a, b, points=pts, epsabs=tol, epsrel=tol, limit=limit, full_output=1
    )[:3]
    if err > tol * (1 + abs(res)):
        raise QuadratureError(
            f"subdivision limit reached on [{a}, {b}]: estimate {err:.3g}"
        )
    return float(res)


def fit_line(points) -> tuple[float, float, float]:
    """Least-squares line through ``(u, v)`` pairs.

    Returns:
        ``(slope, intercept, rms_residual)``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise FitError("need at least two (u, v) pairs")
    u, v = pts[:, 0], pts[:, 1]
    if np.ptp(u) == 0:
        raise FitError("degenerate abscissae")
    design = np.column_stack([u, np.ones_like(u)])
    (slope, intercept), *_ = np.linalg.lstsq(design, v, rcond=None)
    resid = v - (slope * u + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid**2)))


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(order: int):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def cumulative_panels(
    f: Callable[[np.ndarray], np.ndarray],
    x0: float,
    xs: Sequence[float],
    panel_width: float,
    order: int = 10,
    breakpoints: Sequence[float] = (),
    chunk: int = 200_000,
) -> np.ndarray:
    """Return ``[∫_{x0}^{x} f for x in xs]`` by composite Gauss-Legendre.

    Panels never straddle a requested x or a breakpoint, and have width at
    most ``panel_width``. ``f`` must accept and return numpy arrays.
    """
    xs = np.asarray(xs, dtype=float)
    order_idx = np.argsort(xs)
    targets = xs[order_idx]
    if targets.size and targets[0] < x0:
        raise ValueError("all xs must be >= x0")
    marks = np.unique(np.concatenate([
        [x0], targets,
        [b for b in breakpoints if x0 < b < (targets[-1] if targets.size else x0)],
    ]))
    nodes, weights = _gauss_legendre(order)
    gaps = np.diff(marks)
    counts = np.maximum(1, np.ceil(gaps / panel_width).astype(np.int64))
    owner = np.repeat(np.arange(gaps.size), counts)
    first = np.concatenate([[0], np.cumsum(counts)[:-1]])
    h = np.repeat(gaps / counts, counts)
    a = marks[owner] + h * (np.arange(owner.size) - first[owner])
    gap_sums = np.zeros(gaps.size)
    for s in range(0, owner.size, chunk):
        sl = slice(s, s + chunk)
        pts = a[sl, None] + 0.5 * h[sl, None] * (nodes[None, :] + 1.0)
        vals = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
        gap_sums += np.bincount(owner[sl], weights=0.5 * h[sl] * (vals @ weights),
                                minlength=gaps.size)
    cum_at_marks = np.concatenate([[0.0], np.cumsum(gap_sums)])
    result = np.interp(targets, marks, cum_at_marks)
    out = np.empty_like(result)
    out[order_idx] = result
    return out
