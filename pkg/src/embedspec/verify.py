"""Independent verification of synthesised potentials and of the estimates.

Probe energies are traced through the Prüfer system under a given V (sampled,
rebuilt from stored phases, or closed form); decay verdicts come from a
power-law fit of ln R. The oscillatory-integral and resonance estimates are
audited by direct quadrature on admissible instances.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline, PPoly

from . import _kernels, bounds
from .floquet import (
    FloquetFrame,
    PeriodicPotential,
    QuasiEigenvalue,
    eigenvalue,
    floquet_frame,
    frame_pack,
)
from .numerics import IntegrationError, cumulative_panels, find_root_bracketed, fit_line, integrate_function
from .synth import TRAJECTORY_SCHEMA, PruferTrace, PruferTrajectory, output_grid
from .targets import K_TOL

L4_1, L4_2, L4_3, L5_1, L5_2, L5_3 = "L4_1", "L4_2", "L4_3", "L5_1", "L5_2", "L5_3"


class VerifyError(ValueError):
    """Bad verification input."""


class PotentialFileError(VerifyError):
    """A potential file could not be parsed.

    Attributes:
        row: 1-based line number of the offending row, when known.
    """

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(f"line {row}: {message}" if row is not None else message)


class InsufficientTail(VerifyError):
    """The trace does not extend a decade past the last activation."""


class PreconditionError(VerifyError):
    """An audit was requested on inputs outside the estimate's setting."""


# ---------------------------------------------------------------------------
# perturbations

class ZeroPotential:
    """V = 0."""

    def __call__(self, x):
        return np.zeros(np.shape(x))

    def marks(self, x0: float, x1: float) -> np.ndarray:
        return np.zeros(0)


@dataclass(frozen=True)
class SampledPotential:
    """Interpolant of samples, constant beyond the ends.

    A jump at sample ``x_i`` (the sample holding the right limit) is kept
    sharp: the interval ending at ``x_i`` holds the previous value. Jumps are
    the given ``jumps`` plus every step from an exact zero to a nonzero value.

    Attributes:
        xs, vs: Sample positions and values.
        interp: ``"linear"`` or ``"cubic"`` (not-a-knot spline between jumps).
        jumps: Known jump positions (must coincide with samples).
    """

    xs: np.ndarray
    vs: np.ndarray
    interp: str = "linear"
    jumps: tuple = ()
    coef: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        xs, vs = self.xs, self.vs
        if xs.size < 2 or np.any(np.diff(xs) <= 0):
            raise VerifyError("sample positions must increase strictly")
        if xs.size != vs.size:
            raise VerifyError("positions and values differ in length")
        if self.interp not in ("linear", "cubic"):
            raise VerifyError("interp must be 'linear' or 'cubic'")
        at = set(int(i) + 1 for i in np.nonzero((vs[:-1] == 0.0) & (vs[1:] != 0.0))[0])
        for xj in self.jumps:
            i = int(np.searchsorted(xs, xj))
            if i < xs.size and xs[i] == xj and i > 0:
                at.add(i)
        c = np.zeros((4, xs.size - 1))
        c[3] = vs[:-1]
        start = 0
        for end in sorted(at) + [xs.size]:
            # smooth piece on samples start..end-1; interval end-1 -> end is held
            seg = slice(start, end)
            m = end - start
            if m >= 4 and self.interp == "cubic":
                c[:, start:end - 1] = CubicSpline(xs[seg], vs[seg]).c
            elif m >= 2:
                c[2, start:end - 1] = np.diff(vs[seg]) / np.diff(xs[seg])
            start = end
        object.__setattr__(self, "coef", np.ascontiguousarray(c))
        object.__setattr__(self, "jumps", tuple(float(xs[i]) for i in sorted(at)))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        v = PPoly(self.coef, self.xs)(np.clip(x, self.xs[0], self.xs[-1]))
        return np.where(x <= self.xs[0], self.vs[0], np.where(x >= self.xs[-1], self.vs[-1], v))

    def marks(self, x0: float, x1: float) -> np.ndarray:
        return self.xs[(self.xs > x0) & (self.xs < x1)]

    def table(self) -> tuple:
        return (np.ascontiguousarray(self.xs, dtype=float), np.ascontiguousarray(self.vs, dtype=float),
                self.coef)

    def kernel_args(self, pack) -> tuple:
        return (_kernels.TABLE, pack, *self.table())


@dataclass(frozen=True)
class PhasePotential:
    """V rebuilt from stored source phases: sum s_l C_l sin 2theta_l chi / (1+x).

    The stored offsets psi_l = theta_l - eta_l are interpolated by cubic
    Hermite, with slopes taken from the phase equation at the grid points.
    """

    frames: tuple
    grid: np.ndarray
    psi: np.ndarray
    C: np.ndarray
    sign: np.ndarray
    T: np.ndarray
    slopes: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "slopes", self._slopes())

    def _slopes(self):
        g = self.grid
        s2 = np.empty_like(self.psi)
        c2 = np.empty_like(self.psi)
        ep = np.empty_like(self.psi)
        for l, f in enumerate(self.frames):
            ph = f.two_eta_mod(g) + 2.0 * self.psi[l]
            s2[l], c2[l], ep[l] = np.sin(ph), np.cos(ph), f.eta_prime(g)
        amp = self.sign[:, None] * self.C[:, None] * s2
        right = (amp * (g[None, :] >= self.T[:, None])).sum(axis=0) / (1.0 + g)
        left = (amp * (g[None, :] > self.T[:, None])).sum(axis=0) / (1.0 + g)
        dpl = -right[None, :] * (1.0 - c2) / (2.0 * ep)
        dpr = -left[None, :] * (1.0 - c2) / (2.0 * ep)
        return np.ascontiguousarray(dpl), np.ascontiguousarray(dpr)

    def psi_at(self, x):
        """Hermite-interpolated offsets, shape (L, len(x)); x inside the grid."""
        x = np.asarray(x, dtype=float)
        g = self.grid
        i = np.clip(np.searchsorted(g, x, side="right") - 1, 0, g.size - 2)
        a, h = g[i], g[i + 1] - g[i]
        t = (x - a) / h
        t1 = 1.0 - t
        dpl, dpr = self.slopes
        return ((1 + 2 * t) * t1 * t1 * self.psi[:, i] + t * t1 * t1 * h * dpl[:, i]
                + t * t * (3 - 2 * t) * self.psi[:, i + 1] - t * t * t1 * h * dpr[:, i + 1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        ps = self.psi_at(x)
        V = np.zeros(x.shape)
        for l, f in enumerate(self.frames):
            V = V + np.where(x >= self.T[l],
                             self.sign[l] * self.C[l] * np.sin(f.two_eta_mod(x) + 2.0 * ps[l]), 0.0)
        return V / (1.0 + x)

    def marks(self, x0: float, x1: float) -> np.ndarray:
        m = np.union1d(self.grid, self.T)
        return m[(m > x0) & (m < x1)]

    def kernel_args(self, pack) -> tuple:
        dpl, dpr = self.slopes
        return (_kernels.RECON, pack, frame_pack(self.frames), self.grid, np.ascontiguousarray(self.psi),
                dpl, dpr, self.C.astype(float), self.sign.astype(float), self.T.astype(float))

    @classmethod
    def from_trajectory(cls, traj: PruferTrajectory) -> "PhasePotential":
        return cls(frames=traj.frames, grid=traj.grid, psi=traj.psi, C=traj.C, sign=traj.sign, T=traj.T)


@dataclass(frozen=True)
class SinusoidPotential:
    """V = sum a_i sin(nu_i x + phi_i) / (1+x)^p_i for x >= x_on."""

    amps: tuple
    freqs: tuple
    phases: tuple
    powers: tuple
    x_on: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        V = np.zeros(x.shape)
        for a, nu, ph, p in zip(self.amps, self.freqs, self.phases, self.powers):
            V = V + a * np.sin(nu * x + ph) / (1.0 + x) ** p
        return np.where(x >= self.x_on, V, 0.0)

    def marks(self, x0: float, x1: float) -> np.ndarray:
        return np.array([self.x_on]) if x0 < self.x_on < x1 else np.zeros(0)

    def kernel_args(self, pack) -> tuple:
        arr = lambda v: np.array(v, dtype=float)
        return (_kernels.SINES, pack, arr(self.amps), arr(self.freqs), arr(self.phases),
                arr(self.powers), float(self.x_on))


def load_csv(path, interp: str = "cubic") -> SampledPotential:
    """Read an ``x,V`` csv; errors name the offending line."""
    xs, vs = [], []
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise PotentialFileError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "V"]:
            raise PotentialFileError("expected header 'x,V'", 1)
        for row in reader:
            line = reader.line_num
            if len(row) != 2:
                raise PotentialFileError(f"expected 2 fields, got {len(row)}", line)
            try:
                x, v = float(row[0]), float(row[1])
            except ValueError:
                raise PotentialFileError(f"non-numeric field in {row!r}", line) from None
            if not (math.isfinite(x) and math.isfinite(v)):
                raise PotentialFileError("non-finite value", line)
            if xs and x <= xs[-1]:
                raise PotentialFileError("x not strictly increasing", line)
            xs.append(x)
            vs.append(v)
    if len(xs) < 2:
        raise PotentialFileError("need at least two samples")
    return SampledPotential(np.array(xs), np.array(vs), interp)


@dataclass(frozen=True)
class StructuredRecord:
    """Re-ingested structured export."""

    V0: PeriodicPotential
    targets: tuple
    potential: PhasePotential
    sampled: SampledPotential
    lnR: np.ndarray
    raw: dict = field(repr=False)


def load_structured(path) -> StructuredRecord:
    """Rebuild the frames and the phase-driven potential from a JSON export."""
    try:
        with open(path, encoding="utf-8") as fh:
            rec = json.load(fh)
    except json.JSONDecodeError as exc:
        raise PotentialFileError(f"invalid JSON: {exc.msg}", exc.lineno) from exc
    except OSError as exc:
        raise PotentialFileError(f"cannot open {path}: {exc}") from exc
    if rec.get("schema") != TRAJECTORY_SCHEMA:
        raise PotentialFileError(f"unexpected schema {rec.get('schema')!r}")
    try:
        V0 = PeriodicPotential.from_dict(rec["potential"])
        targets = tuple(rec["targets"])
        frames = tuple(floquet_frame(V0, eigenvalue(V0, t["k"], int(t["n"]))) for t in targets)
        s = rec["samples"]
        grid = np.array(s["x"], dtype=float)
        pot = PhasePotential(
            frames=frames, grid=grid, psi=np.array(s["psi"], dtype=float).reshape(len(targets), -1),
            C=np.array([t["C"] for t in targets]), sign=np.array([t["sign"] for t in targets]),
            T=np.array([t["T"] for t in targets]),
        )
        sampled = SampledPotential(grid, np.array(s["V"], dtype=float),
                                   jumps=tuple(float(t["T"]) for t in targets))
        lnR = np.array(s["lnR"], dtype=float).reshape(len(targets), -1)
    except (KeyError, TypeError, ValueError) as exc:
        raise PotentialFileError(f"malformed record: {exc}") from exc
    return StructuredRecord(V0=V0, targets=targets, potential=pot, sampled=sampled, lnR=lnR, raw=rec)


def load_potential(path):
    """csv -> :class:`SampledPotential`; JSON -> :class:`StructuredRecord`."""
    with open(path, encoding="utf-8", errors="replace") as fh:
        head = fh.read(1).lstrip()
    return load_structured(path) if head == "{" else load_csv(path)


# ---------------------------------------------------------------------------
# traces

def prufer_trace_many(V, frames: Sequence[FloquetFrame], theta0: Sequence[float], x_max: float,
                      x0: float = 0.0, lnR0: Sequence[float] | None = None,
                      grid_step: float = 0.05, rtol: float = 1e-8, atol: float = 1e-10,
                      max_steps: int = 2_000_000_000) -> list[PruferTrace]:
    """Trace several energies under the same V in one integration.

    When ``x0 > 0`` the starting angle is used modulo pi, which leaves every
    quantity depending on 2 theta unchanged.
    """
    if not x_max > x0:
        raise VerifyError("x_max must exceed x0")
    K = len(frames)
    if len(theta0) != K:
        raise VerifyError("one initial angle per frame")
    lnR0 = np.zeros(K) if lnR0 is None else np.asarray(lnR0, dtype=float)
    V = ZeroPotential() if V is None else V
    grid = output_grid(x_max, grid_step, x0=x0)
    psi0 = np.array([th - (0.0 if x0 == 0 else 0.5 * float(f.two_eta_mod(x0)))
                     for th, f in zip(theta0, frames)])
    if isinstance(V, ZeroPotential):
        return [PruferTrace(x=grid, psi=np.full(grid.size, psi0[j]), lnR=np.full(grid.size, lnR0[j]),
                            frame=frames[j]) for j in range(K)]
    stops = np.union1d(grid, V.marks(x0, x_max))
    idx = np.searchsorted(stops, grid)
    y0 = np.concatenate([psi0, lnR0])
    pack = frame_pack(frames)
    fastest = max(f.eta_max for f in frames)
    status, xr, out, _ = _kernels.solve(V.kernel_args(pack), float(x0), y0, stops, rtol, atol,
                                        0.1 / fastest, np.inf, max_steps)
    if status != _kernels.OK:
        raise IntegrationError(f"Prüfer trace failed (status {status})", xr)
    out = out[idx]
    return [PruferTrace(x=grid, psi=out[:, j].copy(), lnR=out[:, K + j].copy(), frame=frames[j])
            for j in range(K)]


def prufer_trace(V0: PeriodicPotential, V, frame: FloquetFrame, theta0: float, x_max: float,
                 **kw) -> PruferTrace:
    """Trace one energy; see :func:`prufer_trace_many`."""
    if frame.V0 != V0:
        raise VerifyError("frame was built for a different background")
    return prufer_trace_many(V, [frame], [theta0], x_max, **kw)[0]


@dataclass(frozen=True)
class DirectSolution:
    """u and u' from the second-order equation."""

    x: np.ndarray
    u: np.ndarray
    up: np.ndarray
    E: float

    @property
    def log_norm(self) -> np.ndarray:
        """ln sqrt(u^2 + u'^2 / E)."""
        return 0.5 * np.log(self.u**2 + self.up**2 / abs(self.E))


def direct_solve(V0: PeriodicPotential, V: SampledPotential, E: float, xi: float, x_max: float,
                 grid_step: float = 0.05, rtol: float = 1e-10, atol: float = 1e-12) -> DirectSolution:
    """Integrate -u'' + (V0 + V) u = E u with u(0) = cos xi, u'(0) = sin xi."""
    grid = output_grid(x_max, grid_step)
    stops = np.union1d(grid, V.marks(0.0, x_max))
    ib = V0.interior_breaks
    if ib:
        cells = np.arange(0, math.ceil(x_max) + 1)
        extra = (cells[:, None] + np.asarray(ib)[None, :]).ravel()
        stops = np.union1d(stops, extra[(extra > 0) & (extra < x_max)])
    idx = np.searchsorted(stops, grid)
    args = V0.kernel_args(E)[1:]
    args = (_kernels.DIRECT, *args, *V.table())
    y0 = np.array([math.cos(xi), math.sin(xi)])
    status, xr, out, _ = _kernels.solve(args, 0.0, y0, stops, rtol, atol,
                                        0.05 / max(1.0, math.sqrt(abs(E))), np.inf, 2_000_000_000)
    if status != _kernels.OK:
        raise IntegrationError(f"direct solve failed (status {status})", xr)
    out = out[idx]
    return DirectSolution(x=grid, u=out[:, 0], up=out[:, 1], E=float(E))


@dataclass(frozen=True)
class NormEquivalence:
    """ln R minus ln sqrt(u^2 + u'^2/E) over a window.

    Attributes:
        oscillation: max - min of the difference.
        drift_slope: Fitted slope of the difference against ln x.
    """

    oscillation: float
    drift_slope: float
    window: tuple

    def to_dict(self) -> dict:
        return {"oscillation": self.oscillation, "drift_slope": self.drift_slope,
                "window": list(self.window)}


def norm_equivalence(trace: PruferTrace, sol: DirectSolution, x_lo: float = 1.0) -> NormEquivalence:
    x = trace.x
    sel = x >= x_lo
    d = trace.lnR[sel] - np.interp(x[sel], sol.x, sol.log_norm)
    slope, _, _ = fit_line(np.column_stack([np.log(x[sel]), d]))
    return NormEquivalence(float(d.max() - d.min()), float(slope), (float(x[sel][0]), float(x[sel][-1])))


# ---------------------------------------------------------------------------
# decay verdicts

@dataclass(frozen=True)
class DecayReport:
    """Power-law fit ln R ~ slope ln x on the tail.

    Attributes:
        E, xi: Probe energy and boundary phase (nan when unknown).
        slope, intercept, rms_residual: Fit results.
        tail_window: (x_lo, x_hi).
        margin: Safety margin below -1/2.
        l2_verdict: slope < -1/2 - margin.
    """

    E: float
    xi: float
    slope: float
    intercept: float
    rms_residual: float
    tail_window: tuple
    margin: float
    l2_verdict: bool

    def to_dict(self) -> dict:
        return {"E": self.E, "xi": self.xi, "slope": self.slope, "intercept": self.intercept,
                "rms_residual": self.rms_residual, "tail_window": list(self.tail_window),
                "margin": self.margin, "l2_verdict": self.l2_verdict}


def decay_report(trace, tail_fraction: float = 0.5, probe: tuple | None = None,
                 margin: float = 0.05, activation: float = 0.0, samples: int = 512) -> DecayReport:
    """Fit ln R against ln x on the last ``tail_fraction`` of the log range.

    Args:
        trace: Anything with ``x`` and ``lnR`` arrays.
        tail_fraction: Portion of [ln x_start, ln x_end] used for the fit.
        probe: ``(E, xi)`` recorded in the report.
        margin: Verdict margin below -1/2.
        activation: Last activation point; the range starts there.
        samples: Log-uniform resampling size.

    Raises:
        InsufficientTail: If the trace ends before ten times the activation.
    """
    if not 0.0 < tail_fraction < 1.0:
        raise VerifyError("tail_fraction must lie in (0, 1)")
    x = np.asarray(trace.x, dtype=float)
    lnR = np.asarray(trace.lnR, dtype=float)
    start = max(activation, float(x[x > 0][0]) if np.any(x > 0) else 0.0, 1.0)
    end = float(x[-1])
    if end < 10.0 * start:
        raise InsufficientTail(f"trace ends at {end:.6g}, needs >= {10 * start:.6g}")
    lo, hi = math.log(start), math.log(end)
    u = np.linspace(hi - tail_fraction * (hi - lo), hi, samples)
    v = np.interp(np.exp(u), x, lnR)
    slope, icpt, rms = fit_line(np.column_stack([u, v]))
    E, xi = (math.nan, math.nan) if probe is None else (float(probe[0]), float(probe[1]))
    return DecayReport(E=E, xi=xi, slope=slope, intercept=icpt, rms_residual=rms,
                       tail_window=(float(np.exp(u[0])), float(np.exp(u[-1]))), margin=margin,
                       l2_verdict=bool(slope < -0.5 - margin))


def select_probes(V0: PeriodicPotential, target_ks: Sequence[float], count: int = 10,
                  bands: Sequence[int] = (1, 2), min_sep: float = 0.05,
                  edge: float = 0.1) -> list[QuasiEigenvalue]:
    """Non-target probe energies away from every target quasimomentum class."""
    cands = []
    ks = np.linspace(edge, math.pi - edge, 41)
    for n in bands:
        for k in ks:
            d = min((min(abs(k - kt), abs(k - (math.pi - kt))) for kt in target_ks), default=math.inf)
            if d >= min_sep:
                cands.append((n, float(k)))
    if len(cands) < count:
        raise VerifyError("not enough admissible probe positions")
    pick = np.linspace(0, len(cands) - 1, count).round().astype(int)
    return [eigenvalue(V0, cands[i][1], cands[i][0]) for i in pick]


# ---------------------------------------------------------------------------
# audits

@dataclass(frozen=True)
class BoundAudit:
    """One audited inequality.

    ``passed`` is vacuously true when the hypotheses fail. For the lower
    bound of the same-band estimate the inequality is lhs > rhs.
    """

    lemma_id: str
    lhs: float
    rhs: float
    hypothesis_ok: bool
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"lemma_id": self.lemma_id, "lhs": self.lhs, "rhs": self.rhs,
                "hypothesis_ok": self.hypothesis_ok, "pass": self.passed,
                "details": self.details}


def _audit(lemma_id, lhs, rhs, hyp, details, lower=False) -> BoundAudit:
    holds = lhs > rhs if lower else lhs <= rhs
    d = dict(details)
    d["bound_holds"] = bool(holds)
    return BoundAudit(lemma_id, float(lhs), float(rhs), bool(hyp), bool(holds or not hyp), d)


def _cert_grid(x0: float, x1: float, n: int) -> np.ndarray:
    return np.unique(np.concatenate([np.geomspace(x0, x1, n), np.linspace(x0, x1, n)]))


def check_osc_bound(theta: Callable, a: float, C: float, beta: float, x0: float, xs,
                    dtheta: Callable | None = None, lemma_id: str = L4_2,
                    n_cert: int = 4001, order: int = 10) -> BoundAudit:
    """|∫_{x0}^x sin(theta)/t| and the cosine variant against r/(|a| x0)^beta."""
    if a == 0 or not 0 < beta <= 1 or not C > 0:
        raise PreconditionError("need a != 0, beta in (0, 1], C > 0")
    xs = np.asarray(xs, dtype=float)
    x1 = float(xs.max())
    s = bounds.s_const(a, beta, C)
    hyp = x0 > s
    cert = None
    if dtheta is not None:
        t = _cert_grid(x0, x1, n_cert)
        cert = float(np.max(np.abs(dtheta(t) - a) * t**beta / C))
        hyp = hyp and cert <= 1.0 + 1e-12
    width = 0.25 * math.pi / (abs(a) + C * x0 ** (-beta))
    sin_i = cumulative_panels(lambda t: np.sin(theta(t)) / t, x0, xs, width, order)
    cos_i = cumulative_panels(lambda t: np.cos(theta(t)) / t, x0, xs, width, order)
    lhs = max(float(np.max(np.abs(sin_i))), float(np.max(np.abs(cos_i))))
    rhs = bounds.osc_rhs(a, beta, C, x0)
    return _audit(lemma_id, lhs, rhs, hyp, {"a": a, "C": C, "beta": beta, "x0": x0, "s": s,
                                            "certified_ratio": cert})


def check_periodic_osc_bound(Gamma: Callable, theta: Callable, a: float, x0: float, xs,
                             dtheta_minus_gamma: Callable | None = None,
                             gamma_speed: float = 0.0, Gamma_breaks: Sequence[float] = (),
                             n_cert: int = 4001, order: int = 10) -> BoundAudit:
    """|∫ Gamma sin(theta)/t| against ||Gamma||_2 r(alpha) / x0^(2/3).

    Args:
        Gamma: 1-periodic weight.
        theta: Phase.
        a: Mean frequency, not in 2 pi Z.
        x0, xs: Start and evaluation points.
        dtheta_minus_gamma: t -> theta'(t) - gamma'(t), for certification.
        gamma_speed: Bound on |gamma'| (sets the quadrature panel width).
        Gamma_breaks: Discontinuities of Gamma inside [0, 1).
    """
    alpha = bounds.dist_2pi(a)
    if alpha <= 0:
        raise PreconditionError("a must not lie in 2 pi Z")
    xs = np.asarray(xs, dtype=float)
    x1 = float(xs.max())
    r = bounds.r_alpha(alpha)
    hyp = x0 > r
    cert = None
    if dtheta_minus_gamma is not None:
        t = _cert_grid(x0, x1, n_cert)
        cert = float(np.max(np.abs(dtheta_minus_gamma(t) - a) * t ** (2.0 / 3.0)))
        hyp = hyp and cert <= 1.0 + 1e-12
    gb = sorted(set([0.0, *Gamma_breaks]))
    norm = math.sqrt(integrate_function(lambda t: float(Gamma(t)) ** 2, 0.0, 1.0, tol=1e-12,
                                        breakpoints=gb[1:]))
    cells = np.arange(math.floor(x0), math.ceil(x1) + 1)
    brk = (cells[:, None] + np.asarray(gb)[None, :]).ravel()
    width = 0.25 * math.pi / (abs(a) + gamma_speed + x0 ** (-2.0 / 3.0))
    vals = cumulative_panels(lambda t: Gamma(t) * np.sin(theta(t)) / t, x0, xs, width, order,
                             breakpoints=brk)
    lhs = float(np.max(np.abs(vals)))
    rhs = norm * r / x0 ** (2.0 / 3.0)
    return _audit(L4_3, lhs, rhs, hyp, {"a": a, "alpha": alpha, "x0": x0, "r_alpha": r,
                                        "gamma_l2": norm, "certified_ratio": cert})


def _ratio_ok(V, frames, grid, bound_fn) -> tuple[bool, float]:
    if V is None or isinstance(V, ZeroPotential):
        return True, 0.0
    v = np.abs(V(grid))
    worst = 0.0
    for f in frames:
        r = v / np.abs(f.eta_prime(grid))
        worst = max(worst, float(np.max(r / bound_fn(grid))))
    return worst <= 1.0, worst


def _pair_width(*frames) -> float:
    return 0.25 * math.pi / (2.0 * sum(f.eta_max for f in frames) + 1.0)


def check_nonresonant(frame_i: FloquetFrame, frame_j: FloquetFrame, trace_i: PruferTrace,
                      trace_j: PruferTrace | None, x0: float, xs, V=None,
                      variant: str = "2theta", n_cert: int = 4001) -> BoundAudit:
    """Non-resonant cross term (or the 4 theta self term) against its bound.

    Args:
        frame_i, frame_j: Frames of the two energies.
        trace_i, trace_j: Their Prüfer traces under ``V`` covering [x0, max xs].
        x0, xs: Start and evaluation points.
        V: Perturbation (None for V = 0), used for hypothesis certification.
        variant: ``"2theta"`` (cross term) or ``"4theta"`` (self term of i).
    """
    xs = np.asarray(xs, dtype=float)
    x1 = float(xs.max())
    grid = _cert_grid(x0, x1, n_cert)
    l2 = frame_i.eta_prime_l2_inv()
    if variant == "2theta":
        ki, kj = frame_i.k, frame_j.k
        if abs(ki - kj) <= K_TOL or abs(ki + kj - math.pi) <= K_TOL:
            raise PreconditionError("quasimomenta are resonant")
        alpha = bounds.alpha_one(ki, kj)
        f = lambda t: (np.sin(trace_i.two_theta(t)) * np.sin(trace_j.two_theta(t))
                       / (frame_i.eta_prime(t) * t))
        frames = (frame_i, frame_j)
    elif variant == "4theta":
        if abs(frame_i.k - math.pi / 2) <= K_TOL:
            raise PreconditionError("the 4 theta variant needs k != pi/2")
        alpha = bounds.alpha_two(frame_i.k)
        f = lambda t: np.cos(2.0 * trace_i.two_theta(t)) / (frame_i.eta_prime(t) * t)
        frames = (frame_i,)
    else:
        raise VerifyError("variant must be '2theta' or '4theta'")
    r = bounds.r_alpha(alpha)
    ok_v, worst = _ratio_ok(V, frames, grid, lambda t: 1.0 / (8.0 * t ** (2.0 / 3.0)))
    hyp = x0 >= r and ok_v
    vals = cumulative_panels(f, x0, xs, _pair_width(*frames))
    lhs = float(np.max(np.abs(vals)))
    rhs = l2 * r / x0 ** (2.0 / 3.0)
    return _audit(L5_1, lhs, rhs, hyp, {"variant": variant, "alpha": alpha, "r_alpha": r,
                                        "x0": x0, "ratio_to_bound": worst})


def _same_band(fi, fj) -> bool:
    return fi.n == fj.n and abs(fi.k + fj.k - math.pi) <= K_TOL


def check_same_band_lower(frame_i: FloquetFrame, frame_j: FloquetFrame, trace_i: PruferTrace,
                          trace_j: PruferTrace, epsilon: float, x0: float, x1: float, V=None,
                          A_i: float | None = None, n_cert: int = 4001) -> BoundAudit:
    """∫ (1 - cos(2theta_i + 2theta_j)) / (|eta'_l| t) > (eps/A_i) ln(x1/(x0+1)), l = i, j."""
    if not _same_band(frame_i, frame_j):
        raise PreconditionError("need k_j = pi - k_i and n_j = n_i")
    if not 0 < epsilon < 1:
        raise PreconditionError("epsilon must lie in (0, 1)")
    A_i = max(frame_i.eta_max, frame_j.eta_max) if A_i is None else A_i
    rhs = epsilon / A_i * math.log(x1 / (x0 + 1.0))
    if x1 <= x0:
        return _audit(L5_2, 0.0, rhs, True, {"x0": x0, "x1": x1, "epsilon": epsilon}, lower=True)
    grid = _cert_grid(x0, x1, n_cert)
    ok_v, worst = _ratio_ok(V, (frame_i, frame_j), grid, lambda t: epsilon / 2.0)
    lhs = []
    for fr in (frame_i, frame_j):
        f = lambda t, fr=fr: ((1.0 - np.cos(trace_i.two_theta(t) + trace_j.two_theta(t)))
                              / (np.abs(fr.eta_prime(t)) * t))
        lhs.append(float(cumulative_panels(f, x0, [x1], _pair_width(frame_i, frame_j))[0]))
    return _audit(L5_2, min(lhs), rhs, ok_v,
                  {"x0": x0, "x1": x1, "epsilon": epsilon, "A_i": A_i, "lhs_i": lhs[0],
                   "lhs_j": lhs[1], "ratio_to_bound": worst}, lower=True)


def check_cross_band(frame_i: FloquetFrame, frame_j: FloquetFrame, trace_i: PruferTrace,
                     trace_j: PruferTrace, x0: float, x1: float, V=None, slack: float = 10.0,
                     xs=None, delta: float | None = None, variant: str = "2theta",
                     n_cert: int = 4001) -> BoundAudit:
    """Cross-band resonant term against (10 + 10 delta)/(|n_i - n_j| n_i) ln x + slack/x0.

    The ``"4theta"`` variant audits ∫ cos 4theta_i/(eta'_i t) against
    (10 + 10 delta)/n_i^2 ln x + slack/x0.
    """
    ki, kj = frame_i.k, frame_j.k
    if not (abs(ki - kj) <= K_TOL or abs(ki + kj - math.pi) <= K_TOL):
        raise PreconditionError("quasimomenta are not resonant")
    ni, nj = frame_i.n, frame_j.n
    if ni == nj:
        raise PreconditionError("band indices must differ")
    A = frame_i.V0.A
    L = bounds.big_l(A, ki)
    d = bounds.big_delta(A, ki) if delta is None else float(delta)
    xs = np.geomspace(x0, x1, 64)[1:] if xs is None else np.asarray(xs, dtype=float)
    grid = _cert_grid(x0, x1, n_cert)
    ok_v, worst = _ratio_ok(V, (frame_i, frame_j), grid, lambda t: d / 2.0)
    hyp = ni > L and nj > L and ok_v
    if variant == "2theta":
        f = lambda t: (np.sin(trace_i.two_theta(t)) * np.sin(trace_j.two_theta(t))
                       / (frame_i.eta_prime(t) * t))
        coef = (10.0 + 10.0 * d) / (abs(ni - nj) * ni)
    elif variant == "4theta":
        f = lambda t: np.cos(2.0 * trace_i.two_theta(t)) / (frame_i.eta_prime(t) * t)
        coef = (10.0 + 10.0 * d) / ni**2
    else:
        raise VerifyError("variant must be '2theta' or '4theta'")
    vals = np.abs(cumulative_panels(f, x0, xs, _pair_width(frame_i, frame_j)))
    rhs_x = coef * np.log(xs) + slack / x0
    i = int(np.argmax(vals - rhs_x))
    holds = bool(np.all(vals <= rhs_x))
    audit = _audit(L5_3, float(vals[i]), float(rhs_x[i]), hyp,
                   {"variant": variant, "x0": x0, "x1": x1, "slack": slack, "delta": d, "L": L,
                    "max_lhs": float(vals.max()), "ratio_to_bound": worst})
    if not holds and audit.passed and hyp:
        audit = BoundAudit(L5_3, audit.lhs, audit.rhs, hyp, False, audit.details)
    return audit


@dataclass(frozen=True)
class EnvelopeReport:
    """Half-period integrals of |sin theta| between consecutive pi-crossings.

    Attributes:
        count: Number of complete half periods.
        worst: max |I_i - 2| / (10 pi C / t_i^beta); <= 1 means inside.
        alternating: Signed half-period integrals alternate in sign.
    """

    count: int
    worst: float
    alternating: bool

    @property
    def passed(self) -> bool:
        return self.count > 0 and self.worst <= 1.0 and self.alternating


def half_period_envelope(theta: Callable, C: float, beta: float, x0: float, x1: float,
                         order: int = 20) -> EnvelopeReport:
    """Check the half-period structure behind the oscillatory estimate (a = 1)."""
    th0 = float(theta(x0))
    i0 = math.floor(th0 / (2.0 * math.pi))
    if 2.0 * math.pi * i0 >= th0:
        i0 -= 1
    t = np.linspace(x0, x1, int(math.ceil((x1 - x0) * 8)) + 2)
    th = theta(t)
    levels = 2.0 * math.pi * i0 + math.pi * np.arange(1, int((th[-1] - th0) / math.pi) + 3)
    roots = []
    for lev in levels:
        j = int(np.searchsorted(th, lev))
        if j == 0 or j >= t.size:
            continue
        roots.append(find_root_bracketed(lambda s: float(theta(s)) - lev, t[j - 1], t[j], tol=1e-13))
    roots = np.array(roots)
    nodes, weights = np.polynomial.legendre.leggauss(order)
    worst = 0.0
    signs = []
    for a, b in zip(roots[:-1], roots[1:]):
        s = a + 0.5 * (b - a) * (nodes + 1.0)
        v = np.sin(theta(s))
        I_abs = 0.5 * (b - a) * float(np.dot(weights, np.abs(v)))
        I_sgn = 0.5 * (b - a) * float(np.dot(weights, v))
        worst = max(worst, abs(I_abs - 2.0) / (10.0 * math.pi * C / a**beta))
        signs.append(math.copysign(1.0, I_sgn))
    alternating = all(s1 == -s0 for s0, s1 in zip(signs, signs[1:]))
    return EnvelopeReport(count=len(signs), worst=float(worst), alternating=bool(alternating))


# ---------------------------------------------------------------------------
# randomized suite

def _drift(beta: float):
    """g with g' = t^-beta."""
    if beta == 1.0:
        return np.log, lambda t: 1.0 / t
    return (lambda t: t ** (1.0 - beta) / (1.0 - beta)), (lambda t: t ** (-beta))


def _osc_instance(rng, lemma_id: str, span_periods: float = 60.0) -> BoundAudit:
    beta = 1.0 if rng.random() < 0.25 else float(rng.uniform(0.5, 1.0))
    C = float(rng.uniform(0.1, 2.0))
    a = 1.0 if lemma_id == L4_1 else float(rng.choice([-1, 1]) * rng.uniform(0.2, 5.0))
    x0 = bounds.s_const(a, beta, C) * (1.0 + float(rng.uniform(0.01, 1.0)))
    kappa = float(rng.uniform(-0.6, 0.6))
    nu = float(rng.uniform(0.5, 3.0))
    kap2 = (0.95 - abs(kappa)) / (1.0 + beta / (nu * x0)) * float(rng.uniform(0, 1))
    phi0 = float(rng.uniform(0, 2 * math.pi))
    g, dg = _drift(beta)
    theta = lambda t: (phi0 + a * t + kappa * C * g(t)
                       + kap2 * C * np.sin(nu * t) / (nu * t**beta))
    dtheta = lambda t: (a + kappa * C * dg(t) + kap2 * C * np.cos(nu * t) / t**beta
                        - kap2 * C * beta * np.sin(nu * t) / (nu * t ** (beta + 1.0)))
    span = span_periods * 2.0 * math.pi / abs(a)
    xs = x0 + span * np.linspace(0.05, 1.0, 20)
    return check_osc_bound(theta, a, C, beta, x0, xs, dtheta=dtheta, lemma_id=lemma_id)


def _periodic_instance(rng, span_periods: float = 60.0) -> BoundAudit:
    m = int(rng.integers(-1, 2))
    a = float(rng.uniform(0.3, 2 * math.pi - 0.3)) + 2 * math.pi * m
    if abs(a) < 0.3:
        a = 0.3
    alpha = bounds.dist_2pi(a)
    x0 = bounds.r_alpha(alpha) * (1.0 + float(rng.uniform(0.01, 1.0)))
    kind = int(rng.integers(0, 4))
    ph = float(rng.uniform(0, 2 * math.pi))
    breaks = ()
    if kind == 0:
        c = float(rng.uniform(0.2, 2.0))
        Gamma = lambda t: c + 0.0 * t
    elif kind == 1:
        p = int(rng.integers(1, 4))
        Gamma = lambda t: np.cos(2 * math.pi * p * t + ph)
    elif kind == 2:
        Gamma = lambda t: np.mod(t, 1.0) - 0.5
    else:
        w = float(rng.uniform(0.2, 0.8))
        breaks = (w,)
        Gamma = lambda t: np.where(np.mod(t, 1.0) < w, 1.0, -0.5)
    c = float(rng.uniform(0.0, 0.5))
    kappa = float(rng.uniform(-0.95, 0.95))
    phi0 = float(rng.uniform(0, 2 * math.pi))
    gamma = lambda t: c * np.sin(2 * math.pi * t + ph)
    theta = lambda t: phi0 + a * t + gamma(t) + 3.0 * kappa * np.cbrt(t)
    dtg = lambda t: a + kappa * t ** (-2.0 / 3.0)
    span = span_periods * 2.0 * math.pi / abs(a)
    xs = x0 + span * np.linspace(0.05, 1.0, 20)
    return check_periodic_osc_bound(Gamma, theta, a, x0, xs, dtheta_minus_gamma=dtg,
                                    gamma_speed=2 * math.pi * c, Gamma_breaks=breaks)


def _nonresonant_instance(rng, span: float = 200.0) -> list[BoundAudit]:
    V0 = PeriodicPotential.zero() if rng.random() < 0.5 else PeriodicPotential.cosine(
        float(rng.uniform(0.2, 2.0)))
    while True:
        ki, kj = (float(v) for v in rng.uniform(0.3, math.pi - 0.3, 2))
        if bounds.alpha_one(ki, kj) >= 0.4:
            break
    ni, nj = (int(v) for v in rng.integers(1, 3, 2))
    fi = floquet_frame(V0, eigenvalue(V0, ki, ni))
    fj = floquet_frame(V0, eigenvalue(V0, kj, nj))
    alpha = bounds.alpha_one(ki, kj)
    use_4 = bounds.alpha_two(ki) >= 0.3
    r = max(bounds.r_alpha(alpha), bounds.r_alpha(bounds.alpha_two(ki)) if use_4 else 0.0)
    x0 = r * (1.0 + float(rng.uniform(0.01, 0.5)))
    if rng.random() < 0.5:
        V = None
    else:
        B = min(fi.eta_min, fj.eta_min)
        amp = 0.9 * B / 8.0 * float(rng.uniform(0.2, 1.0))
        nu = float(rng.uniform(0.5, 6.0))
        V = SinusoidPotential((amp,), (nu,), (float(rng.uniform(0, 2 * math.pi)),), (2.0 / 3.0,))
    th0 = rng.uniform(0, math.pi, 2)
    ti, tj = prufer_trace_many(V, [fi, fj], th0, x0 + span, x0=x0, grid_step=0.05)
    xs = x0 + span * np.linspace(0.05, 1.0, 12)
    out = [check_nonresonant(fi, fj, ti, tj, x0, xs, V=V)]
    if use_4:
        out.append(check_nonresonant(fi, fj, ti, tj, x0, xs, V=V, variant="4theta"))
    return out


def lemma_suite(seed: int, n_osc1: int = 100, n_osc2: int = 100, n_periodic: int = 100,
                n_nonresonant: int = 20, inject_violation: bool = False) -> list[BoundAudit]:
    """Randomized admissible instances of the oscillatory and non-resonance estimates.

    With ``inject_violation`` one extra instance starts below the threshold
    (hypothesis false, vacuous pass).
    """
    rng = np.random.default_rng(seed)
    out = [_osc_instance(rng, L4_1) for _ in range(n_osc1)]
    out += [_osc_instance(rng, L4_2) for _ in range(n_osc2)]
    out += [_periodic_instance(rng) for _ in range(n_periodic)]
    for _ in range(n_nonresonant):
        out += _nonresonant_instance(rng)
    if inject_violation:
        theta = lambda t: 2.0 * t
        out.append(check_osc_bound(theta, 2.0, 1.0, 1.0, 10.0, [20.0, 40.0],
                                   dtheta=lambda t: 2.0 + 0.0 * t))
    return out
