"""Synthesis of the decaying perturbation V and its Prüfer traces.

The plan fixes amplitudes C_j and activation points T_j per target; the
coupled phase system is then integrated once, with V rebuilt from the
phases at every evaluation and ln R_j accumulated alongside.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels, bounds
from .floquet import (
    FloquetFrame,
    PeriodicPotential,
    QuasiEigenvalue,
    eigenvalue,
    floquet_frame,
    frame_pack,
)
from .numerics import IntegrationError
from .targets import S2, S3, TargetSpectrum

PAPER = "paper_faithful"
PRACTICAL = "practical"
MODES = (PAPER, PRACTICAL)
TERM_NAMES = ("shift", "cubic", "smallness", "alpha", "index")


class PlanError(ValueError):
    """The synthesis plan cannot be built or fails validation."""


# ---------------------------------------------------------------------------
# growth functions

@dataclass(frozen=True)
class HGrowth:
    """Growth bound h for the envelope |V(x)| (1 + x) <= h(x).

    Attributes:
        kind: ``"log"`` for c ln(2 + x), ``"power"`` for c x^p, ``"table"``
            for linear interpolation of (xs, vs), constant beyond the ends.
        c: Scale for the presets.
        p: Exponent for ``"power"`` (0 < p < 1).
        xs, vs: Table knots and values.
    """

    kind: str
    c: float = 1.0
    p: float = 0.5
    xs: tuple = ()
    vs: tuple = ()

    def __post_init__(self):
        if self.kind not in ("log", "power", "table"):
            raise ValueError(f"unknown h kind {self.kind!r}")
        if self.kind != "table" and not self.c > 0:
            raise ValueError("h scale must be positive")
        if self.kind == "power" and not 0 < self.p < 1:
            raise ValueError("power exponent must lie in (0, 1)")
        if self.kind == "table":
            xs = np.asarray(self.xs, dtype=float)
            if xs.size < 2 or np.any(np.diff(xs) <= 0) or len(self.vs) != xs.size:
                raise ValueError("h table needs >= 2 strictly increasing knots with values")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "log":
            return self.c * np.log(2.0 + x)
        if self.kind == "power":
            return self.c * np.maximum(x, 0.0) ** self.p
        return np.interp(x, self.xs, self.vs)

    def threshold_position(self, tau: float) -> float:
        """inf{x >= 0 : h(t) > tau for all t > x}."""
        if self.kind == "log":
            return max(0.0, math.exp(tau / self.c) - 2.0)
        if self.kind == "power":
            return (max(tau, 0.0) / self.c) ** (1.0 / self.p)
        xs = np.asarray(self.xs, dtype=float)
        vs = np.asarray(self.vs, dtype=float)
        if vs[-1] <= tau:
            raise PlanError(f"h never exceeds {tau:.6g}: x_j undefined")
        low = np.nonzero(vs <= tau)[0]
        if low.size == 0:
            return 0.0
        i = int(low[-1])
        x_cross = xs[i] + (tau - vs[i]) / (vs[i + 1] - vs[i]) * (xs[i + 1] - xs[i])
        return max(0.0, float(x_cross))

    def to_dict(self) -> dict:
        if self.kind == "table":
            return {"kind": "table", "xs": list(self.xs), "vs": list(self.vs)}
        d = {"kind": self.kind, "c": self.c}
        if self.kind == "power":
            d["p"] = self.p
        return d


# ---------------------------------------------------------------------------
# plan

@dataclass(frozen=True)
class TargetConstants:
    """Synthesis constants of one target.

    Attributes:
        A, B: max and min of |eta'| over the frames at k and pi - k.
        C: Amplitude.
        epsilon: Same-band constant, when defined.
        alpha: Separation over targets 1..j (inf when every set is empty).
        x_thr: Position beyond which h exceeds ten times the amplitude sum.
        T: Activation point.
        terms: The five lower bounds on T (paper mode) keyed by name.
        harmonic: 1 / <1/|eta'|> at k (sets the predicted slope).
        predicted_slope: -C / (4 harmonic), the averaged self-decay rate.
    """

    A: float
    B: float
    C: float
    epsilon: float | None
    alpha: float
    x_thr: float
    T: float
    terms: dict
    harmonic: float
    predicted_slope: float

    def to_dict(self) -> dict:
        d = {"A": _num(self.A), "B": _num(self.B), "C": _num(self.C), "alpha": _num(self.alpha),
             "x_thr": _num(self.x_thr), "T": _num(self.T), "harmonic_eta": _num(self.harmonic),
             "predicted_slope": _num(self.predicted_slope),
             "T_terms": {k: _num(v) for k, v in self.terms.items()}}
        if self.epsilon is not None:
            d["epsilon"] = float(self.epsilon)
        return d


@dataclass(frozen=True)
class SynthesisPlan:
    """Per-target constants and the mode that produced them."""

    mode: str
    constants: tuple
    h: HGrowth | None = None
    scale: float = 1.0
    spacing: float = 50.0
    notes: tuple = ()

    @property
    def T(self) -> np.ndarray:
        return np.array([c.T for c in self.constants])

    @property
    def C(self) -> np.ndarray:
        return np.array([c.C for c in self.constants])

    def __len__(self) -> int:
        return len(self.constants)

    def validate(self) -> None:
        """Raise :class:`PlanError` unless every plan invariant holds."""
        T = self.T
        if np.any(np.diff(T) <= 0) or T.size and T[0] <= 0:
            raise PlanError("activation points must increase strictly from above 0")
        for j, c in enumerate(self.constants):
            if c.C < 0 or (self.scale > 0 and not c.C > 0):
                raise PlanError(f"target {j}: amplitude {c.C!r} not positive")
            if not c.alpha > 0:
                raise PlanError(f"target {j}: separation alpha={c.alpha!r} not positive")
            if not all(math.isfinite(v) for v in (c.A, c.B, c.C, c.T)):
                raise PlanError(f"target {j}: non-finite constant")
            if self.mode == PAPER:
                for name, v in c.terms.items():
                    if not c.T > v:
                        raise PlanError(f"target {j}: T={c.T!r} does not exceed the {name} term {v!r}")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode, "scale": self.scale, "spacing": self.spacing,
            "h": None if self.h is None else self.h.to_dict(),
            "formulas": FORMULAS[self.mode],
            "targets": [c.to_dict() for c in self.constants],
            "notes": list(self.notes),
        }


FORMULAS = {
    PAPER: {
        "A": "max over x in [0,1] of |eta'| at k_j and pi-k_j",
        "B": "min over x in [0,1] of |eta'| at k_j and pi-k_j",
        "C": "400 A_j / epsilon_j (S2, or S1 with k=pi/2); 400 A_j otherwise",
        "alpha": "min of {4k_i, 4pi-4k_i : k_i != pi/2}, {2|k_i-k_l| : k_i != k_l}, "
                 "{2|k_i+k_l-pi| : i <= l, k_i+k_l != pi} over targets 1..j",
        "x_thr": "inf{x : h(t) > 10 sum_{i<=j} C_i for all t > x}; 0 without h",
        "T_terms": {
            "shift": "x_j + T_{j-1}",
            "cubic": "(8 (1 + sum 1/B_i) sum C_l)^3",
            "smallness": "sum_i (2/(B_i eps_i) + 2/(B_i delta(k_i))) sum C_l",
            "alpha": "r(alpha_j) + (10^j r(alpha_j) sum C_i)^(3/2)",
            "index": "10^j (n_j + sum C_l)",
        },
        "T": "next float above the maximum of the five terms",
    },
    PRACTICAL: {
        "A": "max over x in [0,1] of |eta'| at k_j and pi-k_j",
        "B": "min over x in [0,1] of |eta'| at k_j and pi-k_j",
        "C": "scale * 4 H_j, H_j = 1/<1/|eta'|> at k_j; same-band partners share the larger value",
        "alpha": "as in paper mode",
        "x_thr": "as in paper mode",
        "T": "T_{j-1} + max(spacing, x_j)",
    },
}


def _num(v: float):
    v = float(v)
    return v if math.isfinite(v) else str(v)


def target_frames(V0: PeriodicPotential, spectrum: TargetSpectrum) -> list[tuple[FloquetFrame, FloquetFrame]]:
    """Frames at (k_j, n_j) and (pi - k_j, n_j) for every target."""
    out = []
    for t in spectrum:
        f = floquet_frame(V0, t.qe)
        if t.self_resonant:
            g = f
        else:
            g = floquet_frame(V0, eigenvalue(V0, math.pi - t.k, t.n))
        out.append((f, g))
    return out


def _alpha(ks: Sequence[float], tol: float = 1e-9) -> float:
    vals = []
    half = math.pi / 2
    for i, ki in enumerate(ks):
        if abs(ki - half) > tol:
            vals += [4.0 * ki, 4.0 * math.pi - 4.0 * ki]
        for l in range(i, len(ks)):
            kl = ks[l]
            if l > i and abs(ki - kl) > tol:
                vals.append(2.0 * abs(ki - kl))
            if abs(ki + kl - math.pi) > tol:
                vals.append(2.0 * abs(ki + kl - math.pi))
    return min(vals) if vals else math.inf


def _uses_epsilon(t) -> bool:
    return t.cls == S2 or (t.self_resonant and t.epsilon is not None)


def plan_constants(spectrum: TargetSpectrum, frames: Sequence[tuple[FloquetFrame, FloquetFrame]],
                   V0: PeriodicPotential, h: HGrowth | None = None, mode: str = PRACTICAL,
                   scale: float = 1.0, spacing: float = 50.0) -> SynthesisPlan:
    """Compute A_j, B_j, C_j, alpha_j, x_j and T_j for every target.

    Args:
        spectrum: Classified targets, in activation order.
        frames: ``(frame at k_j, frame at pi - k_j)`` per target.
        V0: Background potential (for delta(k)).
        h: Optional growth bound.
        mode: ``"paper_faithful"`` or ``"practical"``.
        scale: Amplitude multiplier (practical mode).
        spacing: Minimum gap between activations (practical mode).
    """
    if mode not in MODES:
        raise PlanError(f"mode must be one of {MODES}")
    if len(spectrum) == 0:
        raise PlanError("empty spectrum")
    if len(frames) != len(spectrum):
        raise PlanError("need one frame pair per target")
    if scale < 0 or not spacing > 0:
        raise PlanError("scale must be >= 0 and spacing > 0")
    notes = []
    A, B, H, Cs = [], [], [], []
    for j, (t, pair) in enumerate(zip(spectrum, frames)):
        f, g = pair
        if f is None or g is None:
            raise PlanError(f"missing frame for target {j}")
        if abs(f.E - t.E) > 1e-9 * max(1.0, abs(t.E)):
            raise PlanError(f"frame {j} does not belong to target {j}")
        A.append(max(f.eta_max, g.eta_max))
        B.append(min(f.eta_min, g.eta_min))
        H.append(f.harmonic_mean_eta())
        eps_path = _uses_epsilon(t)
        if eps_path and t.epsilon is None:
            raise PlanError(f"target {j} needs epsilon")
        base = 400.0 * A[j] / t.epsilon if eps_path else 400.0 * A[j]
        if mode == PAPER:
            Cs.append(base)
        else:
            Cs.append(scale * 4.0 * H[j])
    if mode == PRACTICAL:
        for j, t in enumerate(spectrum):
            if t.cls == S2 and t.partner is not None:
                Cs[j] = max(Cs[j], Cs[t.partner])

    constants = []
    T_prev = 0.0
    ks = [t.k for t in spectrum]
    for j, t in enumerate(spectrum):
        sumC = float(sum(Cs[: j + 1]))
        alpha = _alpha(ks[: j + 1])
        if math.isinf(alpha) and j == 0:
            notes.append("alpha is +inf (every separation set empty); its T terms drop out")
        x_thr = 0.0 if h is None else h.threshold_position(10.0 * sumC)
        terms = {}
        terms["shift"] = x_thr + T_prev
        terms["cubic"] = (8.0 * (1.0 + sum(1.0 / b for b in B[: j + 1])) * sumC) ** 3
        small = 0.0
        for i in range(j + 1):
            ti = spectrum[i]
            if ti.epsilon is not None and _uses_epsilon(ti):
                small += 2.0 / (B[i] * ti.epsilon)
            if ti.cls == S3:
                d = bounds.big_delta(V0.A, ti.k)
                if d > 0:
                    small += 2.0 / (B[i] * d)
        terms["smallness"] = small * sumC
        ra = bounds.r_alpha(alpha)
        terms["alpha"] = ra + (10.0 ** (j + 1) * ra * sumC) ** 1.5 if ra > 0 else 0.0
        terms["index"] = 10.0 ** (j + 1) * (t.n + sumC)
        if mode == PAPER:
            T = float(np.nextafter(max(terms.values()), math.inf))
        else:
            T = T_prev + max(spacing, x_thr)
        constants.append(TargetConstants(
            A=A[j], B=B[j], C=Cs[j], epsilon=t.epsilon, alpha=alpha, x_thr=x_thr, T=T,
            terms=terms, harmonic=H[j],
            predicted_slope=-Cs[j] / (4.0 * H[j]),
        ))
        T_prev = T
    if mode == PAPER:
        notes.append("smallness term: eps part only where epsilon is defined, "
                     "delta part only for cross-band members")
    plan = SynthesisPlan(mode=mode, constants=tuple(constants), h=h, scale=scale,
                         spacing=spacing, notes=tuple(notes))
    plan.validate()
    return plan


# ---------------------------------------------------------------------------
# initial data

def initial_rho(frame: FloquetFrame, xi: float) -> complex:
    """rho(0) with u(0) = Im rho, u'(0) = Im(rho phi'(0)), u'(0)/u(0) = tan xi."""
    if not 0.0 <= xi <= math.pi:
        raise ValueError("xi must lie in [0, pi]")
    b = frame.b
    ri = math.cos(xi)
    rr = (math.sin(xi) - ri * b.real) / b.imag
    return complex(rr, ri)


def initial_phase(frame: FloquetFrame, xi: float) -> float:
    """theta(0) = Arg rho(0), since eta(0) = 0."""
    return math.atan2(initial_rho(frame, xi).imag, initial_rho(frame, xi).real)


def initial_log_amplitude(frame: FloquetFrame, xi: float) -> float:
    """ln R(0) = ln |rho(0)|."""
    return math.log(abs(initial_rho(frame, xi)))


# ---------------------------------------------------------------------------
# trajectories

@dataclass(frozen=True)
class PruferTrace:
    """One Prüfer component on an output grid.

    Attributes:
        x: Grid.
        psi: Phase offset theta - eta on the grid.
        lnR: log amplitude on the grid.
        frame: Floquet frame of the traced energy.
    """

    x: np.ndarray
    psi: np.ndarray
    lnR: np.ndarray
    frame: FloquetFrame = field(repr=False)

    @property
    def E(self) -> float:
        return self.frame.E

    @property
    def theta(self) -> np.ndarray:
        """Unwrapped angle on the grid."""
        return self.frame.eta(self.x) + self.psi

    def psi_at(self, t):
        return np.interp(t, self.x, self.psi)

    def two_theta(self, t):
        """2 theta(t) reduced mod 2 pi (up to a multiple), accurate for large t."""
        return self.frame.two_eta_mod(t) + 2.0 * self.psi_at(t)

    def lnR_at(self, t):
        return np.interp(t, self.x, self.lnR)


@dataclass(frozen=True)
class PruferTrajectory:
    """Synthesised coupled traces and the potential.

    Attributes:
        grid: Output positions (includes every activation point below x_max).
        theta: Unwrapped angles, shape (K, len(grid)).
        psi: theta - eta, shape (K, len(grid)).
        lnR: log amplitudes, shape (K, len(grid)).
        V: Potential on the grid (right-continuous at activations).
        T, C, sign: Activation points, amplitudes, (-1)^n_j.
        targets: Target records (k, n, E, xi, class, epsilon).
        mode: Plan mode.
        V0: Background.
        steps: Accepted plus rejected integrator steps.
    """

    grid: np.ndarray
    theta: np.ndarray
    psi: np.ndarray
    lnR: np.ndarray
    V: np.ndarray
    T: np.ndarray
    C: np.ndarray
    sign: np.ndarray
    targets: tuple
    mode: str
    V0: PeriodicPotential = field(repr=False)
    frames: tuple = field(repr=False)
    grid_step: float = 0.05
    steps: int = 0

    @property
    def K(self) -> int:
        return self.C.size

    def component(self, j: int) -> PruferTrace:
        return PruferTrace(x=self.grid, psi=self.psi[j], lnR=self.lnR[j], frame=self.frames[j])

    def envelope_ratio(self) -> float:
        """max |V| (1+x) / sum_{T_j <= x} C_j over samples (0/0 counts as 0)."""
        active = self.grid[None, :] >= self.T[:, None]
        bound = (self.C[:, None] * active).sum(axis=0)
        lhs = np.abs(self.V) * (1.0 + self.grid)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(bound > 0, lhs / bound, np.where(lhs > 0, np.inf, 0.0))
        return float(np.max(r))

    def envelope_holds(self) -> bool:
        active = self.grid[None, :] >= self.T[:, None]
        bound = (self.C[:, None] * active).sum(axis=0)
        lhs = np.abs(self.V) * (1.0 + self.grid)
        return bool(np.all(lhs <= bound * (1.0 + 1e-12)))

    def h_envelope_holds(self, h: HGrowth) -> bool:
        sel = self.grid > self.T[0]
        lhs = np.abs(self.V[sel]) * (1.0 + self.grid[sel])
        return bool(np.all(lhs <= h(self.grid[sel])))

    def hypothesis_ratios(self, V0: PeriodicPotential | None = None) -> list[dict]:
        """Smallness ratios |V / eta'_j| on x >= T_j against each lemma bound."""
        V0 = self.V0 if V0 is None else V0
        out = []
        for j, t in enumerate(self.targets):
            sel = self.grid >= self.T[j]
            x = self.grid[sel]
            ratio = np.abs(self.V[sel]) / np.abs(self.frames[j].eta_prime(x))
            rec = {"target": j, "max_ratio": float(ratio.max()) if ratio.size else 0.0}
            nonres = ratio <= 1.0 / (8.0 * x ** (2.0 / 3.0))
            rec["nonresonant_bound_holds"] = bool(np.all(nonres))
            if t.get("epsilon") is not None:
                rec["epsilon_bound"] = t["epsilon"] / 2.0
                rec["epsilon_bound_holds"] = bool(np.all(ratio <= t["epsilon"] / 2.0))
            if t["class"] == S3:
                d = bounds.big_delta(V0.A, t["k"])
                rec["delta_bound"] = d / 2.0
                rec["delta_bound_holds"] = bool(np.all(ratio <= d / 2.0))
            out.append(rec)
        return out

    def ledger_residual(self) -> float:
        """max |d lnR/dx - V sin 2theta / (2 eta')| at interior grid points.

        The derivative is a centred difference, so the residual carries the
        O(step^2) difference error; it measures consistency, not accuracy.
        """
        worst = 0.0
        x = self.grid
        for j in range(self.K):
            d = np.gradient(self.lnR[j], x)
            s2 = np.sin(self.frames[j].two_eta_mod(x) + 2.0 * self.psi[j])
            rhs = self.V * s2 / (2.0 * self.frames[j].eta_prime(x))
            inner = np.ones(x.size, dtype=bool)
            inner[[0, -1]] = False
            for Tj in self.T:
                inner &= np.abs(x - Tj) > 1.5 * self.grid_step
            worst = max(worst, float(np.max(np.abs(d - rhs)[inner])))
        return worst


def output_grid(x_max: float, step: float, marks: Sequence[float] = (), x0: float = 0.0) -> np.ndarray:
    """Uniform grid from x0 to x_max merged with the marks inside it."""
    n = int(math.floor((x_max - x0) / step + 1e-9))
    g = x0 + step * np.arange(n + 1)
    extra = [m for m in marks if x0 < m < x_max]
    return np.union1d(np.concatenate([g, [x_max]]), extra)


def potential_on_grid(grid, frames, psi, C, sign, T) -> np.ndarray:
    """V(x) = sum sign_j C_j sin 2theta_j chi_[T_j, inf) / (1+x)."""
    V = np.zeros(grid.size)
    for j, f in enumerate(frames):
        act = grid >= T[j]
        if C[j] == 0 or not act.any():
            continue
        ph = f.two_eta_mod(grid[act]) + 2.0 * psi[j][act]
        V[act] += sign[j] * C[j] * np.sin(ph)
    return V / (1.0 + grid)


def synthesize(plan: SynthesisPlan, spectrum: TargetSpectrum, frames, x_max: float,
               grid_step: float = 0.05, rtol: float = 1e-8, atol: float = 1e-10,
               max_steps: int = 2_000_000_000) -> PruferTrajectory:
    """Integrate the coupled phase system and assemble V.

    Args:
        plan: Constants from :func:`plan_constants`.
        spectrum: The classified targets the plan was built for.
        frames: Per-target frames, or the (k, pi - k) pairs used for the plan.
        x_max: End of the trace; must exceed every activation point.
        grid_step: Output spacing.
        rtol, atol: Integrator tolerances.
    """
    K = len(spectrum)
    if len(plan) != K or len(frames) != K:
        raise PlanError("plan, spectrum and frames must have equal length")
    fr = [f[0] if isinstance(f, tuple) else f for f in frames]
    for j, (t, f) in enumerate(zip(spectrum, fr)):
        if abs(f.E - t.E) > 1e-9 * max(1.0, abs(t.E)):
            raise PlanError(f"frame {j} does not belong to target {j}")
    T = plan.T
    if not x_max > T.max():
        raise PlanError(f"x_max={x_max!r} must exceed the last activation {T.max()!r}")
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    C = plan.C
    sign = np.array([(-1.0) ** t.n for t in spectrum])
    grid = output_grid(x_max, grid_step, T)
    y0 = np.zeros(2 * K)
    for j, (t, f) in enumerate(zip(spectrum, fr)):
        y0[j] = initial_phase(f, t.xi)
        y0[K + j] = initial_log_amplitude(f, t.xi)
    pack = frame_pack(fr)
    args = (_kernels.SYNTH, pack, C.astype(float), sign, T.astype(float), np.zeros((3, K)))
    fastest = max(f.eta_max for f in fr)
    status, xr, out, steps = _kernels.solve(args, 0.0, y0, grid, rtol, atol,
                                            0.1 / fastest, np.inf, max_steps)
    if status != _kernels.OK:
        raise IntegrationError(f"synthesis failed (status {status})", xr)
    psi = np.ascontiguousarray(out[:, :K].T)
    lnR = np.ascontiguousarray(out[:, K:].T)
    theta = np.array([f.eta(grid) for f in fr]) + psi
    V = potential_on_grid(grid, fr, psi, C, sign, T)
    recs = []
    for t in spectrum:
        d = {"k": t.k, "n": t.n, "E": t.E, "xi": t.xi, "class": t.cls, "epsilon": t.epsilon}
        recs.append(d)
    return PruferTrajectory(grid=grid, theta=theta, psi=psi, lnR=lnR, V=V, T=T, C=C,
                            sign=sign, targets=tuple(recs), mode=plan.mode,
                            V0=fr[0].V0, frames=tuple(fr), grid_step=grid_step,
                            steps=int(steps))


# ---------------------------------------------------------------------------
# export

TRAJECTORY_SCHEMA = "embedspec-trajectory/1"


def export_potential(traj: PruferTrajectory, path, fmt: str = "csv") -> None:
    """Write V as ``x,V`` csv or the full structured record as JSON."""
    if traj.grid.size == 0:
        raise ValueError("empty trajectory")
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "V"])
            for x, v in zip(traj.grid, traj.V):
                w.writerow([f"{x:.17g}", f"{v:.17g}"])
        return
    if fmt != "structured":
        raise ValueError("format must be 'csv' or 'structured'")
    rec = {
        "schema": TRAJECTORY_SCHEMA,
        "mode": traj.mode,
        "potential": traj.V0.to_dict(),
        "targets": [
            {**{k: v for k, v in t.items() if v is not None}, "C": float(traj.C[j]),
             "T": float(traj.T[j]), "sign": float(traj.sign[j])}
            for j, t in enumerate(traj.targets)
        ],
        "grid": {"x0": float(traj.grid[0]), "x1": float(traj.grid[-1]), "step": traj.grid_step},
        "activations": traj.T.tolist(),
        "samples": {
            "x": traj.grid.tolist(), "V": traj.V.tolist(), "theta": traj.theta.tolist(),
            "lnR": traj.lnR.tolist(), "psi": traj.psi.tolist(),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rec, fh)
