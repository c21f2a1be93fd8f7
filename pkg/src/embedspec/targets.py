"""Target sets of would-be embedded eigenvalues and their resonance classes.

Targets are partitioned into non-resonant singletons (S1), same-band
resonant pairs k, pi-k (S2) and cross-band resonant groups (S3). The
same-band resonance constant epsilon is estimated numerically from the
unperturbed phases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import bounds
from .floquet import FloquetFrame, PeriodicPotential, QuasiEigenvalue, floquet_frame, measured_delta

K_TOL = 1e-9
S1, S2, S3 = "S1", "S2", "S3"


class A1Violation(ValueError):
    """The target set cannot be partitioned into admissible classes.

    Attributes:
        indices: Offending target indices.
        clause: Which admissibility clause failed.
    """

    def __init__(self, indices: Sequence[int], clause: str, detail: str = ""):
        self.indices = tuple(int(i) for i in indices)
        self.clause = clause
        msg = f"targets {list(self.indices)}: {clause}"
        super().__init__(f"{msg} ({detail})" if detail else msg)


class DegenerateEpsilon(ValueError):
    """The minimum window integral vanished."""


@dataclass(frozen=True)
class TargetEigenvalue:
    """One target with its boundary phase and class.

    Attributes:
        qe: Quasi-eigenvalue (k, n, E).
        xi: Boundary phase in [0, pi]; u'(0)/u(0) = tan xi.
        cls: "S1", "S2" or "S3".
        epsilon: Same-band resonance constant, for S2 and self-resonant S1.
        partner: Index of the S2 partner, if any.
        group: Index of the resonance group.
    """

    qe: QuasiEigenvalue
    xi: float
    cls: str = S1
    epsilon: float | None = None
    partner: int | None = None
    group: int = 0

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
    def self_resonant(self) -> bool:
        return abs(self.k - math.pi / 2) <= K_TOL

    def to_dict(self) -> dict:
        d = {"k": self.k, "n": self.n, "E": self.E, "xi": self.xi, "class": self.cls,
             "group": self.group}
        if self.epsilon is not None:
            d["epsilon"] = self.epsilon
        if self.partner is not None:
            d["partner"] = self.partner
        return d


@dataclass(frozen=True)
class TargetSpectrum:
    """Classified targets.

    Attributes:
        targets: Targets in input order.
        resonance_groups: Index tuples of the classes k ~ {k, pi-k}.
        s3_reports: Per-group condition reports for S3 groups.
        notes: Free-form remarks (e.g. inferred partners).
    """

    targets: tuple
    resonance_groups: tuple
    s3_reports: dict = field(default_factory=dict)
    notes: tuple = ()

    def __len__(self) -> int:
        return len(self.targets)

    def __iter__(self):
        return iter(self.targets)

    def __getitem__(self, i) -> TargetEigenvalue:
        return self.targets[i]

    def classes(self) -> list[str]:
        return [t.cls for t in self.targets]

    def to_dict(self) -> dict:
        return {"targets": [t.to_dict() for t in self.targets],
                "resonance_groups": [list(g) for g in self.resonance_groups],
                "notes": list(self.notes)}


def _same(a: float, b: float) -> bool:
    return abs(a - b) <= K_TOL


def _related(ki: float, kj: float) -> bool:
    return _same(ki, kj) or _same(ki, math.pi - kj)


@dataclass(frozen=True)
class S3Member:
    n: int
    k: float
    lhs: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.lhs < self.threshold


@dataclass(frozen=True)
class S3Report:
    members: tuple
    delta: float

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.members)

    def to_dict(self) -> dict:
        return {"delta": self.delta, "passed": self.passed,
                "members": [{"n": m.n, "k": m.k, "lhs": m.lhs, "threshold": m.threshold,
                             "passed": m.passed} for m in self.members]}


def check_s3_condition(group: Sequence[tuple[int, float]], A: float,
                       delta: float | None = None) -> S3Report:
    """Cross-band summability condition for each member of ``group``.

    Args:
        group: ``(n_i, k_i)`` pairs sharing one quasimomentum class.
        A: L1 norm of the background (used for delta(k) when ``delta`` is None).
        delta: Override for delta(k), e.g. a measured value.
    """
    if len(group) < 2:
        raise ValueError("group needs at least two members")
    k0 = group[0][1]
    if not all(_related(k, k0) for _, k in group):
        raise ValueError("group members must share the quasimomentum class")
    d = bounds.big_delta(A, k0) if delta is None else float(delta)
    thr = bounds.s3_threshold(d)
    ns = [int(n) for n, _ in group]
    members = tuple(S3Member(n=ns[i], k=float(group[i][1]), lhs=bounds.s3_lhs(ns, i), threshold=thr)
                    for i in range(len(ns)))
    return S3Report(members=members, delta=d)


def classify(qes: Sequence[QuasiEigenvalue], xis: Sequence[float], V0: PeriodicPotential,
             frames: dict | None = None, s3_delta: str = "paper",
             epsilon_safety: float = 0.5) -> TargetSpectrum:
    """Partition targets into S1 / S2 / S3 and attach epsilons.

    Args:
        qes: Quasi-eigenvalues of the targets.
        xis: Boundary phases.
        V0: Background potential.
        frames: Optional cache ``{(k, n): FloquetFrame}``.
        s3_delta: ``"paper"`` uses delta(k) from the closed formula;
            ``"measured"`` uses the smallest delta that makes the eta'/eta''
            bounds hold on the group's actual frames.
        epsilon_safety: Safety factor passed to :func:`estimate_epsilon`.

    Raises:
        A1Violation: With the offending indices and clause.
    """
    if len(qes) != len(xis) or not qes:
        raise ValueError("need equally many (>= 1) quasi-eigenvalues and phases")
    if s3_delta not in ("paper", "measured"):
        raise ValueError("s3_delta must be 'paper' or 'measured'")
    frames = {} if frames is None else frames

    def frame(k, n):
        key = (float(k), int(n))
        if key not in frames:
            frames[key] = floquet_frame(V0, QuasiEigenvalue(k=k, n=n, E=_find(qes, k, n)))
        return frames[key]

    for i, xi in enumerate(xis):
        if not 0.0 <= xi <= math.pi:
            raise ValueError(f"xi[{i}]={xi!r} outside [0, pi]")
    N = len(qes)
    # resonance groups (equivalence k ~ pi - k)
    group_of = [-1] * N
    groups: list[list[int]] = []
    for i in range(N):
        if group_of[i] >= 0:
            continue
        g = [i]
        group_of[i] = len(groups)
        for j in range(i + 1, N):
            if group_of[j] < 0 and _related(qes[i].k, qes[j].k):
                group_of[j] = len(groups)
                g.append(j)
        groups.append(g)

    out: list[TargetEigenvalue | None] = [None] * N
    reports = {}
    notes = []
    for gi, g in enumerate(groups):
        if len(g) == 2:
            i, j = g
            qi, qj = qes[i], qes[j]
            if qi.n == qj.n and _same(qi.k, math.pi - qj.k):
                if _same(qi.k, math.pi / 2):
                    raise A1Violation(g, "k = pi/2 inside S2")
                eps = estimate_epsilon(frame(qi.k, qi.n), frame(qj.k, qj.n), epsilon_safety)
                out[i] = TargetEigenvalue(qi, float(xis[i]), S2, eps, j, gi)
                out[j] = TargetEigenvalue(qj, float(xis[j]), S2, eps, i, gi)
                continue
        if len(g) == 1:
            i = g[0]
            eps = None
            if _same(qes[i].k, math.pi / 2):
                f = frame(qes[i].k, qes[i].n)
                eps = estimate_epsilon(f, f, epsilon_safety)
            out[i] = TargetEigenvalue(qes[i], float(xis[i]), S1, eps, None, gi)
            continue
        # candidate S3
        for a in g:
            for b in g:
                if a < b and qes[a].n == qes[b].n and _same(qes[a].k, qes[b].k):
                    raise A1Violation([a, b], "duplicate energy")
        k0 = qes[g[0]].k
        L = bounds.big_l(V0.A, k0)
        low = [i for i in g if not qes[i].n > L]
        if low:
            raise A1Violation(low, "n <= L(k) in S3", f"L(k)={L:.6g}")
        delta = None
        if s3_delta == "measured":
            delta = max(measured_delta(frame(qes[i].k, qes[i].n)) for i in g)
        rep = check_s3_condition([(qes[i].n, qes[i].k) for i in g], V0.A, delta)
        reports[gi] = rep
        if not rep.passed:
            bad = [g[m] for m, mem in enumerate(rep.members) if not mem.passed]
            raise A1Violation(bad, "S3 group failing the summability condition",
                              f"delta={rep.delta:.6g}")
        for i in g:
            out[i] = TargetEigenvalue(qes[i], float(xis[i]), S3, None, None, gi)
        if s3_delta == "measured":
            notes.append(f"group {gi}: measured delta {rep.delta:.6g} used for the summability condition")

    energies = sorted((q.E, i) for i, q in enumerate(qes))
    for (e0, i0), (e1, i1) in zip(energies, energies[1:]):
        if abs(e1 - e0) <= 1e-12 * max(1.0, abs(e0)):
            raise A1Violation([i0, i1], "duplicate energy")
    for t in out:
        if t.cls == S2:
            notes.append(f"S2 partner of target {out.index(t)} inferred from the set")
            break
    return TargetSpectrum(targets=tuple(out), resonance_groups=tuple(tuple(g) for g in groups),
                          s3_reports=reports, notes=tuple(notes))


def _find(qes, k, n) -> float:
    for q in qes:
        if q.n == n and _same(q.k, k):
            return q.E
    raise KeyError((k, n))


def window_integrals(frame_i: FloquetFrame, frame_j: FloquetFrame, starts, offset: float,
                     nodes: int = 4096) -> np.ndarray:
    """∫_x^{x+1} (1 - cos(2 eta_i + 2 eta_j + offset)) dt for each start x."""
    t = (np.arange(nodes) + 0.5) / nodes
    out = []
    for x in np.atleast_1d(starts):
        ph = frame_i.two_eta_mod(x + t) + frame_j.two_eta_mod(x + t) + offset
        out.append(1.0 - float(np.mean(np.cos(ph))))
    return np.asarray(out)


def epsilon_window_minimum(frame_i: FloquetFrame, frame_j: FloquetFrame) -> float:
    """Minimum over phase offsets and window starts of the window integral.

    The phase 2 eta_i + 2 eta_j advances by exactly 2(k_i + k_j) = 2 pi
    (mod 2 pi) per period, so the integrand is 1-periodic and the window
    integral is independent of the start; the minimum over the unknown
    initial phases is 1 - |<exp(i(2 eta_i + 2 eta_j))>|.
    """
    m = max(frame_i.nodes.size, frame_j.nodes.size, 1024) * 4
    t = (np.arange(m) + 0.5) / m
    z = np.exp(1j * (frame_i.two_eta_mod(t) + frame_j.two_eta_mod(t)))
    return float(1.0 - abs(np.mean(z)))


def estimate_epsilon(frame_i: FloquetFrame, frame_j: FloquetFrame, safety: float = 0.5,
                     n_starts: int = 32) -> float:
    """Certified same-band resonance constant in (0, 1).

    The window integral ``∫_x^{x+1} (1 - cos(2 theta_i + 2 theta_j))`` along
    the unperturbed flow is minimised over the initial phase offset and over
    ``n_starts`` window starts covering one period, then scaled by ``safety``.
    """
    if not 0.0 < safety < 1.0:
        raise ValueError("safety must lie in (0, 1)")
    if frame_i.n != frame_j.n or not _same(frame_i.k, math.pi - frame_j.k):
        raise ValueError("estimate_epsilon needs a same-band pair k, pi - k")
    wmin = epsilon_window_minimum(frame_i, frame_j)
    m = max(frame_i.nodes.size, frame_j.nodes.size, 1024) * 4
    t = (np.arange(m) + 0.5) / m
    z = np.mean(np.exp(1j * (frame_i.two_eta_mod(t) + frame_j.two_eta_mod(t))))
    worst = -float(np.angle(z))  # offset aligning the mean with cos = 1
    starts = np.arange(n_starts) / n_starts
    wmin = min(wmin, float(np.min(window_integrals(frame_i, frame_j, starts, worst, m))))
    if wmin <= 1e-12:
        raise DegenerateEpsilon(f"window integral minimum {wmin:.3g}")
    eps = safety * wmin
    return float(min(max(eps, 1e-15), 1.0 - 1e-15))
