"""Acceptance criteria C1-C12, one PASS/FAIL line each.

Run with ``pytest -v tests/test_acceptance.py`` (lines are printed through
the captured output) or ``python tests/test_acceptance.py``.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from embedspec import bounds
from embedspec.floquet import (
    PeriodicPotential,
    audit_asymptotic_bounds,
    audit_eta_bounds,
    eigenvalue,
    floquet_frame,
    fundamental_pair,
    lk_thresholds,
)
from embedspec.synth import (
    PAPER,
    PRACTICAL,
    TERM_NAMES,
    HGrowth,
    export_potential,
    initial_log_amplitude,
    initial_phase,
    plan_constants,
    synthesize,
    target_frames,
)
from embedspec.targets import classify
from embedspec.verify import (
    PhasePotential,
    check_cross_band,
    decay_report,
    lemma_suite,
    load_csv,
    prufer_trace_many,
    select_probes,
)

# pinned tolerances
FREE_REL = 1e-9
WRONSKIAN = 1e-8
OMEGA = 1e-7
SLOPE_BAND = (-1.1, -0.9)
PROBE_SLOPE = -0.25
MARGIN = 0.05
ROUND_TRIP_ABS, ROUND_TRIP_REL = 1e-3, 1e-3
SLACK = 10.0
LIMITS = {"C1": 10, "C2": 120, "C3": 120, "C5": 120, "C6": 300, "C7": 120, "C8": 600, "C9": 300}

ZERO = PeriodicPotential.zero()
COS2 = PeriodicPotential.cosine(2.0)
SMALL = PeriodicPotential.cosine(0.1)
TRAJECTORIES = {}


def report(cid, ok, detail, seconds=None):
    limit = LIMITS.get(cid)
    timing = ""
    if seconds is not None:
        timing = f" [{seconds:.1f} s" + (f" <= {limit} s]" if limit else "]")
        ok = ok and (limit is None or seconds <= limit)
    line = f"{cid} {'PASS' if ok else 'FAIL'} {detail}{timing}"
    capman = _CAPTURE.get("capsys")
    if capman is not None:
        with capman.disabled():
            print("\n" + line)
    else:
        print(line)
    return ok


_CAPTURE = {}


@pytest.fixture(autouse=True)
def _expose_capsys(capsys):
    _CAPTURE["capsys"] = capsys
    yield
    _CAPTURE.pop("capsys", None)


def _warm_up():
    ts = classify([eigenvalue(ZERO, 1.0, 1)], [0.5], ZERO)
    fr = target_frames(ZERO, ts)
    plan = plan_constants(ts, fr, ZERO, spacing=5.0)
    traj = synthesize(plan, ts, fr, 20.0)
    prufer_trace_many(PhasePotential.from_trajectory(traj), [fr[0][0]], [0.0], 20.0)


@pytest.fixture(scope="module", autouse=True)
def warm():
    _warm_up()


def run_synthesis(V0, pairs, xi, x_max, grid_step=0.05, **kw):
    t0 = time.perf_counter()
    ts = classify([eigenvalue(V0, k, n) for k, n in pairs], [xi] * len(pairs), V0,
                  s3_delta=kw.pop("s3_delta", "paper"))
    fr = target_frames(V0, ts)
    plan = plan_constants(ts, fr, V0, mode=PRACTICAL, **kw)
    traj = synthesize(plan, ts, fr, x_max, grid_step)
    return ts, plan, traj, time.perf_counter() - t0


def trace_targets_and_probes(V, traj, ts, probes, probe_xi=0.5):
    frames = list(traj.frames) + [floquet_frame(traj.V0, q) for q in probes]
    th0 = [initial_phase(f, t.xi) for f, t in zip(traj.frames, ts)]
    ln0 = [initial_log_amplitude(f, t.xi) for f, t in zip(traj.frames, ts)]
    th0 += [initial_phase(f, probe_xi) for f in frames[len(ts):]]
    ln0 += [initial_log_amplitude(f, probe_xi) for f in frames[len(ts):]]
    return prufer_trace_many(V, frames, th0, float(traj.grid[-1]), lnR0=ln0,
                             grid_step=traj.grid_step)


def decays(traces, activation):
    return [decay_report(tr, 0.5, (tr.E, 0.0), MARGIN, activation) for tr in traces]


# ---------------------------------------------------------------------------

def test_c1_free_band_exactness():
    t0 = time.perf_counter()
    worst = 0.0
    for k in (0.3, 1.0, math.pi / 2, 2.5):
        for n in range(1, 21):
            a = bounds.anchor(k, n)
            worst = max(worst, abs(eigenvalue(ZERO, k, n).E - a * a) / (a * a))
    ok = report("C1", worst <= FREE_REL, f"max rel err {worst:.2e} <= {FREE_REL:g}",
                time.perf_counter() - t0)
    assert ok


def test_c2_eigen_asymptotics_cosine():
    t0 = time.perf_counter()
    ks = (0.3, math.pi / 2, 2.5)
    thr = {k: bounds.eigen_threshold(COS2.A, k) for k in ks}
    checked = failed = 0
    for k in ks:
        for n in range(max(1, math.ceil(thr[k])), 61):
            checked += 1
            failed += not audit_asymptotic_bounds(COS2, eigenvalue(COS2, k, n))["|sqrtE-a|"].passed
    # informational: how many n <= 60 satisfy the bound without the threshold
    below = sum(abs(math.sqrt(eigenvalue(COS2, k, n).E) - bounds.anchor(k, n))
                <= bounds.delta_n(COS2.A, k, n) for k in ks for n in range(1, 61))
    vac = " (vacuous: threshold above 60)" if checked == 0 else ""
    thr_s = ", ".join(f"{v:.4g}" for v in thr.values())
    ok = report("C2", failed == 0,
                f"{checked - failed}/{checked} audited n pass{vac}; thresholds {thr_s}; "
                f"bound holds for {below}/180 n <= 60 regardless", time.perf_counter() - t0)
    assert ok


def test_c3_eta_bounds_small_cosine():
    t0 = time.perf_counter()
    L, _ = lk_thresholds(SMALL.A, math.pi / 2)
    ns = (math.floor(L) + 2, math.floor(L) + 41, math.floor(L + 100))
    assert all(L < n <= L + 100 for n in ns)
    grid = np.linspace(0.0, 1.0, 1024, endpoint=False)
    reps = [audit_eta_bounds(floquet_frame(SMALL, eigenvalue(SMALL, math.pi / 2, n)), grid=grid)
            for n in ns]
    ok = all(r.applicable and r.passed for r in reps)
    ok = report("C3", ok, f"A={SMALL.A:.6f} L={L:.2f} n={list(ns)} all eta'/eta'' bounds hold "
                f"at 1024 points", time.perf_counter() - t0)
    assert ok


def test_c4_wronskian_and_omega():
    rng = np.random.default_rng(2024)
    wdev = odev = 0.0
    for _ in range(100):
        k = float(rng.uniform(0.05, math.pi - 0.05))
        n = int(rng.integers(1, 6))
        qe = eigenvalue(COS2, k, n)
        wdev = max(wdev, fundamental_pair(COS2, qe.E, x_max=1.0).wronskian_deviation())
        odev = max(odev, floquet_frame(COS2, qe).omega_dev)
    ok = report("C4", wdev <= WRONSKIAN and odev <= OMEGA,
                f"Wronskian dev {wdev:.2e} <= {WRONSKIAN:g}, omega dev {odev:.2e} <= {OMEGA:g}")
    assert ok


@pytest.fixture(scope="module")
def c5(tmp_path_factory):
    ts, plan, traj, t_synth = run_synthesis(ZERO, [(1.0, 1)], 0.5, 1.0e4)
    TRAJECTORIES["C5"] = traj
    path = Path(tmp_path_factory.mktemp("c5")) / "potential.csv"
    export_potential(traj, path)
    t0 = time.perf_counter()
    V = load_csv(path)
    probes = select_probes(ZERO, [1.0], 10, (1, 2))
    traces = trace_targets_and_probes(V, traj, ts, probes)
    return ts, plan, traj, traces, t_synth + time.perf_counter() - t0


def test_c5_single_target(c5):
    ts, plan, traj, traces, secs = c5
    reps = decays(traces, plan.T.max())
    tgt, prb = reps[0], reps[1:]
    ok = (SLOPE_BAND[0] <= tgt.slope <= SLOPE_BAND[1] and tgt.l2_verdict
          and len(prb) == 10 and all(not p.l2_verdict and p.slope > PROBE_SLOPE for p in prb))
    ok = report("C5", ok, f"target slope {tgt.slope:.4f} (pred {plan.constants[0].predicted_slope:.2f}) "
                f"verdict {tgt.l2_verdict}; probe slopes in [{min(p.slope for p in prb):.3g}, "
                f"{max(p.slope for p in prb):.3g}] > {PROBE_SLOPE}, verdicts all false", secs)
    assert ok


def test_c6_same_band_pair():
    t0 = time.perf_counter()
    parts, ok = [], True
    for name, V0 in (("V0=0", ZERO), ("V0=2cos", COS2)):
        ts, plan, traj, _ = run_synthesis(V0, [(1.0, 1), (math.pi - 1.0, 1)], 0.5, 2000.0, 0.02)
        TRAJECTORIES[f"C6 {name}"] = traj
        probe = eigenvalue(V0, math.pi / 2, 1)
        V = PhasePotential.from_trajectory(traj)
        reps = decays(trace_targets_and_probes(V, traj, ts, [probe]), plan.T.max())
        ok &= reps[0].l2_verdict and reps[1].l2_verdict and not reps[2].l2_verdict
        parts.append(f"{name}: slopes {reps[0].slope:.3f}, {reps[1].slope:.3f}, "
                     f"pi/2 probe {reps[2].slope:.3f}")
    ok = report("C6", ok, "; ".join(parts), time.perf_counter() - t0)
    assert ok


def test_c7_self_resonant():
    ts, plan, traj, secs = run_synthesis(ZERO, [(math.pi / 2, 1)], 0.5, 1.0e4)
    TRAJECTORIES["C7"] = traj
    t0 = time.perf_counter()
    (tr,) = trace_targets_and_probes(PhasePotential.from_trajectory(traj), traj, ts, [])
    rep = decays([tr], plan.T.max())[0]
    eps = ts[0].epsilon
    ok = report("C7", rep.l2_verdict and eps is not None,
                f"epsilon {eps:.4f}, C {plan.C[0]:.4f}, slope {rep.slope:.4f}, verdict {rep.l2_verdict}",
                secs + time.perf_counter() - t0)
    assert ok


def test_c8_cross_band():
    L, dk = lk_thresholds(SMALL.A, math.pi / 2)
    ts, plan, traj, secs = run_synthesis(SMALL, [(math.pi / 2, 400), (math.pi / 2, 900)], 0.5,
                                         1000.0, s3_delta="measured")
    TRAJECTORIES["C8"] = traj
    t0 = time.perf_counter()
    V = PhasePotential.from_trajectory(traj)
    traces = trace_targets_and_probes(V, traj, ts, [])
    reps = decays(traces, plan.T.max())
    fi, fj = traj.frames
    x0 = float(plan.T.max())
    audits = [check_cross_band(fi, fj, traces[0], traces[1], x0, 1000.0, V=V, slack=SLACK, delta=dk,
                               variant=v) for v in ("2theta", "4theta")]
    ok = (400 > L and 900 > L and ts.s3_reports[0].passed and all(r.l2_verdict for r in reps)
          and all(a.passed for a in audits))
    ok = report("C8", ok, f"L={L:.2f}, measured delta {ts.s3_reports[0].delta:.2e}; slopes "
                f"{reps[0].slope:.3f}, {reps[1].slope:.3f}; cross-band audit "
                f"{'/'.join(str(a.passed) for a in audits)} (hypothesis "
                f"{'/'.join(str(a.hypothesis_ok) for a in audits)}, slack {SLACK:g})",
                secs + time.perf_counter() - t0)
    assert ok


def test_c9_lemma_suite():
    t0 = time.perf_counter()
    audits = lemma_suite(1)
    counts = {}
    for a in audits:
        c = counts.setdefault(a.lemma_id, [0, 0])
        c[0] += 1
        c[1] += int(a.passed and a.hypothesis_ok)
    ok = (all(a.passed for a in audits) and all(counts[i][0] >= 100 for i in ("L4_1", "L4_2", "L4_3"))
          and counts["L5_1"][0] >= 20)
    summary = ", ".join(f"{k} {v[1]}/{v[0]}" for k, v in sorted(counts.items()))
    ok = report("C9", ok, summary, time.perf_counter() - t0)
    assert ok


def test_c10_csv_round_trip(c5):
    _, _, traj, traces, _ = c5
    got, want = float(traces[0].lnR[-1]), float(traj.lnR[0, -1])
    err = abs(got - want)
    tol = ROUND_TRIP_ABS + ROUND_TRIP_REL * abs(want)
    ok = report("C10", err <= tol, f"|lnR_csv - lnR_synth| at x_max = {err:.2e} <= {tol:.2e}")
    assert ok


def test_c11_envelopes():
    h = HGrowth("log", c=10.0)
    ts, plan, traj, _ = run_synthesis(ZERO, [(1.0, 1)], 0.5, 2000.0, h=h)
    runs = dict(TRAJECTORIES)
    runs["h-log"] = traj
    ratios = {k: t.envelope_ratio() for k, t in runs.items()}
    ok = all(t.envelope_holds() for t in runs.values()) and traj.h_envelope_holds(h)
    worst = max(ratios.values())
    ok = report("C11", ok, f"{len(runs)} runs, max |V|(1+x)/sum C = {worst:.6f}; "
                f"h = 10 ln(2+x) envelope holds beyond T_1 = {plan.T[0]:.2f}")
    assert ok


def test_c12_paper_constants():
    ts = classify([eigenvalue(ZERO, 1.0, 1)], [0.5], ZERO)
    plan = plan_constants(ts, target_frames(ZERO, ts), ZERO, mode=PAPER)
    c = plan.constants[0]
    vals = [c.terms[name] for name in TERM_NAMES]
    ok = (set(c.terms) == set(TERM_NAMES) and all(math.isfinite(v) for v in vals)
          and c.T == np.nextafter(max(vals), math.inf) and math.isfinite(c.T))
    plan.validate()
    terms = ", ".join(f"{n}={c.terms[n]:.4g}" for n in TERM_NAMES)
    ok = report("C12", ok, f"C={c.C:.2f}; {terms}; T_1={c.T:.6g}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main(["-q", __file__]))
