"""Command-line entry point: bands, eigen, synth, verify, lemmas.

Exit status: 0 full pass, 2 configuration error, 3 admissibility (A1)
violation, 4 numerical failure, 5 audit or acceptance failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds, config, synth, verify
from .floquet import FloquetError, QuasiEigenvalue, band_structure, eigenvalue, floquet_frame
from .numerics import NumericsError
from .targets import A1Violation, DegenerateEpsilon, classify

EXIT_OK, EXIT_CONFIG, EXIT_A1, EXIT_NUMERIC, EXIT_AUDIT = 0, 2, 3, 4, 5
DAT_ROWS = 4000

log = logging.getLogger("embedspec")


class CommandError(Exception):
    """Carries an exit status and a message."""

    def __init__(self, status: int, message: str):
        self.status = status
        super().__init__(message)


# ---------------------------------------------------------------------------
# output helpers

def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, numpy scalars plain."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_dat(path: Path, header: list[str], columns) -> None:
    """Whitespace-separated columns with a ``#`` header (gnuplot-readable)."""
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, fmt="%.10g", header=" ".join(header), comments="# ")


def _thin(n: int) -> np.ndarray:
    return np.unique(np.linspace(0, n - 1, min(n, DAT_ROWS)).round().astype(int))


# ---------------------------------------------------------------------------
# shared pipeline pieces

def _quasi(cfg: config.RunConfig) -> list[QuasiEigenvalue]:
    return [eigenvalue(cfg.potential, t.k, t.n) for t in cfg.targets]


def _require_targets(cfg: config.RunConfig) -> None:
    if not cfg.targets:
        raise CommandError(EXIT_CONFIG, "targets: must be nonempty for this command")


def _spectrum(cfg: config.RunConfig):
    qes = _quasi(cfg)
    return classify(qes, [t.xi for t in cfg.targets], cfg.potential, s3_delta=cfg.s3_delta,
                    epsilon_safety=cfg.epsilon_safety)


# ---------------------------------------------------------------------------
# commands

def cmd_bands(cfg: config.RunConfig, out: Path) -> int:
    bands = band_structure(cfg.potential, cfg.n_max)
    write_json(out / "bands.json", {"potential": cfg.potential.to_dict(), "A": cfg.potential.A,
                                    "bands": [b.to_dict() for b in bands]})
    write_dat(out / "bands.dat", ["n", "lower", "upper", "parity"],
              [[b.n for b in bands], [b.lower for b in bands], [b.upper for b in bands],
               [1 if b.direction == "decreasing" else 0 for b in bands]])
    return EXIT_OK


def cmd_eigen(cfg: config.RunConfig, out: Path) -> int:
    _require_targets(cfg)
    for i, t in enumerate(cfg.targets):
        if t.n > cfg.n_max:
            raise CommandError(EXIT_CONFIG, f"targets[{i}].n: band {t.n} exceeds bands.n_max={cfg.n_max}")
    A = cfg.potential.A
    rows = []
    for t, q in zip(cfg.targets, _quasi(cfg)):
        a, dn = bounds.anchor(q.k, q.n), bounds.delta_n(A, q.k, q.n)
        applicable = q.n > bounds.eigen_threshold(A, q.k)
        rows.append({"k": q.k, "n": q.n, "E": q.E, "a": a, "delta": dn,
                     "deviation": abs(math.sqrt(q.E) - a) if q.E > 0 else math.nan,
                     "threshold_applies": applicable,
                     "within_bound": bool(q.E > 0 and abs(math.sqrt(q.E) - a) <= dn)})
    write_json(out / "eigen.json", {"potential": cfg.potential.to_dict(), "A": A, "eigenvalues": rows})
    write_dat(out / "eigen.dat", ["k", "n", "E", "a", "delta"],
              [[r[c] for r in rows] for c in ("k", "n", "E", "a", "delta")])
    return EXIT_OK


def cmd_synth(cfg: config.RunConfig, out: Path) -> int:
    _require_targets(cfg)
    spectrum = _spectrum(cfg)
    frames = synth.target_frames(cfg.potential, spectrum)
    plan = synth.plan_constants(spectrum, frames, cfg.potential, h=cfg.h, mode=cfg.mode,
                                scale=cfg.scale, spacing=cfg.spacing)
    write_json(out / "plan.json", {"spectrum": spectrum.to_dict(), "plan": plan.to_dict()})
    report = {"mode": cfg.mode, "x_max": cfg.x_max, "synthesized": False}
    if not cfg.x_max > plan.T.max():
        report["note"] = (f"synthesis skipped: last activation {plan.T.max():.6g} "
                          f"is beyond x_max={cfg.x_max:.6g}")
        write_json(out / "synth.json", report)
        log.warning(report["note"])
        return EXIT_OK
    traj = synth.synthesize(plan, spectrum, frames, cfg.x_max, cfg.grid_step, cfg.rtol, cfg.atol)
    if "csv" in cfg.formats:
        synth.export_potential(traj, out / "potential.csv", "csv")
    if "structured" in cfg.formats:
        synth.export_potential(traj, out / "trajectory.json", "structured")
    ok = traj.envelope_holds()
    report.update({
        "synthesized": True, "steps": traj.steps, "envelope_ratio": traj.envelope_ratio(),
        "envelope_holds": ok, "ledger_residual": traj.ledger_residual(),
        "hypothesis_ratios": traj.hypothesis_ratios(),
    })
    if cfg.h is not None:
        report["h_envelope_holds"] = traj.h_envelope_holds(cfg.h)
    decays = []
    for j in range(traj.K):
        try:
            d = verify.decay_report(traj.component(j), cfg.tail_fraction,
                                    (traj.targets[j]["E"], traj.targets[j]["xi"]), cfg.margin,
                                    activation=float(traj.T.max()))
            decays.append({**d.to_dict(), "predicted_slope": plan.constants[j].predicted_slope})
        except verify.InsufficientTail as exc:
            decays.append({"note": str(exc)})
    report["decay"] = decays
    write_json(out / "synth.json", report)
    idx = _thin(traj.grid.size)
    write_dat(out / "trajectory.dat", ["x", "V"] + [f"lnR_{j}" for j in range(traj.K)],
              [traj.grid[idx], traj.V[idx]] + [traj.lnR[j][idx] for j in range(traj.K)])
    return EXIT_OK if ok else EXIT_AUDIT


def _infer_activation(V: verify.SampledPotential) -> float:
    nz = np.nonzero(V.vs)[0]
    return float(V.xs[nz[0]]) if nz.size else 0.0


def _target_audits(cfg, frames, traces, targets, eps, V, x0, x1) -> list[dict]:
    """Every applicable pairwise estimate among the targets on [x0, x1]."""
    audits = []
    xs = np.geomspace(x0, x1, 24)[1:]
    K = len(frames)
    for i in range(K):
        fi, ti = frames[i], traces[i]
        if abs(fi.k - math.pi / 2) > 1e-9:
            a = verify.check_nonresonant(fi, fi, ti, ti, x0, xs, V=V, variant="4theta")
            audits.append({"targets": [i], **a.to_dict()})
        for j in range(i + 1, K):
            fj, tj = frames[j], traces[j]
            resonant = (abs(fi.k - fj.k) <= 1e-9 or abs(fi.k + fj.k - math.pi) <= 1e-9)
            if not resonant:
                a = verify.check_nonresonant(fi, fj, ti, tj, x0, xs, V=V)
            elif fi.n == fj.n:
                e = eps[i] if eps[i] is not None else eps[j]
                if e is None:
                    continue
                a = verify.check_same_band_lower(fi, fj, ti, tj, e, x0, x1, V=V)
            else:
                a = verify.check_cross_band(fi, fj, ti, tj, x0, x1, V=V, slack=cfg.slack)
            audits.append({"targets": [i, j], **a.to_dict()})
    return audits


def cmd_verify(cfg: config.RunConfig, out: Path, potential: str) -> int:
    try:
        loaded = verify.load_potential(potential)
    except OSError as exc:
        raise verify.PotentialFileError(f"cannot open {potential}: {exc.strerror}") from exc
    if isinstance(loaded, verify.StructuredRecord):
        V = loaded.potential
        V0 = loaded.V0
        recs = loaded.targets
        tgt = [(float(t["k"]), int(t["n"]), float(t["xi"])) for t in recs]
        activation = float(max(t["T"] for t in recs))
        eps = [t.get("epsilon") for t in recs]
        x_end = float(loaded.potential.grid[-1])
    else:
        _require_targets(cfg)
        V, V0 = loaded, cfg.potential
        tgt = [(t.k, t.n, t.xi) for t in cfg.targets]
        activation = _infer_activation(V)
        eps = [t.epsilon for t in _spectrum(cfg)]
        x_end = float(V.xs[-1])
    x_max = min(cfg.x_max, x_end)
    frames = [floquet_frame(V0, eigenvalue(V0, k, n)) for k, n, _ in tgt]
    th0 = [synth.initial_phase(f, xi) for f, (_, _, xi) in zip(frames, tgt)]
    ln0 = [synth.initial_log_amplitude(f, xi) for f, (_, _, xi) in zip(frames, tgt)]
    probes = verify.select_probes(V0, [k for k, _, _ in tgt], cfg.probes, cfg.probe_bands) \
        if cfg.probes else []
    pframes = [floquet_frame(V0, q) for q in probes]
    pth0 = [synth.initial_phase(f, cfg.probe_xi) for f in pframes]
    pln0 = [synth.initial_log_amplitude(f, cfg.probe_xi) for f in pframes]
    traces = verify.prufer_trace_many(V, frames + pframes, th0 + pth0, x_max, lnR0=ln0 + pln0,
                                      grid_step=cfg.grid_step, rtol=cfg.rtol, atol=cfg.atol)
    K = len(frames)

    def report(tr, xi):
        return verify.decay_report(tr, cfg.tail_fraction, (tr.E, xi), cfg.margin, activation)

    targets = [{"k": k, "n": n, **report(tr, xi).to_dict()} for (k, n, xi), tr in zip(tgt, traces[:K])]
    probe_reps = [{"k": q.k, "n": q.n, **report(tr, cfg.probe_xi).to_dict()}
                  for q, tr in zip(probes, traces[K:])]
    audits = _target_audits(cfg, frames, traces[:K], tgt, eps, V, max(activation, 1.0), x_max)
    ok = (all(t["l2_verdict"] for t in targets) and not any(p["l2_verdict"] for p in probe_reps)
          and all(a["pass"] for a in audits))
    write_json(out / "verify.json", {"potential_file": Path(potential).name, "x_max": x_max,
                                     "activation": activation, "targets": targets,
                                     "probes": probe_reps, "audits": audits, "passed": ok})
    idx = _thin(traces[0].x.size)
    names = [f"target_{j}" for j in range(K)] + [f"probe_{j}" for j in range(len(probes))]
    write_dat(out / "verify.dat", ["x"] + [f"lnR_{s}" for s in names],
              [traces[0].x[idx]] + [tr.lnR[idx] for tr in traces])
    return EXIT_OK if ok else EXIT_AUDIT


def cmd_lemmas(cfg: config.RunConfig, out: Path, seed: int) -> int:
    c = cfg.lemma_counts
    audits = verify.lemma_suite(seed, c["osc1"], c["osc2"], c["periodic"], c["nonresonant"])
    env = verify.half_period_envelope(lambda t: t + 0.5 * np.log(t), 0.5, 1.0, 1.0e4, 1.0e4 + 200.0)
    summary = {}
    for a in audits:
        s = summary.setdefault(a.lemma_id, {"count": 0, "passed": 0, "hypothesis_ok": 0})
        s["count"] += 1
        s["passed"] += int(a.passed)
        s["hypothesis_ok"] += int(a.hypothesis_ok)
    ok = all(a.passed for a in audits) and env.passed
    write_json(out / "lemmas.json", {
        "seed": seed, "summary": summary, "passed": ok,
        "half_period_envelope": {"count": env.count, "worst": env.worst,
                                 "alternating": env.alternating, "passed": env.passed},
        "audits": [a.to_dict() for a in audits],
    })
    ids = sorted(summary)
    write_dat(out / "lemmas.dat", ["index", "lemma", "lhs", "rhs", "pass"],
              [np.arange(len(audits)), [ids.index(a.lemma_id) for a in audits],
               [a.lhs for a in audits], [a.rhs for a in audits], [int(a.passed) for a in audits]])
    return EXIT_OK if ok else EXIT_AUDIT


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="embedspec", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=["bands", "eigen", "synth", "verify", "lemmas"])
    p.add_argument("potential", nargs="?", help="potential file (verify)")
    p.add_argument("--config", help="JSON configuration document")
    p.add_argument("--out", help="output directory (overrides output.directory)")
    p.add_argument("--seed", type=int, help="lemma suite seed")
    p.add_argument("--mode", choices=["paper", "practical"], help="constant mode")
    p.add_argument("--x-max", type=float, dest="x_max", help="trace length")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _resolve(args) -> config.RunConfig:
    if args.config is None:
        if args.command != "lemmas":
            raise config.ConfigError("--config is required for this command")
        cfg = config.default_config()
    else:
        cfg = config.load(args.config)
    kw = {}
    if args.mode:
        kw["mode"] = config.MODE_ALIASES[args.mode]
    if args.x_max is not None:
        if not (math.isfinite(args.x_max) and args.x_max > 0):
            raise config.ConfigError("must be a positive number", "--x-max")
        kw["x_max"] = args.x_max
    if args.out:
        kw["out_dir"] = args.out
    return cfg.replace(**kw) if kw else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _resolve(args)
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "bands":
            return cmd_bands(cfg, out)
        if args.command == "eigen":
            return cmd_eigen(cfg, out)
        if args.command == "synth":
            return cmd_synth(cfg, out)
        if args.command == "verify":
            if not args.potential:
                raise CommandError(EXIT_CONFIG, "verify needs a potential file")
            return cmd_verify(cfg, out, args.potential)
        return cmd_lemmas(cfg, out, cfg.seed if args.seed is None else args.seed)
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.status
    except A1Violation as exc:
        print(f"A1 violation: {exc}", file=sys.stderr)
        return EXIT_A1
    except verify.PotentialFileError as exc:
        print(f"potential file error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericsError, FloquetError, DegenerateEpsilon, synth.PlanError, verify.VerifyError,
            ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
