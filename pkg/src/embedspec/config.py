"""Run configuration: one JSON document with a versioned schema field.

Every validation failure raises :class:`ConfigError` naming the offending
field (dotted path) or, for syntax errors, the line and column.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .floquet import PeriodicPotential
from .synth import MODES, PAPER, PRACTICAL, HGrowth

SCHEMA = "embedspec/1"
MODE_ALIASES = {"paper": PAPER, "paper_faithful": PAPER, "practical": PRACTICAL}


class ConfigError(ValueError):
    """Invalid configuration.

    Attributes:
        field: Dotted path of the offending field, when known.
        line, column: Position of a syntax error, when known.
    """

    def __init__(self, message: str, field: str | None = None, line: int | None = None,
                 column: int | None = None):
        self.field = field
        self.line = line
        self.column = column
        where = field if field is not None else (f"line {line}, column {column}" if line else None)
        super().__init__(f"{where}: {message}" if where else message)


@dataclass(frozen=True)
class TargetSpec:
    k: float
    n: int
    xi: float


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration.

    Attributes:
        potential: Background V0.
        targets: Target (k, n, xi) triples.
        mode: ``"paper_faithful"`` or ``"practical"``.
        scale, spacing: Practical-mode amplitude factor and activation gap.
        h: Optional growth bound.
        n_max: Number of bands for the band table.
        x_max, grid_step, rtol, atol: Integration settings.
        epsilon_safety: Safety factor for same-band epsilons.
        s3_delta: ``"paper"`` or ``"measured"`` delta in the cross-band condition.
        probes, probe_bands, probe_xi: Non-target probe grid.
        margin, tail_fraction: Decay verdict settings.
        slack: Constant standing for unquantified O(1) terms in the audits.
        lemma_counts: Instance counts of the randomized lemma suite.
        seed: Default seed for the lemma suite.
        out_dir: Output directory.
        formats: Potential export formats.
    """

    potential: PeriodicPotential
    targets: tuple = ()
    mode: str = PRACTICAL
    scale: float = 1.0
    spacing: float = 50.0
    h: HGrowth | None = None
    n_max: int = 3
    x_max: float = 1.0e4
    grid_step: float = 0.05
    rtol: float = 1e-8
    atol: float = 1e-10
    epsilon_safety: float = 0.5
    s3_delta: str = "paper"
    probes: int = 10
    probe_bands: tuple = (1, 2)
    probe_xi: float = 0.5
    margin: float = 0.05
    tail_fraction: float = 0.5
    slack: float = 10.0
    lemma_counts: dict = field(default_factory=lambda: {"osc1": 100, "osc2": 100,
                                                        "periodic": 100, "nonresonant": 20})
    seed: int = 1
    out_dir: str = "out"
    formats: tuple = ("csv", "structured")

    def replace(self, **kw) -> "RunConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return RunConfig(**d)


_SECTIONS = {"schema", "potential", "targets", "mode", "h", "bands", "run", "verify", "lemmas",
             "output"}


def _section(doc: dict, name: str, keys: set) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError("expected an object", name)
    extra = sorted(set(sec) - keys)
    if extra:
        raise ConfigError(f"unknown field {extra[0]!r}", f"{name}.{extra[0]}")
    return sec


def _real(sec: dict, key: str, path: str, default, lo=None, hi=None, open_lo=False):
    v = sec.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"expected a finite number, got {v!r}", path)
    v = float(v)
    if lo is not None and (v < lo or (open_lo and v == lo)):
        raise ConfigError(f"must be {'>' if open_lo else '>='} {lo}, got {v!r}", path)
    if hi is not None and v > hi:
        raise ConfigError(f"must be <= {hi}, got {v!r}", path)
    return v


def _int(sec: dict, key: str, path: str, default, lo=None):
    v = sec.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"expected an integer, got {v!r}", path)
    if lo is not None and v < lo:
        raise ConfigError(f"must be >= {lo}, got {v!r}", path)
    return v


def _potential(doc: dict) -> PeriodicPotential:
    if "potential" not in doc:
        raise ConfigError("missing", "potential")
    p = doc["potential"]
    if not isinstance(p, dict):
        raise ConfigError("expected an object", "potential")
    kind = p.get("kind")
    allowed = {"zero": {"kind"}, "cosine": {"kind", "amplitude", "offset"},
               "fourier": {"kind", "c0", "cos", "sin"}, "piecewise": {"kind", "breaks", "coefs"}}
    if kind not in allowed:
        raise ConfigError(f"expected one of {sorted(allowed)}, got {kind!r}", "potential.kind")
    extra = sorted(set(p) - allowed[kind])
    if extra:
        raise ConfigError(f"unknown field {extra[0]!r}", f"potential.{extra[0]}")
    if kind == "cosine":
        _real(p, "amplitude", "potential.amplitude", 1.0)
        _real(p, "offset", "potential.offset", 0.0)
    for key in ("cos", "sin"):
        vals = p.get(key, [])
        if not isinstance(vals, list):
            raise ConfigError("expected a list", f"potential.{key}")
        for i, v in enumerate(vals):
            _real({"v": v}, "v", f"potential.{key}[{i}]", None)
    if kind == "piecewise":
        for key in ("breaks", "coefs"):
            if not isinstance(p.get(key), list):
                raise ConfigError("expected a list", f"potential.{key}")
    try:
        return PeriodicPotential.from_dict(p)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), "potential") from exc


def _targets(doc: dict) -> tuple:
    ts = doc.get("targets", [])
    if not isinstance(ts, list):
        raise ConfigError("expected a list", "targets")
    out = []
    for i, t in enumerate(ts):
        path = f"targets[{i}]"
        if not isinstance(t, dict):
            raise ConfigError("expected an object", path)
        extra = sorted(set(t) - {"k", "n", "xi"})
        if extra:
            raise ConfigError(f"unknown field {extra[0]!r}", f"{path}.{extra[0]}")
        for key in ("k", "n"):
            if key not in t:
                raise ConfigError("missing", f"{path}.{key}")
        k = _real(t, "k", f"{path}.k", None)
        if not 0.0 < k < math.pi:
            raise ConfigError(f"must lie in (0, pi), got {k!r}", f"{path}.k")
        n = _int(t, "n", f"{path}.n", None, lo=1)
        xi = _real(t, "xi", f"{path}.xi", 0.0, lo=0.0, hi=math.pi)
        out.append(TargetSpec(k=k, n=n, xi=xi))
    return tuple(out)


def _h(doc: dict) -> HGrowth | None:
    h = doc.get("h")
    if h is None:
        return None
    if not isinstance(h, dict):
        raise ConfigError("expected an object or null", "h")
    extra = sorted(set(h) - {"kind", "c", "p", "xs", "vs"})
    if extra:
        raise ConfigError(f"unknown field {extra[0]!r}", f"h.{extra[0]}")
    kind = h.get("kind")
    kind = "table" if kind == "custom-table" else kind
    if kind not in ("log", "power", "table"):
        raise ConfigError(f"expected 'log', 'power' or 'table', got {kind!r}", "h.kind")
    if kind == "table":
        xs, vs = h.get("xs"), h.get("vs")
        if not isinstance(xs, list) or not isinstance(vs, list):
            raise ConfigError("tables need lists 'xs' and 'vs'", "h.xs")
        try:
            return HGrowth("table", xs=tuple(float(v) for v in xs), vs=tuple(float(v) for v in vs))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "h.xs") from exc
    c = _real(h, "c", "h.c", 1.0, lo=0.0, open_lo=True)
    p = _real(h, "p", "h.p", 0.5, lo=0.0, hi=1.0, open_lo=True)
    if kind == "power" and p >= 1.0:
        raise ConfigError("must be < 1", "h.p")
    return HGrowth(kind, c=c, p=p)


def parse_config(doc: dict) -> RunConfig:
    """Validate a decoded configuration document."""
    if not isinstance(doc, dict):
        raise ConfigError("top level must be an object")
    if doc.get("schema") != SCHEMA:
        raise ConfigError(f"expected {SCHEMA!r}, got {doc.get('schema')!r}", "schema")
    extra = sorted(set(doc) - _SECTIONS)
    if extra:
        raise ConfigError("unknown section", extra[0])
    V0 = _potential(doc)
    targets = _targets(doc)
    m = _section(doc, "mode", {"mode", "scale", "spacing", "epsilon_safety", "s3_delta"})
    mode = MODE_ALIASES.get(m.get("mode", PRACTICAL))
    if mode not in MODES:
        raise ConfigError(f"expected 'paper' or 'practical', got {m.get('mode')!r}", "mode.mode")
    s3 = m.get("s3_delta", "paper")
    if s3 not in ("paper", "measured"):
        raise ConfigError(f"expected 'paper' or 'measured', got {s3!r}", "mode.s3_delta")
    b = _section(doc, "bands", {"n_max"})
    r = _section(doc, "run", {"x_max", "grid_step", "tolerances"})
    tol = r.get("tolerances", {})
    if not isinstance(tol, dict) or set(tol) - {"rtol", "atol"}:
        raise ConfigError("expected an object with 'rtol' and/or 'atol'", "run.tolerances")
    v = _section(doc, "verify", {"probes", "probe_bands", "probe_xi", "margin", "tail_fraction",
                                 "slack"})
    pb = v.get("probe_bands", [1, 2])
    if not isinstance(pb, list) or not pb or not all(isinstance(n, int) and n >= 1 for n in pb):
        raise ConfigError("expected a nonempty list of band indices", "verify.probe_bands")
    lm = _section(doc, "lemmas", {"seed", "osc1", "osc2", "periodic", "nonresonant"})
    counts = {key: _int(lm, key, f"lemmas.{key}", d, lo=0)
              for key, d in (("osc1", 100), ("osc2", 100), ("periodic", 100), ("nonresonant", 20))}
    o = _section(doc, "output", {"directory", "formats"})
    fm = o.get("formats", ["csv", "structured"])
    if not isinstance(fm, list) or not set(fm) <= {"csv", "structured"}:
        raise ConfigError("expected a list drawn from 'csv', 'structured'", "output.formats")
    out_dir = o.get("directory", "out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("expected a nonempty string", "output.directory")
    tf = _real(v, "tail_fraction", "verify.tail_fraction", 0.5, lo=0.0, hi=1.0, open_lo=True)
    if tf >= 1.0:
        raise ConfigError("must be < 1", "verify.tail_fraction")
    rtol = _real(tol, "rtol", "run.tolerances.rtol", 1e-8, lo=0.0, hi=0.1, open_lo=True)
    atol = _real(tol, "atol", "run.tolerances.atol", 1e-10, lo=0.0, hi=0.1, open_lo=True)
    return RunConfig(
        potential=V0, targets=targets, mode=mode,
        scale=_real(m, "scale", "mode.scale", 1.0, lo=0.0),
        spacing=_real(m, "spacing", "mode.spacing", 50.0, lo=0.0, open_lo=True),
        epsilon_safety=_real(m, "epsilon_safety", "mode.epsilon_safety", 0.5, lo=0.0, hi=1.0,
                             open_lo=True),
        s3_delta=s3, h=_h(doc),
        n_max=_int(b, "n_max", "bands.n_max", 3, lo=1),
        x_max=_real(r, "x_max", "run.x_max", 1.0e4, lo=0.0, open_lo=True),
        grid_step=_real(r, "grid_step", "run.grid_step", 0.05, lo=0.0, open_lo=True),
        rtol=rtol, atol=atol,
        probes=_int(v, "probes", "verify.probes", 10, lo=0),
        probe_bands=tuple(pb),
        probe_xi=_real(v, "probe_xi", "verify.probe_xi", 0.5, lo=0.0, hi=math.pi),
        margin=_real(v, "margin", "verify.margin", 0.05, lo=0.0),
        tail_fraction=tf,
        slack=_real(v, "slack", "verify.slack", 10.0, lo=0.0),
        lemma_counts=counts, seed=_int(lm, "seed", "lemmas.seed", 1),
        out_dir=out_dir, formats=tuple(fm),
    )


def loads(text: str) -> RunConfig:
    """Parse and validate JSON text."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, line=exc.lineno, column=exc.colno) from exc
    return parse_config(doc)


def load(path) -> RunConfig:
    """Read and validate a configuration file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return loads(text)


def default_config() -> RunConfig:
    """Zero background, no targets (enough for the lemma suite)."""
    return RunConfig(potential=PeriodicPotential.zero())
