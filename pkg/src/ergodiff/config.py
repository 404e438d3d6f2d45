"""Experiment configuration: TOML (or JSON) files with nested tables.

A configuration is a plain nested mapping with a fixed set of top-level
tables.  Parsing validates the tables, ``serialize`` writes them back, and
the ``build_*`` helpers resolve descriptors into engine objects.

Example
-------
::

    [system]
    kind = "rotation"
    alpha = 0.6180339887498949

    [measure]
    kind = "quadrature"
    n = 4096

    [schedule]
    kind = "interval"

    [family]
    schedule = "power"
    s = 2.0
    base_points = [[0.3]]

    [observable]
    kind = "character"
    n = [1]

    [window]
    k_max = 200
"""
from __future__ import annotations

import copy
import hashlib
import json
import re
import sys as _sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import tomli_w

if _sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import averaging, dynamics, measure, observables
from .errors import ConfigError, ErgodiffError

SECTIONS = ("experiment", "system", "measure", "schedule", "family", "observable", "weight",
            "window", "tolerances", "gauge", "counterexample", "sweep", "output")

# tables each command cannot do without
REQUIRED = {
    "run-tsd": ("system", "measure", "schedule", "family", "observable", "window"),
    "decay-check": ("system", "schedule", "family", "window"),
    "gauge": ("system", "observable"),
    "counterexample": ("system", "measure", "schedule", "observable", "window"),
    "sweep": ("sweep",),
}

DEFAULT_TOLERANCES = {
    "bound": 1e-12,
    "decay_threshold": 0.01,
    "deltas": [0.1, 0.01],
    "herman": 1e-3,
    "ue": 0.01,
}


@dataclass
class ExperimentConfig:
    """Validated configuration tables plus the text they came from."""

    data: dict
    source: str = ""
    fmt: str = "toml"
    path: str | None = field(default=None, compare=False)

    def __getitem__(self, name):
        return self.data[name]

    def get(self, name, default=None):
        return self.data.get(name, default)

    def section(self, name):
        return self.data.get(name, {})

    def tolerances(self):
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(self.section("tolerances"))
        return tol

    def config_hash(self):
        """SHA-256 of the canonical JSON encoding of the tables."""
        blob = json.dumps(self.data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def with_overrides(self, seed=None, k_max=None):
        data = copy.deepcopy(self.data)
        if seed is not None:
            data.setdefault("experiment", {})["seed"] = int(seed)
            if "measure" in data and data["measure"].get("kind") == "monte-carlo":
                data["measure"]["seed"] = int(seed)
        if k_max is not None:
            data.setdefault("window", {})["k_max"] = int(k_max)
            data["window"].pop("ks", None)
        return ExperimentConfig(data, self.source, self.fmt, self.path)

    def seed(self):
        m = self.section("measure")
        if "seed" in m:
            return int(m["seed"])
        return int(self.section("experiment").get("seed", 0))


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOML_LINE = re.compile(r"at line (\d+)")


def _locate(text, section, key=None, fmt="toml"):
    """Best-effort line number of ``section.key`` (or of the section) in ``text``."""
    lines = text.splitlines()
    if fmt == "json":
        target = f'"{key if key is not None else section}"'
        for i, ln in enumerate(lines, 1):
            if target in ln:
                return i
        return None
    head = re.compile(r"^\s*\[\s*" + re.escape(section) + r"\s*\]")
    start = None
    for i, ln in enumerate(lines, 1):
        if head.match(ln):
            start = i
            if key is None:
                return i
        elif start is not None and key is not None:
            if re.match(r"^\s*\[", ln):
                break
            if re.match(r"^\s*\"?" + re.escape(key) + r"\"?\s*=", ln):
                return i
    return start


def parse_text(text, fmt="toml", command=None, path=None) -> ExperimentConfig:
    """Parse and validate configuration text.

    Raises
    ------
    ConfigError
        With the line and field of the first problem found.
    """
    if fmt == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, line=exc.lineno) from None
    else:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            m = _TOML_LINE.search(str(exc))
            raise ConfigError(str(exc).split(" (at")[0],
                              line=int(m.group(1)) if m else None) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be a table", line=1)
    cfg = ExperimentConfig(data, text, fmt, path)
    validate(cfg, command)
    return cfg


def load(path, command=None) -> ExperimentConfig:
    """Read a ``.toml`` or ``.json`` file, or a bundled demo named ``demo:NAME``."""
    p = str(path)
    if p.startswith("demo:"):
        name = p[5:]
        res = resources.files("ergodiff") / "demos" / f"{name}.toml"
        if not res.is_file():
            raise ConfigError(f"no bundled demo named {name!r}")
        return parse_text(res.read_text(encoding="utf-8"), "toml", command, p)
    try:
        text = Path(p).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc.strerror}") from None
    fmt = "json" if p.endswith(".json") else "toml"
    return parse_text(text, fmt, command, p)


def serialize(cfg: ExperimentConfig, fmt="toml") -> str:
    if fmt == "json":
        return json.dumps(cfg.data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    return tomli_w.dumps(cfg.data)


def demo_names():
    root = resources.files("ergodiff") / "demos"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def _err(cfg, msg, section, key=None):
    name = section if key is None else f"{section}.{key}"
    return ConfigError(msg, field=name, line=_locate(cfg.source, section, key, cfg.fmt))


def _need(cfg, section, key):
    tab = cfg.section(section)
    if key not in tab:
        raise _err(cfg, "missing required field", section, key)
    return tab[key]


def _kind(cfg, section, allowed):
    kind = _need(cfg, section, "kind")
    if kind not in allowed:
        raise _err(cfg, f"unknown kind {kind!r}; expected one of {sorted(allowed)}",
                   section, "kind")
    return kind


def validate(cfg: ExperimentConfig, command=None):
    """Check table names, required tables and that every descriptor resolves."""
    for name, val in cfg.data.items():
        if name not in SECTIONS:
            raise _err(cfg, "unknown table", name)
        if not isinstance(val, dict):
            raise _err(cfg, "expected a table", name)
    if command is None:
        command = cfg.section("experiment").get("command")
    for name in REQUIRED.get(command, ()):
        if name not in cfg.data:
            raise ConfigError("missing required table", field=name, line=None)
    if command == "sweep":
        _validate_sweep(cfg)
        return
    # resolving checks kinds, keys and values
    try:
        if "system" in cfg.data:
            system = build_system(cfg)
            if "observable" in cfg.data:
                build_observable(cfg, system)
            if "weight" in cfg.data:
                build_weight(cfg, system)
            if "family" in cfg.data:
                base_points(cfg, system)
        if "schedule" in cfg.data:
            build_schedule(cfg)
        if "family" in cfg.data:
            build_family(cfg)
        if "window" in cfg.data:
            window(cfg)
        if "measure" in cfg.data:
            _kind(cfg, "measure", {"quadrature", "monte-carlo"})
            _need(cfg, "measure", "n")
    except ConfigError:
        raise
    except (ErgodiffError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def _validate_sweep(cfg):
    sw = cfg.section("sweep")
    cmd = _need(cfg, "sweep", "command")
    if cmd not in ("run-tsd", "decay-check", "gauge", "counterexample"):
        raise _err(cfg, f"cannot sweep command {cmd!r}", "sweep", "command")
    grid = _need(cfg, "sweep", "grid")
    if not isinstance(grid, dict) or not grid:
        raise _err(cfg, "grid must be a nonempty table of lists", "sweep", "grid")
    for key, vals in grid.items():
        if not isinstance(vals, list) or not vals:
            raise _err(cfg, f"grid entry {key!r} must be a nonempty list", "sweep", "grid")
        if "." not in key or key.split(".", 1)[0] not in SECTIONS:
            raise _err(cfg, f"grid key {key!r} must be 'table.field'", "sweep", "grid")
    for point in sweep_points(cfg):
        validate(point, cmd)
    _ = sw


def sweep_points(cfg: ExperimentConfig):
    """Configurations of the Cartesian grid, in row-major order of the keys."""
    import itertools

    grid = cfg.section("sweep")["grid"]
    keys = sorted(grid)
    base = {k: v for k, v in cfg.data.items() if k != "sweep"}
    out = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        data = copy.deepcopy(base)
        for key, val in zip(keys, combo):
            sec, name = key.split(".", 1)
            data.setdefault(sec, {})[name] = val
        out.append(ExperimentConfig(data, cfg.source, cfg.fmt, cfg.path))
    return out


# ---------------------------------------------------------------------------
# descriptor resolution
# ---------------------------------------------------------------------------

def build_system(cfg):
    s = cfg.section("system")
    kind = _kind(cfg, "system", {"rotation", "translation", "doubling", "shift", "trivial"})
    if kind == "rotation":
        return dynamics.Rotation(float(_need(cfg, "system", "alpha")))
    if kind == "translation":
        return dynamics.TorusTranslation(np.asarray(_need(cfg, "system", "vectors"), float))
    if kind == "doubling":
        return dynamics.DoublingMap(int(s.get("dim", 1)), int(s.get("max_index", 48)))
    if kind == "shift":
        return dynamics.FullShift(int(s.get("symbols", 2)))
    return dynamics.TrivialAction(int(s.get("dim", 1)), int(s.get("group_dim", 1)))


def build_measure(cfg, system, seed=None):
    m = cfg.section("measure")
    kind = _kind(cfg, "measure", {"quadrature", "monte-carlo"})
    n = int(_need(cfg, "measure", "n"))
    if seed is None:
        seed = int(m.get("seed", cfg.section("experiment").get("seed", 0)))
    if system.space == "symbolic":
        symbols = system.symbols
        p = m.get("p")
        if kind == "quadrature":
            return measure.bernoulli_words(n, symbols, p)
        return measure.bernoulli_monte_carlo(n, int(m.get("width", 16)), symbols, p, seed)
    nodes = int(m.get("local_nodes", 64)) or None
    if kind == "quadrature":
        return measure.lebesgue_grid(n, system.space_dim, nodes)
    return measure.lebesgue_monte_carlo(n, system.space_dim, seed, nodes)


def build_schedule(cfg):
    s = cfg.section("schedule")
    kind = _kind(cfg, "schedule", {"interval", "box", "polynomial", "list"})
    if kind == "interval":
        return averaging.Interval(int(s.get("start", 0)))
    if kind == "box":
        return averaging.Box(int(s.get("dim", 2)))
    if kind == "polynomial":
        return averaging.PolynomialImage([float(c) for c in _need(cfg, "schedule", "coeffs")])
    return averaging.ExplicitList(_need(cfg, "schedule", "sets"), int(s.get("dim", 1)))


def build_family(cfg):
    f = cfg.section("family")
    sched = f.get("schedule", "power")
    try:
        return measure.SpatialFamily(sched, f.get("r0", 1.0), f.get("s", 1.0), f.get("q", 0.5),
                                     f.get("a", 1.0), f.get("radii"))
    except ErgodiffError as exc:
        raise _err(cfg, str(exc), "family", "schedule") from None


def base_points(cfg, system):
    """Base points of the family as an ``(n, D)`` array in the system's space."""
    pts = cfg.section("family").get("base_points")
    if pts is None:
        raise _err(cfg, "missing required field", "family", "base_points")
    if not isinstance(pts, list) or not pts:
        raise _err(cfg, "base_points must be a nonempty list of points", "family", "base_points")
    try:
        return system.as_points(np.asarray(pts))
    except ErgodiffError as exc:
        raise _err(cfg, str(exc), "family", "base_points") from None


def _complex_list(vals):
    out = []
    for v in vals:
        if isinstance(v, list):
            out.append(complex(float(v[0]), float(v[1])))
        else:
            out.append(complex(float(v)))
    return out


def _observable_from(cfg, section, tab, system):
    kind = tab.get("kind")
    allowed = {"trig", "character", "cosine", "sine", "cylinder", "coordinate", "constant"}
    if kind not in allowed:
        raise _err(cfg, f"unknown or missing observable kind {kind!r}", section, "kind")
    space = system.space
    if kind in ("cylinder", "coordinate") and space != "symbolic":
        raise _err(cfg, f"{kind} observables live on shift spaces", section, "kind")
    if kind in ("trig", "character", "cosine", "sine") and space != "torus":
        raise _err(cfg, f"{kind} observables live on tori", section, "kind")
    if kind == "constant":
        return observables.Constant(_complex_list([tab.get("value", 0.0)])[0], space)
    if kind == "trig":
        if "freqs" not in tab or "coeffs" not in tab:
            raise _err(cfg, "trig observables need freqs and coeffs", section,
                       "freqs" if "freqs" not in tab else "coeffs")
        return observables.TrigPolynomial(np.asarray(tab["freqs"], dtype=np.int64),
                                          _complex_list(tab["coeffs"]))
    if kind == "character":
        n = tab.get("n", [1])
        coeff = _complex_list([tab.get("coeff", 1.0)])[0]
        return observables.TrigPolynomial.character(np.asarray(n, np.int64), len(n), coeff)
    if kind in ("cosine", "sine"):
        n = int(tab.get("n", 1))
        amp = float(tab.get("amplitude", 1.0))
        off = float(tab.get("offset", 0.0))
        if kind == "cosine":
            return observables.TrigPolynomial.cosine(n, amp, off)
        # a sin(2 pi n x) = (a/2i) e(nx) - (a/2i) e(-nx)
        c = amp / 2j
        f = observables.TrigPolynomial([[n], [-n]], [c, -c])
        return f + off if off else f
    if kind == "coordinate":
        return observables.Cylinder.coordinate(system.symbols, int(tab.get("position", 0)))
    if "positions" not in tab or "table" not in tab:
        raise _err(cfg, "cylinder observables need positions and table", section,
                   "positions" if "positions" not in tab else "table")
    return observables.Cylinder(tab["positions"], tab["table"], system.symbols)


def build_observable(cfg, system):
    f = _observable_from(cfg, "observable", cfg.section("observable"), system)
    scale = cfg.section("observable").get("scale")
    if scale is not None:
        f = f * float(scale)
    return f


def build_weight(cfg, system):
    w = cfg.section("weight")
    if not w:
        return averaging.UNIT
    kind = _kind(cfg, "weight", {"unit", "theta", "sequence", "function"})
    if kind == "unit":
        return averaging.UNIT
    if kind == "theta":
        if "phase" in w:
            return averaging.ConstantTheta(phase=float(w["phase"]))
        if "alpha_multiple" in w:
            # theta = e^{2 pi i m alpha} for rotations, resonant when m = -1
            alpha = float(system.vectors[0, 0])
            return averaging.ConstantTheta(phase=float(w["alpha_multiple"]) * alpha)
        return averaging.ConstantTheta(_complex_list([_need(cfg, "weight", "theta")])[0])
    if kind == "sequence":
        vals = np.asarray(_complex_list(_need(cfg, "weight", "values")))
        return averaging.SequenceWeight(vals, w.get("declared_bound"))
    xi_tab = _need(cfg, "weight", "xi")
    if not isinstance(xi_tab, dict):
        raise _err(cfg, "xi must be an observable table", "weight", "xi")
    xi = _observable_from(cfg, "weight", xi_tab, system)
    return averaging.FunctionWeight(xi)


def window(cfg):
    """Sorted list of indices ``k`` of the window."""
    w = cfg.section("window")
    if "ks" in w:
        ks = sorted({int(k) for k in w["ks"]})
    else:
        k_max = int(_need(cfg, "window", "k_max"))
        ks = list(range(int(w.get("k_min", 1)), k_max + 1))
    if not ks or ks[0] < 1:
        raise _err(cfg, "window must contain positive indices", "window")
    return ks
