"""Command-line runner for configured experiments.

Every subcommand reads one configuration file, writes its artifacts into
``--out`` atomically and returns one of the exit codes below.

=====  ==========================================
code   meaning
=====  ==========================================
0      every verdict passed
1      an asserted inequality failed
2      a decay hypothesis is unmet on the window
3      no counterexample exists (Herman observable)
64     malformed configuration
=====  ==========================================
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, config, kernels
from .averaging import Interval, SequenceWeight
from .errors import (ConfigError, ErgodiffError, HypothesisUnmetError, NoCounterexampleError,
                     UnsupportedError)
from .gauge import (InvariantMeasureCatalog, default_battery, default_gauge_params,
                    gauge_orbit_oracle, gauge_supnorm, herman_check, unique_ergodicity_probe)
from .measure import lebesgue_grid
from .tsd import COLUMN_HELP, ROUND_TOL, TRACE_COLUMNS, build_counterexample, decay_check, run_tsd

EXIT_OK, EXIT_FAIL, EXIT_UNMET, EXIT_NO_CE, EXIT_CONFIG = 0, 1, 2, 3, 64

log = logging.getLogger("ergodiff")


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def _jsonable(obj):
    """Plain JSON types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, complex):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_atomic(path, text):
    """Write UTF-8 text through a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise




@dataclass
class RunSummary:
    """Verdicts and numbers of one command; ``timing`` holds wall-clock only."""

    command: str
    config_hash: str
    seeds: dict
    tolerances: dict
    verdicts: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    exit_code: int = 0
    timing: dict = field(default_factory=dict)

    def to_dict(self):
        return {"command": self.command, "config_hash": self.config_hash, "seeds": self.seeds,
                "tolerances": self.tolerances, "verdicts": self.verdicts,
                "results": self.results, "exit_code": self.exit_code, "timing": self.timing,
                "version": __version__}


def _summary(cmd, cfg):
    return RunSummary(cmd, cfg.config_hash(), {"seed": cfg.seed()}, cfg.tolerances())


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _decay_inputs(cfg, system):
    tol = cfg.tolerances()
    weight = config.build_weight(cfg, system)
    weights = weight if isinstance(weight, SequenceWeight) else None
    return tol["deltas"], tol["decay_threshold"], weights


def cmd_decay_check(cfg, out):
    summary = _summary("decay-check", cfg)
    system = config.build_system(cfg)
    schedule = config.build_schedule(cfg)
    family = config.build_family(cfg)
    X = config.base_points(cfg, system)
    deltas, threshold, weights = _decay_inputs(cfg, system)
    report = decay_check(system, schedule, family, X[0], deltas, config.window(cfg), weights,
                         threshold)
    summary.verdicts["decay"] = "pass" if report.passed else "hypothesis-unmet"
    summary.results["decay"] = report.to_dict()
    summary.exit_code = EXIT_OK if report.passed else EXIT_UNMET
    return summary


def cmd_run_tsd(cfg, out):
    summary = _summary("run-tsd", cfg)
    system = config.build_system(cfg)
    model = config.build_measure(cfg, system)
    schedule = config.build_schedule(cfg)
    family = config.build_family(cfg)
    f = config.build_observable(cfg, system)
    w = config.build_weight(cfg, system)
    X = config.base_points(cfg, system)
    ks = config.window(cfg)
    deltas, threshold, weights = _decay_inputs(cfg, system)
    tol = cfg.tolerances()

    report = decay_check(system, schedule, family, X[0], deltas, ks, weights, threshold)
    summary.results["decay"] = {"tail_max": report.tail_max, "passed": report.passed}
    if not report.passed:
        log.info("decay hypothesis unmet: tail fractions %s", report.tail_max)
        summary.verdicts["decay"] = "hypothesis-unmet"
        summary.exit_code = EXIT_UNMET
        return summary
    summary.verdicts["decay"] = "pass"

    quad = 0.0
    if f.holder is not None:
        quad = model.quadrature_tol(f.holder[0]) or 0.0
    summary.tolerances["quadrature"] = quad
    allowed = tol["bound"] + quad
    worst = EXIT_OK
    traces = []
    for i in range(X.shape[0]):
        trace = run_tsd(system, model, schedule, family, X[i], f, w, ks=ks)
        bad = trace.bound_violations(allowed)
        write_atomic(Path(out) / f"trace_{i}.csv", trace.to_csv())
        has_bound = any(r.bound is not None for r in trace.rows)
        verdict = "no-bound" if not has_bound else ("pass" if not bad else "bound-violated")
        summary.verdicts[f"bound_{i}"] = verdict
        last = trace.rows[-1]
        traces.append({"base_point": X[i].tolist(), "violations": len(bad),
                       "final_gap": last.gap, "final_bound": last.bound,
                       "final_spatial": complex(last.spatial),
                       "final_pointwise": complex(last.pointwise)})
        if bad:
            log.warning("base point %d: %d bound violations", i, len(bad))
            worst = EXIT_FAIL
    summary.results["traces"] = traces
    summary.exit_code = worst
    return summary


def cmd_gauge(cfg, out):
    summary = _summary("gauge", cfg)
    system = config.build_system(cfg)
    f = config.build_observable(cfg, system)
    g = cfg.section("gauge")
    tol = cfg.tolerances()
    k0, grid0 = default_gauge_params(system)
    k, grid = int(g.get("k", k0)), int(g.get("grid", grid0))
    est = gauge_supnorm(system, Interval(), f, k, grid)
    res = {"estimate": est.to_dict()}
    ok = True
    try:
        oracle = gauge_orbit_oracle(system, f, int(g.get("max_period", 12)))
        res["orbit_lower_bound"] = oracle
        res["estimate"]["lower_bound"] = oracle
        # periodic orbits bound the gauge from below, the grid sup from above
        slack = (est.budget or 0.0) + tol["bound"]
        ok = oracle <= est.value + slack
        summary.verdicts["oracle_consistent"] = "pass" if ok else "fail"
    except UnsupportedError:
        res["orbit_lower_bound"] = None
    if g.get("herman", True):
        try:
            catalog = InvariantMeasureCatalog.for_system(system)
            h = herman_check(system, f, catalog, tol["herman"], k, grid)
            res["herman"] = h.to_dict()
            summary.verdicts["herman"] = h.herman
        except UnsupportedError as exc:
            res["herman"] = {"unsupported": str(exc)}
    if g.get("ue_probe", False):
        model = (config.build_measure(cfg, system) if "measure" in cfg.data
                 else lebesgue_grid(4096, system.space_dim))
        battery = default_battery(system.space_dim, int(g.get("battery_size", 20)))
        ue = unique_ergodicity_probe(system, battery, model, tol["ue"], k, grid)
        res["unique_ergodicity"] = ue.to_dict()
        summary.verdicts["unique_ergodicity"] = ue.verdict
    summary.results = res
    write_atomic(Path(out) / "verdict.json", dumps_json(res))
    summary.exit_code = EXIT_OK if ok else EXIT_FAIL
    return summary


def cmd_counterexample(cfg, out):
    summary = _summary("counterexample", cfg)
    system = config.build_system(cfg)
    model = config.build_measure(cfg, system)
    schedule = config.build_schedule(cfg)
    f = config.build_observable(cfg, system)
    c = cfg.section("counterexample")
    ks = config.window(cfg)
    tol = float(c.get("tol", 1e-3))
    shrink = bool(c.get("shrink", False))
    try:
        plan = build_counterexample(system, model, schedule, f, grid=c.get("grid"),
                                    shrink=shrink, k_max=ks[-1], L=c.get("L"), M=c.get("M"),
                                    tol=tol, gauge_k=c.get("gauge_k"),
                                    max_period=int(c.get("max_period", 10)))
    except NoCounterexampleError as exc:
        summary.verdicts["counterexample"] = "no-counterexample"
        summary.results["reason"] = str(exc)
        summary.exit_code = EXIT_NO_CE
        return summary
    write_atomic(Path(out) / "trace.csv", plan.trace.to_csv())
    plan_d = plan.to_dict()
    plan_d["regions"] = plan.regions
    plan_d["kinds"] = plan.kinds
    write_atomic(Path(out) / "plan.json", dumps_json(plan_d))
    need = (plan.M - plan.L) - 2 * tol
    ok = plan.oscillation >= need
    summary.verdicts["oscillation"] = "pass" if ok else "fail"
    if shrink:
        mu = plan.mu
        capped = all(m <= 1.0 / k + ROUND_TOL for k, m in zip(ks, mu))
        mono = all(b <= a for a, b in zip(mu, mu[1:]))
        summary.verdicts["shrink_cap"] = "pass" if capped else "fail"
        summary.verdicts["shrink_monotone"] = "pass" if mono else "fail"
        ok = ok and capped and mono
    summary.results = {k: v for k, v in plan.to_dict().items()}
    summary.results["required_oscillation"] = need
    summary.exit_code = EXIT_OK if ok else EXIT_FAIL
    return summary


COMMANDS = {
    "run-tsd": cmd_run_tsd,
    "decay-check": cmd_decay_check,
    "gauge": cmd_gauge,
    "counterexample": cmd_counterexample,
}


def cmd_sweep(cfg, out):
    summary = _summary("sweep", cfg)
    sub = cfg.section("sweep")["command"]
    keys = sorted(cfg.section("sweep")["grid"])
    points = []
    codes = []
    for i, point in enumerate(config.sweep_points(cfg)):
        d = Path(out) / f"point_{i:03d}"
        s = _run_one(sub, point, d)
        codes.append(s.exit_code)
        points.append({"index": i, "values": {k: _lookup(point.data, k) for k in keys},
                       "exit_code": s.exit_code, "verdicts": s.verdicts})
    summary.results["points"] = points
    summary.verdicts = {f"point_{p['index']:03d}": p["exit_code"] for p in points}
    summary.exit_code = _worst(codes)
    return summary


def _lookup(data, dotted):
    sec, name = dotted.split(".", 1)
    return data.get(sec, {}).get(name)


def _worst(codes):
    for c in (EXIT_FAIL, EXIT_UNMET, EXIT_NO_CE):
        if c in codes:
            return c
    return EXIT_OK


def _run_one(cmd, cfg, out):
    t0 = time.perf_counter()
    try:
        summary = COMMANDS[cmd](cfg, out)
    except HypothesisUnmetError as exc:
        summary = _summary(cmd, cfg)
        summary.verdicts["decay"] = "hypothesis-unmet"
        summary.results["reason"] = str(exc)
        summary.exit_code = EXIT_UNMET
    summary.timing["wall_clock_s"] = time.perf_counter() - t0
    summary.timing["backend"] = kernels.BACKEND
    write_atomic(Path(out) / "summary.json", dumps_json(summary.to_dict()))
    return summary


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _columns_help():
    lines = ["trace CSV columns (RFC 4180, one row per k):"]
    for c in TRACE_COLUMNS:
        lines.append(f"  {c:<13} {COLUMN_HELP[c]}")
    lines += ["", "exit codes: 0 pass, 1 assertion failure, 2 hypothesis unmet,",
              "            3 no counterexample, 64 malformed config",
              "", "ERGODIFF_LOG sets verbosity (DEBUG, INFO, WARNING, ERROR).",
              "Configs may be TOML or JSON; 'demo:NAME' loads a bundled demo."]
    return "\n".join(lines)


def build_parser():
    fmt = argparse.RawDescriptionHelpFormatter
    p = argparse.ArgumentParser(prog="ergodiff", description="Run temporo-spatial "
                                "differentiation experiments from a config file.",
                                epilog=_columns_help(), formatter_class=fmt)
    p.add_argument("--version", action="version", version=f"ergodiff {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    docs = {
        "run-tsd": "trace spatial averages of temporal averages against the Holder bound",
        "gauge": "estimate the gauge, its periodic-orbit lower bound and the Herman verdict",
        "counterexample": "build oscillating regions for a non-Herman observable",
        "decay-check": "test the diameter-decay hypothesis on the window",
        "sweep": "run a command over a Cartesian grid of config values",
    }
    for name, doc in docs.items():
        sp = sub.add_parser(name, help=doc, description=doc, epilog=_columns_help(),
                            formatter_class=fmt)
        sp.add_argument("--config", required=True, metavar="PATH",
                        help="TOML or JSON config, or demo:NAME")
        sp.add_argument("--out", metavar="DIR", default=None,
                        help="artifact directory (default: [output] dir or ./ergodiff-out)")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--threads", type=int, default=None,
                        help="kernel threads; never changes numeric output")
        sp.add_argument("--k-max", type=int, default=None, dest="k_max",
                        help="override the end of the k window")
    return p


def _setup_logging():
    level = os.environ.get("ERGODIFF_LOG", "WARNING").upper()
    if level.isdigit():
        num = int(level)
    else:
        num = getattr(logging, level, logging.WARNING)
    logging.basicConfig(level=num, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        kernels.set_num_threads(max(1, args.threads))
    try:
        cfg = config.load(args.config, args.command).with_overrides(args.seed, args.k_max)
        if args.k_max is not None or args.seed is not None:
            config.validate(cfg, args.command)
    except ConfigError as exc:
        print(f"ergodiff: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.section("output").get("dir", "ergodiff-out")
    log.info("running %s on %s into %s", args.command, args.config, out)
    try:
        if args.command == "sweep":
            t0 = time.perf_counter()
            summary = cmd_sweep(cfg, out)
            summary.timing["wall_clock_s"] = time.perf_counter() - t0
            write_atomic(Path(out) / "summary.json", dumps_json(summary.to_dict()))
        else:
            summary = _run_one(args.command, cfg, out)
    except ConfigError as exc:
        print(f"ergodiff: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ErgodiffError as exc:
        print(f"ergodiff: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"{args.command}: exit {summary.exit_code} "
          + " ".join(f"{k}={v}" for k, v in sorted(summary.verdicts.items())))
    return summary.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
