import json
import os
import subprocess
import sys
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ergodiff import cli, config, kernels
from ergodiff.errors import ConfigError
from ergodiff.tsd import TRACE_COLUMNS

GOLDEN_DIR = Path(__file__).parent / "golden"

MINIMAL = """\
[experiment]
command = "run-tsd"

[system]
kind = "rotation"
alpha = 0.25

[measure]
kind = "quadrature"
n = 256

[schedule]
kind = "interval"

[family]
schedule = "power"
s = 3.0
base_points = [[0.3]]

[observable]
kind = "character"
n = [1]

[window]
k_max = 10
"""


def _summary(out):
    return json.loads((Path(out) / "summary.json").read_text())


# -- parsing -----------------------------------------------------------------

def test_round_trip_toml_and_json():
    cfg = config.parse_text(MINIMAL)
    again = config.parse_text(config.serialize(cfg))
    assert again.data == cfg.data
    js = config.parse_text(config.serialize(cfg, "json"), "json")
    assert js.data == cfg.data
    assert js.config_hash() == cfg.config_hash()


def test_every_demo_parses_and_round_trips():
    names = config.demo_names()
    assert "rotation_tsd" in names and len(names) >= 8
    for name in names:
        cfg = config.load(f"demo:{name}")
        assert config.parse_text(config.serialize(cfg)).data == cfg.data


def test_missing_field_reports_line_and_field():
    text = MINIMAL.replace('kind = "character"', 'kin = "character"')
    with pytest.raises(ConfigError) as err:
        config.parse_text(text, command="run-tsd")
    assert err.value.field == "observable.kind"
    assert err.value.line == MINIMAL.splitlines().index("[observable]") + 1


def test_missing_table_reported():
    text = MINIMAL.replace("[window]\nk_max = 10\n", "")
    with pytest.raises(ConfigError) as err:
        config.parse_text(text, command="run-tsd")
    assert err.value.field == "window"


def test_unknown_table_and_kind():
    with pytest.raises(ConfigError) as err:
        config.parse_text(MINIMAL + "\n[plot]\nx = 1\n")
    assert err.value.field == "plot"
    with pytest.raises(ConfigError) as err:
        config.parse_text(MINIMAL.replace('"rotation"', '"baker"'))
    assert err.value.field == "system.kind"
    assert err.value.line == 5


def test_toml_syntax_error_has_line():
    with pytest.raises(ConfigError) as err:
        config.parse_text(MINIMAL.replace("alpha = 0.25", "alpha = = 0.25"))
    assert err.value.line == 6


def test_json_syntax_error_has_line():
    with pytest.raises(ConfigError) as err:
        config.parse_text('{\n  "system": {\n    "kind": }\n}', "json")
    assert err.value.line == 3


def test_overrides():
    cfg = config.parse_text(MINIMAL).with_overrides(seed=9, k_max=3)
    assert cfg.seed() == 9
    assert config.window(cfg) == [1, 2, 3]


def test_sweep_points_cartesian():
    cfg = config.load("demo:rotation_sweep")
    pts = config.sweep_points(cfg)
    assert len(pts) == 4
    assert [p["family"]["s"] for p in pts] == [2.0, 2.0, 3.0, 3.0]


scalars = st.one_of(st.integers(-10 ** 6, 10 ** 6), st.booleans(),
                    st.floats(allow_nan=False, allow_infinity=False),
                    st.text(st.characters(codec="utf-8", exclude_categories=["Cs", "Cc"]),
                            max_size=12))
tables = st.dictionaries(st.from_regex(r"[a-z][a-z_]{0,8}", fullmatch=True),
                         st.one_of(scalars, st.lists(st.integers(-100, 100), max_size=4)),
                         max_size=5)


@given(tables, tables)
def test_round_trip_arbitrary_tables(exp, out):
    cfg = config.ExperimentConfig({"experiment": exp, "output": out})
    for fmt in ("toml", "json"):
        back = config.parse_text(config.serialize(cfg, fmt), fmt)
        assert back.data == cfg.data
        assert back.config_hash() == cfg.config_hash()


# -- command line ------------------------------------------------------------

@pytest.mark.parametrize("cmd,demo,code", [
    ("run-tsd", "rotation_tsd", 0),
    ("run-tsd", "doubling_decay_unmet", 2),
    ("decay-check", "doubling_decay_pass", 0),
    ("counterexample", "shift_counterexample", 0),
    ("counterexample", "rotation_counterexample", 3),
    ("gauge", "doubling_gauge", 0),
    ("gauge", "rotation_gauge", 0),
    ("gauge", "constant_gauge", 0),
    ("sweep", "rotation_sweep", 0),
])
def test_demo_exit_codes(tmp_path, cmd, demo, code):
    out = tmp_path / demo
    assert cli.main([cmd, "--config", f"demo:{demo}", "--out", str(out)]) == code
    s = _summary(out)
    assert s["exit_code"] == code
    assert s["command"] == cmd
    assert len(s["config_hash"]) == 64


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(MINIMAL.replace("k_max = 10", "k_mx = 10"))
    assert cli.main(["run-tsd", "--config", str(bad), "--out", str(tmp_path / "o")]) == 64
    err = capsys.readouterr().err
    assert "window" in err and "line" in err
    assert not (tmp_path / "o").exists()


def test_missing_file_is_config_error(tmp_path):
    assert cli.main(["gauge", "--config", str(tmp_path / "nope.toml")]) == 64


def test_json_config_accepted(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(config.serialize(config.parse_text(MINIMAL), "json"))
    assert cli.main(["run-tsd", "--config", str(path), "--out", str(tmp_path / "o")]) == 0


def test_golden_rotation_trace(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run-tsd", "--config", "demo:rotation_tsd", "--out", str(out)]) == 0
    for i in (0, 1):
        got = (out / f"trace_{i}.csv").read_bytes()
        assert got == (GOLDEN_DIR / f"rotation_tsd_trace_{i}.csv").read_bytes()
    s = _summary(out)
    s.pop("timing")
    s.pop("version")
    assert s == json.loads((GOLDEN_DIR / "rotation_tsd_summary.json").read_text())


def test_threads_do_not_change_artifacts(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["run-tsd", "--config", "demo:rotation_tsd", "--out", str(a), "--threads", "1"])
    try:
        cli.main(["run-tsd", "--config", "demo:rotation_tsd", "--out", str(b), "--threads", "4"])
    finally:
        kernels.set_num_threads(1)
    for name in ("trace_0.csv", "trace_1.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_fallback_backend_reproduces_golden(tmp_path):
    env = dict(os.environ, ERGODIFF_PURE="1")
    out = tmp_path / "pure"
    proc = subprocess.run([sys.executable, "-m", "ergodiff.cli", "run-tsd", "--config",
                           "demo:rotation_tsd", "--out", str(out)], env=env,
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert _summary(out)["timing"]["backend"] == "python"
    assert (out / "trace_0.csv").read_bytes() == \
        (GOLDEN_DIR / "rotation_tsd_trace_0.csv").read_bytes()


def test_seeded_monte_carlo_is_reproducible(tmp_path):
    a, b, c = (tmp_path / n for n in "abc")
    for out, seed in ((a, 5), (b, 5), (c, 6)):
        cli.main(["counterexample", "--config", "demo:shift_counterexample", "--out", str(out),
                  "--seed", str(seed), "--k-max", "40"])
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()
    assert (a / "trace.csv").read_bytes() != (c / "trace.csv").read_bytes()
    assert _summary(a)["seeds"] != _summary(c)["seeds"]


def test_k_max_override(tmp_path):
    out = tmp_path / "o"
    cli.main(["run-tsd", "--config", "demo:rotation_tsd", "--out", str(out), "--k-max", "30"])
    lines = (out / "trace_0.csv").read_text().splitlines()
    assert lines[-1].startswith("30,") and len(lines) == 31


def test_help_lists_every_column(capsys):
    for argv in (["--help"], ["run-tsd", "--help"]):
        with pytest.raises(SystemExit):
            cli.main(argv)
        text = capsys.readouterr().out
        for col in TRACE_COLUMNS:
            assert col in text
        assert "64" in text and "ERGODIFF_LOG" in text


def test_outputs_are_sorted_json_and_crlf_csv(tmp_path):
    out = tmp_path / "o"
    cli.main(["gauge", "--config", "demo:doubling_gauge", "--out", str(out)])
    for name in ("summary.json", "verdict.json"):
        text = (out / name).read_text()
        assert text == cli.dumps_json(json.loads(text))
    cli.main(["run-tsd", "--config", "demo:rotation_tsd", "--out", str(out)])
    raw = (out / "trace_0.csv").read_bytes()
    assert raw.count(b"\r\n") == raw.count(b"\n")
    # nothing but final artifacts is left behind
    assert sorted(p.name for p in out.iterdir()) == \
        ["summary.json", "trace_0.csv", "trace_1.csv", "verdict.json"]


def test_write_atomic_replaces_whole_file(tmp_path):
    p = tmp_path / "f.txt"
    cli.write_atomic(p, "first version\n")
    cli.write_atomic(p, "second\n")
    assert p.read_text() == "second\n"
    assert [x.name for x in tmp_path.iterdir()] == ["f.txt"]


def test_nonfinite_values_serialize():
    text = cli.dumps_json({"b": float("inf"), "a": complex(1, 2)})
    assert json.loads(text) == {"a": [1.0, 2.0], "b": "inf"}


def test_sweep_writes_points(tmp_path):
    out = tmp_path / "s"
    assert cli.main(["sweep", "--config", "demo:rotation_sweep", "--out", str(out),
                     "--k-max", "20"]) == 0
    s = _summary(out)
    assert len(s["results"]["points"]) == 4
    assert all((out / f"point_{i:03d}" / "summary.json").exists() for i in range(4))
