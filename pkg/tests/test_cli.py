from __future__ import annotations

import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speedmeter.cli import (
    ConfigError,
    RunConfig,
    config_to_dict,
    emit_csv,
    execute,
    main,
    parse_config,
    run,
    serialize,
)
from speedmeter.spectra import SpectrumResult


def read_csv(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_defaults_filled():
    cfg = parse_config('{"scenario":"speedMeter","gamma":1}')
    assert cfg.readout.angle == "opt" and cfg.readout.feedforward == "wiener"
    assert (cfg.grid.type, cfg.grid.min, cfg.grid.max, cfg.grid.points) == ("log", 1e-3, 10.0, 400)
    assert cfg.inputs == {} and cfg.kappaC is None and cfg.route == "firstPrinciples"
    assert cfg.noise().states == {}


@pytest.mark.parametrize(
    "doc, path",
    [
        ('{"gamma":-1}', "gamma"),
        ('{"gamma":1,"foo":1}', "foo"),
        ('{"grid":{"min":2,"max":1}}', "grid.min"),
        ('{"grid":{"points":1}}', "grid.points"),
        ('{"grid":{"points":0}}', "grid.points"),
        ('{"grid":{"step":1}}', "grid.step"),
        ('{"readout":{"feedforward":"maybe"}}', "readout.feedforward"),
        ('{"inputs":{"a":{"kind":"squeezed"}}}', "inputs.a.r"),
        ('{"inputs":{"a":{"kind":"squeezed","r":1,"theta":4}}}', "inputs.a.theta"),
        ('{"inputs":{"q":{}}}', "inputs.q"),
        ('{"scenario":"other"}', "scenario"),
        ('{"kappaC":0}', "kappaC"),
        ('{"gamma":"1"}', "gamma"),
        ("{not json", "config"),
        ("[1,2]", "config"),
    ],
)
def test_config_errors_name_field(doc, path):
    with pytest.raises(ConfigError) as err:
        parse_config(doc)
    assert err.value.path == path


def test_physical_units_conversion():
    kappa = 2 * np.pi * 1e5
    theta = 8 * kappa**3 * 1.5
    cfg = parse_config(json.dumps({"physical": {"mass": 1e-3, "kappa": kappa, "theta": theta},
                                   "grid": {"min": 2 * kappa * 0.01, "max": 2 * kappa * 5}}))
    assert cfg.gamma == pytest.approx(1.5)
    assert cfg.grid.min == pytest.approx(0.01) and cfg.grid.max == pytest.approx(5)
    with pytest.raises(ConfigError):
        parse_config('{"gamma":1,"physical":{"mass":1,"kappa":1,"theta":1}}')


finite = st.floats(1e-3, 1e3, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(
    st.sampled_from(["speedMeter", "positionMeter", "compare", "consistency"]),
    finite,
    st.floats(1e-4, 1.0),
    st.floats(1.5, 50.0),
    st.integers(2, 1000),
    st.sampled_from(["off", "closed-form", "wiener"]),
    st.one_of(st.none(), st.floats(20.0, 1e4)),
    st.one_of(st.none(), st.floats(0, 2), st.floats(0, 3.14)),
)
def test_round_trip(scenario, gamma, lo, hi, n, ff, kc, r):
    doc = {"scenario": scenario, "gamma": gamma, "grid": {"min": lo, "max": hi, "points": n},
           "readout": {"feedforward": ff}}
    if kc is not None:
        doc["kappaC"] = kc
    if r is not None:
        doc["inputs"] = {"a": {"kind": "squeezed", "r": r, "theta": 0.5}}
    cfg = parse_config(json.dumps(doc))
    assert parse_config(serialize(cfg)) == cfg
    assert serialize(parse_config(serialize(cfg))) == serialize(cfg)


def test_speed_meter_csv_schema_and_values():
    cfg = parse_config('{"gamma":1,"grid":{"points":25}}')
    result = execute(cfg)
    text = emit_csv(result, cfg)
    assert text.startswith("# speedmeter")
    assert "# config: " in text
    rows = read_csv(text)
    assert list(rows[0]) == ["omega", "S_total", "S_from_a", "S_from_b", "S_from_c", "signal_power"]
    assert len(rows) == 25
    # 17-digit printing round-trips exactly
    assert np.array_equal([float(r["S_total"]) for r in rows], result.total)
    assert np.array_equal([float(r["omega"]) for r in rows], result.omegas)


def test_compare_csv():
    cfg = parse_config('{"scenario":"compare","gamma":1}')
    rows = read_csv(emit_csv(execute(cfg), cfg))
    assert list(rows[0]) == ["omega", "S_SM", "S_PM", "verdict"]
    low = [r for r in rows if 0.01 <= float(r["omega"]) <= 0.5]
    assert low and all(r["verdict"] == "SM<PM" for r in low)


def test_consistency_csv():
    cfg = parse_config('{"scenario":"consistency","gamma":1,"grid":{"points":60}}')
    rows = read_csv(emit_csv(execute(cfg), cfg))
    names = [r["check"] for r in rows]
    for prefix in "abcde":
        assert any(n.startswith(prefix + "_") for n in names)
    assert all(r["verdict"] in ("agree", "deviate") for r in rows)
    json.loads(rows[0]["details"])


def test_emit_rejects_unknown():
    with pytest.raises(TypeError):
        emit_csv(object())


def test_run_writes_file_and_is_deterministic(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    cfg = parse_config('{"gamma":0.8,"grid":{"points":30},"inputs":{"a":{"kind":"squeezed","r":0.5,"theta":1.5}}}')
    assert run(cfg, out=str(out1)) == 0
    assert run(cfg, out=str(out2)) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_main_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"gamma":-2}')
    assert main(["simulate", "--config", str(cfg)]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["simulate", "--grid-points", "1"]) == 2
    # a homodyne angle orthogonal to the signal has no force response
    cfg.write_text('{"scenario":"positionMeter","readout":{"angle":1.5707963267948966,"feedforward":"off"}}')
    assert main(["simulate", "--config", str(cfg), "--grid-points", "5"]) == 3
    out = tmp_path / "o.csv"
    assert main(["compare", "--gamma", "1", "--grid-points", "7", "--out", str(out)]) == 0
    assert len(read_csv(out.read_text())) == 7


def test_main_sweep(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--gammas", "0.5,2", "--grid-points", "4", "--out", str(out)]) == 0
    rows = read_csv(out.read_text())
    assert [r["gamma"] for r in rows] == ["0.5"] * 4 + ["2"] * 4


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"gamma":3,"grid":{"points":10}}')
    out = tmp_path / "o.csv"
    assert main(["simulate", "--config", str(cfg), "--gamma", "1", "--grid-points", "6",
                 "--feedforward", "closed-form", "--out", str(out)]) == 0
    text = out.read_text()
    echoed = json.loads(text.splitlines()[1].removeprefix("# config: "))
    assert echoed["gamma"] == 1 and echoed["grid"]["points"] == 6
    assert echoed["readout"]["feedforward"] == "closed-form"
    assert config_to_dict(parse_config(json.dumps(echoed))) == echoed


def test_default_run_config():
    assert isinstance(execute(RunConfig(grid=parse_config('{"grid":{"points":3}}').grid)), SpectrumResult)


def test_separate_processes_emit_identical_bytes(tmp_path):
    import subprocess
    import sys

    outs = []
    for name in ("p1.csv", "p2.csv"):
        path = tmp_path / name
        subprocess.run(
            [sys.executable, "-m", "speedmeter", "compare", "--gamma", "1.3", "--grid-points", "40", "--out", str(path)],
            check=True,
        )
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
