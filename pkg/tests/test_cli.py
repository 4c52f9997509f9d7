import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from fieldclt import cli, reports, svg
from fieldclt.errors import ConfigError

SHORT = ["--kernel", "gaussian", "--d", "1", "--scale", "0.4", "--truncation", "0.6"]


def run(args, tmp_path, name="run"):
    out = tmp_path / name
    code = cli.main(args + ["--out", str(out)])
    return code, out


def test_density_report(tmp_path):
    code, out = run(["density", "--kernel", "bargmann-fock", "--d", "2", "--level", "0",
                     "--R", "4", "--trials", "6", "--seed", "1", "--workers", "1"], tmp_path)
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    est = rep["result"]["estimates"][0]
    assert set(est) >= {"density", "std_error", "trials", "R"}
    assert rep["config"]["R"] == [4] and rep["config"]["seed"] == 1
    assert "out" not in rep["config"] and "workers" not in rep["config"]
    assert "density" in rep["definitions"]
    schema, header, rows = reports.read_csv(out / "density_trials.csv")
    assert schema == "fieldclt.density_trials/v1"
    assert len(rows) == 6
    ET.fromstring((out / "plot.svg").read_text())


def test_workers_do_not_change_results(tmp_path):
    base = ["density", *SHORT, "--R", "6", "--trials", "12", "--seed", "4"]
    _, a = run(base + ["--workers", "1"], tmp_path, "a")
    _, b = run(base + ["--workers", "3"], tmp_path, "b")
    assert (a / "report.json").read_text() == (b / "report.json").read_text()
    assert (a / "density_trials.csv").read_text() == (b / "density_trials.csv").read_text()


def test_sigma_reports_are_byte_identical(tmp_path):
    args = ["sigma", *SHORT, "--R-win", "3", "--outer", "6", "--inner", "3", "--seed", "7"]
    run(args, tmp_path, "one")
    run(args, tmp_path, "two")
    assert (tmp_path / "one" / "report.json").read_bytes() == \
        (tmp_path / "two" / "report.json").read_bytes()


def test_dc_suite_passes(tmp_path):
    code, out = run(["dc-suite", "--instances", "300"], tmp_path)
    assert code == 0
    checks = json.loads((out / "report.json").read_text())["result"]["checks"]
    assert all(checks.values())


def test_threshold_failure_exit_code(tmp_path):
    # 40 trials of a tiny window are nowhere near normal
    code, out = run(["clt-test", *SHORT, "--R", "3", "--trials", "40"], tmp_path)
    assert code == cli.EXIT_THRESHOLD
    assert json.loads((out / "report.json").read_text())["passed"] is False


def test_error_exit_code(tmp_path, capsys):
    code, _ = run(["sigma", "--R-win", "3"], tmp_path)
    assert code == cli.EXIT_ERROR
    assert "error" in capsys.readouterr().err


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[common]\nkernel = gaussian\nd = 1\nscale = 0.4\ntruncation = 0.6\n"
                   "seed = 3\n\n[density]\nR = 5\ntrials = 4\n\n[sigma]\nouter = 9\n")
    c = cli.build_config("density", {"trials": 7}, cfg)
    assert (c.kernel, c.d, c.R, c.trials, c.seed) == ("gaussian", 1, [5], 7, 3)
    assert c.outer == 400  # other sections do not leak
    code, out = run(["density", "--config", str(cfg), "--workers", "1"], tmp_path)
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["config"]["trials"] == 4 and rep["config"]["R"] == [5]


@pytest.mark.parametrize("text,key", [("[common]\nbogus = 1\n", "bogus"),
                                      ("[nonsense]\nR = 4\n", "nonsense"),
                                      ("[sigma]\nR_wn = 4\n", "R_wn"),
                                      ("[common]\nh = abc\n", "h")])
def test_config_errors_name_the_key(tmp_path, text, key):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(text)
    with pytest.raises(ConfigError) as info:
        cli.build_config("density", {}, cfg)
    assert info.value.key == key


def test_invalid_spacing_rejected():
    with pytest.raises(ConfigError):
        cli.build_config("density", {"h": 0.3})


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(reports.OUTPUT_ENV, str(tmp_path / "root"))
    code = cli.main(["nondegen", "--probes", "3", "--seed", "5"])
    assert code == 0
    dirs = list((tmp_path / "root").iterdir())
    assert len(dirs) == 1 and dirs[0].name.startswith("nondegen-")
    assert dirs[0].name.endswith("seed5")


def test_sample_writes_grid(tmp_path):
    code, out = run(["sample", *SHORT, "--R", "3", "--seed", "2"], tmp_path)
    assert code == 0
    assert (out / "field.bin").exists() and (out / "field.bin.json").exists()


def test_moment_verdicts():
    fits = {1: {"slope": 2.1}, 3: {"slope": 6.5}}
    assert cli.moment_verdict("N_c", 2, fits) == {1: True, 3: False}
    assert cli.moment_verdict("N_ES", 2, fits) == {1: True, 3: False}


def test_json_handles_numpy_and_non_finite():
    text = reports.dumps({"a": np.float64(1.5), "b": np.arange(3), "c": float("inf"),
                          "d": (np.int64(2), np.bool_(True))})
    assert json.loads(text) == {"a": 1.5, "b": [0, 1, 2], "c": "inf", "d": [2, True]}


def test_csv_roundtrip(tmp_path):
    path = reports.write_csv(tmp_path / "x.csv", "demo", ["a", "b"], [(1, 0.25), (2, 0.5)])
    assert path.read_text().splitlines()[0] == "# schema: fieldclt.demo/v1"
    schema, header, rows = reports.read_csv(path)
    assert header == ["a", "b"] and rows == [["1", "0.25"], ["2", "0.5"]]


def test_svg_charts_are_well_formed():
    ET.fromstring(svg.line_plot({"s": ([1, 2, 4], [1, 4, 16])}, "t", "x", "y", True, True,
                                errors={"s": [0.1, 0.2, 0.3]}))
    ET.fromstring(svg.qq_plot(np.random.default_rng(0).standard_normal(50)))
    ET.fromstring(svg.heatmap(np.array([[1.0, np.nan], [2.0, 3.0]]), [0, 1], [0, 1], "<&>"))
