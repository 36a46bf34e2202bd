import json

import pytest

from zeronoise.cli import main, read_config_file


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_params_text(capsys):
    code, out, _ = _run(capsys, "params", "--gamma", "0", "--epsilon", "0.01", "--a", "0.5",
                        "--T", "1")
    assert code == 0
    vals = dict(line.split(" = ") for line in out.strip().splitlines())
    assert float(vals["h"]) == pytest.approx(0.1)
    assert float(vals["t_bar"]) == pytest.approx(0.2)
    assert float(vals["alpha"]) == pytest.approx(0.02)


def test_params_json_vacuous(capsys, caplog):
    code, out, _ = _run(capsys, "params", "--gamma", "0.5", "--epsilon", "0.1", "--a", "0.8",
                          "--format", "json")
    assert code == 0
    d = json.loads(out)
    assert d["informative_t_bar"] is False
    assert "vacuous" in caplog.text


def test_selftest(capsys):
    code, _, err = _run(capsys, "selftest")
    assert code == 0
    assert "FAIL" not in err


SMALL = ["--epsilon", "0.1", "--dt", "0.01", "--paths", "20", "--seed", "3"]


def test_simulate_is_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["simulate", *SMALL, "--out", str(a)]) == 0
    assert main(["simulate", *SMALL, "--workers", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rep = json.loads(a.read_text())
    assert rep["config"]["n_paths"] == 20


def test_simulate_outputs(tmp_path, capsys):
    out = tmp_path / "run.csv"
    plot = tmp_path / "plot.csv"
    code = main(["simulate", *SMALL, "--format", "csv", "--out", str(out), "--plot-out",
                 str(plot), "--dump-paths", "2"])
    assert code == 0
    assert out.read_text().startswith("gamma,epsilon")
    assert plot.read_text().startswith("t,H,")
    assert (tmp_path / "run_path1.csv").read_text().startswith("t,x,w,")


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small run\nepsilon = 0.2\ndt = 0.01\npaths = 10\nseed = 9\n")
    assert read_config_file(cfg)["epsilon"] == "0.2"
    out = tmp_path / "r.json"
    assert main(["simulate", "--config", str(cfg), "--paths", "12", "--out", str(out)]) == 0
    c = json.loads(out.read_text())["config"]
    assert c["epsilon"] == 0.2 and c["n_paths"] == 12 and c["seed"] == 9


def test_report_as_config_roundtrip(tmp_path, capsys):
    first = tmp_path / "first.json"
    again = tmp_path / "again.json"
    assert main(["simulate", *SMALL, "--out", str(first)]) == 0
    assert main(["simulate", "--config", str(first), "--out", str(again)]) == 0
    assert first.read_bytes() == again.read_bytes()


@pytest.mark.parametrize("argv", [
    ["simulate", "--gamma", "0.5", "--a", "0.5"],
    ["simulate", "--epsilon", "-1"],
    ["params", "--bogus"],
    ["simulate", "--paths", "3", "--antithetic"],
    ["verify", "--gamma", "0.5", "--a", "0.8"],
])
def test_invalid_usage_exits_2(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 2


def test_bad_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["simulate", "--config", str(cfg)]) == 2


def test_sweep_csv(capsys):
    code, out, _ = _run(capsys, "sweep", "--epsilon", "0.2", "--dt", "0.01", "--paths", "10",
                        "--epsilons", "0.3", "0.2")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 3


def test_verify_small_is_reproducible(tmp_path, capsys):
    argv = ["verify", "--epsilon", "0.05", "--dt", "1e-3", "--paths", "200", "--seed", "1",
            "--pos-dt", "1e-3", "--pos-paths", "50", "--calib-paths", "8"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    code_a = main(argv + ["--out", str(a)])
    code_b = main(argv + ["--out", str(b)])
    assert code_a == code_b
    assert a.read_bytes() == b.read_bytes()
    d = json.loads(a.read_text())
    assert {"ok", "checks", "gamma0_report", "gamma_pos_report"} <= d.keys()
    assert code_a == (0 if d["ok"] else 1)


def test_verbose_flag_either_position(capsys):
    assert main(["-v", "params"]) == 0
    assert main(["params", "-v"]) == 0
