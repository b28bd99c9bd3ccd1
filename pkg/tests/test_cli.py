import csv
import json
import os
import subprocess
import sys

import pytest

from bergman_kit import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_dist_closed_form(capsys):
    code, out, _ = run(capsys, "dist", "--from", "0", "--to", "0.75")
    assert code == 0
    res = json.loads(out)["result"]
    assert res["lower"] <= 2.0 <= res["upper"]
    assert abs(res["estimate"] - 2.0) < 1e-3


def test_weights_check_member(capsys):
    code, out, _ = run(capsys, "weights", "check", "--r", "0.5")
    assert code == 0
    assert json.loads(out)["config"]["weight"]["alpha"] == 1.0


def test_weights_check_non_member_exit_2(capsys):
    code, _, _ = run(capsys, "weights", "check", "--tau-exponent", "0.9")
    assert code == 2


@pytest.mark.parametrize("argv", [["nosuch"], ["dist", "--from", "0"],
                                  ["probe", "--id", "NOPE"], ["weights", "check", "--alpha", "-1"]])
def test_usage_errors_exit_1(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1
    assert err.startswith("bergman-kit:")


def test_config_unknown_field(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"weight": {"alfa": 1.0}}))
    code, _, err = run(capsys, "weights", "check", "--config", str(cfg))
    assert code == 1
    assert "weight.alfa" in err


def test_config_flag_overrides_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"weight": {"alpha": 2.0}, "seed": 4}))
    code, out, _ = run(capsys, "weights", "check", "--config", str(cfg), "--alpha", "3")
    d = json.loads(out)["config"]
    assert code == 0 and d["weight"]["alpha"] == 3.0 and d["seed"] == 4


def test_threads_resolution(monkeypatch):
    monkeypatch.setenv("BERGMAN_KIT_THREADS", "3")
    cfg = cli.RunConfig()
    assert cli.resolve_threads(None, cfg) == 3
    assert cli.resolve_threads(2, cfg) == 2
    cfg.threads = 5
    assert cli.resolve_threads(None, cfg) == 5


def test_kernel_eval(capsys):
    code, out, _ = run(capsys, "kernel", "eval", "--z", "0.3", "--w", "0.2j")
    assert code == 0
    assert "result" in json.loads(out)


def test_atomic_write_and_csv(tmp_path, capsys):
    path = tmp_path / "prof.csv"
    code, out, _ = run(capsys, "diag", "compact", "--phi", "(1+z^2)/2", "--rays", "4",
                       "--format", "csv", "--out", str(path))
    assert code == 0 and out == ""
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["ray_angle", "radius", "value"]
    assert len(rows) > 4
    assert not [p for p in os.listdir(tmp_path) if p.startswith(".tmp-")]


def test_atomic_write_keeps_old_file_on_failure(tmp_path, monkeypatch):
    path = tmp_path / "out.json"
    path.write_text("old")

    def boom(*a, **k):
        raise OSError("disk full")
    monkeypatch.setattr(cli.os, "replace", boom)
    with pytest.raises(OSError):
        cli.atomic_write(str(path), "new")
    assert path.read_text() == "old"
    assert os.listdir(tmp_path) == ["out.json"]


def test_csv_without_profiles_is_usage_error(capsys):
    code, _, _ = run(capsys, "dist", "--from", "0", "--to", "0.5", "--format", "csv")
    assert code == 1


def test_hs_negative_control(capsys):
    code, out, _ = run(capsys, "hs", "metric", "--phi", "z", "--psi", "0")
    assert code == 0
    assert json.loads(out)["result"]["value"] == 1.0


def test_probe_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"p{k}.json"
        assert cli.main(["probe", "--id", "EQUIQUAN", "--seed", "7", "--samples", "60",
                         "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_console_script_numpy_fallback(tmp_path):
    env = dict(os.environ, BERGMAN_KIT_NUMBA="0")
    proc = subprocess.run([sys.executable, "-m", "bergman_kit.cli", "dist", "--from", "0",
                           "--to", "0.75"], capture_output=True, text=True, env=env, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert abs(json.loads(proc.stdout)["result"]["estimate"] - 2.0) < 1e-3
