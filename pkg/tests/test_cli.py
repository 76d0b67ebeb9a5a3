import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from corrugate import cli, limitlaw

SMALL_CLT = ["--n", "64", "--samples", "200", "--t-grid", "0.5,1"]
LINE = "line:dx=0.5,dy=0,dz=0"


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = cli.main([*argv, "--out", str(out)])
    return code, out


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def read_json(path):
    return json.loads(path.read_text())


def snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_twist_outputs(tmp_path):
    code, out = run(tmp_path, "twist", "--curve", "helix:a=0.1,b=0.05", "--metric", "const:2",
                    "--n", "64")
    assert code == 0
    header, data = read_csv(out / "twist.csv")
    assert header == ["u", "f0_x", "f0_y", "f0_z", "fn_x", "fn_y", "fn_z", "isometry_defect"]
    assert data.shape == (4096, 8)
    assert data[:, 7].max() <= 1e-10
    man = read_json(out / "manifest.json")
    assert man["schema"] == 1 and man["command"] == "twist"
    assert man["outputs"] == ["manifest.json", "twist.csv"]
    assert man["wall_time"] is None
    for name in man["outputs"]:
        assert (out / name).stat().st_size > 0


def test_twist_not_short_exits_2(tmp_path, capsys):
    code, _ = run(tmp_path, "twist", "--metric", "const:0.001")
    assert code == 2
    assert "u=" in capsys.readouterr().err


def test_random_twist_reproducible(tmp_path):
    args = ["twist", "--random", "--seed", "7", "--n", "32", "--grid", "257"]
    _, a = run(tmp_path, *args, name="a")
    _, b = run(tmp_path, *args, name="b")
    assert snapshot(a) == snapshot(b)
    _, c = run(tmp_path, "twist", "--random", "--seed", "8", "--n", "32", "--grid", "257",
               name="c")
    assert (a / "twist.csv").read_bytes() != (c / "twist.csv").read_bytes()


def test_csv_format(tmp_path):
    _, out = run(tmp_path, "twist", "--n", "8", "--grid", "5")
    raw = (out / "twist.csv").read_bytes()
    assert b"\r" not in raw
    line = raw.decode().splitlines()[2].split(",")
    assert float(line[0]) == 0.25
    assert line[4] == format(float(line[4]), ".17g")


def test_verify(tmp_path):
    code, out = run(tmp_path, "verify", "--n", "16")
    assert code == 0
    body = read_json(out / "verify.json")
    assert body["shortness"]["is_strictly_short"]
    assert body["isometry_defect"] <= 1e-10
    code, out = run(tmp_path, "verify", "--metric", "const:0.001", name="bad")
    assert code == 2
    assert not read_json(out / "verify.json")["shortness"]["is_strictly_short"]


def test_c0rate_helix_slope(tmp_path):
    code, out = run(tmp_path, "c0rate")
    assert code == 0
    _, table = read_csv(out / "c0rate.csv")
    assert table[:, 0].tolist() == [8, 16, 32, 64, 128, 256, 512, 1024]
    fit = read_json(out / "ratefit.json")
    assert fit["status"] == "ok"
    assert -1.15 <= fit["slope"] <= -0.85


def test_c0rate_degenerate(tmp_path):
    code, out = run(tmp_path, "c0rate", "--curve", LINE, "--metric", "const:0.25",
                    "--n-list", "8,16,32,64")
    assert code == 0
    assert read_json(out / "ratefit.json")["status"] == "refused"
    assert "DegenerateValues" in read_json(out / "ratefit.json")["note"]


@pytest.mark.parametrize("n_list", ["8,16,32", "8,16,16,32", "8,x,16,32"])
def test_c0rate_bad_list(tmp_path, n_list):
    assert run(tmp_path, "c0rate", "--n-list", n_list)[0] == 3


def test_clt_small_run(tmp_path):
    code, out = run(tmp_path, "clt", *SMALL_CLT)
    assert code in (0, 4)
    header, data = read_csv(out / "ensemble.csv")
    assert header == ["sample", "t", "D_x", "D_y", "D_z"]
    assert data.shape == (400, 5)
    cov = read_json(out / "covariance.json")
    assert np.array(cov["oracle"]).shape == (6, 6)
    gof = read_json(out / "gof.json")
    assert [g["t"] for g in gof["tests"]] == [0.5, 1.0]
    assert read_json(out / "manifest.json")["gates_passed"] == (code == 0)


def test_clt_gate_failure_exits_4(tmp_path):
    # n = 2 is far from the limit, so the covariance gate rejects
    code, out = run(tmp_path, "clt", "--n", "2", "--samples", "2000", "--t-grid", "1")
    assert code == 4
    assert not read_json(out / "covariance.json")["all_pass"]


def test_clt_too_few_samples(tmp_path):
    assert run(tmp_path, "clt", "--samples", "1")[0] == 3


def test_clt_enumerate(tmp_path):
    code, out = run(tmp_path, "clt", "--enumerate", "--n", "10")
    assert code == 0
    check = read_json(out / "enumeration_check.json")
    assert check["covariance_max_abs_deviation"] <= 1e-12
    _, table = read_csv(out / "enumeration.csv")
    assert table.shape == (1024 * 4, 6)
    assert np.all(table[:, 1] == 2.0 ** -10)


def test_enumerate_command(tmp_path):
    code, out = run(tmp_path, "enumerate", "--n", "4", "--t-grid", "1")
    assert code == 0
    law = read_json(out / "exact_law.json")
    assert law["n"] == 4 and np.array(law["covariance"]).shape == (3, 3)
    assert run(tmp_path, "enumerate", "--n", "21", name="big")[0] == 3


def test_limit_sample_constant_frame(tmp_path):
    M = 100_000
    code, out = run(tmp_path, "limit-sample", "--curve", LINE, "--metric", "const:1.25",
                    "--t-grid", "1", "--samples", str(M))
    assert code == 0
    _, data = read_csv(out / "limit_samples.csv")
    var = data[:, 4].var(ddof=1)
    assert abs(var - 1.0) <= 4 * np.sqrt(2.0 / (M - 1))
    assert np.all(data[:, 2:4] == 0)
    man = read_json(out / "manifest.json")
    assert man["oracle_covariance"][2][2] == pytest.approx(1.0, abs=1e-10)


def test_limit_sample_rejects_zero_time(tmp_path):
    assert run(tmp_path, "limit-sample", "--t-grid", "0")[0] == 3


def test_limit_sample_not_psd_exits_5(tmp_path, monkeypatch):
    monkeypatch.setattr(limitlaw, "limit_covariance_matrix",
                        lambda bundle, t: np.diag([1.0, -1.0, 1.0] * len(t)))
    assert run(tmp_path, "limit-sample", "--t-grid", "1", "--samples", "10")[0] == 5


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 8, "grid": 9, "random": True, "seed": 3}))
    _, a = run(tmp_path, "twist", "--config", str(cfg), name="a")
    _, b = run(tmp_path, "twist", "--n", "8", "--grid", "9", "--random", "--seed", "3",
               name="b")
    assert (a / "twist.csv").read_bytes() == (b / "twist.csv").read_bytes()
    _, c = run(tmp_path, "twist", "--config", str(cfg), "--grid", "17", name="c")
    assert read_csv(c / "twist.csv")[1].shape[0] == 17
    assert read_json(c / "manifest.json")["config"]["grid"] == 17


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"bogus": 1}))
    assert run(tmp_path, "twist", "--config", str(bad))[0] == 3
    assert run(tmp_path, "twist", "--config", str(tmp_path / "missing.json"))[0] == 3
    assert run(tmp_path, "twist", "--curve", "spiral:a=1")[0] == 3
    assert run(tmp_path, "twist", "--metric", "cube:2")[0] == 3
    with pytest.raises(SystemExit) as exc:
        cli.main(["twist", "--n", "many"])
    assert exc.value.code == 3


def test_workers_do_not_change_bytes(tmp_path, monkeypatch):
    _, a = run(tmp_path, "clt", *SMALL_CLT, "--workers", "1", name="a")
    _, b = run(tmp_path, "clt", *SMALL_CLT, "--workers", "4", name="b")
    monkeypatch.setenv("CORRUGATE_WORKERS", "3")
    _, c = run(tmp_path, "clt", *SMALL_CLT, name="c")
    assert snapshot(a) == snapshot(b) == snapshot(c)


def test_timing_flag_records_wall_time(tmp_path):
    _, out = run(tmp_path, "twist", "--n", "4", "--grid", "5", "--timing")
    assert read_json(out / "manifest.json")["wall_time"] >= 0


def test_catalog(capsys):
    assert cli.main(["catalog"]) == 0
    body = json.loads(capsys.readouterr().out)
    assert {"line", "circle", "helix", "polynomial"} <= set(body)


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "corrugate.cli", "catalog"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "helix" in json.loads(res.stdout)
    res = subprocess.run([sys.executable, "-c", "from corrugate.cli import run; run()",
                          "twist", "--metric", "const:0.001", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 2
