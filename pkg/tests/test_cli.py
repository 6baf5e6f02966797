import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from trainbound import cli
from trainbound.entropy import EntropySurface

DATA = Path(__file__).parent / "data"
FAST = ["--a2-points", "3", "--grid-points", "200"]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, out


def read_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestParsing:
    def test_numbers(self):
        assert cli.parse_number("1/e") == 1 / math.e
        assert cli.parse_number("3/4") == 0.75
        assert cli.parse_list("1, 1/e,4") == [1.0, 1 / math.e, 4.0]

    def test_show_config_defaults(self, capsys):
        code, out = run(capsys, "optimize", "--show-config")
        cfg = json.loads(out)
        assert code == 0
        assert cfg["grid_points"] == 1000
        assert cfg["refine_tol"] == 1e-8
        assert cfg["fd_step"] == 1e-4
        assert cfg["a2_tol"] == 1e-5

    def test_precedence(self, capsys, tmp_path):
        conf = tmp_path / "c.json"
        conf.write_text(json.dumps({"grid_points": 500, "a": 2.0, "seed": 7}))
        _, out = run(capsys, "optimize", "--config", str(conf), "--a", "3", "--show-config")
        cfg = json.loads(out)
        assert cfg["grid_points"] == 500  # file beats default
        assert cfg["a"] == 3.0  # flag beats file
        assert cfg["seed"] == 7

    def test_unknown_key(self, capsys, tmp_path):
        conf = tmp_path / "c.json"
        conf.write_text(json.dumps({"colour": "red"}))
        code, _ = run(capsys, "optimize", "--config", str(conf))
        assert code == 2

    def test_missing_config_file(self, capsys, tmp_path):
        code, _ = run(capsys, "optimize", "--config", str(tmp_path / "absent.json"))
        assert code == 2

    def test_bad_choice(self):
        with pytest.raises(SystemExit) as info:
            cli.main(["optimize", "--model", "mimo"])
        assert info.value.code == 2


class TestOptimize:
    def test_xor_one_over_e(self, capsys):
        code, out = run(capsys, "optimize", "--model", "xor", "--a", "0.367879", "--no-timestamp", *FAST)
        doc = json.loads(out)
        assert code == 0
        np.testing.assert_allclose(doc["tau_opt"], 0.367879, atol=1e-5)
        np.testing.assert_allclose(doc["rate_opt"], 0.399576, atol=1e-6)
        assert doc["boundary_flag"] == "Interior"
        assert all(c["passed"] for c in doc["steps"]["a2_checks"])
        assert "timestamp" not in doc["meta"]

    def test_xor_one(self, capsys):
        _, out = run(capsys, "optimize", "--a", "1", *FAST)
        doc = json.loads(out)
        np.testing.assert_allclose(doc["tau_opt"], 0.44, atol=0.005)
        assert "timestamp" in doc["meta"]

    def test_bilinear(self, capsys):
        code, out = run(capsys, "optimize", "--model", "bilinear")
        doc = json.loads(out)
        assert code == 0
        assert doc["boundary_flag"] == "AtZero"
        assert doc["tau_opt"] == 0.0

    def test_writes_curve(self, capsys, tmp_path):
        target = tmp_path / "run" / "opt.json"
        code, _ = run(capsys, "optimize", "--a", "1", "--out", str(target), *FAST)
        assert code == 0
        assert json.loads(target.read_text())["model"] == "xor"
        rows = read_rows(target.with_suffix(".curve.csv").read_text())
        assert len(rows) == 200
        assert list(rows[0]) == ["tau", "mi", "objective"]

    def test_domain_error(self, capsys):
        code, _ = run(capsys, "optimize", "--a", "-1")
        assert code == 2

    def test_a2_violation(self, capsys, monkeypatch):
        def kinked(model):
            return EntropySurface(lambda tau, eps: 1.0 + 0.5 * max(tau - 0.5, 0.0) / tau + (eps - 1.0))

        monkeypatch.setattr(cli, "xor_surface", kinked)
        code, _ = run(capsys, "optimize", "--a", "1", "--a2-points", "5")
        assert code == 4


class TestFigure1:
    def test_golden(self, capsys):
        code, out = run(capsys, "figure1", "--a-list", "1,4", "--T-list", "4,10,100", "--no-timestamp")
        golden = (DATA / "figure1_golden.csv").read_text()
        assert code == 0
        assert out.splitlines()[0] == "model,a,T,method,tau_opt,rate_opt"
        assert out.splitlines()[0] == golden.splitlines()[0]
        got, want = read_rows(out), read_rows(golden)
        assert [(r["model"], r["a"], r["T"], r["method"]) for r in got] == [
            (r["model"], r["a"], r["T"], r["method"]) for r in want
        ]
        for g, w in zip(got, want):
            tol = 0.0 if g["method"] == "finite" else 1e-9
            np.testing.assert_allclose(float(g["tau_opt"]), float(w["tau_opt"]), atol=tol)
            np.testing.assert_allclose(float(g["rate_opt"]), float(w["rate_opt"]), atol=tol)

    def test_crlf_rows(self, capsys):
        _, out = run(capsys, "figure1", "--a-list", "1", "--T-list", "4", *FAST)
        assert out.endswith("\r\n")
        rows = read_rows(out)
        finite = [r for r in rows if r["method"] == "finite"]
        assert finite[0]["tau_opt"] == "0.5"

    def test_asymptotic_constant_in_T(self, capsys):
        _, out = run(capsys, "figure1", "--a-list", "1", "--T-list", "10,100", *FAST)
        taus = {r["tau_opt"] for r in read_rows(out) if r["method"] == "asymptotic"}
        assert len(taus) == 1

    def test_skips_non_integral(self, capsys, caplog):
        _, out = run(capsys, "figure1", "--a-list", "1/e,1", "--T-list", "10", *FAST)
        rows = read_rows(out)
        assert {float(r["a"]) for r in rows} == {1.0}
        assert "skipping" in caplog.text

    def test_round_channels(self, capsys):
        _, out = run(capsys, "figure1", "--a-list", "1/e", "--T-list", "100", "--round-channels", *FAST)
        assert len(read_rows(out)) == 2

    def test_workers_do_not_change_output(self, capsys):
        args = ["figure1", "--a-list", "4,1", "--T-list", "100,10", "--no-timestamp", *FAST]
        _, serial = run(capsys, *args)
        _, parallel = run(capsys, *args, "--workers", "2")
        assert serial == parallel

    def test_json_format(self, capsys):
        _, out = run(capsys, "figure1", "--a-list", "1", "--T-list", "10", "--format", "json", "--no-timestamp", *FAST)
        doc = json.loads(out)
        assert doc["meta"] == {"tool": "trainbound", "version": cli.__version__}
        assert len(doc["rows"]) == 2


class TestSweep:
    def test_rows(self, capsys):
        code, out = run(capsys, "sweep-a", "--a-list", "0.5,2", "--T-list", "100", *FAST)
        rows = read_rows(out)
        assert code == 0
        assert [(r["a"], r["method"]) for r in rows] == [
            ("0.5", "asymptotic"),
            ("0.5", "finite"),
            ("2.0", "asymptotic"),
            ("2.0", "finite"),
        ]

    def test_needs_xor(self, capsys):
        assert run(capsys, "sweep-a", "--model", "bilinear")[0] == 2


class TestValidate:
    SMALL = ["--samples", "100000", "--validate-size", "2000"]

    def test_budget_zero_skips(self, capsys):
        code, out = run(capsys, "validate", "--budget", "0", *self.SMALL)
        doc = json.loads(out)
        status = {c["name"]: c["status"] for c in doc["checks"]}
        assert code == 0
        assert doc["passed"]
        assert status["oracle_agreement"] == "skipped"
        assert status["entropy_identity"] == "skipped"
        assert status["scaling_equivalence"] == "pass"

    def test_default_budget_passes(self, capsys):
        code, out = run(capsys, "validate", *self.SMALL)
        doc = json.loads(out)
        assert code == 0
        assert all(c["status"] == "pass" for c in doc["checks"])
        t2 = next(c for c in doc["checks"] if c["name"] == "scaling_equivalence")
        assert t2["observed"] < 1e-12

    def test_injected_fault(self, capsys):
        code, out = run(capsys, "validate", "--inject-fault", "--budget", "0", *self.SMALL)
        doc = json.loads(out)
        status = {c["name"]: c["status"] for c in doc["checks"]}
        assert code == 3
        assert status["scaling_equivalence"] == "fail"


class TestMc:
    def test_needs_seed(self, capsys):
        assert run(capsys, "mc", "--a", "1", "--T", "4", "--T-tau", "2")[0] == 2

    def test_estimate(self, capsys):
        code, out = run(capsys, "mc", "--a", "1", "--T", "4", "--T-tau", "2", "--seed", "1", "--samples", "1e5")
        doc = json.loads(out)
        assert code == 0
        assert doc["coupon_exact"] == 1.75
        assert abs(doc["z_score"]) < 3


class TestOutputs:
    def test_env_directory(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path))
        code, out = run(capsys, "figure1", "--a-list", "1", "--T-list", "10", *FAST)
        assert code == 0
        assert out == ""
        assert (tmp_path / "figure1.csv").read_bytes().startswith(b"model,a,T,method,tau_opt,rate_opt\r\n")

    def test_dash_forces_stdout(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path))
        _, out = run(capsys, "figure1", "--a-list", "1", "--T-list", "10", "--out", "-", *FAST)
        assert out.startswith("model,")
        assert not (tmp_path / "figure1.csv").exists()

    def test_subprocess_byte_identical(self, tmp_path):
        outs = []
        for name in ("one.csv", "two.csv"):
            target = tmp_path / name
            subprocess.run(
                [sys.executable, "-m", "trainbound", "figure1", "--a-list", "1,4", "--T-list", "10,100",
                 "--no-timestamp", "--out", str(target), *FAST],
                check=True,
                capture_output=True,
            )
            outs.append(target.read_bytes())
        assert outs[0] == outs[1]
