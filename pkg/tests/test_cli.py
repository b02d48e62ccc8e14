import csv
import io
import json
import math
import subprocess
import sys

import pytest

from fibosc.cli import main, read_config
from fibosc.errors import ValidationError

GAP_R2_Q1_LN2 = 2.193378768168799


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestSpectrum:
    def test_fibonacci(self, capsys):
        phi = (1 + math.sqrt(5)) / 2
        code, out, _ = run(capsys, "spectrum", "--r", repr(phi), "--q", repr(1 - phi), "--levels", "8")
        assert code == 0
        eps = [float(r["eps_n"]) for r in rows(out)]
        assert eps == pytest.approx([0, 1, 1, 2, 3, 5, 8, 13], rel=1e-14)

    def test_r2_q1(self, capsys):
        code, out, _ = run(capsys, "spectrum", "--r", "2", "--q", "1", "--beta", "0.6931471805599453",
                           "--levels", "4")
        data = rows(out)
        assert [float(r["eps_n"]) for r in data] == [0.0, 1.0, 3.0, 7.0]
        assert data[0]["omega_n"] == ""
        assert sum(float(r["pi_tilde_n"]) for r in data) == pytest.approx(1.0, rel=1e-15)

    def test_single_level(self, capsys):
        code, out, _ = run(capsys, "spectrum", "--r", "2", "--q", "1", "--levels", "1")
        assert code == 0 and len(rows(out)) == 1

    def test_region_violation(self, capsys):
        code, out, err = run(capsys, "spectrum", "--r", "1.4", "--q", "-0.5")
        assert code == 2 and out == ""
        assert "r+q >= 1 required, got 0.9" in err
        code, _, err = run(capsys, "spectrum", "--r", "1", "--q", "0.5")
        assert code == 2 and "r > 1 required" in err

    def test_missing_parameter(self, capsys):
        code, _, err = run(capsys, "spectrum", "--r", "2")
        assert code == 2 and "--q" in err

    def test_bad_flag(self, capsys):
        assert run(capsys, "spectrum", "--format", "xml")[0] == 2


class TestRatesAndBohr:
    def test_rates(self, capsys):
        code, out, _ = run(capsys, "rates", "--r", "2", "--q", "1", "--beta", "0.6931471805599453",
                           "--levels", "3")
        data = rows(out)
        assert float(data[1]["gamma_minus_n"]) == pytest.approx(2.0)
        assert float(data[0]["lambda_n"]) == pytest.approx(1.0)
        assert float(data[1]["mu_n"]) == pytest.approx(2.0)

    def test_rates_degenerate(self, capsys):
        phi = (1 + math.sqrt(5)) / 2
        code, _, err = run(capsys, "rates", "--r", repr(phi), "--q", repr(1 - phi))
        assert code == 2 and err

    def test_bohr_fibonacci_json(self, capsys):
        phi = (1 + math.sqrt(5)) / 2
        code, out, _ = run(capsys, "bohr", "--r", repr(phi), "--q", repr(1 - phi), "--levels", "6",
                           "--format", "json")
        doc = json.loads(out)
        assert doc["generic"] is False
        assert doc["degenerate_levels"] == [[1, 2]]
        ones = [(f["upper"], f["lower"]) for f in doc["frequencies"] if f["omega"] == pytest.approx(1.0)]
        assert (1, 0) in ones and (2, 0) in ones


class TestGap:
    def test_json(self, capsys):
        code, out, _ = run(capsys, "gap", "--r", "2", "--q", "1", "--beta", "0.6931471805599453",
                           "--format", "json")
        doc = json.loads(out)
        assert code == 0
        assert doc["diag_numeric"] == pytest.approx(GAP_R2_Q1_LN2, rel=1e-10)
        assert doc["offdiag_min"] == pytest.approx(2.0)
        assert doc["formula_below_numeric"] is True
        assert doc["levels"] == 64

    def test_csv(self, capsys):
        code, out, _ = run(capsys, "gap", "--r", "1.5", "--q", "0.5", "--beta", "1.0986122886681098")
        (row,) = rows(out)
        assert float(row["gap_formula_paper"]) == pytest.approx(8 / 9, rel=1e-14)
        assert (row["offdiag_argmin_j"], row["offdiag_argmin_k"]) == ("0", "1")

    def test_numerical_failure(self, capsys):
        code, out, err = run(capsys, "gap", "--r", "1.05", "--q", "1", "--beta", "0.05", "--levels", "16")
        assert code == 3 and out == "" and "numerical failure" in err

    def test_deterministic(self, capsys):
        argv = ["gap", "--r", "1.7", "--q", "0.6", "--beta", "0.9"]
        assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


class TestConfig:
    def test_precedence(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# gap settings\nr = 2\nq = 1\nbeta = 0.6931471805599453\nlevels = 20\n")
        _, out, _ = run(capsys, "gap", "--config", str(cfg), "--format", "json")
        assert json.loads(out)["levels"] == 20
        _, out, _ = run(capsys, "gap", "--config", str(cfg), "--levels", "32", "--format", "json")
        doc = json.loads(out)
        assert doc["levels"] == 32 and doc["r"] == 2.0

    def test_errors(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("colour = red\n")
        with pytest.raises(ValidationError, match="unknown key"):
            read_config(str(cfg))
        assert run(capsys, "gap", "--config", str(cfg))[0] == 2
        assert run(capsys, "gap", "--config", str(tmp_path / "missing.cfg"))[0] == 2

    def test_dashes(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("t-max = 2.5\n")
        assert read_config(str(cfg)) == {"t_max": 2.5}


class TestSweep:
    def test_grid(self, capsys):
        code, out, _ = run(capsys, "sweep", "--r-range", "2,3,5", "--q", "1", "--beta-range", "0.5,2,10")
        data = rows(out)
        assert code == 0 and len(data) == 50
        assert all(r["status"] == "ok" for r in data)
        assert [float(r["r"]) for r in data[:10]] == [2.0] * 10

    def test_degenerate_row(self, capsys):
        phi = (1 + math.sqrt(5)) / 2
        code, out, _ = run(capsys, "sweep", "--r", repr(phi), "--q", repr(1 - phi),
                           "--beta-range", "1,2,2")
        data = rows(out)
        assert code == 0 and [r["status"] for r in data] == ["degenerate", "degenerate"]
        assert data[0]["message"]

    def test_workers_match_serial(self, capsys):
        argv = ["sweep", "--r-range", "1.5,2.5,3", "--q", "0.8", "--beta-range", "0.5,1.5,2"]
        serial = run(capsys, *argv)[1]
        parallel = run(capsys, *argv, "--workers", "2")[1]
        assert serial == parallel

    def test_needs_a_range(self, capsys):
        assert run(capsys, "sweep", "--r", "2", "--q", "1")[0] == 2
        assert run(capsys, "sweep", "--r-range", "2,3", "--q", "1")[0] == 2


class TestFigure:
    def test_figure1_crossing(self, capsys):
        code, out, _ = run(capsys, "figure", "1", "--resolution", "40")
        data = rows(out)
        diff = [float(r["offdiag_min"]) - float(r["diag_lower"]) for r in data]
        assert code == 0 and min(diff) < 0 < max(diff)
        assert float(data[0]["r"]) > 1.0

    def test_figure2_small_beta(self, capsys):
        _, out, _ = run(capsys, "figure", "2", "--resolution", "20")
        data = rows(out)
        assert float(data[0]["offdiag_min"]) > float(data[0]["diag_lower"])

    def test_figure3_ordering(self, capsys):
        _, out, _ = run(capsys, "figure", "3", "--resolution", "10")
        data = rows(out)
        both = [r for r in data if r["upper_status"] == r["lower_status"] == "ok"]
        assert both
        assert all(float(r["beta_upper"]) >= float(r["beta_lower"]) for r in both)

    def test_missing_number(self, capsys):
        assert run(capsys, "figure")[0] == 2


class TestSimulate:
    def test_relaxation(self, capsys):
        code, out, _ = run(capsys, "simulate", "--r", "2", "--q", "1", "--beta", "0.6931471805599453",
                           "--t-max", "10")
        data = rows(out)
        assert code == 0
        assert float(data[-1]["trace_dist"]) <= 1e-6
        assert float(data[-1]["t"]) == pytest.approx(10.0)

    def test_coherence_json(self, capsys):
        code, out, _ = run(capsys, "simulate", "--r", "2", "--q", "1", "--beta", "0.6931471805599453",
                           "--t-max", "2", "--initial", "coherence:0,2", "--format", "json")
        doc = json.loads(out)
        assert code == 0 and "re_0_2" in doc["trajectory"][0]
        assert doc["levels"] == 8

    def test_unstable_dt(self, capsys):
        code, _, err = run(capsys, "simulate", "--r", "2", "--q", "1", "--dt", "0.1", "--t-max", "1")
        assert code == 3 and "dt" in err


def test_module_entry_point(tmp_path):
    out = tmp_path / "s.csv"
    proc = subprocess.run([sys.executable, "-m", "fibosc", "spectrum", "--r", "2", "--q", "1",
                           "--levels", "3", "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert out.read_text().splitlines()[0] == "n,eps_n,omega_n,pi_tilde_n,log_pi_n,log_pi_tilde_n"
