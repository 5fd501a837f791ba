import csv
import io
import json

import numpy as np
import pytest

from dissipative_modes.cli import main, parse_config_text, ConfigError


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestEval:
    def test_deadline_example(self, capsys):
        code, out, _ = run(capsys, "eval", "--formula", "T", "--L", "1", "--omega0", "1.3591409",
                           "--n", "0")
        assert code == 0
        (row,) = rows_of(out)
        assert float(row["value"]) == pytest.approx(1.0, abs=1e-7)
        assert row["status"] == "ok"

    def test_lambda_vanishes_at_origin(self, capsys):
        code, out, _ = run(capsys, "eval", "--formula", "lambda", "--k", "3", "--n", "2", "--t", "0")
        assert code == 0 and rows_of(out)[0]["value"] == "0.0"

    def test_status_column(self, capsys):
        _, out, _ = run(capsys, "eval", "--formula", "T", "--L", "2", "--omega0", "1")
        assert rows_of(out)[0]["status"] == "not recordable"
        _, out, _ = run(capsys, "eval", "--formula", "lambda", "--k", "2", "--t", "50")
        assert rows_of(out)[0]["status"] == "past deadline"
        _, out, _ = run(capsys, "eval", "--formula", "Omega", "--k", "2", "--t", "50")
        assert rows_of(out)[0]["status"] == "imaginary"

    def test_grid_order(self, capsys):
        _, out, _ = run(capsys, "eval", "--formula", "omega_n", "--n", "0", "1", "--k", "1", "2",
                        "--t", "0", "1")
        keys = [(r["n"], r["k"], r["t"]) for r in rows_of(out)]
        assert keys == [(n, k, t) for n in "01" for k in ("1.0", "2.0") for t in ("0.0", "1.0")]

    def test_json_format(self, capsys):
        _, out, _ = run(capsys, "eval", "--formula", "k_tilde", "--t", "0", "--format", "json")
        doc = json.loads(out)
        assert doc["columns"][0] == "formula"
        assert doc["rows"][0]["value"] == pytest.approx(0.5)


class TestConfig:
    def test_parse(self):
        assert parse_config_text("L = 2  # damping\n\nseed=4\n") == {"L": 2.0, "seed": 4}
        with pytest.raises(ConfigError):
            parse_config_text("gamma = 1\n")
        with pytest.raises(ConfigError):
            parse_config_text("L 1\n")

    def test_flags_override_file(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("L = 4\nformat = json\n")
        _, from_file, _ = run(capsys, "eval", "--formula", "k_tilde", "--config", str(cfg))
        assert json.loads(from_file)["rows"][0]["value"] == pytest.approx(2.0)
        _, flagged, _ = run(capsys, "eval", "--formula", "k_tilde", "--config", str(cfg),
                            "--L", "1")
        assert json.loads(flagged)["rows"][0]["value"] == pytest.approx(0.5)

    def test_bad_config_is_usage_error(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("colour = red\n")
        code, _, err = run(capsys, "eval", "--formula", "T", "--config", str(cfg))
        assert code == 2 and "unknown key" in err

    def test_invalid_parameters(self, capsys):
        code, _, err = run(capsys, "eval", "--formula", "T", "--L", "-1")
        assert code == 2 and err.startswith("error:")

    def test_argparse_usage(self):
        with pytest.raises(SystemExit) as info:
            main(["eval", "--formula", "nope"])
        assert info.value.code == 2


class TestTrace:
    @pytest.mark.parametrize("argv", [
        ["--k", "3", "--n", "0"],
        ["--k", "3", "--n", "5", "--samples", "50"],
        ["--form", "parametric_r", "--k", "2", "--n", "1", "--t1", "2"],
    ])
    def test_runs(self, capsys, argv):
        code, out, _ = run(capsys, "trace", *argv)
        assert code == 0
        rows = rows_of(out)
        t = np.array([float(r["t"]) for r in rows])
        assert t[0] == 0.0 and np.all(np.diff(t) > 0)
        if "--samples" in argv:
            assert len(rows) == 50

    def test_default_init_follows_bessel_solution(self, capsys):
        from dissipative_modes.formulas import Mode, ModelParams
        from dissipative_modes.specfun import analytic_pair

        _, out, _ = run(capsys, "trace", "--k", "3", "--n", "2", "--samples", "20")
        last = rows_of(out)[-1]
        u, v = analytic_pair(float(last["t"]), Mode(3.0, 2), ModelParams())
        assert float(last["u"]) == pytest.approx(u, rel=1e-6)
        assert float(last["v"]) == pytest.approx(v, rel=1e-6)

    def test_overflow_exit_code(self, capsys):
        code, out, err = run(capsys, "trace", "--L", "20", "--k", "50", "--init", "1", "0", "1", "1",
                             "--t1", "100")
        assert code == 3
        assert "integration failed" in err and "last t=" in err
        assert out == ""

    def test_json_has_stats(self, capsys):
        _, out, _ = run(capsys, "trace", "--k", "3", "--format", "json")
        doc = json.loads(out)
        assert doc["stats"]["n_steps"] == len(doc["rows"]) - 1


class TestVerify:
    def test_passes(self, capsys):
        code, out, _ = run(capsys, "verify", "--samples", "300")
        doc = json.loads(out)
        assert code == 0 and doc["summary"]["ok"]
        assert all(c["pass"] for c in doc["checks"])

    def test_injected_fault(self, capsys):
        code, out, _ = run(capsys, "verify", "--samples", "300", "--inject-fault")
        doc = json.loads(out)
        assert code == 1
        assert doc["summary"]["failed"] >= 1

    def test_tight_tolerance_reports_measurements(self, capsys):
        code, out, _ = run(capsys, "verify", "--samples", "300", "--tol-factor", "1e-6")
        doc = json.loads(out)
        assert code == 1
        failed = [c for c in doc["checks"] if not c["pass"]]
        assert failed and all(c["measured"] > c["tolerance"] for c in failed)


class TestFigures:
    def test_long_csv_and_sidecar(self, capsys, tmp_path):
        out = tmp_path / "curves.csv"
        code, _, _ = run(capsys, "figures", "--k-list", "0.3", "2", "4", "--n", "0",
                         "--out", str(out))
        assert code == 0
        rows = rows_of(out.read_text())
        assert {r["family_id"] for r in rows} == {"fig1", "fig2"}
        sidecar = json.loads((tmp_path / "curves.csv.deadlines.json").read_text())
        assert sidecar["fig1"]["skipped"][0]["k"] == 0.3
        deadlines = [c["deadline"] for c in sidecar["fig1"]["curves"]]
        assert deadlines == sorted(deadlines)
        for key in ("2.0", "4.0"):
            lam = [float(r["lambda"]) for r in rows if r["family_id"] == "fig1" and r["k"] == key]
            assert lam[0] == 0.0 and np.all(np.diff(lam) > 0)


class TestSweep:
    def test_monotone_in_n(self, capsys):
        code, out, _ = run(capsys, "sweep", "--k-list", "2", "--n-list", "0", "1", "2", "3")
        assert code == 0
        T = [float(r["T"]) for r in rows_of(out)]
        assert np.all(np.diff(T) > 0)

    def test_single_point_matches_eval(self, capsys):
        _, sweep, _ = run(capsys, "sweep", "--k-list", "2.5", "--n-list", "3", "--L-list", "0.7")
        _, ev, _ = run(capsys, "eval", "--formula", "T", "--k", "2.5", "--n", "3", "--L", "0.7")
        assert rows_of(sweep)[0]["T"] == rows_of(ev)[0]["value"]

    def test_workers_do_not_change_output(self, capsys):
        argv = ["sweep", "--n-list", *map(str, range(6)), "--k-list", "1", "3",
                "--L-list", "0.5", "1"]
        _, serial, _ = run(capsys, *argv)
        _, parallel, _ = run(capsys, *argv, "--workers", "2")
        assert serial == parallel

    def test_not_recordable_is_blank(self, capsys):
        _, out, _ = run(capsys, "sweep", "--k-list", "0.1", "--n-list", "0")
        assert rows_of(out)[0]["T"] == ""


class TestRegistry:
    def test_replay_and_export(self, capsys, tmp_path):
        script = tmp_path / "events.txt"
        script.write_text("0 1 0.8,2,5\n1.0 1 0.6,3\n")
        export = tmp_path / "reg.json"
        code, out, _ = run(capsys, "registry", "--script", str(script), "--at", "0", "2",
                           "--export", str(export))
        assert code == 0
        doc = json.loads(out)
        assert doc["events"] == 2 and len(doc["reports"]) == 2
        assert doc["reports"][0]["records"][0]["fraction_alive"] == 1.0
        assert len(json.loads(export.read_text())["events"]) == 2

    def test_out_of_order_events(self, capsys, tmp_path):
        script = tmp_path / "events.txt"
        script.write_text("1 0 2\n0.5 0 3\n")
        code, _, err = run(capsys, "registry", "--script", str(script))
        assert code == 2 and "error:" in err


@pytest.mark.parametrize("argv", [
    ["eval", "--formula", "lambda", "--k", "1.5", "3", "--n", "0", "4", "--t", "0", "0.3", "1"],
    ["trace", "--k", "3", "--n", "2"],
    ["figures", "--points", "40"],
    ["sweep", "--format", "json"],
])
def test_byte_identical_reruns(capsys, tmp_path, argv):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main([*argv, "--out", str(first)]) == 0
    assert main([*argv, "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
