import csv
import json

import numpy as np
import pytest

from crystalspiral import cli


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps({"preset": "square", "T_end": 0.05}))
    return str(path)


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestUsage:
    def test_s_must_be_positive(self, capsys):
        assert cli.main(["compare", "--scenario", "square", "--s", "0"]) == cli.EXIT_USAGE
        assert "s must be ≥ 1" in capsys.readouterr().err

    def test_missing_command(self, capsys):
        assert cli.main([]) == cli.EXIT_USAGE

    def test_bad_rho_mode(self, capsys):
        code = cli.main(["compare", "--scenario", "square", "--s", "1", "--rho-mode", "big:2"])
        assert code == cli.EXIT_USAGE

    def test_negative_tmax(self, capsys):
        assert cli.main(["run-ode", "--scenario", "square", "--tmax", "-1",
                         "--out", "x.csv"]) == cli.EXIT_USAGE

    def test_exclusive_sources(self, capsys):
        assert cli.main(["dual", "--preset", "square", "--vectors", "1,0;0,1;-1,-1"]) == 1

    def test_parse_args(self):
        cfg = cli.parse_args(["-vv", "compare", "--scenario", "square", "--s", "3"])
        assert cfg.command == "compare" and cfg.verbosity == 2 and cfg.options["s"] == 3


class TestDualValidate:
    def test_dual_triangle(self, capsys):
        assert cli.main(["dual", "--preset", "triangle"]) == cli.EXIT_OK
        out = capsys.readouterr().out.splitlines()
        vecs = np.array([[float(c) for c in line.split("(")[1].split(")")[0].split(",")]
                         for line in out])
        want = 2 * np.array([[np.cos(a), np.sin(a)] for a in np.pi / 3 * np.array([1, 3, 5])])
        assert sorted(map(tuple, np.round(vecs, 12) + 0.0)) == sorted(
            map(tuple, np.round(want, 12) + 0.0))

    def test_validate_counterexample(self, capsys):
        code = cli.main(["validate", "--vectors", "3,0;1,1;0,2;-1,-1"])
        captured = capsys.readouterr()
        assert code == cli.EXIT_NUMERIC
        assert "P_1: EMPTY" in captured.out
        assert "[1]" in captured.err

    def test_validate_preset(self, capsys):
        assert cli.main(["validate", "--preset", "square"]) == cli.EXIT_OK
        assert capsys.readouterr().out.strip().endswith("ok")

    def test_config_file(self, tmp_path, capsys):
        path = tmp_path / "spec.json"
        path.write_text(json.dumps({"preset": "diagonal"}))
        assert cli.main(["dual", "--config", str(path)]) == cli.EXIT_OK

    def test_missing_config(self, tmp_path, capsys):
        assert cli.main(["dual", "--config", str(tmp_path / "none.json")]) == cli.EXIT_IO


class TestRuns:
    def test_run_ode_zero_horizon(self, tmp_path, capsys):
        out = tmp_path / "ode.csv"
        assert cli.main(["run-ode", "--scenario", "square", "--tmax", "0",
                         "--out", str(out)]) == cli.EXIT_OK
        table = rows(out)
        assert table[0] == ["t", "k", "d_1"] and len(table) == 2
        assert float(table[1][0]) == 0.0 and table[1][1] == "1"
        assert len(rows(tmp_path / "ode_polyline.csv")) == 3

    def test_run_ode(self, tmp_path, capsys):
        out = tmp_path / "ode.csv"
        assert cli.main(["run-ode", "--scenario", "square", "--tmax", "0.1", "--samples", "3",
                         "--dt", "1e-5", "--out", str(out)]) == cli.EXIT_OK
        table = rows(out)
        assert [r[0] for r in table[1:]] == ["0.0", "0.05", "0.1"]

    def test_run_levelset(self, tiny, tmp_path, capsys):
        code = cli.main(["run-levelset", "--scenario", tiny, "--s", "1", "--rho", "0.03",
                         "--samples", "2", "--out", str(tmp_path)])
        assert code == cli.EXIT_OK
        field = rows(tmp_path / "square_s1_field.csv")
        assert field[0] == ["i", "j", "x", "y", "u"] and len(field) > 20000
        snaps = np.load(tmp_path / "square_s1_snapshots.npz")
        assert snaps["u"].shape == (2, 151, 151)

    def test_compare_writes_two_csvs(self, tiny, tmp_path, capsys):
        code = cli.main(["compare", "--scenario", tiny, "--s", "1", "--rho-mode", "fixed:0.03",
                         "--out", str(tmp_path)])
        assert code == cli.EXIT_OK
        assert sorted(p.name for p in tmp_path.iterdir()) == [
            "square_s1_fixed0.03.csv", "square_s1_fixed0.03_summary.csv", "tiny.json"]
        assert len(rows(tmp_path / "square_s1_fixed0.03.csv")) == 22
        assert "max D" in capsys.readouterr().out

    def test_compare_failure_is_numeric(self, tiny, tmp_path, capsys):
        code = cli.main(["compare", "--scenario", tiny, "--s", "1", "--rho-mode", "fixed:0.01",
                         "--out", str(tmp_path)])
        assert code == cli.EXIT_NUMERIC
        summary = rows(tmp_path / "square_s1_fixed0.01_summary.csv")
        assert summary[1][-1].startswith("failed")

    def test_sweep(self, tiny, tmp_path, capsys):
        plan = tmp_path / "plan.json"
        plan.write_text(json.dumps({"scenario": json.loads(open(tiny).read()), "s": [1],
                                    "rho_modes": ["fixed:0.03"], "samples": 3,
                                    "out": str(tmp_path / "out"), "workers": 1}))
        assert cli.main(["sweep", "--plan", str(plan)]) == cli.EXIT_OK
        assert (tmp_path / "out" / "summary.csv").exists()
