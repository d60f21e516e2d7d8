import csv
import json
import math

import numpy as np
import pytest

from crystalspiral import experiments as ex
from crystalspiral.levelset import Grid

# short horizon so a full paired run takes seconds
TINY = {"preset": "square", "T_end": 0.05}


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestScenarios:
    @pytest.mark.parametrize("name, rho_c, t_end", [("square", 0.02, 1.0),
                                                    ("diagonal", 0.02, 1.0),
                                                    ("triangle", 0.01, 0.8)])
    def test_presets(self, name, rho_c, t_end):
        sc = ex.preset(name)
        assert sc.params.rho_c == rho_c and sc.params.U == 1.0 and sc.t_end == t_end

    def test_initial_constant(self):
        sc = ex.preset("triangle")
        assert sc.u0 == pytest.approx(sc.shape.phi[0] - math.pi / 2)

    def test_overrides(self, tmp_path):
        path = tmp_path / "sc.json"
        path.write_text(json.dumps({"preset": "square", "rho_c": 0.05, "T_end": 0.3,
                                    "name": "wide"}))
        sc = ex.load_scenario(path)
        assert (sc.name, sc.params.rho_c, sc.t_end, sc.xi_kind) == ("wide", 0.05, 0.3, "square")

    def test_facets(self):
        sc = ex.load_scenario({"facets": [[1, 0], [1, 2 * math.pi / 3], [1, 4 * math.pi / 3]]})
        assert sc.xi_kind == "sector" and sc.shape.count == 3

    def test_unnormalized_rejected(self):
        with pytest.raises(ValueError, match="facets \\[0\\]"):
            ex.load_scenario({"facets": [[2, 0], [1, 2 * math.pi / 3], [1, 4 * math.pi / 3]]})

    def test_unknown(self):
        with pytest.raises(ValueError):
            ex.preset("hexagon")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            ex.load_scenario(tmp_path / "nope.json")


class TestRhoMode:
    def test_parse(self):
        assert ex.RhoMode.parse("scaled:4") == ex.RhoMode("scaled", 4.0)

    @pytest.mark.parametrize("text", ["scaled", "fixed:", "other:1", "scaled:-1", "fixed:0"])
    def test_parse_rejects(self, text):
        with pytest.raises(ValueError):
            ex.RhoMode.parse(text)

    def test_radius(self):
        assert ex.RhoMode("scaled", 2).radius(2) == pytest.approx((2 - 1e-8) * 0.01, abs=1e-18)
        assert ex.RhoMode("fixed", 0.02 - 1e-8).radius(3) == 0.02 - 1e-8

    def test_label_keeps_digits(self):
        assert str(ex.RhoMode("fixed", 0.02 - 1e-8)) == "fixed:0.01999999"

    def test_fixed_and_scaled_share_mask(self):
        sc = ex.preset("square")
        a = Grid(ex.levelset_config(sc, 2, ex.RhoMode("fixed", 0.02 - 1e-8).radius(2)))
        b = Grid(ex.levelset_config(sc, 2, ex.RhoMode("scaled", 2).radius(2)))
        np.testing.assert_array_equal(a.active, b.active)
        np.testing.assert_array_equal(a.ghost_src, b.ghost_src)
        np.testing.assert_array_equal(a.ghost_w, b.ghost_w)


def test_sample_times():
    t = ex.sample_times(0.8)
    assert len(t) == 21 and t[0] == 0.0 and t[-1] == 0.8
    assert all(t[k] == k * 0.8 / 20 for k in range(21))


class TestCsv:
    def test_round_trip(self, tmp_path):
        path = ex.write_csv_atomic(tmp_path / "a" / "b.csv", ["t", "D"], [(0.1, 1 / 3)])
        rows = read_csv(path)
        assert rows[0] == ["t", "D"] and float(rows[1][1]) == 1 / 3
        assert [p.name for p in path.parent.iterdir()] == ["b.csv"]

    def test_failure_leaves_nothing(self, tmp_path):
        def bad_rows():
            yield (1.0, 2.0)
            raise RuntimeError("boom")
        with pytest.raises(RuntimeError):
            ex.write_csv_atomic(tmp_path / "c.csv", ["a", "b"], bad_rows())
        assert list(tmp_path.iterdir()) == []


class TestComparison:
    def test_tiny_run(self):
        res = ex.run_comparison(ex.load_scenario(TINY), 1, ex.RhoMode("fixed", 0.03), samples=3)
        assert res.ok and [t for t, _ in res.rows] == [0.0, 0.025, 0.05]
        assert res.rows[0][1] == pytest.approx(0.0, abs=1e-12)
        assert 0 <= res.max_d < 0.01

    def test_deterministic(self):
        sc = ex.load_scenario(TINY)
        a = ex.run_comparison(sc, 1, ex.RhoMode("fixed", 0.03), samples=3)
        b = ex.run_comparison(sc, 1, ex.RhoMode("fixed", 0.03), samples=3)
        assert a.rows == b.rows

    def test_failure_captured(self):
        # rho below sqrt(2) dx puts the origin inside the stencil
        res = ex.run_comparison(ex.load_scenario(TINY), 1, ex.RhoMode("fixed", 0.01), samples=3)
        assert not res.ok and res.rows == [] and "ValueError" in res.error
        assert math.isnan(res.max_d)
        assert ex.summary_row(res)[-1].startswith("failed")

    def test_box_guard(self):
        sc = ex.load_scenario({"preset": "square", "T_end": 2.0})
        with pytest.raises(RuntimeError, match="leaves the box"):
            ex.discrete_run(sc, ex.sample_times(2.0), dt=1e-4)


class TestSweep:
    def test_plan_validation(self):
        with pytest.raises(ValueError):
            ex.SweepPlan("square", [0], ["fixed:0.03"])
        with pytest.raises(ValueError):
            ex.SweepPlan("square", [1], ["bogus"])

    def test_plan_json(self, tmp_path):
        path = tmp_path / "plan.json"
        path.write_text(json.dumps({"scenario": TINY, "s": [1], "rho_modes": ["fixed:0.03"],
                                    "samples": 3, "out": str(tmp_path / "out")}))
        plan = ex.SweepPlan.from_json(path)
        assert plan.rho_modes == [ex.RhoMode("fixed", 0.03)] and plan.samples == 3

    def test_sweep_writes_outputs(self, tmp_path):
        plan = ex.SweepPlan(TINY, [1], ["fixed:0.03", "fixed:0.01"], samples=3,
                            out=str(tmp_path), workers=1)
        results = ex.sweep(plan)
        assert [r.ok for r in results] == [True, False]
        summary = read_csv(tmp_path / "summary.csv")
        assert summary[0] == ex.SUMMARY_HEADER and len(summary) == 3
        assert summary[1][-1] == "ok" and summary[2][-1].startswith("failed")
        series = read_csv(tmp_path / "square_s1_fixed0.03.csv")
        assert series[0] == ["t", "D"] and len(series) == 4
