import json
import os

import numpy as np
import pytest

import accelstats.analysis as analysis
from accelstats.bivariate import Polyline, bpdm_sample, polylines_to_csv, polylines_to_svg
from accelstats.cli import main
from accelstats.series import read_trips, write_trips
from accelstats.synth import default_bpdm_params

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


@pytest.fixture(scope="module")
def trip_file(tmp_path_factory):
    path = str(tmp_path_factory.mktemp("data") / "trips.csv")
    assert main(["synth", "--n", "60000", "--seed", "7", "--out", path]) == 0
    return path


def _load(path):
    with open(path) as fh:
        return json.load(fh)


class TestSynthCommand:
    def test_deterministic_files(self, tmp_path):
        a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        assert main(["synth", "--n", "1000", "--seed", "7", "--out", a]) == 0
        assert main(["synth", "--n", "1000", "--seed", "7", "--out", b]) == 0
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_line_count_is_n_plus_header(self, tmp_path):
        out = str(tmp_path / "c.csv")
        assert main(["synth", "--n", "1234", "--seed", "0", "--out", out]) == 0
        with open(out) as fh:
            assert sum(1 for _ in fh) == 1235

    def test_zero_records_is_a_usage_error(self, tmp_path):
        assert main(["synth", "--n", "0", "--out", str(tmp_path / "x.csv")]) == 1

    def test_bad_config_is_a_data_error(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"coupling_alpha": -2}')
        assert main(["synth", "--n", "10", "--config", str(cfg),
                     "--out", str(tmp_path / "x.csv")]) == 2

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"alpha": 0.5}')
        assert main(["synth", "--n", "10", "--config", str(cfg),
                     "--out", str(tmp_path / "x.csv")]) == 2

    def test_round_trip_preserves_nine_significant_digits(self, tmp_path):
        path = str(tmp_path / "rt.csv")
        assert main(["synth", "--n", "500", "--seed", "3", "--out", path]) == 0
        series = read_trips(path)
        rewritten = str(tmp_path / "rt2.csv")
        write_trips(rewritten, series)
        assert open(path, "rb").read() == open(rewritten, "rb").read()

    def test_matches_golden_file(self, tmp_path):
        out = str(tmp_path / "g.csv")
        assert main(["synth", "--n", "20", "--seed", "1", "--out", out]) == 0
        golden = open(os.path.join(GOLDEN, "synth_n20_seed1.csv"), "rb").read()
        assert open(out, "rb").read() == golden


class TestConvergeCommand:
    def test_converges_and_reports_trace(self, trip_file, tmp_path):
        out = str(tmp_path / "conv.json")
        trace = str(tmp_path / "trace.csv")
        rc = main(["converge", "--input", trip_file, "--signal", "ay",
                   "--chunk", "2000", "--epsilon", "1e-3", "--window", "5",
                   "--out", out, "--trace-csv", trace])
        assert rc == 0
        doc = _load(out)
        res = doc["results"]
        assert res["status"] == "converged"
        assert res["gamma"] is not None and res["gamma"] % 2000 == 0
        assert res["kl_trace"][0]["step"] == 1
        assert res["kl_trace"][0]["n"] == 2000
        assert doc["manifest"]["command"] == "converge"
        assert doc["manifest"]["inputs"][0]["sha256"]
        assert open(trace).readline().strip() == "step,n,d_kl"

    def test_short_input_exits_2(self, tmp_path):
        path = str(tmp_path / "short.csv")
        assert main(["synth", "--n", "500", "--seed", "1", "--out", path]) == 0
        assert main(["converge", "--input", path, "--chunk", "400",
                     "--out", str(tmp_path / "c.json")]) == 2

    def test_missing_vx_column_exits_2(self, tmp_path, capsys):
        path = tmp_path / "novx.csv"
        path.write_text("t,ax,ay\n" + "".join(
            f"{i/10},{0.1*(i%7-3)},{0.05*(i%5-2)}\n" for i in range(5000)))
        rc = main(["converge", "--input", str(path), "--signal", "vx",
                   "--chunk", "1000", "--out", str(tmp_path / "c.json")])
        assert rc == 2
        assert "vx" in capsys.readouterr().err

    def test_non_convergence_exits_3(self, trip_file, tmp_path):
        out = str(tmp_path / "c.json")
        rc = main(["converge", "--input", trip_file, "--signal", "ay",
                   "--chunk", "2000", "--epsilon", "1e-9", "--window", "5",
                   "--out", out])
        assert rc == 3
        assert _load(out)["results"]["status"] != "converged"


class TestFitCommand:
    def test_report_schema(self, trip_file, tmp_path):
        out = str(tmp_path / "fit.json")
        assert main(["fit", "--input", trip_file, "--section", "left", "--out", out]) == 0
        res = _load(out)["results"]
        assert res["section"] == "left"
        assert res["aic_order"] == ["gpd", "exponential", "normal"]
        for rep in res["reports"].values():
            assert list(rep) == ["model", "theta", "logL", "r", "n", "aic", "bic"]

    def test_missing_input_exits_2(self, tmp_path):
        assert main(["fit", "--input", str(tmp_path / "nope.csv"),
                     "--section", "left", "--out", str(tmp_path / "f.json")]) == 2


class TestContourCommand:
    def test_bndm_svg_has_ellipse_paths(self, tmp_path):
        out = str(tmp_path / "bndm.svg")
        rc = main(["contour", "--model", "bndm", "--sigma-x", "0.5", "--sigma-y", "0.2",
                   "--levels", "0.5,0.01", "--out-format", "svg", "--out", out])
        assert rc == 0
        svg = open(out).read()
        assert svg.count("<path") == 2 and "Z" in svg

    def test_bpdm_numeric_cross_check_below_one_percent(self, tmp_path):
        out = str(tmp_path / "bpdm.json")
        assert main(["contour", "--model", "bpdm", "--levels", "0.001", "--out", out]) == 0
        level = _load(out)["results"]["levels"][0]
        assert level["max_residual"] <= 1e-6
        assert level["max_deviation_frac"] <= 0.01
        assert len(level["polylines"]) == 4

    def test_empirical_table_shape(self, trip_file, tmp_path):
        out = str(tmp_path / "emp.json")
        rc = main(["contour", "--input", trip_file, "--levels", "0.001,0.01,0.1,0.95",
                   "--out", out])
        assert rc == 0
        res = _load(out)["results"]
        assert res["mode"] == "empirical"
        masses = [row["mass_inside"] for row in res["levels"]]
        assert all(a > b for a, b in zip(masses, masses[1:]))
        assert all({"relative_level", "mass_inside"} <= set(row) for row in res["levels"])

    def test_requires_input_or_model(self, tmp_path):
        assert main(["contour", "--out", str(tmp_path / "x.json")]) == 1

    def test_grid_csv_dump(self, trip_file, tmp_path):
        out = str(tmp_path / "emp.json")
        grid_csv = str(tmp_path / "grid.csv")
        rc = main(["contour", "--input", trip_file, "--levels", "0.1",
                   "--out", out, "--grid-csv", grid_csv])
        assert rc == 0
        from accelstats.kde import density_grid_from_csv
        grid = density_grid_from_csv(open(grid_csv).read())
        assert grid.dim == 2 and 0.99 <= grid.mass() <= 1.01


class TestPercentilesCommand:
    def test_json_and_csv(self, trip_file, tmp_path):
        out = str(tmp_path / "pct.json")
        csv = str(tmp_path / "pct.csv")
        rc = main(["percentiles", "--input", trip_file, "--target", "ay",
                   "--condition", "ax", "--bins", "0:3:0.5", "--out", out, "--csv", csv])
        assert rc == 0
        res = _load(out)["results"]
        assert res["levels"] == [90.0, 99.0, 99.9, 99.99]
        assert len(res["counts"]) == 6
        header = open(csv).readline().strip()
        assert header == "bin_low,bin_high,count,p90,p99,p999,p9999"

    def test_golden_table_format(self):
        xy = bpdm_sample(20_000, default_bpdm_params(), seed=42)
        table = analysis.percentile_by_interval(
            xy, "ay", "ax", [0.0, 0.5, 1.0, 50.0, 60.0], min_count=1000)
        golden = open(os.path.join(GOLDEN, "percentiles.csv")).read()
        assert table.to_csv() == golden


class TestPolylineGoldenFormats:
    def test_csv_and_svg_golden(self):
        pls = [Polyline(points=np.array([[0.0, 0.5], [1.25, 2.5], [3.0, 1.0]])),
               Polyline(points=np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]),
                        closed=True)]
        assert polylines_to_csv(pls) == open(os.path.join(GOLDEN, "polylines.csv")).read()
        assert polylines_to_svg(pls) == open(os.path.join(GOLDEN, "polylines.svg")).read()


class TestVelocityCommand:
    def test_profile_shape(self, trip_file, tmp_path):
        out = str(tmp_path / "vel.json")
        assert main(["velocity", "--input", trip_file, "--bins", "0:35:5", "--out", out]) == 0
        res = _load(out)["results"]
        assert len(res["bins"]) == 7
        assert res["velocity_density"]["v"]
        populated = [b for b in res["bins"] if b["count"] >= 1000]
        assert populated and all(b["fits"]["left"] is not None for b in populated)


class TestReportCommand:
    def test_bundle_sections_and_determinism(self, trip_file, tmp_path):
        d1, d2 = str(tmp_path / "r1"), str(tmp_path / "r2")
        rc1 = main(["report", "--input", trip_file, "--out-dir", d1,
                    "--chunk", "3000", "--epsilon", "5e-3", "--window", "5"])
        rc2 = main(["report", "--input", trip_file, "--out-dir", d2,
                    "--chunk", "3000", "--epsilon", "5e-3", "--window", "5"])
        assert rc1 == 0 and rc2 == 0
        doc1, doc2 = _load(os.path.join(d1, "report.json")), _load(os.path.join(d2, "report.json"))
        assert list(doc1["results"]) == ["convergence", "pattern", "fits",
                                         "percentiles", "velocity"]
        assert all(sec["status"] == "ok" for sec in doc1["results"].values())
        assert json.dumps(doc1["results"]) == json.dumps(doc2["results"])

    def test_corrupt_row_reports_row_number(self, tmp_path, capsys):
        path = tmp_path / "corrupt.csv"
        path.write_text("t,ax,ay,vx\n0,0.1,0.2,5\n0.1,oops,0.2,5\n")
        rc = main(["report", "--input", str(path), "--out-dir", str(tmp_path / "r")])
        assert rc == 2
        assert "row 3" in capsys.readouterr().err


def test_unknown_command_is_usage_error():
    assert main(["frobnicate"]) == 1


def test_missing_required_flag_is_usage_error():
    assert main(["synth", "--out", "x.csv"]) == 1
