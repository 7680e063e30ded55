"""End-to-end tests of the command-line front end."""
import csv
import json
import logging

import numpy as np
import pytest

import cli
from cli import ModelFile, _fmt, load_model, main, parse_axis, read_data
from errors import ModelFileError, UsageError
from kde import DirLinSample, DirSample
from models import DirLinMixture, LinMixture, directional_reference
from risk import h_amise_dir
from sphere import build_sphere_grid


def _rows(path):
    with open(path, newline="") as handle:
        lines = handle.read().splitlines()
    assert lines[0].startswith("# dirkde ")
    return list(csv.reader(lines[1:]))


def _write_model(tmp_path, body, name="model.json"):
    path = tmp_path / name
    path.write_text(json.dumps(body))
    return str(path)


@pytest.fixture
def circle_csv(tmp_path, mixtures_dir):
    out = tmp_path / "circle.csv"
    assert main(["sample", "--model", str(mixtures_dir / "vm3_circle.json"), "--n", "200", "--seed", "7", "--out", str(out)]) == 0
    return out


class TestModelFile:
    def test_reference_files_load(self, mixtures_dir):
        kinds = {p.name: type(load_model(str(p))) for p in mixtures_dir.glob("*.json")}
        assert kinds["normal3.json"] is LinMixture
        assert kinds["vmnorm3_cylinder.json"] is DirLinMixture

    def test_mu_renormalized(self, caplog):
        spec = ModelFile.model_validate({"q": 1, "components": [{"weight": 1.0, "mu": [2.0, 0.0], "kappa": 1.0}]})
        assert spec.components[0].mu == [1.0, 0.0]
        assert "renormalized" in caplog.text

    @pytest.mark.parametrize(
        "body, field",
        [
            ({"q": 1, "components": [{"weight": 0.5, "mu": [1, 0], "kappa": 1}]}, "weight"),
            ({"q": 2, "components": [{"weight": 1.0, "mu": [1, 0], "kappa": 1}]}, "mu"),
            ({"q": 1, "components": [{"weight": 1.0, "mu": [1, 0], "kappa": -1}]}, "kappa"),
            ({"q": 1, "components": [{"weight": 1.0, "mu": [1, 0], "kappa": 1, "mean": 0.0}]}, "sigma"),
            ({"q": 0, "components": [{"weight": 1.0, "mu": [1, 0], "kappa": 1}]}, "mu"),
            ({"q": 1, "components": []}, "components"),
        ],
    )
    def test_errors_name_the_field(self, tmp_path, body, field):
        with pytest.raises(ModelFileError, match=field):
            load_model(_write_model(tmp_path, body))

    def test_mixed_linear_fields(self, tmp_path):
        body = {
            "q": 1,
            "components": [
                {"weight": 0.5, "mu": [1, 0], "kappa": 1, "mean": 0.0, "sigma": 1.0},
                {"weight": 0.5, "mu": [0, 1], "kappa": 1},
            ],
        }
        with pytest.raises(ModelFileError, match="mean"):
            load_model(_write_model(tmp_path, body))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ModelFileError):
            load_model(str(tmp_path / "absent.json"))


class TestInputs:
    def test_parse_axis(self):
        assert parse_axis("0.1:0.5:5") == pytest.approx([0.1, 0.2, 0.3, 0.4, 0.5])

    @pytest.mark.parametrize("text", ["0:1:5", "0.5:0.1:5", "0.1:1:1", "0.1:1"])
    def test_parse_axis_rejects(self, text):
        with pytest.raises(ValueError):
            parse_axis(text)

    def test_read_data_kinds(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("# comment\nx1,x2,z\n1,0,0.5\n0,2,1.5\n")
        data = read_data(str(path))
        assert isinstance(data, DirLinSample)
        np.testing.assert_allclose(data.points[1], [0.0, 1.0])
        path.write_text("x1,x2,x3\n0,0,1\n")
        assert isinstance(read_data(str(path)), DirSample)
        path.write_text("z\n0.1\n0.2\n")
        assert read_data(str(path)).shape == (2,)

    def test_read_data_malformed(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x1,x2\n1,abc\n")
        with pytest.raises(UsageError):
            read_data(str(path))


class TestSample:
    def test_unit_rows(self, circle_csv):
        rows = _rows(circle_csv)
        assert rows[0] == ["x1", "x2"]
        pts = np.array(rows[1:], dtype=float)
        assert pts.shape == (200, 2)
        np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-9)

    def test_reruns_are_identical(self, circle_csv, tmp_path, mixtures_dir):
        again = tmp_path / "again.csv"
        main(["sample", "--model", str(mixtures_dir / "vm3_circle.json"), "--n", "200", "--seed", "7", "--out", str(again)])
        assert again.read_bytes() == circle_csv.read_bytes()

    def test_directional_linear_columns(self, tmp_path, mixtures_dir):
        out = tmp_path / "cyl.csv"
        main(["sample", "--model", str(mixtures_dir / "vmnorm3_sphere.json"), "--n", "10", "--out", str(out)])
        assert _rows(out)[0] == ["x1", "x2", "x3", "z"]

    def test_stdout(self, capsys, mixtures_dir):
        assert main(["sample", "--model", str(mixtures_dir / "normal3.json"), "--n", "5"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[1] == "z"
        assert len(lines) == 7


class TestKde:
    def test_grid_rows_and_integral(self, circle_csv, tmp_path, caplog):
        caplog.set_level(logging.INFO, logger="dirkde")
        out = tmp_path / "kde.csv"
        assert main(["kde", "--data", str(circle_csv), "--h", "0.3", "--grid-res", "64", "--out", str(out)]) == 0
        rows = _rows(out)
        assert rows[0] == ["x1", "x2", "weight", "density"]
        table = np.array(rows[1:], dtype=float)
        assert table.shape[0] == build_sphere_grid(1, 64).size
        assert table[:, 2] @ table[:, 3] == pytest.approx(1.0, abs=1e-8)
        assert "integral of the estimate" in caplog.text

    def test_single_datum_is_one_bump(self, tmp_path):
        data = tmp_path / "one.csv"
        data.write_text("x1,x2\n0.6,0.8\n")
        out = tmp_path / "kde.csv"
        assert main(["kde", "--data", str(data), "--h", "0.5", "--grid-res", "64", "--out", str(out)]) == 0
        table = np.array(_rows(out)[1:], dtype=float)
        peak = table[np.argmax(table[:, 3]), :2]
        nearest = table[np.argmax(table[:, :2] @ [0.6, 0.8]), :2]
        np.testing.assert_array_equal(peak, nearest)
        assert table[:, 2] @ table[:, 3] == pytest.approx(1.0, abs=1e-8)

    def test_needs_bandwidth(self, circle_csv):
        assert main(["kde", "--data", str(circle_csv)]) == 1

    def test_rejects_nonpositive_h(self, circle_csv):
        assert main(["kde", "--data", str(circle_csv), "--h", "-0.1"]) == 1


class TestRisk:
    def test_csv_layout(self, tmp_path, mixtures_dir):
        out = tmp_path / "risk.csv"
        args = ["risk", "--model", str(mixtures_dir / "vm3_circle.json"), "--h", "0.1:1.0:10", "--n", "100", "--out", str(out)]
        assert main(args) == 0
        rows = _rows(out)
        assert rows[0] == ["h", "n", "method", "value", "se", "argmin"]
        body = rows[1:]
        assert len(body) == 2 * 10 + 2
        for method in ("exact", "amise"):
            hs = [float(r[0]) for r in body if r[2] == method and r[5] == "0"]
            assert hs == sorted(hs) and len(hs) == 10
        assert sum(r[5] == "1" for r in body) == 2

    def test_linear_model(self, tmp_path, mixtures_dir):
        out = tmp_path / "risk.csv"
        assert main(["risk", "--model", str(mixtures_dir / "normal3.json"), "--g", "0.1:1.0:4", "--n", "50", "--out", str(out)]) == 0
        assert _rows(out)[0][0] == "g"

    def test_boot_reads_sample_output(self, circle_csv, tmp_path, mixtures_dir):
        out = tmp_path / "boot.csv"
        args = ["risk", "--model", str(mixtures_dir / "vm3_circle.json"), "--data", str(circle_csv), "--method", "boot"]
        assert main(args + ["--hp", "0.3", "--h", "0.1:1.0:5", "--n", "100", "--out", str(out)]) == 0
        body = _rows(out)[1:]
        assert {r[1] for r in body} == {"200"}
        assert len(body) == 6

    def test_boot_needs_data(self, mixtures_dir):
        args = ["risk", "--model", str(mixtures_dir / "vm3_circle.json"), "--h", "0.1:1.0:4", "--n", "100", "--method", "boot"]
        assert main(args) == 1

    def test_unknown_method(self, mixtures_dir):
        args = ["risk", "--model", str(mixtures_dir / "vm3_circle.json"), "--h", "0.1:1.0:4", "--n", "100", "--method", "cv"]
        assert main(args) == 1


class TestBandwidth:
    def test_amise_matches_closed_form(self, tmp_path, mixtures_dir):
        out = tmp_path / "bw.json"
        args = ["bandwidth", "--model", str(mixtures_dir / "vm3_circle.json"), "--n", "100", "--grid-res", "128", "--out", str(out)]
        assert main(args) == 0
        result = json.loads(out.read_text())
        expected = h_amise_dir(directional_reference(1), 100, grid=build_sphere_grid(1, 128))
        assert result["h"] == pytest.approx(expected, rel=1e-4)
        assert "g" not in result
        assert result["criterion"] == "amise"
        assert result["diagnostics"]["converged"] is True

    def test_exact_inside_sweep_bracket(self, tmp_path, mixtures_dir):
        model = str(mixtures_dir / "vm3_circle.json")
        sweep_out, bw_out = tmp_path / "risk.csv", tmp_path / "bw.json"
        main(["risk", "--model", model, "--h", "0.05:1.0:20", "--n", "100", "--method", "exact", "--out", str(sweep_out)])
        best = [float(r[0]) for r in _rows(sweep_out)[1:] if r[5] == "1"][0]
        assert main(["bandwidth", "--criterion", "exact", "--model", model, "--n", "100", "--out", str(bw_out)]) == 0
        h = json.loads(bw_out.read_text())["h"]
        assert best - 0.05 <= h <= best + 0.05

    def test_exact_on_cylinder(self, tmp_path, mixtures_dir):
        out = tmp_path / "bw.json"
        args = ["bandwidth", "--criterion", "exact", "--model", str(mixtures_dir / "vmnorm3_cylinder.json"), "--n", "100", "--out", str(out)]
        assert main(args) == 0
        result = json.loads(out.read_text())
        assert result["h"] > 0 and result["g"] > 0

    def test_boot_from_data(self, circle_csv, capsys):
        assert main(["bandwidth", "--criterion", "boot", "--data", str(circle_csv), "--hp", "0.3"]) == 0
        result = json.loads(capsys.readouterr().out)
        assert result["n"] == 200
        assert 0.01 <= result["h"] <= 3.0

    def test_uniform_target_is_degenerate(self, tmp_path):
        model = _write_model(tmp_path, {"q": 1, "components": [{"weight": 1.0, "mu": [1, 0], "kappa": 0}]})
        assert main(["bandwidth", "--model", model, "--n", "100"]) == 2


class TestVerifyCommand:
    def test_passes(self, capsys):
        assert main(["verify"]) == 0
        lines = capsys.readouterr().out.splitlines()
        checks = [ln for ln in lines if ln.startswith(("PASS", "FAIL"))]
        assert len(checks) >= 8
        assert all(ln.startswith("PASS") for ln in checks)

    def test_injected_constant_fails(self, capsys):
        assert main(["verify", "--inject-text-dq"]) == 3
        out = capsys.readouterr().out
        assert "FAIL  d_" in out


class TestOutputFormat:
    def test_cells(self):
        assert [_fmt(v) for v in ("exact", None, True, np.int64(3), 0.1)] == ["exact", "", "1", "3", "0.1"]

    def test_float_round_trip(self):
        v = 1.0 / 3.0
        assert float(_fmt(np.float64(v))) == v


class TestUsage:
    def test_unknown_command(self):
        assert main(["frobnicate"]) == 1

    def test_negative_seed(self, mixtures_dir):
        assert main(["sample", "--model", str(mixtures_dir / "vm3_circle.json"), "--n", "5", "--seed", "-1"]) == 1

    def test_stray_numeric_failure_maps_to_exit_code(self, monkeypatch, mixtures_dir):
        def overflowing(*args, **kwargs):
            raise FloatingPointError("overflow in exp")

        monkeypatch.setattr(cli, "sample", overflowing)
        assert main(["sample", "--model", str(mixtures_dir / "vm3_circle.json"), "--n", "5"]) == 2
