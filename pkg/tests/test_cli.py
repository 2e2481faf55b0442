import json

import numpy as np
import pytest

from dualmink.cli import main
from dualmink.fileio import comparable_text, load_json, write_document


@pytest.fixture()
def ball_file(tmp_path):
    path = tmp_path / "ball.body"
    write_document(path, {"type": "ellipsoid", "half_axes": [1.0, 1.0, 1.0]})
    return str(path)


@pytest.fixture()
def iso_field(tmp_path):
    path = tmp_path / "iso.field"
    write_document(path, {"type": "field", "level": 3, "constant": 1.0})
    return str(path)


class TestMeasureCommand:
    def test_ball_total(self, ball_file, capsys):
        code = main(["measure", "--body", ball_file, "--p", "0", "--q", "3",
                     "--region", "full"])
        assert code == 0
        total = float(capsys.readouterr().out.strip())
        assert total == pytest.approx(4 * np.pi, rel=1e-6)

    def test_missing_file_is_usage_error(self, tmp_path):
        assert main(["measure", "--body", str(tmp_path / "nope.body")]) == 2

    def test_invalid_body_is_usage_error(self, tmp_path):
        path = tmp_path / "bad.body"
        write_document(path, {"type": "ellipsoid", "half_axes": [1.0, 1.0]})
        assert main(["measure", "--body", str(path)]) == 2

    def test_bad_region_string(self, ball_file):
        assert main(["measure", "--body", ball_file, "--region", "donut"]) == 2

    def test_output_idempotent_modulo_timestamp(self, ball_file, tmp_path):
        out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
        for out in (out1, out2):
            code = main(["measure", "--body", ball_file, "--p", "0",
                         "--q", "3", "--out", str(out)])
            assert code == 0
        assert comparable_text(out1.read_text()) == comparable_text(out2.read_text())

    def test_output_embeds_config_hash(self, ball_file, tmp_path):
        out = tmp_path / "m.json"
        main(["measure", "--body", ball_file, "--out", str(out)])
        assert "config_hash" in load_json(out)["provenance"]


class TestSolveCommand:
    def test_isotropic_writes_roundtrippable_solution(self, iso_field, tmp_path):
        out = tmp_path / "sol.body"
        report = tmp_path / "report.json"
        code = main(["solve", "--f", iso_field, "--p", "0.5", "--q", "3.5",
                     "--level", "3", "--out", str(out), "--report", str(report)])
        assert code == 0
        payload = load_json(out)
        assert payload["type"] == "support_grid"
        values = np.array(payload["values"])
        assert np.abs(values - 1.0).max() <= 1e-3
        rep = load_json(report)
        assert rep["status"] == "converged"
        assert rep["residual_history"][-1] <= 1e-3
        # the solution file loads back as a body
        code = main(["measure", "--body", str(out), "--p", "0", "--q", "3"])
        assert code == 0

    def test_level_mismatch_usage_error(self, iso_field):
        assert main(["solve", "--f", iso_field, "--p", "0.5", "--q", "3.5",
                     "--level", "4"]) == 2

    def test_unsupported_regime_exit(self, iso_field):
        assert main(["solve", "--f", iso_field, "--p", "0.5", "--q", "2.0",
                     "--level", "3"]) == 2

    def test_degenerate_init_exit(self, iso_field, tmp_path):
        cfg = tmp_path / "cfg.json"
        write_document(cfg, {"level": 3,
                             "init": {"kind": "field", "values": [-1.0] * 642}})
        code = main(["solve", "--f", iso_field, "--p", "0.5", "--q", "3.5",
                     "--config", str(cfg)])
        assert code == 3


class TestJohnCommand:
    def test_cube(self, tmp_path, capsys):
        path = tmp_path / "cube.body"
        verts = [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1)
                 for sz in (-1, 1)]
        write_document(path, {"type": "polytope", "vertices": verts})
        assert main(["john", "--body", str(path)]) == 0
        out = capsys.readouterr().out
        assert "half_axes" in out


class TestVerifyCommand:
    def test_c0_pass_and_tsv(self, tmp_path):
        fam = tmp_path / "family.json"
        write_document(fam, {"kind": "balls", "count": 3,
                             "axis_range": [0.9, 1.1], "level": 3})
        out = tmp_path / "report.json"
        tsv = tmp_path / "report.tsv"
        code = main(["verify", "c0", "--family", str(fam), "--p", "0",
                     "--q", "3.5", "--lambda-cap", "2.0",
                     "--out", str(out), "--tsv", str(tsv)])
        assert code == 0
        report = load_json(out)
        assert report["verdict"] == "pass"
        lines = [ln for ln in tsv.read_text().splitlines()
                 if not ln.startswith("#")]
        assert lines[0].startswith("body_id\t")
        assert len(lines) == 4

    def test_failing_suite_exit_code(self, tmp_path):
        fam = tmp_path / "family.json"
        write_document(fam, {"kind": "balls", "count": 3,
                             "axis_range": [0.5, 2.0], "level": 3})
        code = main(["verify", "c0", "--family", str(fam), "--p", "0",
                     "--q", "3.5", "--lambda-cap", "50.0",
                     "--sup-h-bound", "1.2"])
        assert code == 1

    def test_baseline_dir_used(self, tmp_path):
        fam = tmp_path / "family.json"
        write_document(fam, {"kind": "balls", "count": 2,
                             "axis_range": [0.9, 1.1], "level": 3})
        bdir = tmp_path / "bases"
        code = main(["verify", "basic-estimate", "--family", str(fam),
                     "--p", "0", "--q", "3.2", "--lambda-cap", "5.0",
                     "--baseline-dir", str(bdir)])
        assert code == 0
        assert list(bdir.glob("basic_estimate-*.json"))


class TestProbeCommand:
    def test_uniqueness(self, iso_field, tmp_path):
        out = tmp_path / "probe.json"
        code = main(["probe", "uniqueness", "--f", iso_field, "--p", "0",
                     "--q", "3.0", "--starts", "2", "--out", str(out)])
        assert code == 0
        assert load_json(out)["verdict"] == "pass"

    def test_degeneration_flag_required(self):
        assert main(["probe", "degeneration", "--p", "-2.0"]) == 2
        assert main(["probe", "degeneration", "--p", "-2.0", "--level", "3",
                     "--allow-unsupported"]) == 0


class TestUsage:
    def test_no_command(self):
        assert main([]) == 2

    def test_unknown_command(self):
        assert main(["frobnicate"]) == 2
