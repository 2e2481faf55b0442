import pytest

from dualmink.errors import ConfigurationError
from dualmink.fileio import (comparable_text, dump_document, load_json,
                             load_model, write_document)
from dualmink.schemas import FieldModel, SolverConfigModel, body_adapter


class TestDocuments:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "doc.json"
        write_document(path, {"b": [1, 2], "a": 1.5})
        assert load_json(path) == {"a": 1.5, "b": [1, 2]}

    def test_header_lines_skipped(self, tmp_path):
        path = tmp_path / "doc.json"
        path.write_text("# a comment\n# another\n{\"x\": 1}\n")
        assert load_json(path) == {"x": 1}

    def test_comparable_text_drops_timestamp_only(self):
        a = dump_document({"x": 1})
        b = dump_document({"x": 1})
        assert comparable_text(a) == comparable_text(b)
        assert comparable_text(a) != comparable_text(dump_document({"x": 2}))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="cannot read"):
            load_json(tmp_path / "nope.json")

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("# header\n{\"x\": }\n")
        with pytest.raises(ConfigurationError, match="line"):
            load_json(path)


class TestModelValidation:
    def test_body_file(self, tmp_path):
        path = tmp_path / "ball.body"
        write_document(path, {"type": "ellipsoid", "half_axes": [1, 1, 1]})
        model = load_model(path, body_adapter())
        body = model.to_body()
        assert body.half_axes.tolist() == [1, 1, 1]

    def test_bad_field_named(self, tmp_path):
        path = tmp_path / "bad.body"
        write_document(path, {"type": "ellipsoid", "half_axes": [1, 1]})
        with pytest.raises(ConfigurationError, match="half_axes"):
            load_model(path, body_adapter())

    def test_polytope_row_diagnostic(self, tmp_path):
        path = tmp_path / "bad.body"
        write_document(path, {"type": "polytope",
                              "vertices": [[0, 0, 0], [1, 0, 0],
                                           [0, 1, 0], [0, 0]]})
        with pytest.raises(ConfigurationError, match="vertices"):
            load_model(path, body_adapter())

    def test_field_exactly_one_source(self, tmp_path):
        model = FieldModel(level=3, values=None, constant=None)
        with pytest.raises(ValueError):
            model.to_values()
        both = FieldModel(level=3, values=[1.0] * 642, constant=1.0)
        with pytest.raises(ValueError):
            both.to_values()

    def test_field_constant_expands(self):
        values = FieldModel(level=3, constant=2.0).to_values()
        assert len(values) == 642
        assert values.min() == values.max() == 2.0

    def test_solver_config_defaults(self, tmp_path):
        path = tmp_path / "cfg.json"
        write_document(path, {"level": 3, "tol_residual": 1e-5})
        cfg = load_model(path, SolverConfigModel).to_config()
        assert cfg.level == 3
        assert cfg.tol_residual == 1e-5
        assert cfg.max_iter == 2000
