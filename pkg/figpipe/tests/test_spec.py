import json
import os

import pytest

from figpipe import FigureSpec, bundled_spec_ids, load_spec
from figpipe.spec import SPEC_DIR


class TestFigureSpec:
    def test_minimal_spec(self):
        s = FigureSpec.from_config({
            "figure_id": "f", "inputs": ["a.csv"], "x": "x", "y": "y",
            "group": "g", "output": "f.png"})
        assert s.scale == {"x": "linear", "y": "linear"}
        assert s.error_bar is None and s.path is None and s.overlay is None
        assert s.columns() == ["x", "y", "g"]

    def test_columns_cover_every_reference(self):
        s = FigureSpec.from_config({
            "figure_id": "f", "inputs": ["a.csv"], "x": "x", "y": "y",
            "group": "g", "path": "p", "error_bar": "e",
            "filter": {"stat": "v"}, "output": "f.png"})
        assert s.columns() == ["x", "y", "g", "p", "e", "stat"]

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown spec keys.*bogus"):
            FigureSpec.from_config({
                "figure_id": "f", "inputs": ["a.csv"], "x": "x", "y": "y",
                "group": "g", "output": "f.png", "bogus": 1})

    def test_bad_scale_rejected(self):
        with pytest.raises(ValueError, match="scale.y"):
            FigureSpec.from_config({
                "figure_id": "f", "inputs": ["a.csv"], "x": "x", "y": "y",
                "group": "g", "output": "f.png",
                "scale": {"x": "linear", "y": "cubic"}})

    def test_bad_overlay_rejected(self):
        with pytest.raises(ValueError, match="overlay"):
            FigureSpec.from_config({
                "figure_id": "f", "inputs": ["a.csv"], "x": "x", "y": "y",
                "group": "g", "output": "f.png", "overlay": "spline"})

    def test_no_inputs_rejected(self):
        with pytest.raises(ValueError, match="no inputs"):
            FigureSpec.from_config({
                "figure_id": "f", "inputs": [], "x": "x", "y": "y",
                "group": "g", "output": "f.png"})


class TestBundledSpecs:
    def test_expected_ids_present(self):
        ids = bundled_spec_ids()
        assert {"fig3", "fig4", "fig9"} <= set(ids)

    def test_one_figure_id_per_bundled_spec(self):
        seen = {}
        for fid in bundled_spec_ids():
            spec = load_spec(fid)
            assert spec.figure_id == fid
            assert spec.figure_id not in seen
            seen[spec.figure_id] = fid

    def test_all_bundled_specs_validate(self):
        for fid in bundled_spec_ids():
            spec = load_spec(fid)
            assert spec.inputs and spec.output.endswith(".png")

    def test_load_by_basename_and_by_id(self):
        by_id = load_spec("fig3")
        by_base = load_spec("fig3.spec.json")
        by_path = load_spec(os.path.join(SPEC_DIR, "fig3.spec.json"))
        assert by_id == by_base == by_path

    def test_unknown_spec_names_bundled_ids(self):
        with pytest.raises(ValueError, match="fig3"):
            load_spec("no_such_figure")

    def test_invalid_json_reported_with_path(self, tmp_path):
        p = tmp_path / "bad.spec.json"
        p.write_text("{not json")
        with pytest.raises(ValueError, match="invalid JSON"):
            load_spec(str(p))

    def test_explicit_path_wins_over_bundle(self, tmp_path):
        cfg = json.load(open(os.path.join(SPEC_DIR, "fig3.spec.json")))
        cfg["title"] = "local override"
        p = tmp_path / "fig3.spec.json"
        p.write_text(json.dumps(cfg))
        assert load_spec(str(p)).title == "local override"
