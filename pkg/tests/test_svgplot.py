"""The internal SVG emitter: well-formedness and determinism."""

import math
import xml.etree.ElementTree as ET

import pytest

from evolab.errors import InputError
from evolab.svgplot import Series, histogram_series, line_plot

SVG_NS = "{http://www.w3.org/2000/svg}"


def render(tmp_path, series, **kw):
    path = tmp_path / "plot.svg"
    line_plot(path, series, **kw)
    return path, ET.parse(path).getroot()


class TestLinePlot:
    def test_parses_as_xml_with_one_polyline_per_series(self, tmp_path):
        series = [
            Series("up", [0, 1, 2], [0.0, 1.0, 2.0]),
            Series("down", [0, 1, 2], [2.0, 1.0, 0.0]),
        ]
        _, root = render(tmp_path, series, title="t", xlabel="x", ylabel="y")
        assert root.tag == f"{SVG_NS}svg"
        polylines = root.findall(f"{SVG_NS}polyline")
        assert len(polylines) == 2
        colors = {p.get("stroke") for p in polylines}
        assert len(colors) == 2  # distinct palette entries

    def test_legend_and_labels_present(self, tmp_path):
        _, root = render(
            tmp_path, [Series("acc", [0, 1], [0, 1])],
            title="Training", xlabel="epoch", ylabel="accuracy",
        )
        texts = [t.text for t in root.iter(f"{SVG_NS}text")]
        for expected in ("Training", "epoch", "accuracy", "acc"):
            assert expected in texts

    def test_deterministic_bytes(self, tmp_path):
        series = [Series("s", [0.1, 0.9, 2.3], [1 / 3, 2 / 7, 0.5])]
        a = tmp_path / "a.svg"
        b = tmp_path / "b.svg"
        line_plot(a, series)
        line_plot(b, series)
        assert a.read_bytes() == b.read_bytes()

    def test_single_point_becomes_marker(self, tmp_path):
        _, root = render(tmp_path, [Series("dot", [1.0], [2.0])])
        assert len(root.findall(f"{SVG_NS}circle")) == 1
        assert len(root.findall(f"{SVG_NS}polyline")) == 0

    def test_nan_points_dropped(self, tmp_path):
        s = Series("gappy", [0, 1, 2, 3], [0.0, math.nan, 2.0, 3.0])
        _, root = render(tmp_path, [s])
        poly = root.find(f"{SVG_NS}polyline")
        assert len(poly.get("points").split()) == 3

    def test_escapes_markup_characters(self, tmp_path):
        path, root = render(tmp_path, [Series("a<b&c", [0, 1], [0, 1])],
                            title="x<y")
        texts = [t.text for t in root.iter(f"{SVG_NS}text")]
        assert "a<b&c" in texts  # parser round-trips the escapes
        assert "<y" not in path.read_text().split("title")[0]

    def test_empty_series_list_rejected(self, tmp_path):
        with pytest.raises(InputError, match="series"):
            line_plot(tmp_path / "x.svg", [])

    def test_all_nan_rejected(self, tmp_path):
        with pytest.raises(InputError, match="finite"):
            line_plot(tmp_path / "x.svg",
                      [Series("void", [0, 1], [math.nan, math.nan])])

    def test_constant_series_renders(self, tmp_path):
        # degenerate y-range must not divide by zero
        _, root = render(tmp_path, [Series("flat", [0, 1, 2], [5.0, 5.0, 5.0])])
        assert root.find(f"{SVG_NS}polyline") is not None


class TestHistogramSeries:
    def test_counts_and_step_shape(self):
        s = histogram_series([0.5, 1.5, 1.6, 2.5], bin_width=1.0, name="h",
                             lo=0.0, hi=3.0)
        # 3 bins -> 6 step points; bin counts 1, 2, 1
        assert len(s.xs) == 6
        assert s.ys == [1, 1, 2, 2, 1, 1]
        assert s.xs[0] == 0.0 and s.xs[-1] == 3.0

    def test_auto_range(self):
        s = histogram_series([2.2, 2.8, 3.3], bin_width=1.0, name="h")
        assert s.xs[0] == 2.0  # floor to the bin grid
        assert max(s.ys) == 2

    def test_top_edge_value_lands_in_last_bin(self):
        s = histogram_series([0.0, 2.0], bin_width=1.0, name="h", lo=0.0, hi=2.0)
        # two bins [0,1) and [1,2]; the hi value clamps into the last one
        assert s.ys == [1, 1, 1, 1]
        assert s.xs == [0.0, 1.0, 1.0, 2.0]

    def test_validation(self):
        with pytest.raises(InputError, match="bin_width"):
            histogram_series([1.0], 0.0, "h")
        with pytest.raises(InputError, match="finite"):
            histogram_series([math.nan], 1.0, "h")

    def test_plots_cleanly(self, tmp_path):
        s = histogram_series(list(range(20)), bin_width=5.0, name="h")
        _, root = render(tmp_path, [s])
        assert root.find(f"{SVG_NS}polyline") is not None
