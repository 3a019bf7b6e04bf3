import csv
import io
import re
import xml.etree.ElementTree as ET

import pytest

from icureadmit.errors import ContractError
from icureadmit.models import FeatureImportance
from icureadmit.report import (
    font_sizes,
    tag_cloud_svg,
    write_histogram_csv,
    write_importance_csv,
    write_roc_csv,
)

ROWS = [
    FeatureImportance("bipap", 4.0, 1),
    FeatureImportance("fistula", 2.5, 1),
    FeatureImportance("a<b&c", 1.0, -1),
]


def test_importance_csv():
    buf = io.StringIO()
    write_importance_csv(ROWS, buf)
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert rows[0] == ["rank", "term", "importance", "sign"]
    assert rows[1] == ["1", "bipap", "4.0", "1"]
    assert [r[1] for r in rows[1:]] == ["bipap", "fistula", "a<b&c"]


def test_font_sizes_linear():
    assert font_sizes([4.0, 2.5, 1.0], 10, 40) == [40.0, 25.0, 10.0]
    assert font_sizes([3.0, 3.0], 10, 40) == [40.0, 40.0]
    with pytest.raises(ContractError):
        font_sizes([1.0], 0, 10)


def test_svg_one_text_per_term():
    svg = tag_cloud_svg(ROWS, 10, 40, columns=2)
    root = ET.fromstring(svg)
    texts = root.findall("{http://www.w3.org/2000/svg}text")
    assert [t.text for t in texts] == ["bipap", "fistula", "a<b&c"]
    assert [float(t.get("font-size")) for t in texts] == [40.0, 25.0, 10.0]
    assert len(re.findall(r"<text\b", svg)) == 3


def test_svg_empty():
    root = ET.fromstring(tag_cloud_svg([]))
    assert root.findall("{http://www.w3.org/2000/svg}text") == []


def test_curve_csvs():
    buf = io.StringIO()
    write_roc_csv([(0.0, 0.0), (0.5, 1.0), (1.0, 1.0)], buf)
    assert buf.getvalue().splitlines() == ["fpr,tpr", "0.0,0.0", "0.5,1.0", "1.0,1.0"]
    buf = io.StringIO()
    write_histogram_csv([(0, 2), (1, 0)], buf)
    assert buf.getvalue() == "bucket_days,count\n0,2\n1,0\n"
