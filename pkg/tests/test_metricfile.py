import json
import math

import pytest

from lorentzkit.catalog import CATALOG, catalog_ids, catalog_text, load_catalog
from lorentzkit.geometry import is_lorentzian_at
from lorentzkit.metricfile import MetricFileError, load_metric_file, parse_metric_file
from lorentzkit.report import Report, flatten, nest

GOOD = """\
# comment line
dim 2
coords x y   # trailing comment
param c = 2*pi
g 1 1 = 1
g 2 1 = x/c
g 2 2 = exp(x)
scalar f = c*x
vector v = 1, sin(y)
"""


def test_parse_good_file(tmp_path):
    mf = parse_metric_file(GOOD, name="demo")
    assert mf.dim == 2 and mf.coords == ("x", "y")
    assert mf.params["c"] == pytest.approx(2 * math.pi)
    g = mf.chart().metric_values((1.0, 0.0))
    assert g[0, 1] == g[1, 0] == pytest.approx(1 / (2 * math.pi))
    assert mf.scalar("f").value_at((1.0, 0.0)) == pytest.approx(2 * math.pi)
    assert mf.vector("v").components_at((0.0, math.pi / 2)) == pytest.approx([1.0, 1.0])
    path = tmp_path / "demo.metric"
    path.write_text(GOOD, encoding="utf-8")
    assert load_metric_file(path).name == "demo"


def test_nested_commas_in_vectors():
    mf = parse_metric_file("dim 2\ncoords x y\ng 1 1 = 1\ng 2 2 = 1\nvector v = sin(x + 1), 2\n")
    assert len(mf.vectors["v"]) == 2


@pytest.mark.parametrize("text, line", [
    ("dim 2\ncoords x y\ng 1 1 = 1 +\n", 3),
    ("dim 2\ncoords x y z\n", 2),
    ("dim 2\ncoords x y\ng 1 3 = 1\n", 3),
    ("dim 2\ncoords x y\ng 1 2 = 1\ng 2 1 = 1\n", 4),
    ("dim 2\ncoords x y\ng 1 1 = q\n", 3),
    ("dim 2\ncoords x y\ng 1 1 = 1\nparam c = x\n", 4),
    ("dim 2\ncoords x y\ng 1 1 = 1\nvector v = 1\n", 4),
    ("dim 2\ncoords x y\ng 1 1 = 1\nmetric foo\n", 4),
    ("dim two\n", 1),
    ("coords x y\n", 1),
    ("dim 2\ncoords x x\n", 2),
    ("dim 2\ncoords x y\ng 1 1 = 1\nscalar 9f = x\n", 4),
])
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(MetricFileError) as info:
        parse_metric_file(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_missing_sections():
    with pytest.raises(MetricFileError):
        parse_metric_file("dim 2\n")
    with pytest.raises(MetricFileError):
        parse_metric_file("dim 2\ncoords x y\n")


def test_unknown_names():
    mf = parse_metric_file(GOOD)
    with pytest.raises(KeyError):
        mf.scalar("nope")
    with pytest.raises(KeyError):
        mf.vector("nope")


# ---- catalog ------------------------------------------------------------------


def test_catalog_ids():
    assert catalog_ids() == ["example1", "example2", "minkowski", "flrw-dust", "flrw-radiation", "sphere2"]
    with pytest.raises(KeyError):
        catalog_text("nosuch")


@pytest.mark.parametrize("cid", list(CATALOG))
def test_catalog_entries_parse(cid):
    mf = load_catalog(cid)
    assert mf.name == cid and mf.dim == len(mf.coords)
    assert mf.text == catalog_text(cid)


def test_catalog_named_fields():
    assert set(load_catalog("example1").scalars) == {"Phi"}
    assert set(load_catalog("example2").vectors) == {"u"}
    assert {"boost", "rotation", "translation"} <= set(load_catalog("minkowski").vectors)


@pytest.mark.parametrize("cid, point", [
    ("example1", (2, 3, 1, 1)), ("example2", (0, 0, 0, 0)), ("minkowski", (0, 0, 0, 0)),
    ("flrw-dust", (1, 0, 0, 0)), ("flrw-radiation", (1, 0, 0, 0)),
])
def test_catalog_spacetimes_are_lorentzian(cid, point):
    assert is_lorentzian_at(load_catalog(cid).chart(), point)


def test_example2_metric_values():
    g = load_catalog("example2").chart().metric_values((0.5, 0, 0, 0))
    assert [g[i, i] for i in range(4)] == pytest.approx(
        [math.exp(1.5), math.exp(0.5), math.exp(0.5), -math.exp(0.5)])


# ---- report -------------------------------------------------------------------


def test_report_formats_share_keys():
    r = Report("demo", "chart")
    r.add("a.b", 1.5)
    r.add("a.c", True)
    r.add("d", "text")
    r.notes.append("hello")
    kv = dict(line.split("=", 1) for line in r.render("kv").splitlines())
    tree = json.loads(r.render("json"))
    assert set(kv) == set(flatten(tree)) == set(r.flat())
    assert kv["a.c"] == "true" and kv["a.b"] == "1.5"
    assert "hello" in r.render("human")
    with pytest.raises(ValueError):
        r.render("xml")


def test_report_key_clashes():
    r = Report("demo", "chart")
    r.add("a.b", 1)
    with pytest.raises(KeyError):
        r.add("a.b", 2)
    with pytest.raises(KeyError):
        r.add("a", 2)
    with pytest.raises(KeyError):
        r.add("a.b.c", 2)


def test_nest_flatten_round_trip():
    flat = {"x.y": 1, "x.z": 2.0, "w": "s"}
    assert flatten(nest(flat)) == flat
    assert nest({"v": float("nan")})["v"] == "nan"
