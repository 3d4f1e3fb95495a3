"""Built-in charts, stored as metric-file text."""

from __future__ import annotations

from .metricfile import MetricFile, parse_metric_file

__all__ = ["CATALOG", "catalog_ids", "catalog_text", "load_catalog"]

CATALOG: dict[str, str] = {
    "example1": """\
# ds^2 = (dw1)^2 + (w1)^2 (dw2)^2 + (w2)^2 (dw3)^2 - (dw4)^2
# singular at w1 = 0 and w2 = 0
dim 4
coords w1 w2 w3 w4
g 1 1 = 1
g 2 2 = w1^2
g 3 3 = w2^2
g 4 4 = -1
scalar Phi = 1
vector u = 0, 0, 0, 1
""",
    "example2": """\
# ds^2 = e^(w1+1) (dw1)^2 + e^w1 [(dw2)^2 + (dw3)^2 - (dw4)^2]
dim 4
coords w1 w2 w3 w4
param c = 1
g 1 1 = exp(w1 + 1)
g 2 2 = exp(w1)
g 3 3 = exp(w1)
g 4 4 = -exp(w1)
scalar Phi = 2*c*exp(w1 + 1)
vector u = 0, 0, 0, exp(-w1/2)
""",
    "minkowski": """\
# flat spacetime, w1 is time
dim 4
coords w1 w2 w3 w4
g 1 1 = -1
g 2 2 = 1
g 3 3 = 1
g 4 4 = 1
scalar Phi = (-w1^2 + w2^2 + w3^2 + w4^2)/2
vector u = 1, 0, 0, 0
vector boost = w2, w1, 0, 0
vector rotation = 0, -w3, w2, 0
vector translation = 0, 1, 0, 0
vector dilation = w1, w2, w3, w4
vector stretch = 0, w2, 0, 0
""",
    "flrw-dust": """\
# spatially flat FLRW, scale factor a(t) = t^(2/3); needs t > 0
dim 4
coords t x y z
g 1 1 = -1
g 2 2 = t^(4/3)
g 3 3 = t^(4/3)
g 4 4 = t^(4/3)
scalar a = t^(2/3)
vector u = 1, 0, 0, 0
""",
    "flrw-radiation": """\
# spatially flat FLRW, scale factor a(t) = t^(1/2); needs t > 0
dim 4
coords t x y z
g 1 1 = -1
g 2 2 = t
g 3 3 = t
g 4 4 = t
scalar a = t^(1/2)
vector u = 1, 0, 0, 0
""",
    "sphere2": """\
# unit 2-sphere (Riemannian test chart)
dim 2
coords th ph
g 1 1 = 1
g 2 2 = sin(th)^2
scalar Phi = cos(th)
vector rotation = 0, 1
""",
}


def catalog_ids() -> list[str]:
    return list(CATALOG)


def catalog_text(cid: str) -> str:
    try:
        return CATALOG[cid]
    except KeyError:
        raise KeyError(f"unknown catalog id {cid!r}; choose from {', '.join(CATALOG)}") from None


def load_catalog(cid: str) -> MetricFile:
    return parse_metric_file(catalog_text(cid), name=cid)
