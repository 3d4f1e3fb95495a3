"""Plain-text metric files.

One directive per line, ``#`` starts a comment::

    dim 4
    coords w1 w2 w3 w4
    param c = 1
    g 1 1 = exp(w1 + 1)
    g 2 2 = exp(w1)
    scalar Phi = 2*c*exp(w1 + 1)
    vector u = 0, 0, 0, exp(-w1/2)

Metric indices are 1-based; unlisted components are zero and ``g i j``
also sets ``g j i``.  Params are constants and may be used in any later
expression.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .exprlang import Expr, ParseError, evaluate, is_constant, parse
from .geometry import Chart
from .operators import ScalarField, VectorField

__all__ = ["MetricFile", "MetricFileError", "parse_metric_file", "load_metric_file"]

_NAME = re.compile(r"[A-Za-z_][A-Za-z_0-9]*$")


class MetricFileError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class MetricFile:
    dim: int
    coords: tuple[str, ...]
    metric: dict[tuple[int, int], Expr]
    params: dict[str, float] = field(default_factory=dict)
    scalars: dict[str, Expr] = field(default_factory=dict)
    vectors: dict[str, tuple[Expr, ...]] = field(default_factory=dict)
    name: str = ""
    text: str = ""

    def chart(self) -> Chart:
        if not hasattr(self, "_chart"):
            self._chart = Chart(self.coords, {(i - 1, j - 1): e for (i, j), e in self.metric.items()},
                                name=self.name)
        return self._chart

    def scalar(self, name: str) -> ScalarField:
        if name not in self.scalars:
            raise KeyError(f"no scalar named {name!r}; have {sorted(self.scalars)}")
        return ScalarField(self.chart(), self.scalars[name], name=name)

    def vector(self, name: str) -> VectorField:
        if name not in self.vectors:
            raise KeyError(f"no vector named {name!r}; have {sorted(self.vectors)}")
        return VectorField(self.chart(), self.vectors[name], name=name)


def _split_top(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts]


def parse_metric_file(text: str, name: str = "") -> MetricFile:
    dim = None
    coords: tuple[str, ...] | None = None
    metric: dict[tuple[int, int], Expr] = {}
    params: dict[str, float] = {}
    scalars: dict[str, Expr] = {}
    vectors: dict[str, tuple[Expr, ...]] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        keyword, _, rest = line.partition(" ")
        rest = rest.strip()

        def expr(src: str) -> Expr:
            if coords is None:
                raise MetricFileError("'coords' must come before expressions", lineno)
            try:
                return parse(src, coords, params)
            except ParseError as exc:
                raise MetricFileError(str(exc), lineno) from None

        def named(kind: str) -> tuple[str, str]:
            lhs, eq, rhs = rest.partition("=")
            lhs = lhs.strip()
            if not eq or not _NAME.match(lhs):
                raise MetricFileError(f"expected '{kind} <name> = <expr>'", lineno)
            return lhs, rhs.strip()

        if keyword == "dim":
            try:
                dim = int(rest.lstrip("=").strip())
            except ValueError:
                raise MetricFileError(f"bad dimension {rest!r}", lineno) from None
            if dim < 2:
                raise MetricFileError("dimension must be at least 2", lineno)
        elif keyword == "coords":
            names = [c for c in re.split(r"[\s,]+", rest.lstrip("=").strip()) if c]
            if dim is None:
                raise MetricFileError("'dim' must come before 'coords'", lineno)
            if len(names) != dim:
                raise MetricFileError(f"{len(names)} coordinates given for dim {dim}", lineno)
            if len(set(names)) != len(names) or not all(_NAME.match(c) for c in names):
                raise MetricFileError("coordinate names must be distinct identifiers", lineno)
            coords = tuple(names)
        elif keyword == "g":
            lhs, eq, rhs = rest.partition("=")
            idx = lhs.split()
            if not eq or len(idx) != 2 or not all(s.isdigit() for s in idx):
                raise MetricFileError("expected 'g <i> <j> = <expr>'", lineno)
            i, j = int(idx[0]), int(idx[1])
            if dim is None or not (1 <= i <= dim and 1 <= j <= dim):
                raise MetricFileError(f"metric index ({i}, {j}) outside 1..{dim}", lineno)
            key = (min(i, j), max(i, j))
            if key in metric:
                raise MetricFileError(f"duplicate metric component ({i}, {j})", lineno)
            metric[key] = expr(rhs)
        elif keyword == "param":
            pname, rhs = named("param")
            e = expr(rhs)
            if not is_constant(e):
                raise MetricFileError(f"param {pname} must be constant", lineno)
            params[pname] = evaluate(e, ())
        elif keyword == "scalar":
            sname, rhs = named("scalar")
            scalars[sname] = expr(rhs)
        elif keyword == "vector":
            vname, rhs = named("vector")
            comps = _split_top(rhs)
            if dim is None or len(comps) != dim:
                raise MetricFileError(f"vector {vname} needs {dim} components, got {len(comps)}", lineno)
            vectors[vname] = tuple(expr(c) for c in comps)
        else:
            raise MetricFileError(f"unknown directive {keyword!r}", lineno)

    if dim is None or coords is None:
        raise MetricFileError("file must declare 'dim' and 'coords'")
    if not metric:
        raise MetricFileError("no metric components given")
    return MetricFile(dim, coords, metric, params, scalars, vectors, name=name, text=text)


def load_metric_file(path: str | Path) -> MetricFile:
    path = Path(path)
    return parse_metric_file(path.read_text(encoding="utf-8"), name=path.stem)
