"""Command reports in human, ``kv`` and JSON form.

A report is a flat mapping of dot-namespaced keys (``soliton.residual.sup``)
to scalars.  ``kv`` prints it line by line, JSON nests it on the dots, and the
human form groups keys under their parent path.  All three carry the same
values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

FORMATS = ("human", "json", "kv")


@dataclass
class Report:
    command: str
    chart: str
    values: dict[str, object] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    passed: bool = True
    text: str | None = None  # verbatim human output, when the command has one

    def add(self, key: str, value) -> None:
        if key in self.values:
            raise KeyError(f"duplicate report key {key!r}")
        for other in self.values:
            if other.startswith(key + ".") or key.startswith(other + "."):
                raise KeyError(f"report key {key!r} clashes with {other!r}")
        self.values[key] = value

    def flat(self) -> dict[str, object]:
        out = {"command": self.command, "chart": self.chart, "passed": self.passed}
        out.update(self.values)
        for i, note in enumerate(self.notes):
            out[f"notes.{i}"] = note
        return out

    def render(self, fmt: str = "human") -> str:
        if fmt == "kv":
            return "\n".join(f"{k}={_kv(v)}" for k, v in self.flat().items()) + "\n"
        if fmt == "json":
            return json.dumps(nest(self.flat()), indent=2, default=_json_default) + "\n"
        if fmt == "human":
            return self._human()
        raise ValueError(f"unknown format {fmt!r}")

    def _human(self) -> str:
        lines = [f"{self.command}: {self.chart}  [{'PASS' if self.passed else 'FAIL'}]"]
        groups: dict[str, list[tuple[str, object]]] = {}
        for key, value in self.values.items():
            head, _, leaf = key.rpartition(".")
            groups.setdefault(head, []).append((leaf, value))
        width = max((len(leaf) for rows in groups.values() for leaf, _ in rows), default=0)
        for head, rows in groups.items():
            lines.append(f"\n[{head}]" if head else "")
            lines.extend(f"  {leaf:<{width}}  {_human(value)}" for leaf, value in rows)
        if self.notes:
            lines.append("\n[notes]")
            lines.extend(f"  notes.{i}  {n}" for i, n in enumerate(self.notes))
        return "\n".join(lines) + "\n"


def _kv(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _human(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _json_default(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return str(v)


def nest(flat: dict[str, object]) -> dict:
    root: dict = {}
    for key, value in flat.items():
        if isinstance(value, float) and not math.isfinite(value):
            value = repr(value)
        node = root
        *parents, leaf = key.split(".")
        for part in parents:
            node = node.setdefault(part, {})
        node[leaf] = value
    return root


def flatten(tree: dict, prefix: str = "") -> dict[str, object]:
    out = {}
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out
