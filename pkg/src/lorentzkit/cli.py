"""``lorentzkit`` command line.

Exit status: 0 on success, 1 when a check fails or evaluation breaks down
(singular metric, domain error), 2 on usage or parse errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

import numpy as np

from .catalog import catalog_ids, catalog_text, load_catalog
from .exprlang import EvalDomainError, ParseError, to_text
from .fluid import NotUnitTimelikeError, fluid_report
from .geometry import Chart, DegenerateMetricError, curvature_bundle, is_lorentzian_at
from .metricfile import MetricFile, MetricFileError, load_metric_file
from .operators import ScalarField, VectorField, default_tol
from .report import FORMATS, Report
from .soliton import (
    LambdaField, PreconditionError, SmallKError, SolitonData, SolitonError, soliton_report,
    theorem1_diagnostic, theorem2_diagnostic, theorem3_diagnostic, theorem4_diagnostic,
)
from .solver import BasisError, BasisSpec, assemble, recoverability_report, solve
from .verify import run_all

__all__ = ["main", "GridSpec", "UsageError"]

DEFAULT_AXIS = (0.5, 2.0, 4)
DIAGNOSTICS = {1: theorem1_diagnostic, 2: theorem2_diagnostic, 3: theorem3_diagnostic, 4: theorem4_diagnostic}


class UsageError(ValueError):
    pass


def _num(v: float) -> str:
    return repr(float(v))


@dataclass(frozen=True)
class GridSpec:
    """``name=lo:hi:count`` items; ``name=v`` is short for ``name=v:v:1``.

    Coordinates without an item sit at ``fill``.
    """

    axes: tuple[tuple[str, float, float, int], ...]
    fill: float = 1.0

    @classmethod
    def parse(cls, text: str, fill: float = 1.0) -> "GridSpec":
        axes, seen = [], set()
        for item in (s.strip() for s in text.split(",")):
            if not item:
                continue
            name, eq, rng = item.partition("=")
            name = name.strip()
            if not eq or not name:
                raise UsageError(f"bad grid item {item!r}; expected name=lo:hi:count")
            if name in seen:
                raise UsageError(f"coordinate {name!r} given twice in grid")
            seen.add(name)
            parts = rng.split(":")
            try:
                if len(parts) == 1:
                    lo = hi = float(parts[0])
                    count = 1
                elif len(parts) == 3:
                    lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
                else:
                    raise ValueError
            except ValueError:
                raise UsageError(f"bad grid item {item!r}; expected name=lo:hi:count") from None
            if count < 1:
                raise UsageError(f"grid count must be positive in {item!r}")
            axes.append((name, lo, hi, count))
        if not axes:
            raise UsageError("empty grid spec")
        return cls(tuple(axes), fill)

    @classmethod
    def default(cls, chart: Chart) -> "GridSpec":
        lo, hi, count = DEFAULT_AXIS
        return cls(tuple((c, lo, hi, count) for c in chart.coords))

    def to_text(self) -> str:
        return ",".join(f"{n}={_num(lo)}:{_num(hi)}:{count}" for n, lo, hi, count in self.axes)

    def points(self, chart: Chart) -> list[tuple[float, ...]]:
        unknown = [a[0] for a in self.axes if a[0] not in chart.coords]
        if unknown:
            raise UsageError(f"grid names unknown coordinates {unknown}; chart has {list(chart.coords)}")
        axes = {n: np.linspace(lo, hi, count) if count > 1 else np.array([lo]) for n, lo, hi, count in self.axes}
        values = [axes.get(c, np.array([self.fill])) for c in chart.coords]
        mesh = np.meshgrid(*values, indexing="ij")
        return [tuple(float(x) for x in row) for row in np.stack([m.ravel() for m in mesh], axis=1)]


# ---- argument handling ------------------------------------------------------


def _source(args) -> MetricFile:
    if args.catalog and args.file:
        raise UsageError("give either a metric file or --catalog, not both")
    if args.catalog:
        try:
            return load_catalog(args.catalog)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    if not args.file:
        raise UsageError("a metric file or --catalog is required")
    try:
        return load_metric_file(args.file)
    except OSError as exc:
        raise UsageError(f"cannot read {args.file}: {exc.strerror}") from None


def _grid(args, chart: Chart) -> tuple[list[tuple[float, ...]], str]:
    if getattr(args, "at", None):
        try:
            point = tuple(float(s) for s in args.at.split(","))
        except ValueError:
            raise UsageError(f"bad point {args.at!r}") from None
        if len(point) != chart.n:
            raise UsageError(f"--at needs {chart.n} coordinates, got {len(point)}")
        return [point], "at=" + ",".join(_num(v) for v in point)
    spec = GridSpec.parse(args.grid) if args.grid else GridSpec.default(chart)
    return spec.points(chart), spec.to_text()


def _scalar(mf: MetricFile, text: str) -> ScalarField:
    """A named scalar of the file, or an expression."""
    if text in mf.scalars:
        return mf.scalar(text)
    return ScalarField.parse(mf.chart(), text, constants=mf.params)


def _vector(mf: MetricFile, text: str) -> VectorField:
    """A named vector of the file, or comma-separated component expressions."""
    if text in mf.vectors:
        return mf.vector(text)
    parts = [s.strip() for s in text.split(",")]
    if len(parts) == 1:
        raise UsageError(f"no vector named {text!r}; have {sorted(mf.vectors)}")
    if len(parts) != mf.dim:
        raise UsageError(f"vector needs {mf.dim} components, got {len(parts)}")
    return VectorField.parse(mf.chart(), parts, constants=mf.params)


def _tol(args) -> float:
    return default_tol() if args.tol is None else args.tol


# ---- subcommands ------------------------------------------------------------


def cmd_curvature(args) -> Report:
    mf = _source(args)
    chart = mf.chart()
    grid, spec = _grid(args, chart)
    rep = Report("curvature", mf.name)
    rep.add("grid", spec)
    n = chart.n
    for num, p in enumerate(grid):
        b = curvature_bundle(chart, p)
        key = f"points.{num}"
        rep.add(f"{key}.at", ",".join(_num(v) for v in p))
        rep.add(f"{key}.R", float(b["R"]))
        rep.add(f"{key}.lorentzian", is_lorentzian_at(chart, p))
        for i in range(n):
            for j in range(i, n):
                rep.add(f"{key}.metric.g{i + 1}{j + 1}", float(b["g"][i, j]))
        for k in range(n):
            for i in range(n):
                for j in range(i, n):
                    v = float(b["gamma"][k, i, j])
                    if abs(v) > 1e-14:
                        rep.add(f"{key}.christoffel.G{k + 1}_{i + 1}{j + 1}", v)
        for i in range(n):
            for j in range(i, n):
                rep.add(f"{key}.ricci.S{i + 1}{j + 1}", float(b["ricci"][i, j]))
    return rep


def cmd_fluid(args) -> Report:
    mf = _source(args)
    chart = mf.chart()
    grid, spec = _grid(args, chart)
    rho = _vector(mf, args.rho)
    fr = fluid_report(chart, rho, grid, kappa=args.kappa, tol=_tol(args))
    rep = Report("fluid", mf.name)
    rep.add("grid", spec)
    rep.add("fluid.rho", args.rho)
    rep.add("fluid.kappa", float(args.kappa))
    rep.add("fluid.tol", fr.tol)
    for name, arr in (("alpha", fr.alpha), ("beta", fr.beta), ("pressure", fr.pressure), ("density", fr.density)):
        rep.add(f"fluid.{name}.min", float(arr.min()))
        rep.add(f"fluid.{name}.max", float(arr.max()))
    rep.add("fluid.residual.sup", fr.residual)
    rep.add("fluid.perfect_fluid", fr.perfect_fluid)
    rep.add("fluid.era", fr.era)
    rep.add("fluid.accelerating", fr.accelerating)
    rep.passed = fr.perfect_fluid
    if not fr.perfect_fluid:
        rep.notes.append("Ricci tensor is not of perfect-fluid form; pressure and density are not meaningful")
    return rep


def _lambda(args, mf: MetricFile):
    if args.lambda_from_trace:
        if args.lam is not None:
            raise UsageError("--lambda and --lambda-from-trace are exclusive")
        return None, "trace"
    text = "R" if args.lam is None else args.lam
    try:
        return LambdaField.parse(mf.chart(), text, constants=mf.params), text
    except SolitonError as exc:
        raise UsageError(str(exc)) from None


def _theorems(text: str | None) -> list[int]:
    if not text:
        return []
    try:
        out = sorted({int(s) for s in text.split(",") if s.strip()})
    except ValueError:
        raise UsageError(f"bad --theorems {text!r}; expected e.g. 1,2") from None
    bad = [t for t in out if t not in DIAGNOSTICS]
    if bad:
        raise UsageError(f"unknown theorem numbers {bad}; choose from 1-4")
    return out


def _add_clauses(rep: Report, prefix: str, sr) -> None:
    for c in sr.clauses:
        rep.add(f"{prefix}.clause.{c.name}.value", float(c.value))
        rep.add(f"{prefix}.clause.{c.name}.tol", float(c.tol))
        rep.add(f"{prefix}.clause.{c.name}.passed", c.passed)
        rep.add(f"{prefix}.clause.{c.name}.asserted", c.asserted)
    for name, flag in sr.flags.items():
        rep.add(f"{prefix}.flag.{name}", bool(flag))
    for name, value in sr.values.items():
        rep.add(f"{prefix}.value.{name}", value if isinstance(value, str) else float(value))


def cmd_soliton_check(args) -> Report:
    mf = _source(args)
    chart = mf.chart()
    grid, spec = _grid(args, chart)
    theorems = _theorems(args.theorems)
    lam, lam_text = _lambda(args, mf)
    Z = _vector(mf, args.z) if args.z else None
    phi = _scalar(mf, args.phi) if args.phi else None
    rho = _vector(mf, args.rho) if args.rho else None
    a = _scalar(mf, args.a) if args.a else None
    if Z is None and phi is None and (a is None or rho is None):
        raise UsageError("give --z, --phi, or --a with --rho")
    k = ScalarField.parse(chart, args.k, constants=mf.params)
    tol = _tol(args)
    data = SolitonData(chart, k, lam, Z=Z, phi=phi, rho=rho, a=a)

    rep = Report("soliton check", mf.name)
    rep.add("grid", spec)
    sr = soliton_report(data, grid, tol)
    rep.add("soliton.form", sr.form)
    rep.add("soliton.k", args.k)
    rep.add("soliton.lambda", lam_text)
    rep.add("soliton.tol", tol)
    rep.add("soliton.residual.sup", sr.residual_sup)
    rep.add("soliton.holds", sr.soliton_holds)
    passed = sr.soliton_holds
    for t in theorems:
        prefix = f"theorem{t}"
        kwargs = {"kappa": args.kappa} if t in (2, 4) else {}
        try:
            tr = DIAGNOSTICS[t](data, grid, tol, **kwargs)
        except PreconditionError as exc:
            rep.add(f"{prefix}.skipped", True)
            rep.notes.append(f"theorem {t} skipped, precondition failed: {'; '.join(exc.failures)}")
            passed = False
            continue
        except SolitonError as exc:
            raise UsageError(f"theorem {t}: {exc}") from None
        rep.add(f"{prefix}.skipped", False)
        rep.add(f"{prefix}.holds", tr.holds)
        _add_clauses(rep, prefix, tr)
        rep.notes.extend(f"theorem {t}: {note}" for note in tr.notes)
        passed = passed and tr.holds
    rep.passed = passed
    return rep


def cmd_soliton_solve(args) -> Report:
    mf = _source(args)
    chart = mf.chart()
    grid, spec = _grid(args, chart)
    basis = BasisSpec.parse(args.basis, chart.coords)
    if args.lambda_from_trace:
        raise UsageError("soliton solve needs an explicit --lambda")
    lam, lam_text = _lambda(args, mf)
    k = ScalarField.parse(chart, args.k, constants=mf.params)
    reference = _scalar(mf, args.compare) if args.compare else None
    tol = _tol(args)

    result = solve(assemble(chart, k, lam, basis, grid), ridge=args.ridge)
    rep = Report("soliton solve", mf.name)
    rep.add("grid", spec)
    rep.add("solve.basis", basis.to_text(chart.coords))
    rep.add("solve.k", args.k)
    rep.add("solve.lambda", lam_text)
    for i, (fn, c) in enumerate(zip(result.system.basis, result.coefficients)):
        rep.add(f"solve.coef.{i}.term", to_text(fn.expr))
        rep.add(f"solve.coef.{i}.value", float(c))
    rep.add("solve.phi", to_text(result.phi.expr))
    rep.add("solve.rank", result.rank)
    rep.add("solve.null_dim", int(result.null_space.shape[1]))
    rep.add("solve.degenerate", result.degenerate)
    rep.add("solve.tol", tol)
    rep.add("solve.residual.sup", result.residual_sup)
    rep.add("solve.residual.rms", result.residual_rms)
    passed = result.residual_sup <= tol
    if result.degenerate:
        rep.notes.append("collocation matrix is zero; every basis function is in the null space")
    if reference is not None:
        rec = recoverability_report(result, reference)
        rep.add("solve.compare.name", args.compare)
        rep.add("solve.compare.recoverability", rec)
        rep.add("solve.compare.tol", args.compare_tol)
        passed = passed and rec <= args.compare_tol
    rep.passed = passed
    return rep


def cmd_verify_paper(args) -> Report:
    results = run_all(inject_christoffel_error=args.inject_christoffel_sign_error)
    rep = Report("verify-paper", "examples")
    for r in results:
        prefix = f"criteria.c{r.number}"
        rep.add(f"{prefix}.title", r.title)
        rep.add(f"{prefix}.passed", r.passed)
        rep.add(f"{prefix}.detail", r.detail)
        for name, value in r.values.items():
            rep.add(f"{prefix}.value.{name.replace('.', '_')}", float(value))
    failed = [r for r in results if not r.passed]
    for r in failed:
        rep.notes.append(f"criterion {r.number} failed: {r.title}")
    rep.passed = not failed
    return rep


def cmd_catalog(args) -> Report:
    if args.action == "list":
        rep = Report("catalog list", "catalog")
        for cid in catalog_ids():
            mf = load_catalog(cid)
            rep.add(f"catalog.{cid}.dim", mf.dim)
            rep.add(f"catalog.{cid}.coords", " ".join(mf.coords))
            rep.add(f"catalog.{cid}.scalars", " ".join(mf.scalars))
            rep.add(f"catalog.{cid}.vectors", " ".join(mf.vectors))
        return rep
    if not args.id:
        raise UsageError("catalog show needs an id")
    try:
        text = catalog_text(args.id)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    rep = Report("catalog show", args.id, text=text)
    for i, line in enumerate(text.splitlines()):
        rep.add(f"text.{i}", line)
    return rep


# ---- parser -----------------------------------------------------------------


def _common(p: argparse.ArgumentParser, source=True, grid=True, tol=True) -> None:
    p.add_argument("--format", choices=FORMATS, default="human")
    if source:
        p.add_argument("file", nargs="?", help="metric file")
        p.add_argument("--catalog", metavar="ID", help="built-in chart instead of a file")
    if grid:
        p.add_argument("--grid", metavar="SPEC",
                       help="name=lo:hi:count[,...]; other coordinates sit at 1.0 (default: 0.5:2:4 on every axis)")
    if tol:
        p.add_argument("--tol", type=float, default=None, help="tolerance (default $LORENTZKIT_TOL or 1e-8)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lorentzkit", description="Curvature, perfect-fluid and soliton checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curvature", help="metric, Christoffel symbols, Ricci tensor and R")
    _common(p, tol=False)
    p.add_argument("--at", metavar="POINT", help="comma-separated coordinates")
    p.set_defaults(func=cmd_curvature)

    p = sub.add_parser("fluid", help="perfect-fluid decomposition and era")
    _common(p)
    p.add_argument("--rho", default="u", help="velocity: vector name or components (default u)")
    p.add_argument("--kappa", type=float, default=1.0)
    p.set_defaults(func=cmd_fluid)

    sol = sub.add_parser("soliton", help="soliton check and potential solver")
    solsub = sol.add_subparsers(dest="soliton_command", required=True)

    p = solsub.add_parser("check", help="soliton residual and identity diagnostics")
    _common(p)
    p.add_argument("--z", help="soliton vector: name or components")
    p.add_argument("--phi", help="potential: scalar name or expression")
    p.add_argument("--rho", help="velocity: vector name or components")
    p.add_argument("--a", help="scalar a for Z = a rho")
    p.add_argument("--k", default="1", help="k as an expression (default 1)")
    p.add_argument("--lambda", dest="lam", help="lambda as an expression, may use R (default R)")
    p.add_argument("--lambda-from-trace", action="store_true", help="build lambda from the trace")
    p.add_argument("--theorems", help="diagnostics to run, e.g. 1,2")
    p.add_argument("--kappa", type=float, default=1.0)
    p.set_defaults(func=cmd_soliton_check)

    p = solsub.add_parser("solve", help="fit a gradient soliton potential by collocation")
    _common(p)
    p.add_argument("--k", default="1")
    p.add_argument("--lambda", dest="lam", help="lambda as an expression, may use R (default R)")
    p.add_argument("--lambda-from-trace", action="store_true", help=argparse.SUPPRESS)
    p.add_argument("--basis", default="poly:2", help="e.g. poly:2 or poly:0,exp:w1")
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--compare", metavar="NAME", help="reference potential: scalar name or expression")
    p.add_argument("--compare-tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_soliton_solve)

    p = sub.add_parser("verify-paper", help="run the acceptance criteria")
    _common(p, source=False, grid=False, tol=False)
    p.add_argument("--inject-christoffel-sign-error", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify_paper)

    p = sub.add_parser("catalog", help="list or show built-in charts")
    _common(p, source=False, grid=False, tol=False)
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("id", nargs="?")
    p.set_defaults(func=cmd_catalog)
    return parser


def _render(rep: Report, fmt: str) -> str:
    if fmt == "human" and rep.text is not None:
        return rep.text
    if fmt == "human" and rep.command == "verify-paper":
        lines = [f"[{'PASS' if rep.values[f'criteria.c{i}.passed'] else 'FAIL'}] {i:>2}. "
                 f"{rep.values[f'criteria.c{i}.title']}: {rep.values[f'criteria.c{i}.detail']}"
                 for i in sorted(int(k.split('.')[1][1:]) for k in rep.values if k.endswith('.passed'))]
        lines.append(f"verify-paper: {'PASS' if rep.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"
    return rep.render(fmt)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        rep = args.func(args)
    except (UsageError, MetricFileError, ParseError, BasisError) as exc:
        print(f"lorentzkit: error: {exc}", file=sys.stderr)
        return 2
    except (NotUnitTimelikeError, DegenerateMetricError, EvalDomainError, SmallKError,
            ZeroDivisionError, OverflowError, ValueError) as exc:
        print(f"lorentzkit: evaluation failed: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(_render(rep, args.format))
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
