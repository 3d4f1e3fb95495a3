"""k-almost Yamabe soliton residuals and theorem diagnostics.

A k-almost Yamabe soliton ``(g, Z, k, lam)`` satisfies

    (k/2) L_Z g - (R - lam) g = 0,

and in gradient form (``Z = D Phi``) ``Hess Phi = (R - lam)/k g``.  Here
``k`` and ``lam`` are scalar fields.  The four diagnostics evaluate the
identities that hold on such a soliton over a grid, one clause per identity,
each with its own residual.  A diagnostic never claims more than those
identities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .exprlang import Const, diff, evaluate, is_constant, parse, simplify, substitute
from .fluid import decompose_at, pressure_density
from .geometry import Chart, TensorValue, curvature_bundle, scalar_curvature_partials_at
from .operators import (
    GradientField, ScalarField, ScaledField, causal_check, covariant_accel_at, default_tol,
    directional_at, divergence_at, hessian_at, lie_metric_at, vorticity_at,
)

__all__ = [
    "LambdaField", "TraceLambda", "SolitonData", "Clause", "SolitonReport",
    "SolitonError", "SmallKError", "PreconditionError", "kays_residual_at",
    "gradient_kays_residual_at", "yamabe_residual_at", "soliton_report",
    "theorem1_diagnostic", "theorem2_diagnostic", "theorem3_diagnostic",
    "theorem4_diagnostic",
]


class SolitonError(ValueError):
    pass


class SmallKError(SolitonError):
    pass


class PreconditionError(SolitonError):
    """A diagnostic's hypotheses fail; ``failures`` names each one."""

    def __init__(self, failures: Sequence[str], report: "SolitonReport | None" = None):
        self.failures = list(failures)
        self.report = report
        super().__init__("precondition failed: " + "; ".join(self.failures))


def _central_partials(fn, p, h=1e-3):
    x = np.asarray(p, dtype=float)
    out = np.empty(len(x))
    for i in range(len(x)):
        step = h * max(1.0, abs(x[i]))
        vals = []
        for s in (-2, -1, 1, 2):
            q = x.copy()
            q[i] += s * step
            vals.append(fn(tuple(q)))
        out[i] = (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * step)
    return out


class LambdaField:
    """``lam = r_coeff * R + rest(w)``, so expressions like ``R - 1`` are allowed.

    ``R`` is the scalar curvature of the chart.  Only affine dependence on
    ``R`` is accepted; that keeps ``R - lam`` computable without
    differentiating the curvature whenever ``r_coeff == 1``.
    """

    def __init__(self, rest: ScalarField, r_coeff: float = 0.0, text: str = ""):
        self.chart = rest.chart
        self.rest = rest
        self.r_coeff = float(r_coeff)
        self.text = text or str(rest.expr)

    @classmethod
    def parse(cls, chart: Chart, text: str, constants: Mapping[str, float] | None = None) -> "LambdaField":
        if "R" in chart.coords:
            return cls(ScalarField.parse(chart, text, constants=constants), 0.0, text)
        n = chart.n
        e = parse(text, chart.coords + ("R",), constants)
        coeff = diff(e, n)
        if not is_constant(coeff):
            raise SolitonError(f"lambda must depend affinely on R: {text!r}")
        rest = simplify(substitute(e, n, Const(0.0)))
        return cls(ScalarField(chart, rest), evaluate(coeff, ()), text)

    @classmethod
    def constant(cls, chart: Chart, value: float) -> "LambdaField":
        return cls(ScalarField(chart, Const(float(value))), 0.0, repr(float(value)))

    def __repr__(self):
        return f"LambdaField({self.text})"

    def value_at(self, p, R: float) -> float:
        return self.r_coeff * R + self.rest.value_at(p)

    def gap_at(self, p, R: float) -> float:
        """``R - lam``."""
        return (1.0 - self.r_coeff) * R - self.rest.value_at(p)

    def partials_at(self, p) -> np.ndarray:
        out = self.rest.partials_at(p)
        if self.r_coeff:
            out = out + self.r_coeff * scalar_curvature_partials_at(self.chart, p)
        return out

    def gap_partials_at(self, p) -> np.ndarray:
        out = -self.rest.partials_at(p)
        if self.r_coeff != 1.0:
            out = out + (1.0 - self.r_coeff) * scalar_curvature_partials_at(self.chart, p)
        return out


class TraceLambda:
    """``lam`` chosen pointwise so the trace of the soliton equation holds.

    Vector form: ``k div Z = n (R - lam)``.  Gradient form:
    ``k Lap Phi = n (R - lam)``.  Only the trace-free part of the soliton
    equation is then left to test.
    """

    text = "from-trace"

    def __init__(self, chart: Chart, k: ScalarField, Z=None, phi: ScalarField | None = None):
        if (Z is None) == (phi is None):
            raise SolitonError("trace lambda needs exactly one of Z or phi")
        self.chart, self.k, self.Z, self.phi = chart, k, Z, phi

    def __repr__(self):
        return "TraceLambda()"

    def gap_at(self, p, R: float | None = None) -> float:
        n, k = self.chart.n, self.k.value_at(p)
        if self.phi is not None:
            ginv = np.linalg.inv(self.chart.metric_values(p))
            return k * float(np.einsum("ij,ij->", ginv, hessian_at(self.phi, p).components)) / n
        return k * divergence_at(self.Z, p) / n

    def value_at(self, p, R: float) -> float:
        return R - self.gap_at(p)

    def gap_partials_at(self, p) -> np.ndarray:
        return _central_partials(self.gap_at, p)

    def partials_at(self, p) -> np.ndarray:
        return scalar_curvature_partials_at(self.chart, p) - self.gap_partials_at(p)


@dataclass
class SolitonData:
    """Inputs of a (gradient) k-almost Yamabe soliton check.

    Give ``Z`` for the vector form, ``phi`` for the gradient form, or ``a``
    together with ``rho`` for ``Z = a rho``.  ``lam=None`` builds lambda from
    the trace.
    """

    chart: Chart
    k: ScalarField
    lam: LambdaField | TraceLambda | None = None
    Z: object = None
    phi: ScalarField | None = None
    rho: object = None
    a: ScalarField | None = None
    k_min: float = 1e-8

    def __post_init__(self):
        if self.lam is None:
            self.lam = TraceLambda(self.chart, self.k, Z=None if self.phi is not None else self.vector_field,
                                   phi=self.phi)

    @property
    def vector_field(self):
        """The soliton field: ``Z``, else ``a rho``, else ``D phi``."""
        if self.Z is not None:
            return self.Z
        if self.a is not None and self.rho is not None:
            return ScaledField(self.a, self.rho)
        if self.phi is not None:
            return GradientField(self.phi)
        raise SolitonError("no soliton vector field: give Z, phi, or a with rho")

    def k_at(self, p) -> float:
        k = self.k.value_at(p)
        if abs(k) < self.k_min:
            raise SmallKError(f"|k| = {abs(k):.3g} below k_min = {self.k_min:g} at {tuple(p)}")
        return k


def kays_residual_at(d: SolitonData, p, R: float | None = None) -> TensorValue:
    """``(k/2) L_Z g - (R - lam) g`` at ``p``."""
    k = d.k_at(p)
    if R is None:
        R = curvature_bundle(d.chart, p)["R"]
    g = d.chart.metric_values(p)
    res = 0.5 * k * lie_metric_at(d.vector_field, p).components - d.lam.gap_at(p, R) * g
    return TensorValue(res, ("l", "l"))


def gradient_kays_residual_at(d: SolitonData, p, R: float | None = None) -> TensorValue:
    """``Hess phi - (R - lam)/k g`` at ``p``."""
    if d.phi is None:
        raise SolitonError("gradient form needs phi")
    k = d.k_at(p)
    if R is None:
        R = curvature_bundle(d.chart, p)["R"]
    g = d.chart.metric_values(p)
    res = hessian_at(d.phi, p).components - d.lam.gap_at(p, R) / k * g
    return TensorValue(res, ("l", "l"))


def yamabe_residual_at(Z, lam, p) -> TensorValue:
    """Plain Yamabe soliton residual ``L_Z g - (R - lam) g``."""
    b = curvature_bundle(Z.chart, p)
    return TensorValue(lie_metric_at(Z, p).components - lam.gap_at(p, b["R"]) * b["g"], ("l", "l"))


@dataclass
class Clause:
    """One identity checked over the grid.

    ``value`` is the grid maximum of the quantity that should vanish.
    Clauses with ``asserted=False`` are recorded for inspection only.
    """

    name: str
    value: float
    tol: float
    asserted: bool = True
    note: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tol)


@dataclass
class SolitonReport:
    form: str
    residuals: np.ndarray
    tol: float
    theorem: int | None = None
    clauses: list[Clause] = field(default_factory=list)
    values: dict[str, object] = field(default_factory=dict)
    flags: dict[str, bool] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def residual_sup(self) -> float:
        return float(np.max(self.residuals)) if len(self.residuals) else 0.0

    @property
    def soliton_holds(self) -> bool:
        return self.residual_sup <= self.tol

    @property
    def holds(self) -> bool:
        return self.soliton_holds and all(c.passed for c in self.clauses if c.asserted)

    def clause(self, name: str) -> Clause:
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)


def soliton_report(d: SolitonData, grid: Sequence[Sequence[float]], tol: float | None = None,
                   form: str | None = None) -> SolitonReport:
    """Sup-norm of the soliton residual at each grid point."""
    tol = default_tol() if tol is None else tol
    if form is None:
        form = "gradient" if d.phi is not None and d.Z is None and d.a is None else "vector"
    resid_fn = gradient_kays_residual_at if form == "gradient" else kays_residual_at
    residuals = np.array([resid_fn(d, p).max_abs() for p in grid])
    report = SolitonReport(form=form, residuals=residuals, tol=tol)
    report.flags["soliton"] = report.soliton_holds
    return report


def _require_soliton(report: SolitonReport, failures: list[str]):
    if not report.soliton_holds:
        failures.append(f"soliton residual {report.residual_sup:.3g} exceeds tol {report.tol:g}")


def _require_timelike(rho, grid, tol, failures: list[str]):
    check = causal_check(rho, grid, tol)
    if not check.unit_timelike:
        failures.append(f"rho not unit timelike: max |g(rho,rho)+1| = {check.max_deviation:.3g}")


def theorem1_diagnostic(d: SolitonData, grid, tol: float | None = None,
                        require_soliton: bool = True) -> SolitonReport:
    """Killing iff divergence-free, plus the trace identity ``k div Z = n (R - lam)``.

    The fitted constant ``trace_constant`` is the least-squares ``c`` in
    ``k div Z = c (R - lam)``; the trace of the soliton equation gives ``c = n``.
    """
    tol = default_tol() if tol is None else tol
    report = soliton_report(d, grid, tol, form="vector")
    report.theorem = 1
    failures: list[str] = []
    _require_soliton(report, failures)
    if failures and require_soliton:
        raise PreconditionError(failures, report)
    report.notes.extend(failures)

    Z, n = d.vector_field, d.chart.n
    lie_max = div_max = gap_max = 0.0
    trace_err = conformal_err = 0.0
    num = den = 0.0
    for p in grid:
        b = curvature_bundle(d.chart, p)
        k = d.k_at(p)
        lie = lie_metric_at(Z, p).components
        div = divergence_at(Z, p)
        gap = d.lam.gap_at(p, b["R"])
        lie_max = max(lie_max, float(np.max(np.abs(lie))))
        div_max = max(div_max, abs(div))
        gap_max = max(gap_max, abs(gap))
        trace_err = max(trace_err, abs(k * div - n * gap))
        conformal_err = max(conformal_err, float(np.max(np.abs(k * lie - (2.0 * k * div / n) * b["g"]))))
        num += k * div * gap
        den += gap * gap

    killing = lie_max <= tol
    div_free = div_max <= tol
    report.values.update(lie_max=lie_max, div_max=div_max, gap_max=gap_max,
                         trace_constant=num / den if den > 0 else float("nan"))
    report.flags.update(killing=killing, divergence_free=div_free, r_equals_lambda=gap_max <= tol)
    report.clauses += [
        Clause("killing_iff_divergence_free", float(killing != div_free), 0.0),
        Clause("trace_identity", trace_err, tol),
        Clause("conformal_form", conformal_err, tol),
    ]
    return report


def _directional_fd(fn, rho, p, h=1e-4):
    """``rho(fn)`` at ``p`` by a central difference along rho's components."""
    u = rho.components_at(p)
    x = np.asarray(p, dtype=float)
    return (-fn(tuple(x + 2 * h * u)) + 8 * fn(tuple(x + h * u)) - 8 * fn(tuple(x - h * u))
            + fn(tuple(x - 2 * h * u))) / (12 * h)


def theorem2_diagnostic(d: SolitonData, grid, tol: float | None = None, kappa: float = 1.0) -> SolitonReport:
    """Soliton with ``Z = rho``: geodesic flow, rho Killing, ``R = lam``.

    The rates ``rho(p)`` and ``rho(sigma)`` of pressure and density are
    recorded but not asserted.
    """
    tol = default_tol() if tol is None else tol
    rho = d.rho if d.rho is not None else d.Z
    if rho is None:
        raise SolitonError("theorem 2 needs the velocity field rho")
    lam = None if isinstance(d.lam, TraceLambda) else d.lam
    d2 = SolitonData(d.chart, d.k, lam, Z=rho, rho=rho, k_min=d.k_min)
    report = soliton_report(d2, grid, tol, form="vector")
    report.theorem = 2
    failures: list[str] = []
    _require_timelike(rho, grid, tol, failures)
    _require_soliton(report, failures)
    if failures:
        raise PreconditionError(failures, report)

    accel = killing = gap = 0.0
    for p in grid:
        R = curvature_bundle(d.chart, p)["R"]
        accel = max(accel, float(np.max(np.abs(covariant_accel_at(rho, p)))))
        killing = max(killing, lie_metric_at(rho, p).max_abs())
        gap = max(gap, abs(d2.lam.gap_at(p, R)))
    report.clauses += [
        Clause("geodesic", accel, tol),
        Clause("killing", killing, tol),
        Clause("r_equals_lambda", gap, tol),
    ]
    report.flags.update(geodesic=accel <= tol, killing=killing <= tol, r_equals_lambda=gap <= tol)

    def fluid_scalars(q):
        dec = decompose_at(d.chart, rho, q, tol=1e-6)
        return pressure_density(dec.alpha, dec.beta, kappa, d.chart.n)

    try:
        rp = max(abs(_directional_fd(lambda q: fluid_scalars(q)[0], rho, p)) for p in grid)
        rs = max(abs(_directional_fd(lambda q: fluid_scalars(q)[1], rho, p)) for p in grid)
        report.clauses += [
            Clause("pressure_invariant", rp, 1e3 * tol, asserted=False, note="finite difference"),
            Clause("density_invariant", rs, 1e3 * tol, asserted=False, note="finite difference"),
        ]
    except ValueError as exc:
        report.notes.append(f"pressure/density rates skipped: {exc}")
    return report


def theorem3_diagnostic(d: SolitonData, grid, tol: float | None = None) -> SolitonReport:
    """Soliton with ``Z = a rho``.

    Asserts ``k rho(a) = R - lam`` and ``k a div rho = (n-1)(R - lam)``; when
    ``rho(a)`` vanishes on the grid, also ``R = lam``, ``div rho = 0`` and zero
    vorticity.
    """
    tol = default_tol() if tol is None else tol
    if d.a is None or d.rho is None:
        raise SolitonError("theorem 3 requires Z = a * rho: give both the scalar a and rho")
    if d.Z is not None:
        raise SolitonError("theorem 3 builds Z from a and rho; do not pass Z separately")
    report = soliton_report(d, grid, tol, form="vector")
    report.theorem = 3
    failures: list[str] = []
    _require_timelike(d.rho, grid, tol, failures)
    _require_soliton(report, failures)
    if failures:
        raise PreconditionError(failures, report)

    n = d.chart.n
    p11 = p12 = rho_a = div_rho = vort = gap_max = 0.0
    for p in grid:
        R = curvature_bundle(d.chart, p)["R"]
        k = d.k_at(p)
        gap = d.lam.gap_at(p, R)
        ra = directional_at(d.a, d.rho, p)
        dv = divergence_at(d.rho, p)
        p11 = max(p11, abs(k * ra - gap))
        p12 = max(p12, abs(k * d.a.value_at(p) * dv - (n - 1) * gap))
        rho_a = max(rho_a, abs(ra))
        div_rho = max(div_rho, abs(dv))
        vort = max(vort, vorticity_at(d.rho, p).max_abs())
        gap_max = max(gap_max, abs(gap))
    report.values.update(rho_a_max=rho_a, div_rho_max=div_rho, vorticity_max=vort, gap_max=gap_max)
    report.clauses += [
        Clause("k_rho_a_identity", p11, tol),
        Clause("divergence_identity", p12, tol),
    ]
    invariant = rho_a <= tol
    report.flags["a_invariant"] = invariant
    if invariant:
        report.clauses += [
            Clause("r_equals_lambda", gap_max, tol),
            Clause("div_rho_zero", div_rho, tol),
            Clause("vorticity_zero", vort, tol),
        ]
    else:
        report.notes.append("rho(a) != 0 on the grid; the rho(a) = 0 branch does not apply")
    return report


def theorem4_diagnostic(d: SolitonData, grid, tol: float | None = None, kappa: float = 1.0,
                        seed: int = 0) -> SolitonReport:
    """Gradient soliton on a perfect fluid: contracted curvature and the alpha/beta dichotomy.

    Contracting ``k^2 R(X, Y) D phi`` over ``X`` gives

        k^2 S(Y, D phi) = -(n-1) k Y(R - lam) + (n-1) Y(k) (R - lam),

    checked with random ``Y`` (clause ``contracted_curvature``).  The variant
    with a minus sign on the ``Y(k)`` term is recorded unasserted.  If ``R``,
    ``lam``, ``k`` are invariant under rho, ``(alpha - beta) rho(phi) = 0`` is
    asserted, and the branch taken (``alpha == beta`` or ``rho(phi) == 0``) is
    reported.  In the ``alpha == beta`` branch the ratio ``p/sigma`` is
    recorded without an era label.
    """
    tol = default_tol() if tol is None else tol
    if d.phi is None or d.rho is None:
        raise SolitonError("theorem 4 needs phi and rho")
    report = soliton_report(d, grid, tol, form="gradient")
    report.theorem = 4
    failures: list[str] = []
    _require_timelike(d.rho, grid, tol, failures)
    _require_soliton(report, failures)
    if failures:
        raise PreconditionError(failures, report)

    rng = np.random.default_rng(seed)
    n = d.chart.n
    grad = GradientField(d.phi)
    d6 = d6_alt = 0.0
    rho_R = rho_lam = rho_k = rho_phi = 0.0
    alpha_beta, fluid_ident, contraction, fluid_res, vort = [], 0.0, 0.0, 0.0, 0.0
    ratios = []
    for p in grid:
        b = curvature_bundle(d.chart, p)
        k = d.k_at(p)
        gap = d.lam.gap_at(p, b["R"])
        dgap = d.lam.gap_partials_at(p)
        dk = d.k.partials_at(p)
        Dphi = grad.components_at(p)
        Y = rng.standard_normal(n)
        lhs = k * k * float(Y @ b["ricci"] @ Dphi)
        rhs = -(n - 1) * k * float(Y @ dgap) + (n - 1) * float(Y @ dk) * gap
        alt = -(n - 1) * k * float(Y @ dgap) - (n - 1) * float(Y @ dk) * gap
        scale = 1.0 + abs(lhs) + abs(rhs)
        d6 = max(d6, abs(lhs - rhs) / scale)
        d6_alt = max(d6_alt, abs(lhs - alt) / scale)

        u = d.rho.components_at(p)
        dR = scalar_curvature_partials_at(d.chart, p)
        rho_R = max(rho_R, abs(float(u @ dR)))
        rho_lam = max(rho_lam, abs(float(u @ d.lam.partials_at(p))))
        rho_k = max(rho_k, abs(float(u @ dk)))
        rphi = directional_at(d.phi, d.rho, p)
        rho_phi = max(rho_phi, abs(rphi))

        dec = decompose_at(d.chart, d.rho, p, tol)
        fluid_res = max(fluid_res, dec.residual_norm)
        alpha_beta.append(dec.alpha - dec.beta)
        fluid_ident = max(fluid_ident, abs((dec.alpha - dec.beta) * rphi))
        C = b["g"] @ u
        yphi = float(Y @ d.phi.partials_at(p))
        contraction = max(contraction, abs(float(Y @ b["ricci"] @ Dphi) - dec.alpha * yphi
                                           - dec.beta * rphi * float(C @ Y)))
        vort = max(vort, vorticity_at(d.rho, p).max_abs())
        pr, de = pressure_density(dec.alpha, dec.beta, kappa, n)
        ratios.append(pr / de if abs(de) > tol else float("nan"))

    report.clauses += [
        Clause("contracted_curvature", d6, tol),
        Clause("contracted_curvature_minus_sign", d6_alt, tol, asserted=False,
               note="minus sign on the Y(k) term; expected to fail for non-constant k"),
    ]
    report.values.update(rho_R=rho_R, rho_lambda=rho_lam, rho_k=rho_k, rho_phi=rho_phi,
                         fluid_residual=fluid_res, vorticity_max=vort,
                         alpha_minus_beta_max=float(np.max(np.abs(alpha_beta))))
    perfect = fluid_res <= tol
    report.flags["perfect_fluid"] = perfect
    if not perfect:
        report.notes.append(f"chart is not a perfect fluid w.r.t. rho (residual {fluid_res:.3g});"
                            " fluid clauses skipped")
        return report
    report.clauses.append(Clause("fluid_contraction", contraction, tol))

    invariant = max(rho_R, rho_lam, rho_k) <= tol
    report.flags["invariant"] = invariant
    if not invariant:
        report.notes.append("R, lambda, k not all invariant under rho; dichotomy not applicable")
        return report
    report.clauses.append(Clause("alpha_minus_beta_times_rho_phi", fluid_ident, tol))
    if float(np.max(np.abs(alpha_beta))) <= tol:
        report.values["branch"] = "alpha_equals_beta"
        finite = [r for r in ratios if np.isfinite(r)]
        report.values["pressure_density_ratio"] = float(np.mean(finite)) if finite else float("nan")
    else:
        report.values["branch"] = "rho_phi_zero"
        report.clauses += [
            Clause("rho_phi_zero", rho_phi, tol),
            Clause("vorticity_zero", vort, tol),
        ]
    return report
