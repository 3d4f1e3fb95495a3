"""Differential operators on scalar and vector fields over a chart.

Every operator takes an explicit point.  Vector fields only need to provide
``chart``, ``components_at(p)`` (contravariant ``Z^k``) and ``jacobian_at(p)``
(``J[i, k] = d_i Z^k``), which lets a gradient field or a product ``a * rho``
be used wherever an expression-backed :class:`VectorField` is.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .exprlang import Expr, compile_many, diff, max_coord_index, parse
from .geometry import Chart, TensorValue, _christoffel, _inverse, as_point

__all__ = [
    "default_tol", "ScalarField", "VectorField", "GradientField", "ScaledField",
    "gradient_at", "hessian_at", "lie_metric_at", "lie_metric_coordinate_at",
    "divergence_at", "covariant_derivative_at", "covariant_accel_at",
    "causal_check", "CausalReport", "directional_at", "vorticity_at", "norm_sq_at",
]


def default_tol() -> float:
    """Boolean-check tolerance, overridable through ``LORENTZKIT_TOL``."""
    return float(os.environ.get("LORENTZKIT_TOL", "1e-8"))


class ScalarField:
    def __init__(self, chart: Chart, expr: Expr, name: str = ""):
        if max_coord_index(expr) >= chart.n:
            raise ValueError(f"scalar field {name or expr} refers to a coordinate beyond the chart")
        self.chart = chart
        self.expr = expr
        self.name = name
        n = chart.n
        first = [diff(expr, i) for i in range(n)]
        second = [diff(first[i], j) for i in range(n) for j in range(n)]
        self.partial_exprs = first
        self._value = compile_many([expr])
        self._first = compile_many(first)
        self._second = compile_many(second)

    @classmethod
    def parse(cls, chart: Chart, text: str, name: str = "", constants: Mapping[str, float] | None = None):
        return cls(chart, parse(text, chart.coords, constants), name=name)

    def __repr__(self):
        return f"ScalarField({self.name or self.expr})"

    def value_at(self, p) -> float:
        return self._value(as_point(p, self.chart.n))[0]

    def partials_at(self, p) -> np.ndarray:
        return np.array(self._first(as_point(p, self.chart.n)))

    def second_partials_at(self, p) -> np.ndarray:
        n = self.chart.n
        return np.array(self._second(as_point(p, n))).reshape(n, n)


class VectorField:
    """Contravariant components given as expressions."""

    def __init__(self, chart: Chart, components: Sequence[Expr], name: str = ""):
        if len(components) != chart.n:
            raise ValueError(f"vector field needs {chart.n} components, got {len(components)}")
        for e in components:
            if max_coord_index(e) >= chart.n:
                raise ValueError("vector component refers to a coordinate beyond the chart")
        self.chart = chart
        self.exprs = tuple(components)
        self.name = name
        n = chart.n
        self._comp = compile_many(self.exprs)
        self._jac = compile_many([diff(self.exprs[k], i) for i in range(n) for k in range(n)])

    @classmethod
    def parse(cls, chart: Chart, texts: Sequence[str], name: str = "",
              constants: Mapping[str, float] | None = None):
        return cls(chart, [parse(t, chart.coords, constants) for t in texts], name=name)

    def __repr__(self):
        return f"VectorField({self.name or ', '.join(map(str, self.exprs))})"

    def components_at(self, p) -> np.ndarray:
        return np.array(self._comp(as_point(p, self.chart.n)))

    def jacobian_at(self, p) -> np.ndarray:
        n = self.chart.n
        return np.array(self._jac(as_point(p, n))).reshape(n, n)


@dataclass(frozen=True)
class GradientField:
    """``D f`` with components ``g^{ij} d_j f``, differentiated without a symbolic inverse."""

    scalar: ScalarField
    name: str = ""

    @property
    def chart(self) -> Chart:
        return self.scalar.chart

    def components_at(self, p) -> np.ndarray:
        ginv = _inverse(self.chart.metric_values(p))
        return ginv @ self.scalar.partials_at(p)

    def jacobian_at(self, p) -> np.ndarray:
        c = self.chart
        ginv = _inverse(c.metric_values(p))
        dg = c.metric_first(p)
        df = self.scalar.partials_at(p)
        ddf = self.scalar.second_partials_at(p)
        dginv = -np.einsum("ka,mab,bl->mkl", ginv, dg, ginv)
        return np.einsum("ikl,l->ik", dginv, df) + ddf @ ginv


@dataclass(frozen=True)
class ScaledField:
    """Pointwise product ``a * V`` of a scalar and a vector field."""

    factor: ScalarField
    vector: object
    name: str = ""

    @property
    def chart(self) -> Chart:
        return self.vector.chart

    def components_at(self, p) -> np.ndarray:
        return self.factor.value_at(p) * self.vector.components_at(p)

    def jacobian_at(self, p) -> np.ndarray:
        a = self.factor.value_at(p)
        return np.outer(self.factor.partials_at(p), self.vector.components_at(p)) + a * self.vector.jacobian_at(p)


def _geom(chart, p):
    g = chart.metric_values(p)
    ginv = _inverse(g)
    dg = chart.metric_first(p)
    return g, ginv, dg, _christoffel(ginv, dg)


def gradient_at(f: ScalarField, p) -> np.ndarray:
    ginv = _inverse(f.chart.metric_values(p))
    return ginv @ f.partials_at(p)


def hessian_at(f: ScalarField, p) -> TensorValue:
    """``f_{;ij} = d_i d_j f - Gamma^k_ij d_k f``."""
    _, _, _, gamma = _geom(f.chart, p)
    h = f.second_partials_at(p) - np.einsum("kij,k->ij", gamma, f.partials_at(p))
    return TensorValue(h, ("l", "l"))


def covariant_derivative_at(Z, p) -> np.ndarray:
    """``N[i, k] = nabla_i Z^k``."""
    _, _, _, gamma = _geom(Z.chart, p)
    return Z.jacobian_at(p) + np.einsum("kim,m->ik", gamma, Z.components_at(p))


def lie_metric_at(Z, p) -> TensorValue:
    """``(L_Z g)_ij = nabla_i Z_j + nabla_j Z_i``."""
    g, _, _, gamma = _geom(Z.chart, p)
    nab = Z.jacobian_at(p) + np.einsum("kim,m->ik", gamma, Z.components_at(p))
    lowered = nab @ g  # nabla_i Z_j
    return TensorValue(lowered + lowered.T, ("l", "l"))


def lie_metric_coordinate_at(Z, p) -> TensorValue:
    """Coordinate formula ``Z^k d_k g_ij + g_kj d_i Z^k + g_ik d_j Z^k``; no connection involved."""
    c = Z.chart
    g, dg = c.metric_values(p), c.metric_first(p)
    z, jac = Z.components_at(p), Z.jacobian_at(p)
    term = jac @ g
    return TensorValue(np.einsum("k,kij->ij", z, dg) + term + term.T, ("l", "l"))


def divergence_at(Z, p) -> float:
    """``div Z = d_i Z^i + Gamma^i_ik Z^k``."""
    _, _, _, gamma = _geom(Z.chart, p)
    return float(np.trace(Z.jacobian_at(p)) + np.einsum("iik,k->", gamma, Z.components_at(p)))


def covariant_accel_at(Z, p) -> np.ndarray:
    """``(nabla_Z Z)^k``; vanishes along geodesic integral curves."""
    z = Z.components_at(p)
    return z @ covariant_derivative_at(Z, p)


def norm_sq_at(Z, p) -> float:
    z = Z.components_at(p)
    return float(z @ Z.chart.metric_values(p) @ z)


@dataclass
class CausalReport:
    max_deviation: float
    tol: float
    worst_point: tuple[float, ...] | None = None
    deviations: list[float] = field(default_factory=list)

    @property
    def unit_timelike(self) -> bool:
        return self.max_deviation <= self.tol


def causal_check(Z, grid: Sequence[Sequence[float]], tol: float | None = None) -> CausalReport:
    """Largest ``|g(Z, Z) + 1|`` over ``grid``."""
    tol = default_tol() if tol is None else tol
    devs = [abs(norm_sq_at(Z, p) + 1.0) for p in grid]
    worst = int(np.argmax(devs)) if devs else None
    return CausalReport(
        max_deviation=max(devs, default=0.0),
        tol=tol,
        worst_point=tuple(grid[worst]) if worst is not None else None,
        deviations=devs,
    )


def directional_at(f: ScalarField, Z, p) -> float:
    """``Z(f) = Z^i d_i f``."""
    return float(Z.components_at(p) @ f.partials_at(p))


def vorticity_at(rho, p) -> TensorValue:
    """``w_ij = 1/2 (d_i C_j - d_j C_i)`` for the one-form ``C_j = g_jk rho^k``."""
    c = rho.chart
    g, dg = c.metric_values(p), c.metric_first(p)
    dC = np.einsum("ijk,k->ij", dg, rho.components_at(p)) + rho.jacobian_at(p) @ g
    return TensorValue(0.5 * (dC - dC.T), ("l", "l"))
