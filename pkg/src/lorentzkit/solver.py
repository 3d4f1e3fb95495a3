"""Least-squares collocation for gradient soliton potentials.

Expand ``Phi = sum_m c_m B_m`` in a fixed basis.  The Hessian is linear in
``Phi``, so requiring ``Hess Phi = (R - lam)/k g`` at the grid points gives an
overdetermined linear system for ``c``: one row per upper-triangular Hessian
component per point.  The system is solved for the minimum-norm
least-squares coefficients.

:class:`GradientSolitonSolver` wraps the same steps as an sklearn estimator:
``fit`` takes an ``(m, n)`` array of collocation points and ``predict``
evaluates the fitted potential.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exprlang import (
    Add, Call, Const, Coord, Expr, Mul, Pow, coordinates_in, diff, evaluate, is_constant, parse, simplify, to_text,
)
from .geometry import Chart, curvature_bundle
from .operators import ScalarField
from .soliton import LambdaField, SmallKError, SolitonData, gradient_kays_residual_at

__all__ = [
    "BasisSpec", "CollocationSystem", "SolveResult", "assemble", "solve",
    "recoverability_report", "box_grid", "GradientSolitonSolver",
]


class BasisError(ValueError):
    pass


@dataclass(frozen=True)
class BasisSpec:
    """Ansatz for the potential.

    ``degree`` gives every monomial of total degree up to ``degree`` (the
    constant only when ``include_constant``).  Each entry of ``exp_atoms`` is
    ``(coordinate index, c, b)`` for ``exp(c * w + b)``.
    """

    degree: int | None = None
    exp_atoms: tuple[tuple[int, float, float], ...] = ()
    include_constant: bool = True

    @classmethod
    def parse(cls, text: str, coords: Sequence[str]) -> "BasisSpec":
        """Parse ``poly:D`` and ``exp:<linear expr>`` items separated by commas."""
        degree, atoms = None, []
        for item in (s.strip() for s in text.split(",")):
            if not item:
                continue
            kind, _, arg = item.partition(":")
            if kind == "poly":
                try:
                    degree = max(int(arg), degree if degree is not None else -1)
                except ValueError:
                    raise BasisError(f"bad polynomial degree in {item!r}") from None
            elif kind == "exp":
                atoms.append(_linear_atom(arg, coords))
            else:
                raise BasisError(f"unknown basis item {item!r}; expected poly:D or exp:EXPR")
        spec = cls(degree, tuple(atoms), include_constant=degree is not None)
        if not spec.expressions(coords):
            raise BasisError("basis is empty")
        return spec

    def expressions(self, coords: Sequence[str]) -> list[Expr]:
        n = len(coords)
        out: list[Expr] = []
        if self.include_constant:
            out.append(Const(1.0))
        if self.degree is not None:
            for deg in range(1, self.degree + 1):
                for combo in itertools.combinations_with_replacement(range(n), deg):
                    out.append(_monomial(combo, coords))
        for i, c, b in self.exp_atoms:
            out.append(simplify(Call("exp", Add(Mul(Const(c), Coord(i, coords[i])), Const(b)))))
        return out

    def functions(self, chart: Chart) -> list[ScalarField]:
        return [ScalarField(chart, e) for e in self.expressions(chart.coords)]

    def to_text(self, coords: Sequence[str]) -> str:
        items = [f"poly:{self.degree}"] if self.degree is not None else []
        for i, c, b in self.exp_atoms:
            items.append("exp:" + to_text(simplify(Add(Mul(Const(c), Coord(i, coords[i])), Const(b)))))
        return ",".join(items)


def _monomial(combo, coords) -> Expr:
    e = None
    for i, group in itertools.groupby(combo):
        power = len(list(group))
        term = Coord(i, coords[i]) if power == 1 else Pow(Coord(i, coords[i]), Const(float(power)))
        e = term if e is None else Mul(e, term)
    return e


def _linear_atom(text: str, coords) -> tuple[int, float, float]:
    e = parse(text, coords)
    used = sorted(coordinates_in(e))
    if len(used) != 1:
        raise BasisError(f"exp atom must be linear in exactly one coordinate: {text!r}")
    i = used[0]
    slope = diff(e, i)
    if not is_constant(slope):
        raise BasisError(f"exp atom must be linear in {coords[i]}: {text!r}")
    zero = [0.0] * len(coords)
    return i, evaluate(slope, zero), evaluate(e, zero)


def box_grid(n: int, lo: float, hi: float, count: int) -> list[tuple[float, ...]]:
    axis = np.linspace(lo, hi, count)
    return [tuple(float(v) for v in pt) for pt in itertools.product(axis, repeat=n)]


@dataclass
class CollocationSystem:
    chart: Chart
    k: ScalarField
    lam: LambdaField
    basis: list[ScalarField]
    grid: list[tuple[float, ...]]
    A: np.ndarray
    b: np.ndarray


def assemble(chart: Chart, k: ScalarField, lam: LambdaField, basis, grid, k_min: float = 1e-8) -> CollocationSystem:
    """Stack ``Hess(B_m)_ij`` columns against ``(R - lam)/k g_ij`` for ``i <= j``."""
    if not grid:
        raise ValueError("collocation grid is empty")
    fns = basis.functions(chart) if isinstance(basis, BasisSpec) else list(basis)
    if not fns:
        raise BasisError("basis is empty")
    n = chart.n
    iu = np.triu_indices(n)
    rows_per = len(iu[0])
    A = np.empty((len(grid) * rows_per, len(fns)))
    b = np.empty(len(grid) * rows_per)
    for q, p in enumerate(grid):
        kv = k.value_at(p)
        if abs(kv) < k_min:
            raise SmallKError(f"|k| = {abs(kv):.3g} below k_min at {tuple(p)}")
        bundle = curvature_bundle(chart, p)
        gamma = bundle["gamma"]
        rows = slice(q * rows_per, (q + 1) * rows_per)
        for m, f in enumerate(fns):
            hess = f.second_partials_at(p) - np.einsum("kij,k->ij", gamma, f.partials_at(p))
            A[rows, m] = hess[iu]
        b[rows] = (lam.gap_at(p, bundle["R"]) / kv) * bundle["g"][iu]
    return CollocationSystem(chart, k, lam, fns, [tuple(p) for p in grid], A, b)


@dataclass
class SolveResult:
    coefficients: np.ndarray
    phi: ScalarField
    residual_sup: float
    residual_rms: float
    rank: int
    singular_values: np.ndarray
    null_space: np.ndarray  # columns span the coefficient null space
    degenerate: bool
    system: CollocationSystem = field(repr=False)


def _combine(fns: Sequence[ScalarField], coef: np.ndarray) -> Expr:
    expr: Expr = Const(0.0)
    for f, c in zip(fns, coef):
        if c != 0.0:
            expr = Add(expr, Mul(Const(float(c)), f.expr))
    return simplify(expr)


def solve(system: CollocationSystem, ridge: float = 0.0) -> SolveResult:
    """Minimum-norm least squares (SVD based, so deterministic).

    ``ridge > 0`` adds Tikhonov rows ``sqrt(ridge) * I``.  The residual is
    measured by evaluating the soliton residual of the fitted potential, not
    taken from the factorization.
    """
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    A, b = system.A, system.b
    ncol = A.shape[1]
    degenerate = not np.any(A)
    if ridge > 0:
        A_eff = np.vstack([A, np.sqrt(ridge) * np.eye(ncol)])
        b_eff = np.concatenate([b, np.zeros(ncol)])
    else:
        A_eff, b_eff = A, b
    coef, _, rank, sv = np.linalg.lstsq(A_eff, b_eff, rcond=None)

    _, s_full, vt = np.linalg.svd(A, full_matrices=True)
    cutoff = np.finfo(float).eps * max(A.shape) * (s_full[0] if s_full.size else 0.0)
    nrank = int(np.sum(s_full > cutoff))
    null = vt[nrank:].T

    phi = ScalarField(system.chart, _combine(system.basis, coef), name="phi_fit")
    data = SolitonData(system.chart, system.k, system.lam, phi=phi)
    iu = np.triu_indices(system.chart.n)
    comps = np.concatenate([gradient_kays_residual_at(data, p).components[iu] for p in system.grid])
    return SolveResult(
        coefficients=coef,
        phi=phi,
        residual_sup=float(np.max(np.abs(comps))),
        residual_rms=float(np.sqrt(np.mean(comps ** 2))),
        rank=int(rank),
        singular_values=sv,
        null_space=null,
        degenerate=degenerate,
        system=system,
    )


def recoverability_report(result: SolveResult, reference: ScalarField, grid=None, quotient: str = "null_space") -> float:
    """Largest grid deviation from ``reference`` once gauge freedom is removed.

    With ``quotient="constant"`` this is ``min_c max |phi_fit + c - phi_ref|``.
    With ``"null_space"`` the basis combinations with zero Hessian on the
    collocation grid are projected out first (constants always included).
    """
    grid = result.system.grid if grid is None else grid
    diff_vals = np.array([reference.value_at(p) - result.phi.value_at(p) for p in grid])
    if quotient == "null_space" and result.null_space.size:
        B = np.array([[f.value_at(p) for f in result.system.basis] for p in grid])
        G = np.column_stack([np.ones(len(grid)), B @ result.null_space])
        shift, *_ = np.linalg.lstsq(G, diff_vals, rcond=None)
        diff_vals = diff_vals - G @ shift
    elif quotient not in ("constant", "null_space"):
        raise ValueError(f"unknown quotient {quotient!r}")
    return float((diff_vals.max() - diff_vals.min()) / 2.0)


class GradientSolitonSolver(BaseEstimator):
    """Fit a gradient soliton potential at the rows of ``X``.

    Parameters
    ----------
    chart : Chart
    k, lam : str or field
        Strings are parsed on the chart; ``lam`` may use ``R``.
    basis : str or BasisSpec
        e.g. ``"poly:2"`` or ``"poly:0,exp:w1"``.
    ridge : float
        Tikhonov weight, 0 for plain minimum-norm least squares.
    """

    def __init__(self, chart=None, k="1", lam="R", basis="poly:2", ridge=0.0, k_min=1e-8):
        self.chart = chart
        self.k = k
        self.lam = lam
        self.basis = basis
        self.ridge = ridge
        self.k_min = k_min

    def _validate(self, X, reset=False):
        if self.chart is None:
            raise ValueError("chart is required")
        X = check_array(X, dtype=np.float64)
        if reset:
            self.n_features_in_ = X.shape[1]
        if X.shape[1] != self.chart.n:
            raise ValueError(f"X has {X.shape[1]} columns, chart dimension is {self.chart.n}")
        return X

    def fit(self, X, y=None):
        X = self._validate(X, reset=True)
        chart = self.chart
        k = ScalarField.parse(chart, self.k) if isinstance(self.k, str) else self.k
        lam = LambdaField.parse(chart, self.lam) if isinstance(self.lam, str) else self.lam
        basis = BasisSpec.parse(self.basis, chart.coords) if isinstance(self.basis, str) else self.basis
        system = assemble(chart, k, lam, basis, [tuple(row) for row in X], self.k_min)
        self.result_ = solve(system, self.ridge)
        self.coef_ = self.result_.coefficients
        self.rank_ = self.result_.rank
        self.residual_sup_ = self.result_.residual_sup
        self.phi_ = self.result_.phi
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        X = self._validate(X)
        return np.array([self.phi_.value_at(row) for row in X])

    def score(self, X, y=None):
        """Negative RMS soliton residual of the fitted potential at ``X``."""
        check_is_fitted(self, "result_")
        X = self._validate(X)
        data = SolitonData(self.chart, self.result_.system.k, self.result_.system.lam, phi=self.phi_)
        iu = np.triu_indices(self.chart.n)
        comps = np.concatenate([gradient_kays_residual_at(data, row).components[iu] for row in X])
        return -float(np.sqrt(np.mean(comps ** 2)))
