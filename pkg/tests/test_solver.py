import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from lorentzkit.catalog import load_catalog
from lorentzkit.exprlang import to_text
from lorentzkit.operators import ScalarField
from lorentzkit.soliton import LambdaField, SmallKError
from lorentzkit.solver import (
    BasisError, BasisSpec, GradientSolitonSolver, assemble, box_grid, recoverability_report, solve,
)

MINK = load_catalog("minkowski")
EX1 = load_catalog("example1")
EX2 = load_catalog("example2")


def run(mf, k, lam, basis, grid, ridge=0.0):
    c = mf.chart()
    spec = BasisSpec.parse(basis, c.coords) if isinstance(basis, str) else basis
    return solve(assemble(c, ScalarField.parse(c, k), LambdaField.parse(c, lam), spec, grid), ridge=ridge)


# ---- basis --------------------------------------------------------------------


def test_basis_parse():
    coords = ("w1", "w2", "w3", "w4")
    spec = BasisSpec.parse("poly:2,exp:w1,exp:2*w3 - 1", coords)
    exprs = spec.expressions(coords)
    # 1 + 4 linear + 10 quadratic + 2 exponentials
    assert len(exprs) == 17
    assert spec.exp_atoms == ((0, 1.0, 0.0), (2, 2.0, -1.0))
    assert BasisSpec.parse(spec.to_text(coords), coords) == spec
    assert [to_text(e) for e in BasisSpec.parse("exp:w2", coords).expressions(coords)] == ["exp(w2)"]


@pytest.mark.parametrize("text", ["", "poly:x", "exp:w1*w2", "exp:w1^2", "exp:1", "cubic:3", "exp:sin(w1)"])
def test_basis_errors(text):
    with pytest.raises(BasisError):
        BasisSpec.parse(text, ("w1", "w2", "w3", "w4"))


def test_box_grid():
    g = box_grid(2, 0.0, 1.0, 3)
    assert len(g) == 9 and g[0] == (0.0, 0.0) and g[-1] == (1.0, 1.0)


# ---- recovery ------------------------------------------------------------------


def test_minkowski_quadratic_potential():
    # Hess Phi = g for Phi = (-w1^2 + w2^2 + w3^2 + w4^2)/2, lam = R - 1 = -1
    res = run(MINK, "1", "-1", "poly:2", box_grid(4, -1, 1, 3))
    assert res.residual_sup < 1e-9
    assert res.null_space.shape[1] == 5     # constants and linear functions
    assert recoverability_report(res, MINK.scalar("Phi")) < 1e-12


def test_example1_rigidity():
    res = run(EX1, "1", "R", "poly:3", box_grid(4, 0.5, 2.0, 4))
    assert np.max(np.abs(res.coefficients[1:])) <= 1e-7
    assert res.residual_sup <= 1e-9


def test_example2_exponential_potential():
    res = run(EX2, "1", "R - 1", "poly:0,exp:w1", box_grid(4, -1, 1, 3))
    assert res.coefficients[1] == pytest.approx(2 * math.e, rel=1e-12)
    assert recoverability_report(res, EX2.scalar("Phi")) < 1e-10
    assert recoverability_report(res, EX2.scalar("Phi"), quotient="constant") < 1e-10


def test_recoverability_is_constant_invariant():
    res = run(EX2, "1", "R - 1", "poly:0,exp:w1", box_grid(4, -1, 1, 2))
    shifted = ScalarField.parse(EX2.chart(), "2*exp(w1 + 1) + 7.5")
    assert recoverability_report(res, shifted) < 1e-10
    wrong = ScalarField.parse(EX2.chart(), "3*exp(w1 + 1)")
    assert recoverability_report(res, wrong) > 0.1
    with pytest.raises(ValueError):
        recoverability_report(res, shifted, quotient="nope")


@settings(max_examples=8, deadline=None)
@given(st.integers(1, 3))
def test_nested_bases_never_worse(degree):
    grid = box_grid(4, -0.5, 0.5, 2)
    small = run(EX2, "1", "R - 1", f"poly:{degree}", grid)
    big = run(EX2, "1", "R - 1", f"poly:{degree},exp:w1", grid)
    assert big.residual_rms <= small.residual_rms + 1e-12


def test_solve_is_reproducible():
    grid = box_grid(4, -0.5, 0.5, 2)
    a = run(EX2, "1", "R - 1", "poly:2,exp:w1", grid)
    b = run(EX2, "1", "R - 1", "poly:2,exp:w1", grid)
    assert np.array_equal(a.coefficients, b.coefficients)


def test_ridge_shrinks_coefficients():
    grid = box_grid(4, -1, 1, 2)
    plain = run(EX2, "1", "R - 1", "poly:0,exp:w1", grid)
    ridge = run(EX2, "1", "R - 1", "poly:0,exp:w1", grid, ridge=1.0)
    assert np.linalg.norm(ridge.coefficients) < np.linalg.norm(plain.coefficients)
    with pytest.raises(ValueError):
        run(EX2, "1", "R - 1", "poly:0", grid, ridge=-1.0)


def test_degenerate_system():
    res = run(MINK, "1", "R", "poly:0", box_grid(4, -1, 1, 2))
    assert res.degenerate and res.null_space.shape[1] == 1


def test_assemble_guards():
    c = MINK.chart()
    spec = BasisSpec.parse("poly:1", c.coords)
    with pytest.raises(ValueError):
        assemble(c, ScalarField.parse(c, "1"), LambdaField.parse(c, "R"), spec, [])
    with pytest.raises(SmallKError):
        assemble(c, ScalarField.parse(c, "w1"), LambdaField.parse(c, "R"), spec, [(0.0, 0, 0, 0)])


# ---- estimator ------------------------------------------------------------------


def test_estimator_fit_predict_score():
    X = np.array(box_grid(4, -1, 1, 3))
    est = GradientSolitonSolver(chart=EX2.chart(), k="1", lam="R - 1", basis="poly:0,exp:w1")
    assert est.fit(X) is est
    assert est.n_features_in_ == 4 and est.rank_ == 1
    assert est.coef_[1] == pytest.approx(2 * math.e)
    assert est.score(X) == pytest.approx(0.0, abs=1e-12)
    pred = est.predict(X[:3])
    ref = [EX2.scalar("Phi").value_at(x) for x in X[:3]]
    assert pred - ref == pytest.approx(np.full(3, pred[0] - ref[0]))


def test_estimator_params_and_clone():
    est = GradientSolitonSolver(chart=MINK.chart(), lam="-1", ridge=0.5)
    params = est.get_params()
    assert params["lam"] == "-1" and params["ridge"] == 0.5 and params["basis"] == "poly:2"
    twin = clone(est)
    assert twin.get_params()["ridge"] == 0.5 and not hasattr(twin, "coef_")
    est.set_params(basis="poly:1")
    assert est.basis == "poly:1"


def test_estimator_validation():
    est = GradientSolitonSolver(chart=MINK.chart())
    with pytest.raises(NotFittedError):
        est.predict(np.zeros((1, 4)))
    with pytest.raises(ValueError):
        est.fit(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        GradientSolitonSolver().fit(np.zeros((2, 4)))
