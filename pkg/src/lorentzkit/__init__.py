"""Curvature, perfect-fluid and k-almost Yamabe soliton checks on Lorentzian charts."""

from .exprlang import parse, diff, simplify, evaluate, to_text
from .geometry import (
    Chart, TensorValue, christoffel_at, inverse_metric_at, metric_at, ricci_at,
    ricci_operator_at, riemann_at, scalar_curvature_at,
)
from .operators import ScalarField, VectorField, GradientField, ScaledField
from .fluid import classify_era, decompose_at, fluid_report, pressure_density
from .soliton import LambdaField, SolitonData
from .solver import BasisSpec, GradientSolitonSolver
from .catalog import load_catalog

__version__ = "0.1.0"
