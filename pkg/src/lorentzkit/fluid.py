"""Perfect-fluid structure of a Ricci tensor.

A chart is a perfect fluid with respect to a unit timelike velocity ``rho``
when ``S = alpha g + beta C (x) C`` with ``C = g(., rho)``.  Through the field
equations ``S - R/2 g = kappa T`` and ``T = (p + sigma) C (x) C + p g`` the two
scalars fix pressure and energy density:

    alpha = kappa (p - sigma) / (2 - n),   beta = kappa (p + sigma)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Chart, TensorValue, curvature_bundle
from .operators import causal_check, default_tol

__all__ = [
    "NotUnitTimelikeError", "Decomposition", "FluidReport", "ERAS",
    "decompose_at", "pressure_density", "forward_alpha_beta", "classify_era",
    "energy_momentum_at", "fluid_report",
]

ERAS = ("stiff", "dark", "dust", "radiation", "quintessence", "phantom", "indeterminate", "unclassified")


class NotUnitTimelikeError(ValueError):
    pass


@dataclass(frozen=True)
class Decomposition:
    alpha: float
    beta: float
    residual: np.ndarray

    @property
    def residual_norm(self) -> float:
        return float(np.max(np.abs(self.residual)))


def decompose_at(c: Chart, rho, p, tol: float | None = None) -> Decomposition:
    """Fit ``S = alpha g + beta C (x) C`` at ``p`` from two contractions.

    ``R = n alpha - beta`` and ``S(rho, rho) = beta - alpha`` give alpha and
    beta; the residual is whatever of ``S`` the fit leaves over.
    """
    tol = default_tol() if tol is None else tol
    b = curvature_bundle(c, p)
    u = rho.components_at(p)
    norm = float(u @ b["g"] @ u)
    if abs(norm + 1.0) > tol:
        raise NotUnitTimelikeError(f"g(rho, rho) = {norm:.6g} at {tuple(p)}, expected -1")
    s_uu = float(u @ b["ricci"] @ u)
    alpha = (b["R"] + s_uu) / (c.n - 1)
    beta = alpha + s_uu
    C = b["g"] @ u
    residual = b["ricci"] - alpha * b["g"] - beta * np.outer(C, C)
    return Decomposition(alpha, beta, residual)


def pressure_density(alpha: float, beta: float, kappa: float = 1.0, n: int = 4) -> tuple[float, float]:
    """Invert the alpha/beta relations for ``(p, sigma)``."""
    if kappa == 0:
        raise ValueError("kappa must be nonzero")
    if n == 2:
        raise ValueError("alpha is undefined for n = 2")
    a = alpha * (2 - n)
    return (a + beta) / (2 * kappa), (beta - a) / (2 * kappa)


def forward_alpha_beta(pressure: float, density: float, kappa: float = 1.0, n: int = 4) -> tuple[float, float]:
    return kappa * (pressure - density) / (2 - n), kappa * (pressure + density)


def classify_era(pressure: float, density: float, tol: float | None = None) -> tuple[str, bool]:
    """Era label and accelerating flag for an equation of state ``p = w sigma``.

    Exact relations win over ratio bands, in the order stiff, dark, dust,
    radiation, so ``p = sigma = 0`` is stiff.  Ratios need ``sigma > tol``; otherwise the label is
    ``indeterminate``.  A ratio between 0 and 1 that hits no exact relation is
    ``unclassified``.
    """
    tol = default_tol() if tol is None else tol
    p, s = pressure, density
    scale = tol * (1.0 + abs(s))
    accelerating = s > tol and p / s < -1.0 / 3.0
    if abs(p - s) <= scale:
        return "stiff", accelerating
    if abs(p + s) <= scale:
        return "dark", accelerating
    if abs(p) <= scale:
        return "dust", accelerating
    if abs(p - s / 3.0) <= scale:
        return "radiation", accelerating
    if s <= tol:
        return "indeterminate", accelerating
    w = p / s
    if -1.0 < w < 0.0:
        return "quintessence", accelerating
    if w < -1.0:
        return "phantom", accelerating
    return "unclassified", accelerating


def energy_momentum_at(c: Chart, p, kappa: float = 1.0) -> TensorValue:
    """``T = (S - R/2 g) / kappa``."""
    if kappa == 0:
        raise ValueError("kappa must be nonzero")
    b = curvature_bundle(c, p)
    return TensorValue((b["ricci"] - 0.5 * b["R"] * b["g"]) / kappa, ("l", "l"))


@dataclass
class FluidReport:
    """Grid-level perfect-fluid summary; per-point arrays follow grid order."""

    alpha: np.ndarray
    beta: np.ndarray
    pressure: np.ndarray
    density: np.ndarray
    kappa: float
    residual: float
    tol: float
    eras: list[str] = field(default_factory=list)
    accelerating_points: list[bool] = field(default_factory=list)

    @property
    def perfect_fluid(self) -> bool:
        return self.residual <= self.tol

    @property
    def era(self) -> str:
        labels = set(self.eras)
        return labels.pop() if len(labels) == 1 else "mixed"

    @property
    def accelerating(self) -> bool:
        return bool(self.accelerating_points) and all(self.accelerating_points)


def fluid_report(c: Chart, rho, grid: Sequence[Sequence[float]], kappa: float = 1.0,
                 tol: float | None = None) -> FluidReport:
    tol = default_tol() if tol is None else tol
    check = causal_check(rho, grid, tol)
    if not check.unit_timelike:
        raise NotUnitTimelikeError(
            f"velocity field is not unit timelike: max |g(rho,rho)+1| = {check.max_deviation:.3g}"
            f" at {check.worst_point}"
        )
    alphas, betas, ps, ss, eras, acc = [], [], [], [], [], []
    residual = 0.0
    for p in grid:
        d = decompose_at(c, rho, p, tol)
        pr, de = pressure_density(d.alpha, d.beta, kappa, c.n)
        era, accelerating = classify_era(pr, de, tol)
        alphas.append(d.alpha)
        betas.append(d.beta)
        ps.append(pr)
        ss.append(de)
        eras.append(era)
        acc.append(accelerating)
        residual = max(residual, d.residual_norm)
    return FluidReport(np.array(alphas), np.array(betas), np.array(ps), np.array(ss),
                       kappa, residual, tol, eras, acc)
