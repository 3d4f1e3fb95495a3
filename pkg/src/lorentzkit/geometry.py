"""Coordinate charts and pointwise curvature.

First and second partial derivatives of every metric component are taken
symbolically once when the chart is built; everything else (inverse metric,
connection, curvature) is assembled numerically at each point.

Sign conventions
----------------
The Riemann tensor is stored as ``R[l, i, j, k]``, the components of
``R(d_i, d_j) d_k = nabla_i nabla_j d_k - nabla_j nabla_i d_k``::

    R^l_{ijk} = d_i G^l_{jk} - d_j G^l_{ik} + G^l_{im} G^m_{jk} - G^l_{jm} G^m_{ik}

and the Ricci tensor is the trace over the first derivative slot,
``S_jk = R^i_{ijk}``.  With these choices the unit 2-sphere has ``S = g`` and
scalar curvature ``+2``.
"""

from __future__ import annotations

import itertools
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .exprlang import Const, Expr, compile_many, diff, max_coord_index, parse

__all__ = [
    "Chart", "TensorValue", "DegenerateMetricError", "metric_at",
    "inverse_metric_at", "metric_derivatives_at", "christoffel_at",
    "christoffel_derivatives_at", "riemann_at", "ricci_at",
    "scalar_curvature_at", "ricci_operator_at", "scalar_curvature_partials_at",
    "signature_at", "is_lorentzian_at", "as_point", "christoffel_sign_flip",
    "curvature_bundle", "grid_points",
]

# Coefficients of (d_i g_jl, d_j g_il, d_l g_ij) in the Christoffel formula.
# Only tests touch this, to check the acceptance suite catches a sign slip.
_CHRISTOFFEL_TERMS = (1.0, 1.0, -1.0)


@contextmanager
def christoffel_sign_flip(term: int = 2):
    """Temporarily negate one term of the Christoffel formula (mutation testing)."""
    global _CHRISTOFFEL_TERMS
    saved = _CHRISTOFFEL_TERMS
    terms = list(saved)
    terms[term] = -terms[term]
    _CHRISTOFFEL_TERMS = tuple(terms)
    try:
        yield
    finally:
        _CHRISTOFFEL_TERMS = saved


class DegenerateMetricError(ValueError):
    """The metric is singular (or numerically so) at the requested point."""


@dataclass(frozen=True)
class TensorValue:
    """Components of a tensor at one point plus the variance of each slot.

    ``variance`` holds ``"u"`` (upper) or ``"l"`` (lower) per index.
    """

    components: np.ndarray
    variance: tuple[str, ...]

    def __post_init__(self):
        if self.components.ndim != len(self.variance):
            raise ValueError("rank does not match the variance list")

    def __array__(self, dtype=None, copy=None):
        return self.components if dtype is None else self.components.astype(dtype)

    def __getitem__(self, key):
        return self.components[key]

    @property
    def shape(self):
        return self.components.shape

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.components))) if self.components.size else 0.0


def as_point(p: Sequence[float], n: int) -> tuple[float, ...]:
    point = tuple(float(x) for x in p)
    if len(point) != n:
        raise ValueError(f"point has {len(point)} coordinates, chart dimension is {n}")
    return point


class Chart:
    """A single coordinate chart carrying a symmetric metric of expressions.

    ``metric`` maps index pairs ``(i, j)`` (0-based) to expressions; missing
    components are zero and the lower triangle mirrors the upper one.
    """

    def __init__(self, coords: Sequence[str], metric: Mapping[tuple[int, int], Expr], name: str = ""):
        self.coords = tuple(coords)
        self.n = n = len(self.coords)
        self.name = name
        if n < 2:
            raise ValueError("a chart needs at least two coordinates")
        g = [[Const(0.0)] * n for _ in range(n)]
        seen = set()
        for (i, j), e in metric.items():
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"metric index ({i + 1}, {j + 1}) outside 1..{n}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"metric component ({i + 1}, {j + 1}) given twice")
            if max_coord_index(e) >= n:
                raise ValueError(f"g{i + 1}{j + 1} refers to a coordinate beyond dimension {n}")
            seen.add(key)
            g[i][j] = g[j][i] = e
        self.g = tuple(tuple(row) for row in g)
        self._pairs = [(i, j) for i in range(n) for j in range(i, n)]

        # upper-triangle components only; symmetrised on unpacking
        comps = [self.g[i][j] for i, j in self._pairs]
        d1 = [diff(c, m) for m in range(n) for c in comps]
        d2 = [diff(d1[m * len(comps) + c], l) for m in range(n) for l in range(n) for c in range(len(comps))]
        self.metric_derivative_exprs = d1
        self._g_fn = compile_many(comps)
        self._dg_fn = compile_many(d1)
        self._ddg_fn = compile_many(d2)

    @classmethod
    def from_strings(cls, coords: Sequence[str], metric: Mapping[tuple[int, int], str], name: str = "",
                     constants: Mapping[str, float] | None = None) -> "Chart":
        """Build from 1-based index pairs and formula strings."""
        exprs = {(i - 1, j - 1): parse(text, coords, constants) for (i, j), text in metric.items()}
        return cls(coords, exprs, name=name)

    def __repr__(self):
        return f"Chart({self.name or '?'}, coords={self.coords})"

    def _unpack(self, values, lead_shape=()):
        n, m = self.n, len(self._pairs)
        flat = np.asarray(values, dtype=float).reshape(lead_shape + (m,))
        out = np.empty(lead_shape + (n, n))
        for c, (i, j) in enumerate(self._pairs):
            out[..., i, j] = flat[..., c]
            out[..., j, i] = flat[..., c]
        return out

    def metric_values(self, p) -> np.ndarray:
        return self._unpack(self._g_fn(as_point(p, self.n)))

    def metric_first(self, p) -> np.ndarray:
        """``dg[m, i, j] = d_m g_ij``."""
        return self._unpack(self._dg_fn(as_point(p, self.n)), (self.n,))

    def metric_second(self, p) -> np.ndarray:
        """``ddg[m, l, i, j] = d_m d_l g_ij``."""
        return self._unpack(self._ddg_fn(as_point(p, self.n)), (self.n, self.n))


def metric_at(c: Chart, p) -> TensorValue:
    return TensorValue(c.metric_values(p), ("l", "l"))


def _inverse(g: np.ndarray) -> np.ndarray:
    try:
        inv = np.linalg.inv(g)
    except np.linalg.LinAlgError as exc:
        raise DegenerateMetricError("metric is singular") from exc
    if not np.all(np.isfinite(inv)) or np.linalg.cond(g) > 1e13:
        raise DegenerateMetricError("metric is numerically singular")
    return inv


def inverse_metric_at(c: Chart, p) -> TensorValue:
    return TensorValue(_inverse(c.metric_values(p)), ("u", "u"))


def metric_derivatives_at(c: Chart, p) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Metric, its inverse and first partials ``dg[m, i, j]`` at ``p``."""
    g = c.metric_values(p)
    return g, _inverse(g), c.metric_first(p)


def _gamma_lower(dg: np.ndarray) -> np.ndarray:
    # first-kind symbols G_{l,ij} = 1/2 (a d_i g_jl + b d_j g_il + c d_l g_ij)
    a, b, cc = _CHRISTOFFEL_TERMS
    return 0.5 * (a * np.einsum("ijl->lij", dg) + b * np.einsum("jil->lij", dg) + cc * dg)


def _christoffel(ginv, dg):
    return np.einsum("kl,lij->kij", ginv, _gamma_lower(dg))


def christoffel_at(c: Chart, p) -> TensorValue:
    """Levi-Civita symbols ``G[k, i, j] = Gamma^k_ij``."""
    _, ginv, dg = metric_derivatives_at(c, p)
    return TensorValue(_christoffel(ginv, dg), ("u", "l", "l"))


def christoffel_derivatives_at(c: Chart, p) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(G, dG)`` with ``dG[m, k, i, j] = d_m Gamma^k_ij``."""
    _, ginv, dg = metric_derivatives_at(c, p)
    ddg = c.metric_second(p)
    lower = _gamma_lower(dg)
    # d_m of the first-kind symbols uses the same formula on d_m dg
    dlower = np.stack([_gamma_lower(ddg[m]) for m in range(c.n)])
    dginv = -np.einsum("ka,mab,bl->mkl", ginv, dg, ginv)
    dgamma = np.einsum("mkl,lij->mkij", dginv, lower) + np.einsum("kl,mlij->mkij", ginv, dlower)
    return np.einsum("kl,lij->kij", ginv, lower), dgamma


def _riemann(gamma, dgamma):
    # R[l,i,j,k] = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik
    r = np.einsum("iljk->lijk", dgamma) - np.einsum("jlik->lijk", dgamma)
    r += np.einsum("lim,mjk->lijk", gamma, gamma) - np.einsum("ljm,mik->lijk", gamma, gamma)
    return r


def riemann_at(c: Chart, p) -> TensorValue:
    gamma, dgamma = christoffel_derivatives_at(c, p)
    return TensorValue(_riemann(gamma, dgamma), ("u", "l", "l", "l"))


def _ricci(riem):
    return np.einsum("iijk->jk", riem)


def ricci_at(c: Chart, p) -> TensorValue:
    gamma, dgamma = christoffel_derivatives_at(c, p)
    return TensorValue(_ricci(_riemann(gamma, dgamma)), ("l", "l"))


def curvature_bundle(c: Chart, p) -> dict[str, np.ndarray]:
    """All pointwise quantities in one pass, for callers needing several."""
    g, ginv, dg = metric_derivatives_at(c, p)
    gamma, dgamma = christoffel_derivatives_at(c, p)
    riem = _riemann(gamma, dgamma)
    ric = _ricci(riem)
    return {
        "g": g, "ginv": ginv, "dg": dg, "gamma": gamma, "riemann": riem,
        "ricci": ric, "R": float(np.einsum("ij,ij->", ginv, ric)),
    }


def scalar_curvature_at(c: Chart, p) -> float:
    ginv = inverse_metric_at(c, p).components
    return float(np.einsum("ij,ij->", ginv, ricci_at(c, p).components))


def ricci_operator_at(c: Chart, p) -> TensorValue:
    """``Q^i_j = g^{ik} S_kj`` so that ``g(QX, Y) = S(X, Y)``."""
    ginv = inverse_metric_at(c, p).components
    return TensorValue(ginv @ ricci_at(c, p).components, ("u", "l"))


def scalar_curvature_partials_at(c: Chart, p, h: float = 1e-3) -> np.ndarray:
    """Partials of the scalar curvature by a fourth-order central difference.

    Exact partials would need third derivatives of the metric; these are only
    used for invariance checks, where ~1e-11 accuracy is ample.
    """
    x = np.asarray(as_point(p, c.n))
    out = np.empty(c.n)
    for i in range(c.n):
        step = h * max(1.0, abs(x[i]))
        vals = []
        for s in (-2, -1, 1, 2):
            q = x.copy()
            q[i] += s * step
            vals.append(scalar_curvature_at(c, q))
        out[i] = (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * step)
    return out


def signature_at(c: Chart, p, tol: float = 1e-12) -> tuple[int, int, int]:
    """Counts of (negative, positive, zero) eigenvalues of the metric."""
    w = np.linalg.eigvalsh(c.metric_values(p))
    scale = max(1.0, float(np.max(np.abs(w))))
    neg = int(np.sum(w < -tol * scale))
    pos = int(np.sum(w > tol * scale))
    return neg, pos, len(w) - neg - pos


def is_lorentzian_at(c: Chart, p) -> bool:
    return signature_at(c, p) == (1, c.n - 1, 0)


def grid_points(c: Chart, axes: Mapping[str, Sequence[float]], default: float = 1.0) -> list[tuple[float, ...]]:
    """Tensor grid over named coordinate axes; other coordinates sit at ``default``."""
    unknown = set(axes) - set(c.coords)
    if unknown:
        raise ValueError(f"unknown coordinate(s) in grid: {sorted(unknown)}")
    values = [list(axes.get(name, [default])) for name in c.coords]
    return [tuple(float(v) for v in pt) for pt in itertools.product(*values)]
