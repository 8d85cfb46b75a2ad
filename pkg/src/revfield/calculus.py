"""Finite-difference derivative fields and change curves over a field grid.

Stencils: central differences on interior points, one-sided first-order at
the edges; second derivatives use the 3-point stencil with one-sided
3-point forms at the edges.  Grid spacing comes from the field extent.  A
zero-extent axis (all samples at the same coordinate) has identical rows,
so derivatives along it are exactly zero; its spacing is substituted by 1
to avoid dividing zero by zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .field import SpaceTimeField

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

NORM_FIELD_KINDS = ("d1_space", "d1_time", "d2_space", "d2_time")


@dataclass(frozen=True)
class ScalarField:
    """Real-valued function sampled on the same S x T grid as a field."""

    values: np.ndarray  # shape (S, T), values[s_index, t_index]
    extent: tuple[float, float]

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("values must be a 2-D (S, T) array")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite values in scalar field")
        object.__setattr__(self, "values", v)

    @property
    def grid_s(self) -> int:
        return self.values.shape[0]

    @property
    def grid_t(self) -> int:
        return self.values.shape[1]

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.linspace(0.0, self.extent[0], self.grid_s),
            np.linspace(0.0, self.extent[1], self.grid_t),
        )


@dataclass(frozen=True)
class Curve:
    """Ordered (s, t) samples of a path alpha(r), uniform in r over [0, 1]."""

    samples: np.ndarray  # shape (R, 2)

    def __post_init__(self) -> None:
        pts = np.asarray(self.samples, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("curve needs at least 2 (s, t) samples")
        object.__setattr__(self, "samples", pts)


def _d1_matrix(n: int, spacing: float) -> sp.csr_matrix:
    if n < 2:
        raise ValueError("grid too small on the differentiated axis")
    rows, cols, vals = [], [], []
    inv = 1.0 / spacing
    rows += [0, 0]
    cols += [0, 1]
    vals += [-inv, inv]
    for i in range(1, n - 1):
        rows += [i, i]
        cols += [i - 1, i + 1]
        vals += [-0.5 * inv, 0.5 * inv]
    rows += [n - 1, n - 1]
    cols += [n - 2, n - 1]
    vals += [-inv, inv]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _d2_matrix(n: int, spacing: float) -> sp.csr_matrix:
    if n < 3:
        raise ValueError("grid too small on the differentiated axis")
    rows, cols, vals = [], [], []
    inv2 = 1.0 / (spacing * spacing)
    rows += [0, 0, 0]
    cols += [0, 1, 2]
    vals += [inv2, -2.0 * inv2, inv2]
    for i in range(1, n - 1):
        rows += [i, i, i]
        cols += [i - 1, i, i + 1]
        vals += [inv2, -2.0 * inv2, inv2]
    rows += [n - 1, n - 1, n - 1]
    cols += [n - 3, n - 2, n - 1]
    vals += [inv2, -2.0 * inv2, inv2]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _axis_spacing(extent: float, n: int) -> float:
    if n < 2 or extent == 0.0:
        return 1.0  # degenerate axis: identical samples, derivative is 0
    return extent / (n - 1)


def _grid_operator(field: SpaceTimeField, which: str) -> sp.csr_matrix:
    """Difference operator acting on row-stacked (p = t*S + s) grid data."""
    S, T = field.grid_s, field.grid_t
    I, J = field.extent
    if which not in NORM_FIELD_KINDS:
        raise ValueError(f"which must be one of {NORM_FIELD_KINDS}, got {which!r}")
    order = 1 if which.startswith("d1") else 2
    make = _d1_matrix if order == 1 else _d2_matrix
    if which.endswith("space"):
        return sp.kron(sp.identity(T), make(S, _axis_spacing(I, S)), format="csr")
    return sp.kron(make(T, _axis_spacing(J, T)), sp.identity(S), format="csr")


def derivative_matrix(field: SpaceTimeField, which: str) -> sp.csr_matrix:
    """Signed partial derivatives of every component, rows aligned with field.data."""
    return sp.csr_matrix(_grid_operator(field, which) @ field.data)


def derivative_norm_field(field: SpaceTimeField, which: str) -> ScalarField:
    """Sum over the vocabulary of squared partial derivatives.

    which selects the axis and order: d1_space, d1_time, d2_space, d2_time.
    """
    deriv = derivative_matrix(field, which)
    sq = np.asarray(deriv.multiply(deriv).sum(axis=1)).ravel()
    values = sq.reshape(field.grid_t, field.grid_s).T
    return ScalarField(values, field.extent)


def component_gradient(
    field: SpaceTimeField, token_id: int
) -> tuple[ScalarField, ScalarField]:
    """Signed (d/ds, d/dt) of one vocabulary component, same stencils."""
    if not 1 <= token_id <= field.vocabulary_size:
        raise IndexError(
            f"token id {token_id} outside [1, {field.vocabulary_size}]"
        )
    out = []
    for which in ("d1_space", "d1_time"):
        col = np.asarray(
            derivative_matrix(field, which)[:, token_id - 1].todense()
        ).ravel()
        out.append(
            ScalarField(col.reshape(field.grid_t, field.grid_s).T, field.extent)
        )
    return out[0], out[1]


def integrated_change(norm_field: ScalarField, axis: str) -> np.ndarray:
    """Trapezoidal integral of a first-derivative norm field over one axis.

    axis="space" integrates over t and returns h(s) (length S);
    axis="time" integrates over s and returns g(t) (length T).
    """
    s_coords, t_coords = norm_field.coords()
    if axis == "space":
        return _trapezoid(norm_field.values, x=t_coords, axis=1)
    if axis == "time":
        return _trapezoid(norm_field.values, x=s_coords, axis=0)
    raise ValueError(f"axis must be 'space' or 'time', got {axis!r}")


def _fractional_index(coord: np.ndarray, extent: float, n: int) -> np.ndarray:
    if n == 1 or extent == 0.0:
        return np.zeros_like(coord)
    return coord / extent * (n - 1)


def _curve_velocity(samples: np.ndarray) -> np.ndarray:
    """d alpha / dr with unit parameter range and uniform sampling."""
    r_spacing = 1.0 / (samples.shape[0] - 1)
    vel = np.empty_like(samples)
    vel[0] = (samples[1] - samples[0]) / r_spacing
    vel[-1] = (samples[-1] - samples[-2]) / r_spacing
    if samples.shape[0] > 2:
        vel[1:-1] = (samples[2:] - samples[:-2]) / (2.0 * r_spacing)
    return vel


def directional_change(field: SpaceTimeField, curve: Curve) -> float:
    """Integral over r of the squared norm of the field's change along a curve.

    At each curve sample the signed spatial and temporal component
    derivatives are bilinearly interpolated from the grid, combined with
    the curve velocity, summed over the vocabulary, and integrated by the
    trapezoid rule.
    """
    I, J = field.extent
    pts = curve.samples
    if np.any(pts[:, 0] < 0) or np.any(pts[:, 0] > I) or np.any(
        pts[:, 1] < 0
    ) or np.any(pts[:, 1] > J):
        raise ValueError("curve point outside the field domain")
    ds = derivative_matrix(field, "d1_space")
    dt = derivative_matrix(field, "d1_time")
    vel = _curve_velocity(pts)
    S, T = field.grid_s, field.grid_t

    fs = _fractional_index(pts[:, 0], I, S)
    ft = _fractional_index(pts[:, 1], J, T)
    integrand = np.empty(pts.shape[0])
    for r in range(pts.shape[0]):
        i0 = min(int(np.floor(fs[r])), S - 1)
        j0 = min(int(np.floor(ft[r])), T - 1)
        i1, j1 = min(i0 + 1, S - 1), min(j0 + 1, T - 1)
        a, b = fs[r] - i0, ft[r] - j0
        acc = None
        for (ii, jj, w) in (
            (i0, j0, (1 - a) * (1 - b)),
            (i1, j0, a * (1 - b)),
            (i0, j1, (1 - a) * b),
            (i1, j1, a * b),
        ):
            if w == 0.0:
                continue
            p = jj * S + ii
            term = (vel[r, 0] * ds.getrow(p) + vel[r, 1] * dt.getrow(p)) * w
            acc = term if acc is None else acc + term
        integrand[r] = 0.0 if acc is None else float(acc.multiply(acc).sum())
    r_axis = np.linspace(0.0, 1.0, pts.shape[0])
    return float(_trapezoid(integrand, x=r_axis))
