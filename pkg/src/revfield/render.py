"""Grayscale PGM rasters and delimited text exports.

Orientation is fixed and documented: s runs horizontally (width), t runs
vertically downward (height), so PGM pixel rows are t-major.  CSV exports
are UTF-8 with '\\n' terminators, '.' decimal separator, and 9 significant
digits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import EdgeMap, Segmentation
from .calculus import ScalarField


@dataclass(frozen=True)
class ImageSpec:
    """normalization: "global-minmax" maps the observed range to 0..255
    (constant input becomes mid-gray 128); "fixed" maps [lo, hi] with
    clamping."""

    normalization: str = "global-minmax"
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self) -> None:
        if self.normalization not in ("global-minmax", "fixed"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if self.normalization == "fixed" and not self.lo < self.hi:
            raise ValueError("fixed normalization requires lo < hi")


def _values_of(source) -> np.ndarray:
    vals = source.values if isinstance(source, ScalarField) else np.asarray(source)
    vals = np.asarray(vals, dtype=float)
    if vals.ndim != 2:
        raise ValueError("expected a 2-D (S, T) value array")
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite values")
    return vals


def to_pgm(source, spec: ImageSpec = ImageSpec()) -> bytes:
    """Binary PGM (P5, maxval 255) of an (S, T) value array or ScalarField.

    Linear map lo -> 0 (black), hi -> 255 (white), values clamped, bytes
    rounded half-up.
    """
    vals = _values_of(source)
    S, T = vals.shape
    if spec.normalization == "fixed":
        lo, hi = spec.lo, spec.hi
    else:
        lo, hi = float(vals.min()), float(vals.max())
        if lo == hi:
            body = np.full((T, S), 128, dtype=np.uint8)
            return _pgm_bytes(body)
    scaled = np.clip((vals - lo) / (hi - lo), 0.0, 1.0)
    pixels = np.floor(scaled * 255.0 + 0.5).astype(np.uint8)
    return _pgm_bytes(pixels.T)  # rows are t, columns are s


def _pgm_bytes(rows: np.ndarray) -> bytes:
    h, w = rows.shape
    return b"P5\n%d %d\n255\n" % (w, h) + rows.tobytes()


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def scalar_field_csv(field: ScalarField) -> str:
    """Header "s,t,value"; rows in s-major order with domain coordinates."""
    s_coords, t_coords = field.coords()
    lines = ["s,t,value"]
    for i, s in enumerate(s_coords):
        for j, t in enumerate(t_coords):
            lines.append(f"{_fmt(s)},{_fmt(t)},{_fmt(field.values[i, j])}")
    return "\n".join(lines) + "\n"


def curve_csv(axis: str, coords: np.ndarray, values: np.ndarray) -> str:
    """Two-column export of h(s) or g(t); axis is the header name "s" or "t"."""
    if axis not in ("s", "t"):
        raise ValueError("axis must be 's' or 't'")
    if len(coords) != len(values):
        raise ValueError("coordinate and value lengths differ")
    lines = [f"{axis},value"]
    lines += [f"{_fmt(c)},{_fmt(v)}" for c, v in zip(coords, values)]
    return "\n".join(lines) + "\n"


def edge_csv(edges: EdgeMap, extent: tuple[float, float]) -> str:
    S, T = edges.grid_s, edges.grid_t
    s_coords = np.linspace(0.0, extent[0], S)
    t_coords = np.linspace(0.0, extent[1], T)
    lines = ["s,t,flag"]
    for i in range(S):
        for j in range(T):
            lines.append(
                f"{_fmt(s_coords[i])},{_fmt(t_coords[j])},{int(edges.flags[i, j])}"
            )
    return "\n".join(lines) + "\n"


def segmentation_csv(seg: Segmentation, extent: tuple[float, float]) -> str:
    S, T = seg.assignment.shape
    s_coords = np.linspace(0.0, extent[0], S)
    t_coords = np.linspace(0.0, extent[1], T)
    lines = ["s,t,cluster"]
    for i in range(S):
        for j in range(T):
            lines.append(
                f"{_fmt(s_coords[i])},{_fmt(t_coords[j])},{int(seg.assignment[i, j])}"
            )
    return "\n".join(lines) + "\n"


def segmentation_pgm(seg: Segmentation) -> bytes:
    """Cluster ids as gray levels; k=1 degenerates to mid-gray."""
    if seg.k > 1:
        return to_pgm(
            seg.assignment.astype(float),
            ImageSpec("fixed", 0.0, float(seg.k - 1)),
        )
    return to_pgm(seg.assignment.astype(float))


def quiver_csv(ds: ScalarField, dt: ScalarField) -> str:
    """Rows (s, t, ds, dt, magnitude) of a signed component gradient."""
    if ds.values.shape != dt.values.shape or ds.extent != dt.extent:
        raise ValueError("gradient component grids do not match")
    s_coords, t_coords = ds.coords()
    lines = ["s,t,ds,dt,magnitude"]
    for i, s in enumerate(s_coords):
        for j, t in enumerate(t_coords):
            a, b = ds.values[i, j], dt.values[i, j]
            mag = float(np.hypot(a, b))
            lines.append(f"{_fmt(s)},{_fmt(t)},{_fmt(a)},{_fmt(b)},{_fmt(mag)}")
    return "\n".join(lines) + "\n"
