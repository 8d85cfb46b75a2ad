"""Kernel-smoothed space-time word-distribution fields.

A field assigns to every point of a uniform grid over Ω = [0,I]×[0,J] a
sparse nonnegative vector over the vocabulary, obtained by Gaussian-kernel
smoothing of the one-hot word indicators of a versioned document.  Grid
rows are stored in a CSR matrix with row index p = t_index·S + s_index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
import scipy.sparse as sp

from .corpus import VersionedDocument

MODES = ("normalized", "non-normalized")


@dataclass(frozen=True)
class KernelSpec:
    """Separable Gaussian kernel with hard truncation per axis.

    h_s is in space units, h_t in time units (revisions).  Weight is
    exactly zero strictly beyond truncation_radius bandwidths on either
    axis.
    """

    h_s: float
    h_t: float
    truncation_radius: float = 3.0

    def __post_init__(self) -> None:
        if not (self.h_s > 0 and self.h_t > 0 and self.truncation_radius > 0):
            raise ValueError("kernel bandwidths and truncation_radius must be > 0")


def kernel_weight(dx: float, dy: float, kernel: KernelSpec) -> float:
    """Unnormalized weight exp(-(dx^2/(2 h_s^2) + dy^2/(2 h_t^2)))."""
    if abs(dx) > kernel.truncation_radius * kernel.h_s:
        return 0.0
    if abs(dy) > kernel.truncation_radius * kernel.h_t:
        return 0.0
    return float(
        np.exp(-(dx * dx / (2.0 * kernel.h_s**2) + dy * dy / (2.0 * kernel.h_t**2)))
    )


def _axis_weights(targets: np.ndarray, sources: np.ndarray, h: float, radius: float):
    """Truncated 1-D Gaussian weights, shape (len(targets), len(sources))."""
    d = targets[:, None] - sources[None, :]
    w = np.exp(-(d * d) / (2.0 * h * h))
    w[np.abs(d) > radius * h] = 0.0
    return w


def default_kernel(extent_s: float) -> KernelSpec:
    """h_s = 2% of the space extent, h_t = 2 revisions, truncation at 3."""
    return KernelSpec(h_s=0.02 * extent_s, h_t=2.0, truncation_radius=3.0)


class SpaceTimeField:
    """Immutable grid of sparse word distributions plus its construction metadata."""

    def __init__(
        self,
        data: sp.csr_matrix,
        grid: tuple[int, int],
        mode: str,
        extent: tuple[float, float],
        kernel: KernelSpec,
        vocabulary_size: int,
        vocabulary_sha256: str,
        document_sha256: str,
    ):
        S, T = grid
        if data.shape != (S * T, vocabulary_size):
            raise ValueError("data shape does not match grid and vocabulary size")
        self.data = data
        self.grid_s = S
        self.grid_t = T
        self.mode = mode
        self.extent = (float(extent[0]), float(extent[1]))
        self.kernel = kernel
        self.vocabulary_size = vocabulary_size
        self.vocabulary_sha256 = vocabulary_sha256
        self.document_sha256 = document_sha256
        self.s_coords = np.linspace(0.0, self.extent[0], S)
        self.t_coords = np.linspace(0.0, self.extent[1], T)
        self.mass = np.asarray(data.sum(axis=1)).ravel().reshape(T, S).T.copy()
        self.mass.setflags(write=False)

    def row_index(self, s_index: int, t_index: int) -> int:
        if not (0 <= s_index < self.grid_s and 0 <= t_index < self.grid_t):
            raise IndexError(
                f"grid index ({s_index}, {t_index}) outside "
                f"{self.grid_s}x{self.grid_t}"
            )
        return t_index * self.grid_s + s_index

    def evaluate(self, s_index: int, t_index: int) -> dict[int, float]:
        """Stored distribution at one grid point as {1-based token id: value}."""
        row = self.data.getrow(self.row_index(s_index, t_index))
        return {int(j) + 1: float(v) for j, v in zip(row.indices, row.data)}

    def component(self, token_id: int) -> np.ndarray:
        """Dense (S, T) array of one vocabulary component."""
        if not 1 <= token_id <= self.vocabulary_size:
            raise IndexError(f"token id {token_id} outside [1, {self.vocabulary_size}]")
        col = np.asarray(self.data[:, token_id - 1].todense()).ravel()
        return col.reshape(self.grid_t, self.grid_s).T.copy()

    def iter_components(self) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
        """Yield (token id, row indices, values) for each nonempty component."""
        csc = self.data.tocsc()
        for j in range(self.vocabulary_size):
            sl = slice(csc.indptr[j], csc.indptr[j + 1])
            if csc.indptr[j + 1] > csc.indptr[j]:
                yield j + 1, csc.indices[sl], csc.data[sl]

    # -- serialization --------------------------------------------------

    def to_json(self, path: str | Path) -> None:
        """Documented JSON container; 64-bit float values round-trip exactly."""
        header = {
            "format": "revfield.space-time-field",
            "format_version": 1,
            "grid": [self.grid_s, self.grid_t],
            "mode": self.mode,
            "extent": [self.extent[0], self.extent[1]],
            "kernel": {
                "h_s": self.kernel.h_s,
                "h_t": self.kernel.h_t,
                "truncation_radius": self.kernel.truncation_radius,
            },
            "vocabulary_size": self.vocabulary_size,
            "vocabulary_sha256": self.vocabulary_sha256,
            "document_sha256": self.document_sha256,
        }
        rows = []
        indptr, indices, data = self.data.indptr, self.data.indices, self.data.data
        for p in range(self.data.shape[0]):
            sl = slice(indptr[p], indptr[p + 1])
            rows.append([[int(j) + 1, float(v)] for j, v in zip(indices[sl], data[sl])])
        header["points"] = rows
        Path(path).write_text(
            json.dumps(header, ensure_ascii=False, separators=(",", ":")) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "SpaceTimeField":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        if obj.get("format") != "revfield.space-time-field":
            raise ValueError(f"{path}: not a serialized space-time field")
        S, T = obj["grid"]
        V = obj["vocabulary_size"]
        indptr = [0]
        indices: list[int] = []
        values: list[float] = []
        for row in obj["points"]:
            for tid, v in row:
                indices.append(tid - 1)
                values.append(v)
            indptr.append(len(indices))
        data = sp.csr_matrix(
            (np.array(values), np.array(indices, dtype=np.int32), np.array(indptr)),
            shape=(S * T, V),
        )
        k = obj["kernel"]
        return cls(
            data,
            (S, T),
            obj["mode"],
            tuple(obj["extent"]),
            KernelSpec(k["h_s"], k["h_t"], k["truncation_radius"]),
            V,
            obj["vocabulary_sha256"],
            obj["document_sha256"],
        )


def build_field(
    doc: VersionedDocument,
    mode: str = "normalized",
    grid: tuple[int, int] | None = None,
    kernel: KernelSpec | None = None,
) -> SpaceTimeField:
    """Smooth a versioned document into a space-time distribution field.

    normalized: revision j occupies u in [0,1], word i at (i-0.5)/N(j)
    with weight 1/N(j) (the continuum limit of expanding all revisions to
    a common length); kernel weights renormalized over in-domain support,
    so every grid distribution sums to 1.  non-normalized: word i sits at
    absolute position i-0.5 over [0, max N(j)]; padding positions count in
    the normalizer but carry zero mass, so mass falls below 1 near padding.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    lengths = doc.lengths()
    l = doc.num_revisions
    if mode == "normalized":
        if any(n == 0 for n in lengths):
            raise ValueError("cannot normalize zero-length revision")
        I = 1.0
    else:
        I = float(max(lengths))
        if I == 0.0:
            raise ValueError("document has no tokens in any revision")
    J = float(l - 1)
    S, T = grid if grid is not None else (256, l)
    if S < 1 or T < 1:
        raise ValueError("grid must be at least 1x1")
    if kernel is None:
        kernel = default_kernel(I)

    s_grid = np.linspace(0.0, I, S)
    t_grid = np.linspace(0.0, J, T)
    V = len(doc.vocabulary)
    radius = kernel.truncation_radius

    # per-revision spatial kernel sums: numerators per vocabulary column,
    # denominators summed over word positions
    num_parts: list[sp.csr_matrix] = []
    den_parts = np.zeros((l, S))
    for j, rev in enumerate(doc.revisions):
        n = lengths[j]
        if n == 0:
            num_parts.append(sp.csr_matrix((S, V)))
            continue
        if mode == "normalized":
            pos = (np.arange(1, n + 1) - 0.5) / n
            per_word = 1.0 / n
        else:
            pos = np.arange(1, n + 1) - 0.5
            per_word = 1.0
        w = _axis_weights(s_grid, pos, kernel.h_s, radius) * per_word
        cols = np.asarray(rev, dtype=np.int64) - 1
        onehot = sp.csr_matrix(
            (np.ones(n), (np.arange(n), cols)), shape=(n, V)
        )
        num_parts.append(sp.csr_matrix(w @ onehot))
        den_parts[j] = w.sum(axis=1)

    if mode == "non-normalized":
        # padded normalizer is revision-independent and factors per axis
        pad_pos = np.arange(1, int(I) + 1) - 0.5
        zeta = _axis_weights(s_grid, pad_pos, kernel.h_s, radius).sum(axis=1)

    w_time = _axis_weights(t_grid, np.arange(l, dtype=float), kernel.h_t, radius)

    blocks = []
    for a in range(T):
        active = np.nonzero(w_time[a])[0]
        num = sp.csr_matrix((S, V))
        for j in active:
            num = num + num_parts[j] * w_time[a, j]
        if mode == "normalized":
            den = den_parts[active].T @ w_time[a, active]
            if np.any(den <= 0.0):
                raise ValueError(
                    "kernel support does not cover every grid point; "
                    "increase bandwidth or truncation_radius"
                )
            scale = 1.0 / den
        else:
            tau = w_time[a, active].sum()
            den = zeta * tau
            scale = np.divide(1.0, den, out=np.zeros(S), where=den > 0.0)
        block = sp.diags(scale) @ num
        blocks.append(sp.csr_matrix(block))
    data = sp.vstack(blocks, format="csr")
    data.eliminate_zeros()
    return SpaceTimeField(
        data,
        (S, T),
        mode,
        (I, J),
        kernel,
        V,
        doc.vocabulary.sha256(),
        doc.content_hash(),
    )
