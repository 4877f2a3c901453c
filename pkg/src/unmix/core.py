"""Spectral containers, SVD/PCA decomposition and rank-selection helpers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np


class SpectralDataError(ValueError):
    """Raised for malformed or inconsistent spectral data."""


@dataclass(frozen=True)
class WavelengthAxis:
    """Strictly monotone spectral axis.

    ``unit`` is ``"nm"`` (must increase) or ``"cm-1"`` (either direction).
    """

    values: np.ndarray
    unit: str = "nm"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 3:
            raise SpectralDataError("wavelength axis needs at least 3 points")
        if not np.all(np.isfinite(v)):
            raise SpectralDataError("wavelength axis contains non-finite values")
        d = np.diff(v)
        if self.unit == "nm":
            if not np.all(d > 0):
                raise SpectralDataError("nm axis must be strictly increasing")
        elif not (np.all(d > 0) or np.all(d < 0)):
            raise SpectralDataError("axis must be strictly monotone")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def band_mask(self, band: Tuple[float, float]) -> np.ndarray:
        lo, hi = sorted(band)
        return (self.values >= lo) & (self.values <= hi)

    def spacing(self, rtol: float = 0.01) -> float:
        """Uniform step of the axis; raises if steps differ by more than ``rtol``."""
        d = np.diff(self.values)
        h = d.mean()
        if np.max(np.abs(d - h)) > rtol * abs(h):
            raise SpectralDataError("axis spacing is not uniform within 1%")
        return float(h)


@dataclass(frozen=True)
class SpectraMatrix:
    """Absorbance matrix, samples in rows and wavelengths in columns."""

    values: np.ndarray
    axis: WavelengthAxis
    sample_ids: Sequence[str] = field(default=())

    def __post_init__(self):
        a = np.array(self.values, dtype=float)
        if a.ndim == 1:
            a = a[None, :]
        if a.ndim != 2 or a.shape[0] == 0:
            raise SpectralDataError("spectra must be a non-empty 2-D matrix")
        if a.shape[1] != len(self.axis):
            raise SpectralDataError(
                f"column count {a.shape[1]} does not match axis length {len(self.axis)}"
            )
        if not np.all(np.isfinite(a)):
            raise SpectralDataError("spectra contain non-finite values")
        ids = tuple(str(s) for s in self.sample_ids) or tuple(
            f"s{i}" for i in range(a.shape[0])
        )
        if len(ids) != a.shape[0]:
            raise SpectralDataError("sample_ids length does not match row count")
        a.setflags(write=False)
        object.__setattr__(self, "values", a)
        object.__setattr__(self, "sample_ids", ids)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_wavelengths(self) -> int:
        return self.values.shape[1]

    def select(self, rows) -> "SpectraMatrix":
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        return SpectraMatrix(
            self.values[rows], self.axis, [self.sample_ids[i] for i in rows]
        )

    def restrict(self, band: Tuple[float, float]) -> "SpectraMatrix":
        mask = self.axis.band_mask(band)
        if mask.sum() < 3:
            raise SpectralDataError(f"band {band} leaves fewer than 3 wavelengths")
        return SpectraMatrix(
            self.values[:, mask],
            WavelengthAxis(self.axis.values[mask], self.axis.unit),
            self.sample_ids,
        )


@dataclass(frozen=True)
class HyperCube:
    """Image of ``width * height`` pixel spectra stored row-major."""

    width: int
    height: int
    spectra: SpectraMatrix

    def __post_init__(self):
        if self.width * self.height != self.spectra.n_samples:
            raise SpectralDataError(
                f"{self.width}x{self.height} cube needs {self.width * self.height} "
                f"spectra, got {self.spectra.n_samples}"
            )

    def pixel_index(self, x: int, y: int) -> int:
        return y * self.width + x

    def pixel_xy(self, index: int) -> Tuple[int, int]:
        return int(index % self.width), int(index // self.width)

    def to_image(self, values) -> np.ndarray:
        """Reshape a per-pixel vector into a (height, width) map."""
        return np.asarray(values).reshape(self.height, self.width)


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``A = U diag(S) V^T``; ``V`` holds loadings as columns."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return self.S.size

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.S) @ self.V.T


def _as_array(A) -> np.ndarray:
    if isinstance(A, SpectraMatrix):
        return A.values
    a = np.asarray(A, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise SpectralDataError("expected a non-empty 2-D matrix")
    if not np.all(np.isfinite(a)):
        raise SpectralDataError("matrix contains non-finite values")
    return a


def svd(A) -> SvdFactors:
    """Thin SVD with a fixed sign convention.

    Each loading column is flipped so its largest-magnitude element is
    positive (the paired score column flips with it), which makes the
    factors reproducible across LAPACK builds up to ties.
    """
    a = _as_array(A)
    U, S, Vt = np.linalg.svd(a, full_matrices=False)
    V = Vt.T
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return SvdFactors(U * signs, S, V * signs)


def truncate(f: SvdFactors, k: int) -> SvdFactors:
    if not 1 <= k <= f.rank:
        raise ValueError(f"k must lie in [1, {f.rank}], got {k}")
    return SvdFactors(f.U[:, :k], f.S[:k], f.V[:, :k])


def scree(f: SvdFactors) -> list[tuple[int, float]]:
    """(1-based index, singular value) pairs.

    Singular values are plotted; their squares are the eigenvalues of
    ``A^T A``.
    """
    return [(i + 1, float(s)) for i, s in enumerate(f.S)]


def pca_scores(
    A: SpectraMatrix, k: int, band: Optional[Tuple[float, float]] = None
) -> np.ndarray:
    """Scores of the mean-centred data, optionally restricted to a band."""
    if band is not None:
        mask = A.axis.band_mask(band)
        if not mask.any():
            raise SpectralDataError(f"band {band} does not intersect the axis")
        x = A.values[:, mask]
    else:
        x = A.values
    xc = x - x.mean(axis=0)
    if k < 1 or k > min(xc.shape):
        raise ValueError(f"k={k} exceeds the available components")
    f = svd(xc)
    return f.U[:, :k] * f.S[:k]
