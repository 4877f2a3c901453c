"""One-at-a-time calibration of a recovered spectrum.

``cls_quantify`` projects every mixture spectrum onto a single spectrum.
``tpls_fit`` runs NIPALS PLS1 with the roles of samples and wavelengths
exchanged: each wavelength is an observation, each sample a predictor, and
the target spectrum is the response.  The regression vector ``m`` is then
indexed by sample and reads as a relative abundance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import SpectraMatrix
from .preprocess import range_scale


class CalibrationWarning(UserWarning):
    pass


def _values(X) -> np.ndarray:
    return X.values if isinstance(X, SpectraMatrix) else np.asarray(X, dtype=float)


def cls_quantify(A, a_hat) -> np.ndarray:
    """``A a^T (a a^T)^-1`` for a single spectrum ``a``."""
    X = _values(A)
    a = np.asarray(a_hat, dtype=float)
    if a.shape != (X.shape[1],):
        raise ValueError("spectrum length does not match the data")
    denom = a @ a
    if denom == 0:
        raise ValueError("cannot quantify against an all-zero spectrum")
    return X @ a / denom


@dataclass(frozen=True)
class TplsModel:
    """Fitted target-PLS model.

    W (n_samples x L) holds the sample-space weights, T (n_wavelengths x L)
    the wavelength-space scores and P (n_samples x L) the loadings.  ``ssq_x``
    and ``ssq_y`` are cumulative percent variance explained after each
    projection.
    """

    W: np.ndarray
    T: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    B: np.ndarray
    m: np.ndarray
    ssq_x: np.ndarray
    ssq_y: np.ndarray
    x_residual: np.ndarray
    y_residual: np.ndarray
    center: bool = False

    @property
    def L(self) -> int:
        return self.B.size

    def coefficients(self, n: int | None = None) -> np.ndarray:
        """Regression vector using the first ``n`` projections."""
        n = self.L if n is None else n
        W, P, B = self.W[:, :n], self.P[:, :n], self.B[:n]
        return W @ np.linalg.solve(P.T @ W, B)


def tpls_fit(X, y, L: int, center: bool = False, rank_tol: float = 1e-10) -> TplsModel:
    """Fit ``L`` latent projections of ``y`` onto the sample space of ``X``.

    PLS1 is exact in one pass per projection, so no inner loop is run.
    Requests beyond the numerical rank stop early with a warning.
    """
    X = _values(X).copy()
    y = np.asarray(y, dtype=float).copy()
    n, p = X.shape
    if y.shape != (p,):
        raise ValueError(f"target must have {p} entries, got {y.shape}")
    if not 1 <= L <= min(n, p):
        raise ValueError(f"L must lie in [1, {min(n, p)}]")
    if center:
        X -= X.mean(axis=1, keepdims=True)
        y -= y.mean()
    x_total = float(np.sum(X * X))
    y_total = float(y @ y)
    if x_total == 0 or y_total == 0:
        raise ValueError("data and target must be non-zero")

    W, T, P, B, ssq_x, ssq_y, xr, yr = [], [], [], [], [], [], [], []
    scale = np.sqrt(x_total)
    for i in range(L):
        w = X @ y
        norm = np.linalg.norm(w)
        if norm <= rank_tol * scale * max(np.sqrt(y_total), 1.0):
            if i == 0:
                raise FloatingPointError("target is orthogonal to the data (zero weight vector)")
            warnings.warn(f"numerical rank reached after {i} projections; "
                          f"requested {L}", CalibrationWarning, stacklevel=2)
            break
        w /= norm
        t = X.T @ w
        tt = t @ t
        if tt <= (rank_tol * scale) ** 2:
            warnings.warn(f"numerical rank reached after {i} projections; "
                          f"requested {L}", CalibrationWarning, stacklevel=2)
            break
        pl = X @ t / tt
        b = (y @ t) / tt
        X -= np.outer(pl, t)
        y -= b * t
        W.append(w)
        T.append(t)
        P.append(pl)
        B.append(b)
        xr.append(np.sqrt(np.sum(X * X)))
        yr.append(np.linalg.norm(y))
        ssq_x.append(100.0 * (1.0 - xr[-1] ** 2 / x_total))
        ssq_y.append(100.0 * (1.0 - yr[-1] ** 2 / y_total))

    W, T, P = (np.column_stack(M) for M in (W, T, P))
    B = np.array(B)
    m = W @ np.linalg.solve(P.T @ W, B)
    return TplsModel(W, T, P, np.ones(B.size), B, m, np.array(ssq_x), np.array(ssq_y),
                     np.array(xr), np.array(yr), center)


def tpls_predict(model: TplsModel, lo: float = 0.0, hi: float = 100.0) -> np.ndarray:
    """Range-scaled abundances."""
    return range_scale(model.m, lo, hi)


def ssq_threshold_lookup(ssq, threshold: float) -> int:
    """Smallest 1-based position whose cumulative value reaches ``threshold``."""
    ssq = np.asarray(ssq, dtype=float)
    hits = np.flatnonzero(ssq >= threshold - 1e-9)
    if hits.size == 0:
        warnings.warn(f"threshold {threshold}% not reached; using all {ssq.size} projections",
                      CalibrationWarning, stacklevel=2)
        return int(ssq.size)
    return int(hits[0] + 1)


def select_projections(model: TplsModel, threshold: float = 95.0, trace: str = "x") -> int:
    """Number of projections needed for ``threshold`` percent of X (or y) variance."""
    return ssq_threshold_lookup(model.ssq_x if trace == "x" else model.ssq_y, threshold)
