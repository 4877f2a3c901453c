"""Comparison metrics and resampling diagnostics."""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .preprocess import max_rescale, range_scale


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def rmse_percent(pred, truth, lo: float = 0.0, hi: float = 100.0) -> float:
    """RMSE of range-scaled predictions against truth given in the same units."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape or pred.size < 2:
        raise ValueError("pred and truth need equal lengths >= 2")
    scaled = range_scale(pred, lo, hi)
    return float(np.sqrt(np.mean((scaled - truth) ** 2)))


def procrustes_distance(a, b, scaling: str = "unit") -> float:
    """Shape distance after centring, scaling and sign alignment.

    ``scaling="unit"`` scales both centred vectors to unit norm;
    ``scaling="max"`` instead max-rescales the raw inputs and keeps the
    result in rescaled absorbance units.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("inputs must have equal length")
    if scaling == "max":
        a, b = max_rescale(a), max_rescale(b)
    a = a - a.mean()
    b = b - b.mean()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("procrustes distance is undefined for constant vectors")
    if scaling == "unit":
        a, b = a / na, b / nb
    elif scaling != "max":
        raise ValueError("scaling must be 'unit' or 'max'")
    # 1-D orthogonal group is {+1, -1}
    sign = 1.0 if a @ b >= 0 else -1.0
    return float(np.linalg.norm(a - sign * b))


def r_squared(actual, pred) -> float:
    actual = np.asarray(actual, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if actual.size < 3 or actual.shape != pred.shape:
        raise ValueError("need at least 3 paired values")
    xa, xp = actual - actual.mean(), pred - pred.mean()
    va, vp = xa @ xa, xp @ xp
    if va == 0 or vp == 0:
        raise ValueError("r_squared is undefined for zero-variance input")
    return float((xa @ xp) ** 2 / (va * vp))


def jackknife_maps(run: Callable[[np.ndarray], np.ndarray], n_samples: int,
                   scale: bool = True):
    """Leave-one-out mean and standard deviation of an intensity map.

    ``run`` receives the retained sample indices.  Each map is range-scaled
    to [0, 1] before pooling unless ``scale`` is False.  Returns
    ``(mean, sd, maps)``.
    """
    if n_samples < 3:
        raise ValueError("jackknife needs at least 3 samples")
    maps = []
    for i in range(n_samples):
        keep = np.delete(np.arange(n_samples), i)
        try:
            maps.append(np.asarray(run(keep), dtype=float))
        except Exception as exc:
            raise RuntimeError(f"jackknife trial {i} failed: {exc}") from exc
    return pool_maps(maps, scale)


def pool_maps(maps, scale: bool = True):
    """Pointwise mean and (population) sd of equally shaped trial maps.

    With ``scale`` each map is first range-scaled to [0, 1]; a constant map
    becomes all zeros.  Returns ``(mean, sd, stack)``.
    """
    stack = np.stack([np.asarray(m, dtype=float) for m in maps])
    if not np.all(np.isfinite(stack)):
        raise ValueError("maps must be finite")
    if scale:
        stack = np.stack([
            range_scale(m.ravel(), 0.0, 1.0).reshape(m.shape) if np.ptp(m) > 0
            else np.zeros_like(m)
            for m in stack
        ])
    mean = _fsum_mean(stack)
    sd = np.sqrt(_fsum_mean((stack - mean) ** 2))
    return mean, sd, stack


def _fsum_mean(stack: np.ndarray) -> np.ndarray:
    # compensated, order-independent pooling
    flat = stack.reshape(stack.shape[0], -1)
    n = stack.shape[0]
    out = np.array([math.fsum(col) for col in flat.T]) / n
    # one refinement step removes the rounding of the division
    out += np.array([math.fsum(col) for col in (flat - out).T]) / n
    return out.reshape(stack.shape[1:])


def nn_distance_cv(scores) -> float:
    """Coefficient of variation (percent) of nearest-neighbour distances."""
    X = np.asarray(scores, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 3:
        raise ValueError("need at least 3 points")
    D = squareform(pdist(X))
    np.fill_diagonal(D, np.inf)
    nn = D.min(axis=1)
    if nn.mean() == 0:
        raise ValueError("all points are identical")
    return float(100.0 * nn.std() / nn.mean())


def match_components(estimates: Sequence, truths: Sequence) -> list[tuple[int, int, float]]:
    """Greedy best-first pairing by cosine; returns (estimate, truth, cosine)."""
    E = np.atleast_2d(np.asarray(estimates, dtype=float))
    T = np.atleast_2d(np.asarray(truths, dtype=float))
    sim = np.array([[cosine(e, t) for t in T] for e in E])
    pairs = []
    free_e, free_t = set(range(len(E))), set(range(len(T)))
    while free_e and free_t:
        i, j = max(((i, j) for i in free_e for j in free_t), key=lambda ij: (sim[ij], -ij[0], -ij[1]))
        pairs.append((i, j, float(sim[i, j])))
        free_e.discard(i)
        free_t.discard(j)
    return sorted(pairs, key=lambda p: p[1])
