"""MCR-ALS baseline with SIMPLISMA initial estimates.

Spectra are stored row-wise: ``S`` is (n_components, n_wavelengths) and the
bilinear model reads ``A ~ C @ S``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, Optional

import numpy as np

from .core import SpectraMatrix

CONSTRAINTS = frozenset({"nonneg_C", "nonneg_S", "closure_C"})
# shorthand accepted wherever a constraint set is given
ALIASES = {"nonneg": {"nonneg_C", "nonneg_S"}, "closure": {"closure_C"}}


def expand_constraints(which) -> frozenset:
    out = set()
    for c in which:
        out |= ALIASES.get(c, {c})
    return frozenset(out)


def _values(A) -> np.ndarray:
    return A.values if isinstance(A, SpectraMatrix) else np.asarray(A, dtype=float)


def purity(A, alpha_fraction: float = 0.05) -> np.ndarray:
    """First-pass SIMPLISMA purity ``std / (mean + alpha)`` of every column."""
    X = _values(A)
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    alpha = alpha_fraction * mu.max()
    return sd / (mu + alpha)


def purest_variables(A, n: int, alpha_fraction: float = 0.05) -> list[int]:
    """Indices of the ``n`` purest variables.

    After the first pick each purity is weighted by the determinant of the
    correlation-around-origin matrix of the candidate together with the
    variables already chosen, which suppresses columns that are linear
    combinations of earlier picks.
    """
    X = _values(A)
    nrow, p = X.shape
    if not 1 <= n <= p:
        raise ValueError(f"n must lie in [1, {p}]")
    if not 0 < alpha_fraction <= 0.2:
        raise ValueError("alpha_fraction must lie in (0, 0.2]")
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    alpha = alpha_fraction * mu.max()
    base = sd / (mu + alpha)
    lam = np.sqrt(mu**2 + (sd + alpha) ** 2)
    D = X / lam
    R = D.T @ D / nrow

    picked = [int(np.argmax(base))]
    if not base[picked[0]] > 0:
        raise ValueError("data have no varying variables")
    for _ in range(1, n):
        weights = np.empty(p)
        for j in range(p):
            idx = [j] + picked
            weights[j] = np.linalg.det(R[np.ix_(idx, idx)])
        weights[picked] = 0.0
        pur = weights * base
        j = int(np.argmax(pur))
        if not pur[j] > 1e-10 * base.max():
            raise ValueError(f"only {len(picked)} independent pure variables found, "
                             f"{n} requested")
        picked.append(j)
    return picked


def simplisma(A, n: int, alpha_fraction: float = 0.05, orient: str = "samples") -> np.ndarray:
    """SIMPLISMA initial spectra, shape (n, n_wavelengths).

    With ``orient="samples"`` the purity scan runs over the columns of
    ``A^T`` and the purest measured spectra are returned as they are.  With
    ``orient="variables"`` the purest wavelengths are found instead and the
    spectra are the least-squares solution for their column profiles.
    """
    X = _values(A)
    if orient == "samples":
        rows = purest_variables(X.T, n, alpha_fraction)
        return X[rows].copy()
    if orient == "variables":
        cols = purest_variables(X, n, alpha_fraction)
        return np.linalg.pinv(X[:, cols]) @ X
    raise ValueError("orient must be 'samples' or 'variables'")


def apply_constraints(M, which, mode: str = "C") -> np.ndarray:
    """Clip negatives and/or close rows to unit sum (clipping first).

    ``mode`` is ``"C"`` for a concentration matrix or ``"S"`` for a spectra
    matrix; closure only applies in C mode.
    """
    M = np.array(M, dtype=float)
    which = expand_constraints(which)
    if mode not in ("C", "S"):
        raise ValueError("mode must be 'C' or 'S'")
    if f"nonneg_{mode}" in which:
        M = np.maximum(M, 0.0)
    if mode == "C" and "closure_C" in which:
        sums = M.sum(axis=-1, keepdims=True)
        if np.any(sums == 0):
            raise ValueError("closure is undefined for an all-zero row")
        M = M / sums
    return M


def lack_of_fit(A, C, S) -> float:
    """Percent lack of fit ``100 ||A - C S|| / ||A||`` (Frobenius)."""
    X = _values(A)
    norm = np.linalg.norm(X)
    if norm == 0:
        raise ValueError("lack of fit is undefined for a zero matrix")
    return float(100.0 * np.linalg.norm(X - np.asarray(C) @ np.asarray(S)) / norm)


@dataclass(frozen=True)
class McrConfig:
    n_components: int
    constraints: FrozenSet[str] = frozenset({"nonneg_C", "nonneg_S", "closure_C"})
    max_iterations: int = 500
    tol: float = 1e-8
    init: str = "simplisma"
    S0: Optional[np.ndarray] = None
    seed: int = 0
    alpha_fraction: float = 0.05
    simplisma_orient: str = "samples"
    slack: float = 1e-9

    def __post_init__(self):
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        cons = expand_constraints(self.constraints)
        unknown = cons - CONSTRAINTS
        if unknown:
            raise ValueError(f"unknown constraints {sorted(unknown)}")
        if self.init not in ("simplisma", "provided", "random"):
            raise ValueError("init must be simplisma, provided or random")
        if self.init == "provided" and self.S0 is None:
            raise ValueError("init='provided' needs S0")
        object.__setattr__(self, "constraints", cons)


@dataclass(frozen=True)
class McrResult:
    C: np.ndarray
    S: np.ndarray
    lof_trace: list
    converged: bool
    iterations: int
    stop_reason: str = ""
    rank_collapse: bool = False


def _initial_spectra(X, cfg: McrConfig) -> np.ndarray:
    if cfg.init == "provided":
        S0 = np.atleast_2d(np.asarray(cfg.S0, dtype=float))
        if S0.shape != (cfg.n_components, X.shape[1]):
            raise ValueError(f"S0 must be {(cfg.n_components, X.shape[1])}")
        return S0
    if cfg.init == "random":
        rng = np.random.default_rng(cfg.seed)
        return np.abs(rng.normal(size=(cfg.n_components, X.shape[1])))
    return simplisma(X, cfg.n_components, cfg.alpha_fraction, cfg.simplisma_orient)


def mcr_als(A, config: McrConfig) -> McrResult:
    """Alternate ``C = A pinv(S)`` and ``S = pinv(C) A`` with constraints.

    Stops on a relative change in residual norm below ``tol``, on a residual
    that is already negligible, or when an iteration would raise the lack of
    fit by more than ``slack`` (clipping is not a least-squares projection and
    can do that); in the last case the previous iterate is returned.
    """
    X = _values(A)
    S = apply_constraints(_initial_spectra(X, config), config.constraints, "S")
    norm_a = np.linalg.norm(X)
    if norm_a == 0:
        raise ValueError("data matrix is zero")
    trace: list[float] = []
    C = None
    prev_res = None
    for it in range(1, config.max_iterations + 1):
        try:
            C_new = apply_constraints(X @ np.linalg.pinv(S), config.constraints, "C")
            S_new = apply_constraints(np.linalg.pinv(C_new) @ X, config.constraints, "S")
        except ValueError:
            return McrResult(C if C is not None else np.zeros((X.shape[0], config.n_components)),
                             S, trace, False, it - 1, "rank_collapse", True)
        collapsed = (np.linalg.norm(C_new, axis=0).min() == 0
                     or np.linalg.norm(S_new, axis=1).min() == 0)
        res = float(np.linalg.norm(X - C_new @ S_new))
        lof = 100.0 * res / norm_a
        if trace and lof > trace[-1] + config.slack:
            return McrResult(C, S, trace, False, it - 1, "lof_increase")
        C, S = C_new, S_new
        trace.append(lof)
        if collapsed:
            return McrResult(C, S, trace, False, it, "rank_collapse", True)
        if res <= config.tol * norm_a:
            return McrResult(C, S, trace, True, it, "exact_fit")
        if prev_res is not None and abs(prev_res - res) <= config.tol * prev_res:
            return McrResult(C, S, trace, True, it, "tolerance")
        prev_res = res
    return McrResult(C, S, trace, False, config.max_iterations, "max_iterations")
