"""Band-target entropy minimization.

A single pure-component estimate is searched for as a weighted combination of
the leading SVD loadings, ``a_hat = t diag(S_k) V_k^T``, choosing ``t`` so that
the normalized absolute derivative of ``a_hat`` has minimal Shannon entropy.
Negative absorbance is penalized quadratically; an optional band anchors the
search on a feature the target is believed to own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .core import SpectraMatrix, SvdFactors, WavelengthAxis, svd, truncate
from .preprocess import SgFilterSpec, savitsky_golay

# Added when the targeted band does not hold the spectrum maximum.  Large
# against any entropy value reachable on a few thousand channels.
BAND_PENALTY = 1.0e4


@dataclass(frozen=True)
class AnnealSchedule:
    t_initial: float = 1.0
    t_final: float = 1e-4
    cooling: float = 0.95
    steps_per_temperature: int = 200
    step_scale: float = 0.5
    restarts: int = 3

    def __post_init__(self):
        if not (self.t_initial > 0 and self.t_final > 0):
            raise ValueError("temperatures must be positive")
        if not self.t_final < self.t_initial:
            raise ValueError("t_final must be below t_initial")
        if not 0 < self.cooling < 1:
            raise ValueError("cooling must lie in (0, 1)")
        if self.steps_per_temperature < 0 or self.restarts < 1:
            raise ValueError("steps_per_temperature >= 0 and restarts >= 1 required")
        if not self.step_scale > 0:
            raise ValueError("step_scale must be positive")


@dataclass(frozen=True)
class BtemConfig:
    k: int
    band: Optional[Tuple[float, float]] = None
    deriv_order: int = 1
    norm_mode: str = "max"
    nonneg_weight: float = 1000.0
    schedule: AnnealSchedule = field(default_factory=AnnealSchedule)
    seed: int = 0
    derivative: str = "finite"
    sg: SgFilterSpec = field(default_factory=lambda: SgFilterSpec(11, 2, 1))

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.norm_mode not in ("max", "sum"):
            raise ValueError("norm_mode must be 'max' or 'sum'")
        if self.nonneg_weight < 0:
            raise ValueError("nonneg_weight must be non-negative")
        if self.derivative not in ("finite", "sg"):
            raise ValueError("derivative must be 'finite' or 'sg'")
        if not 1 <= self.deriv_order <= 2:
            raise ValueError("deriv_order must be 1 or 2")


@dataclass(frozen=True)
class BtemResult:
    t: np.ndarray
    a_hat: np.ndarray
    objective: float
    objective_trace: list
    accepted_ratio: float
    factors: SvdFactors


def shannon_entropy(p) -> float:
    """Entropy in bits of the vector as given (no normalization)."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError("entropy is undefined for negative entries")
    nz = p[p > 0]
    if nz.size == 0:
        raise ValueError("entropy needs at least one positive entry")
    return float(-np.sum(nz * np.log2(nz)))


class _Scorer:
    """Objective on a candidate spectrum, with the per-call setup hoisted."""

    def __init__(self, axis: WavelengthAxis, config: BtemConfig):
        self.axis = axis
        self.config = config
        if config.band is not None:
            mask = axis.band_mask(config.band)
            if not mask.any():
                raise ValueError(f"band {config.band} does not intersect the axis")
            self.in_band = mask
            self.out_band = ~mask if (~mask).any() else None
        else:
            self.in_band = None
            self.out_band = None
        self.sg_matrix = None
        if config.derivative == "sg":
            spec = SgFilterSpec(config.sg.window, max(config.sg.poly_order, config.deriv_order),
                                config.deriv_order)
            # the filter is linear; build its matrix once instead of per call
            eye = np.eye(len(axis))
            self.sg_matrix = np.array([savitsky_golay(row, axis, spec) for row in eye]).T

    def derivative(self, a):
        if self.sg_matrix is not None:
            return self.sg_matrix @ a
        d = a
        for _ in range(self.config.deriv_order):
            d = np.gradient(d, self.axis.values, edge_order=2)
        return d

    def __call__(self, a_hat: np.ndarray) -> float:
        cfg = self.config
        peak = a_hat.max() if self.in_band is None else a_hat[self.in_band].max()
        if not peak > 0:
            scale = np.abs(a_hat).max()
            return 2 * BAND_PENALTY + (float(-peak / scale) if scale > 0 else 0.0)
        a = a_hat / peak
        penalty = 0.0
        if self.out_band is not None:
            outside = a[self.out_band].max()
            if outside > 1.0:
                penalty += BAND_PENALTY * outside
        d = np.abs(self.derivative(a))
        denom = d.max() if cfg.norm_mode == "max" else d.sum()
        h = 0.0 if denom == 0 else shannon_entropy(d / denom)
        neg = np.minimum(a, 0.0)
        return h + cfg.nonneg_weight * float(neg @ neg) + penalty


def btem_objective(t, factors: SvdFactors, axis: WavelengthAxis, config: BtemConfig) -> float:
    """Entropy of the normalized derivative of ``t diag(S) V^T`` plus penalties.

    The candidate is first scaled so that its maximum (inside the band, when
    one is set) equals 1, so the value does not depend on the length of ``t``.
    """
    t = np.asarray(t, dtype=float)
    if t.shape != (factors.rank,):
        raise ValueError(f"t must have length {factors.rank}")
    a_hat = (t * factors.S) @ factors.V.T
    return _Scorer(axis, config)(a_hat)


def anneal(
    objective: Callable[[np.ndarray], float],
    dim: int,
    schedule: AnnealSchedule = AnnealSchedule(),
    seed: int = 0,
    x0=None,
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
):
    """Simulated annealing with Metropolis acceptance and geometric cooling.

    Proposals are Gaussian with scale ``step_scale * T / t_initial``.  Every
    restart starts from ``x0`` with its own generator seeded ``seed + r``;
    the best point over all restarts is returned (ties go to the lowest
    restart).  Returns ``(best, best_value, trace, accepted_ratio)`` where the
    trace holds ``(evaluations, best-so-far)`` after every temperature level.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    start = np.zeros(dim) if x0 is None else np.array(x0, dtype=float)
    if project is not None:
        start = project(start)
    f0 = objective(start)
    if not math.isfinite(f0):
        raise ValueError("objective is not finite at the starting point")

    best_x, best_f = start.copy(), f0
    trace = [(0, f0)]
    evals = accepted = 0
    for r in range(schedule.restarts):
        rng = np.random.default_rng(seed + r)
        x, fx = start.copy(), f0
        T = schedule.t_initial
        while T > schedule.t_final and schedule.steps_per_temperature > 0:
            sigma = schedule.step_scale * T / schedule.t_initial
            for _ in range(schedule.steps_per_temperature):
                cand = x + rng.normal(0.0, sigma, dim)
                if project is not None:
                    cand = project(cand)
                fc = objective(cand)
                evals += 1
                if not math.isfinite(fc):
                    continue
                delta = fc - fx
                if delta <= 0 or rng.random() < math.exp(-delta / T):
                    x, fx = cand, fc
                    accepted += 1
                    if fx < best_f:
                        best_x, best_f = x.copy(), fx
            trace.append((evals, best_f))
            T *= schedule.cooling
    ratio = accepted / evals if evals else 0.0
    return best_x, best_f, trace, ratio


def _unit(z: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(z)
    return z / n if n > 0 else z


def btem_recover(A: SpectraMatrix, config: BtemConfig) -> BtemResult:
    """Recover one pure-component spectrum from mixture data.

    The search runs over loading weights ``z = t * S`` on the unit sphere,
    which keeps proposal steps comparable along every loading however
    unequal the singular values are; ``t`` is recovered afterwards.
    """
    factors = truncate(svd(A), config.k)
    scorer = _Scorer(A.axis, config)
    VT = factors.V.T

    def objective(z):
        return scorer(z @ VT)

    z0 = np.zeros(config.k)
    z0[0] = 1.0
    z, best, trace, ratio = anneal(
        objective, config.k, config.schedule, config.seed, x0=z0, project=_unit
    )
    raw = z @ VT
    top = raw.max()
    if not top > 0:
        raise FloatingPointError("BTEM produced a spectrum with no positive values")
    t = z / factors.S / top
    a_hat = (t * factors.S) @ VT
    return BtemResult(t, a_hat, best, trace, ratio, factors)
