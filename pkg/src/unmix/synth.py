"""Ground-truth synthetic mixtures.

Pure spectra are sums of Gaussian bands; mixtures follow Beer-Lambert
additivity (``A = C S^T``) with optional per-sample scatter and i.i.d. noise.
Three dataset factories mimic the regimes the toolkit is benchmarked on: a
designed three-liquid simplex, a serial dilution with a trace contaminant,
and a hyperspectral plume over a spatially varying background.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import HyperCube, SpectraMatrix, WavelengthAxis


@dataclass(frozen=True)
class ComponentSpec:
    peaks: Tuple[Tuple[float, float, float], ...]
    name: str = "component"

    def __post_init__(self):
        peaks = tuple(tuple(float(v) for v in p) for p in self.peaks)
        for _, width, height in peaks:
            if width <= 0 or height <= 0:
                raise ValueError("peak widths and heights must be positive")
        object.__setattr__(self, "peaks", peaks)


@dataclass(frozen=True)
class MixtureDesign:
    concentrations: np.ndarray
    replicates: int = 1
    noise_sd: float = 0.0
    scatter: Optional[Tuple[float, float]] = None
    seed: int = 0

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.concentrations, dtype=float))
        if np.any(c < 0):
            raise ValueError("concentrations must be non-negative")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        object.__setattr__(self, "concentrations", c)


def gaussian_spectrum(spec: ComponentSpec, axis: WavelengthAxis) -> np.ndarray:
    lam = axis.values
    lo, hi = lam.min(), lam.max()
    out = np.zeros_like(lam)
    for center, width, height in spec.peaks:
        if not lo <= center <= hi:
            raise ValueError(f"peak at {center} lies outside the axis [{lo}, {hi}]")
        out += height * np.exp(-0.5 * ((lam - center) / width) ** 2)
    return out


def simplex_design(levels: int, n_components: int, exclude_pure: bool = False) -> np.ndarray:
    """All closed compositions on a grid with ``levels`` values per component."""
    if levels < 2:
        raise ValueError("levels must be >= 2")
    total = levels - 1
    rows = [
        c
        for c in itertools.product(range(levels), repeat=n_components)
        if sum(c) == total and not (exclude_pure and max(c) == total)
    ]
    # lexicographic order, highest first component first
    rows.sort(reverse=True)
    return np.array(rows, dtype=float) / total


def synthesize(
    components: Sequence[ComponentSpec], design: MixtureDesign, axis: WavelengthAxis
) -> Tuple[SpectraMatrix, np.ndarray]:
    """Mix pure spectra; returns the data and the exact concentrations used.

    Replicates repeat the whole design block with fresh scatter and noise.
    """
    S = np.array([gaussian_spectrum(c, axis) for c in components])
    C = design.concentrations
    if C.shape[1] != S.shape[0]:
        raise ValueError("design columns do not match the number of components")
    C = np.tile(C, (design.replicates, 1))
    rng = np.random.default_rng(design.seed)
    A = C @ S
    if design.scatter is not None:
        mult_sd, add_sd = design.scatter
        A = A * (1.0 + rng.normal(0.0, mult_sd, (A.shape[0], 1)))
        A = A + rng.normal(0.0, add_sd, (A.shape[0], 1))
    if design.noise_sd > 0:
        A = A + rng.normal(0.0, design.noise_sd, A.shape)
    n_rows = C.shape[0] // design.replicates
    ids = [f"r{r}_m{i}" for r in range(design.replicates) for i in range(n_rows)]
    return SpectraMatrix(A, axis, ids), C.copy()


def gaussian_plume(width: int, height: int, center: Tuple[int, int], sigma: float,
                   amplitude: float = 1.0) -> np.ndarray:
    """Isotropic Gaussian intensity field on a (height, width) grid."""
    y, x = np.mgrid[0:height, 0:width]
    cx, cy = center
    return amplitude * np.exp(-0.5 * ((x - cx) ** 2 + (y - cy) ** 2) / sigma**2)


@dataclass(frozen=True)
class Background:
    """Spatially varying mixture: ``weights[j]`` is a (height, width) map."""

    components: Tuple[ComponentSpec, ...]
    weights: np.ndarray


def synth_hypercube(
    width: int,
    height: int,
    plume: np.ndarray,
    background: Background,
    target: ComponentSpec,
    axis: WavelengthAxis,
    noise_sd: float = 0.0,
    seed: int = 0,
) -> Tuple[HyperCube, np.ndarray]:
    plume = np.asarray(plume, dtype=float)
    if plume.shape != (height, width):
        raise ValueError("plume field must be (height, width)")
    if np.any(plume < 0):
        raise ValueError("plume field must be non-negative")
    bg_spectra = np.array([gaussian_spectrum(c, axis) for c in background.components])
    w = np.asarray(background.weights, dtype=float).reshape(len(background.components), -1)
    A = w.T @ bg_spectra + np.outer(plume.ravel(), gaussian_spectrum(target, axis))
    rng = np.random.default_rng(seed)
    if noise_sd > 0:
        A = A + rng.normal(0.0, noise_sd, A.shape)
    ids = [f"x{i % width}_y{i // width}" for i in range(width * height)]
    cube = HyperCube(width, height, SpectraMatrix(A, axis, ids))
    return cube, plume.copy()


# ---------------------------------------------------------------------------
# scenario datasets


@dataclass
class Dataset:
    spectra: SpectraMatrix
    truth: np.ndarray
    pure: np.ndarray
    names: list
    bands: dict = field(default_factory=dict)
    cube: Optional[HyperCube] = None
    meta: dict = field(default_factory=dict)


TRILIQUID_COMPONENTS = (
    ComponentSpec(((1450, 55, 0.45), (1720, 30, 0.40), (1940, 60, 0.40),
                   (2150, 45, 0.55), (2420, 30, 1.00)), "acetic_acid"),
    ComponentSpec(((1450, 55, 0.35), (1690, 25, 0.50), (1940, 60, 0.30),
                   (2080, 40, 0.45), (2270, 28, 1.00)), "methanol"),
    ComponentSpec(((1190, 35, 0.25), (1450, 55, 0.65), (1940, 50, 1.00),
                   (2200, 60, 0.35)), "water"),
)
TRILIQUID_BANDS = {
    "acetic_acid": (2380.0, 2460.0),
    "methanol": (2240.0, 2300.0),
    "water": (1900.0, 1980.0),
}


def triliquid(seed: int = 0, noise_fraction: float = 0.01, replicates: int = 2) -> Dataset:
    """Three-component simplex on a 25% grid, every composition duplicated.

    ``meta["train"]`` flags the rows without a pure (100%) component; the
    pure rows are held out for quantification only.
    """
    axis = WavelengthAxis(np.arange(1100.0, 2500.0 + 1e-9, 7.0))
    C = simplex_design(5, 3)
    pure = np.array([gaussian_spectrum(c, axis) for c in TRILIQUID_COMPONENTS])
    noise_sd = noise_fraction * float((C @ pure).max())
    design = MixtureDesign(C, replicates=replicates, noise_sd=noise_sd, seed=seed)
    A, truth = synthesize(TRILIQUID_COMPONENTS, design, axis)
    train = truth.max(axis=1) < 1.0
    return Dataset(A, truth, pure, [c.name for c in TRILIQUID_COMPONENTS],
                   dict(TRILIQUID_BANDS), meta={"noise_sd": noise_sd, "train": train})


DILUTION_LEVELS = (0.0005, 0.001, 0.005, 0.01, 0.02)
MILK = ComponentSpec(((1730, 45, 0.55), (1940, 55, 1.00), (2100, 50, 0.80),
                      (2310, 40, 0.70), (1620, 60, 0.50)), "milk_powder")
CONTAMINANT = ComponentSpec(((2030, 18, 1.00), (2150, 16, 0.60), (1650, 16, 0.35)),
                            "contaminant")


def dilution(seed: int = 0, scatter_sd: float = 0.02, noise_sd: float = 2e-4,
             contaminant_height: float = 1.0, replicates: int = 3) -> Dataset:
    """Serial dilution of a trace contaminant into a scattering bulk powder."""
    axis = WavelengthAxis(np.linspace(1596.0, 2396.0, 101))
    c = np.array(DILUTION_LEVELS)
    C = np.column_stack([1.0 - c, c])
    cont = ComponentSpec(tuple((x, w, h * contaminant_height) for x, w, h in CONTAMINANT.peaks),
                         CONTAMINANT.name)
    comps = (MILK, cont)
    design = MixtureDesign(C, replicates=replicates, noise_sd=noise_sd,
                           scatter=(scatter_sd, 0.0), seed=seed)
    A, truth = synthesize(comps, design, axis)
    pure = np.array([gaussian_spectrum(s, axis) for s in comps])
    return Dataset(A, truth, pure, [s.name for s in comps])


PLUME_TARGET = ComponentSpec(((1050, 14, 1.00), (1210, 12, 0.45), (990, 10, 0.30)), "target")
PLUME_BACKGROUND = (
    ComponentSpec(((1250, 90, 1.00), (1000, 80, 0.6)), "bg_warm"),
    ComponentSpec(((1120, 60, 0.80), (940, 40, 0.50)), "bg_ground"),
    ComponentSpec(((1180, 25, 0.40), (1000, 120, 0.70)), "bg_sky"),
)


def plume(seed: int = 0, width: int = 16, height: int = 16, stack=(5, 8),
          plume_sigma: float = 1.5, plume_amplitude: float = 1.0,
          noise_sd: float = 0.002) -> Dataset:
    """16x16x36 cube: Gaussian plume of the target over a smooth varying background."""
    axis = WavelengthAxis(np.linspace(1270.0, 920.0, 36), unit="cm-1")
    rng = np.random.default_rng(seed + 10_000)
    y, x = np.mgrid[0:height, 0:width] / np.array([height - 1, width - 1])[:, None, None]
    weights = []
    for _ in PLUME_BACKGROUND:
        a, b, c, d = rng.uniform(0.2, 1.0, 4)
        weights.append(0.5 + 0.3 * a * x + 0.3 * b * y + 0.2 * c * np.sin(np.pi * (x + d * y)))
    bg = Background(PLUME_BACKGROUND, np.array(weights))
    field_ = gaussian_plume(width, height, stack, plume_sigma, plume_amplitude)
    cube, truth = synth_hypercube(width, height, field_, bg, PLUME_TARGET, axis,
                                  noise_sd=noise_sd, seed=seed)
    pure = gaussian_spectrum(PLUME_TARGET, axis)[None, :]
    return Dataset(cube.spectra, truth, pure, [PLUME_TARGET.name], cube=cube,
                   meta={"stack": tuple(stack), "noise_sd": noise_sd})
