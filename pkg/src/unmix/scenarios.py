"""End-to-end reproductions of the three benchmark regimes on synthetic data.

Each ``run_*`` function chains synth, BTEM, smoothing, calibration and
evaluation, and returns a report of plain Python values (JSON-ready) plus the
arrays a caller may want to write out.  Every random stage is seeded from the
single ``seed`` argument.
"""

from __future__ import annotations

import warnings
from typing import Optional

import numpy as np

from . import btem, calibrate, evaluate, mcr, synth
from .preprocess import SgFilterSpec, max_rescale, savitsky_golay

SCENARIOS = ("triliquid", "dilution", "plume")

# plume spectra have 36 channels and bands about 1.5 channels wide, so the
# derivative uses a short SG window to keep the entropy from chasing noise
PLUME_SG = SgFilterSpec(5, 2, 1)
# a smoothed derivative keeps the 1% noise from biasing the entropy optimum
TRILIQUID_SG = SgFilterSpec(11, 2, 1)


def _smooth(a_hat, axis, spec: Optional[SgFilterSpec]):
    return max_rescale(a_hat if spec is None else savitsky_golay(a_hat, axis, spec))


def _trace(res: btem.BtemResult) -> list:
    return [[int(e), float(f)] for e, f in res.objective_trace]


def run_triliquid(seed: int = 0, schedule: Optional[btem.AnnealSchedule] = None,
                  smoothing: Optional[SgFilterSpec] = SgFilterSpec(), L: int = 3) -> dict:
    """Three-liquid simplex: BTEM per band, then T-PLS, CLS and MCR-ALS.

    Spectra are recovered from the mixture rows only; quantification runs on
    the whole design so the held-out pure rows anchor the 0-100% range.
    """
    ds = synth.triliquid(seed)
    A = ds.spectra
    train = A.select(np.flatnonzero(ds.meta["train"]))
    schedule = schedule or btem.AnnealSchedule()
    truth = 100.0 * ds.truth

    comps, spectra, traces = {}, [], {}
    for j, name in enumerate(ds.names):
        cfg = btem.BtemConfig(k=3, band=ds.bands[name], schedule=schedule, seed=seed + j,
                              derivative="sg", sg=TRILIQUID_SG)
        res = btem.btem_recover(train, cfg)
        a = _smooth(res.a_hat, A.axis, smoothing)
        spectra.append(a)
        traces[name] = _trace(res)
        m = calibrate.tpls_fit(A, a, L).m
        cls = calibrate.cls_quantify(A, a)
        comps[name] = {
            "btem_cosine": evaluate.cosine(res.a_hat, ds.pure[j]),
            "tpls_rmse": evaluate.rmse_percent(m, truth[:, j]),
            "cls_rmse": evaluate.rmse_percent(cls, truth[:, j]),
        }

    mcfg = mcr.McrConfig(3, seed=seed)
    fit = mcr.mcr_als(train, mcfg)
    C_full = mcr.apply_constraints(A.values @ np.linalg.pinv(fit.S), mcfg.constraints, "C")
    for e, t, cos in evaluate.match_components(fit.S, ds.pure):
        name = ds.names[t]
        comps[name]["mcr_cosine"] = cos
        comps[name]["mcr_rmse"] = evaluate.rmse_percent(C_full[:, e], truth[:, t])

    report = {
        "scenario": "triliquid",
        "seed": seed,
        "L": L,
        "components": comps,
        "mcr": {"iterations": fit.iterations, "stop_reason": fit.stop_reason,
                "lack_of_fit": fit.lof_trace[-1] if fit.lof_trace else None},
        "btem_traces": traces,
    }
    arrays = {"spectra": np.array(spectra), "names": list(ds.names), "axis": A.axis}
    return {"report": report, "arrays": arrays}


def run_dilution(seed: int = 0, schedule: Optional[btem.AnnealSchedule] = None,
                 smoothing: Optional[SgFilterSpec] = SgFilterSpec(), L: int = 2) -> dict:
    """Trace contaminant in a scattering bulk: BTEM k=2, T-PLS, MCR-ALS 1 and 2."""
    ds = synth.dilution(seed)
    A = ds.spectra
    cfg = btem.BtemConfig(k=2, schedule=schedule or btem.AnnealSchedule(), seed=seed)
    res = btem.btem_recover(A, cfg)
    a = _smooth(res.a_hat, A.axis, smoothing)
    m = calibrate.tpls_fit(A, a, L).m
    actual = ds.truth[:, 1]

    mcr_cos = {}
    for n in (1, 2):
        fit = mcr.mcr_als(A, mcr.McrConfig(n, seed=seed))
        mcr_cos[str(n)] = [evaluate.cosine(s, ds.pure[1]) for s in fit.S]

    report = {
        "scenario": "dilution",
        "seed": seed,
        "L": L,
        "btem_cosine": evaluate.cosine(res.a_hat, ds.pure[1]),
        "r_squared": evaluate.r_squared(actual, m),
        "mcr_contaminant_cosines": mcr_cos,
        "btem_trace": _trace(res),
    }
    arrays = {"spectra": a[None, :], "names": [ds.names[1]], "axis": A.axis,
              "m": m, "actual": actual}
    return {"report": report, "arrays": arrays}


def nearest_pixels(cube, xy, n: int) -> np.ndarray:
    """Indices of the ``n`` pixels closest to ``xy`` (ties in row-major order)."""
    idx = np.arange(cube.width * cube.height)
    x, y = idx % cube.width, idx // cube.width
    dist = np.hypot(x - xy[0], y - xy[1])
    return np.argsort(dist, kind="stable")[:n]


def pixel_distance(cube, xy) -> np.ndarray:
    idx = np.arange(cube.width * cube.height)
    return np.hypot(idx % cube.width - xy[0], idx // cube.width - xy[1])


def run_plume(seed: int = 0, schedule: Optional[btem.AnnealSchedule] = None,
              n_pixels: int = 7, L: int = 3, jackknife: bool = True,
              near_radius: float = 3.0, ring: tuple = (6.0, np.inf)) -> dict:
    """Plume cube: BTEM on pixels near the stack, T-PLS map, jackknife maps.

    The jackknife leaves out one selected pixel at a time, repeats BTEM and
    T-PLS, and pools the range-scaled maps.
    """
    ds = synth.plume(seed)
    cube = ds.cube
    A = cube.spectra
    stack = ds.meta["stack"]
    near = nearest_pixels(cube, stack, n_pixels)
    cfg = btem.BtemConfig(k=3, schedule=schedule or btem.AnnealSchedule(), seed=seed,
                          derivative="sg", sg=PLUME_SG)

    def calibrate_map(rows):
        res = btem.btem_recover(A.select(near[rows]), cfg)
        return res, calibrate.tpls_fit(A, res.a_hat, L).m

    res, m = calibrate_map(np.arange(n_pixels))
    stack_index = cube.pixel_index(*stack)
    report = {
        "scenario": "plume",
        "seed": seed,
        "L": L,
        "pixels": [int(i) for i in near],
        "btem_cosine": evaluate.cosine(res.a_hat, ds.pure[0]),
        "stack_index": stack_index,
        "map_argmax": int(np.argmax(m)),
        "btem_trace": _trace(res),
    }
    arrays = {"spectra": res.a_hat[None, :], "names": list(ds.names), "axis": A.axis,
              "map": cube.to_image(m)}
    if jackknife:
        mean, sd, maps = evaluate.jackknife_maps(lambda keep: calibrate_map(keep)[1], n_pixels)
        dist = pixel_distance(cube, stack)
        in_ring = (dist >= ring[0]) & (dist <= ring[1])
        report["jackknife"] = {
            "trial_argmax": [int(np.argmax(mp)) for mp in maps],
            "mean_argmax": int(np.argmax(mean)),
            "sd_near": float(sd[dist <= near_radius].mean()),
            "sd_ring": float(sd[in_ring].mean()),
        }
        arrays["jackknife_mean"] = cube.to_image(mean)
        arrays["jackknife_sd"] = cube.to_image(sd)
    return {"report": report, "arrays": arrays}


def run(name: str, seed: int = 0, **kwargs) -> dict:
    runners = {"triliquid": run_triliquid, "dilution": run_dilution, "plume": run_plume}
    if name not in runners:
        raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", calibrate.CalibrationWarning)
        return runners[name](seed, **kwargs)
