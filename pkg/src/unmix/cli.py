"""Command-line front end: ``unmix <command> [options]``.

Every command accepts ``--config FILE`` holding flat ``key = value`` lines
named after its flags (dashes or underscores); flags given on the command
line win.  ``--seed`` falls back to the ``UNMIX_SEED`` environment variable
and then to 0.  Exit codes: 0 success, 1 usage, 2 data error, 3 numerical
failure; failures print one JSON line ``{"error": ..., "exit": ..., "message": ...}``
to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import btem, calibrate, core, evaluate, io, mcr, scenarios, synth
from .core import SpectraMatrix, SpectralDataError, WavelengthAxis
from .preprocess import SgFilterSpec

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# config and seed handling


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _apply_config(parser: argparse.ArgumentParser, values: dict):
    actions = {a.dest: a for a in parser._actions}
    defaults = {}
    for key, raw in values.items():
        if key in ("config", "help") or key not in actions:
            raise UsageError(f"unknown config key {key!r}")
        act = actions[key]
        act.required = False  # satisfied by the file
        if isinstance(act, argparse._StoreTrueAction):
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
        else:
            conv = act.type or str
            try:
                defaults[key] = conv(raw)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from None
            if act.choices is not None and defaults[key] not in act.choices:
                raise UsageError(f"config key {key!r}: {raw!r} not in {list(act.choices)}")
    parser.set_defaults(**defaults)


def resolve_seed(seed: Optional[int]) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("UNMIX_SEED")
    if env is None or not env.strip():
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"UNMIX_SEED must be an integer, got {env!r}") from None


def _band(text: str):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"band must be LO:HI, got {text!r}") from None
    return (min(lo, hi), max(lo, hi))


# file arguments: inputs are recorded by digest, outputs not at all
_PATH_FLAGS = {"input", "target", "pred", "truth", "a", "b", "maps", "s0",
               "out", "out_dir", "out_c", "out_s", "trace", "ssq_out", "config"}


def _header(args, command: str, inputs=()) -> dict:
    opts = {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(args).items()
            if k not in _PATH_FLAGS and k not in ("func", "command", "eval_cmd", "seed")}
    seed = getattr(args, "seed", None)
    return io.provenance(command, seed=seed, inputs=[p for p in inputs if p], **opts)


def _out_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _emit_table(args, columns, rows, header):
    if getattr(args, "out", None):
        io.write_table(args.out, columns, rows, header)
    else:
        sys.stdout.write(",".join(columns) + "\n")
        for r in rows:
            sys.stdout.write(",".join(repr(float(v)) if isinstance(v, (float, np.floating))
                                      else str(v) for v in r) + "\n")


# ---------------------------------------------------------------------------
# heat maps


def render_heatmap(values, path) -> tuple[Path, Path]:
    """Write ``path`` as an ASCII PGM (P2, maxval 255) and a CSV beside it.

    Grey levels are a linear map of [min, max] onto [0, 255]; a constant map
    renders all 0.  Rows of ``values`` are image rows.
    """
    M = np.atleast_2d(np.asarray(values, dtype=float))
    if M.ndim != 2 or not np.all(np.isfinite(M)):
        raise SpectralDataError("heat map must be a finite 2-D matrix")
    lo, hi = M.min(), M.max()
    grey = np.zeros(M.shape, dtype=int) if hi == lo else \
        np.rint((M - lo) * (255.0 / (hi - lo))).astype(int)
    h, w = M.shape
    lines = ["P2", f"{w} {h}", "255"] + [" ".join(str(v) for v in row) for row in grey]
    pgm = Path(path)
    pgm.write_text("\n".join(lines) + "\n")
    csv_path = pgm.with_suffix(".csv")
    io.write_table(csv_path, [f"x{i}" for i in range(w)], M.tolist())
    return pgm, csv_path


# ---------------------------------------------------------------------------
# commands


def cmd_svd(args):
    A = io.read_spectra(args.input)
    f = core.svd(A)
    if args.k is not None:
        f = core.truncate(f, args.k)
    hdr = _header(args, "svd", [args.input])
    out = _out_dir(args.out)
    io.write_table(out / "singular_values.csv", ["index", "singular_value"],
                   [(i + 1, float(s)) for i, s in enumerate(f.S)], hdr)
    loadings = SpectraMatrix(f.V.T, A.axis, [f"v{i + 1}" for i in range(f.rank)])
    io.write_spectra(out / "loadings.csv", loadings, hdr, label="loading")
    io.write_table(out / "scores.csv", ["sample"] + [f"u{i + 1}" for i in range(f.rank)],
                   [[sid] + [float(v) for v in row] for sid, row in zip(A.sample_ids, f.U)], hdr)


def cmd_scree(args):
    A = io.read_spectra(args.input)
    pts = core.scree(core.svd(A))
    _emit_table(args, ["index", "singular_value"], pts, _header(args, "scree", [args.input]))


def _schedule(args) -> btem.AnnealSchedule:
    return btem.AnnealSchedule(args.t_initial, args.t_final, args.cooling, args.steps,
                               args.step_scale, args.restarts)


def cmd_btem(args):
    A = io.read_spectra(args.input)
    cfg = btem.BtemConfig(
        k=args.k, band=args.band, deriv_order=args.deriv_order, norm_mode=args.norm_mode,
        nonneg_weight=args.gamma, schedule=_schedule(args), seed=args.seed,
        derivative=args.derivative,
        sg=SgFilterSpec(args.sg_window, max(args.sg_poly, args.deriv_order), args.deriv_order),
    )
    res = btem.btem_recover(A, cfg)
    hdr = _header(args, "btem", [args.input])
    io.write_spectra(args.out, SpectraMatrix(res.a_hat[None, :], A.axis, ["a_hat"]), hdr)
    io.write_json(io.sidecar_path(args.out), {
        "t": [float(v) for v in res.t],
        "objective": float(res.objective),
        "accepted_ratio": float(res.accepted_ratio),
    }, hdr)
    if args.trace:
        io.write_table(args.trace, ["evaluations", "best_objective"],
                       [(int(e), float(f)) for e, f in res.objective_trace], hdr)


def _target(args, A: SpectraMatrix) -> np.ndarray:
    T = io.read_spectra(args.target)
    if T.n_wavelengths != A.n_wavelengths or not np.allclose(T.axis.values, A.axis.values):
        raise SpectralDataError("target axis does not match the data axis")
    return T.values[args.target_row]


def cmd_tpls(args):
    A = io.read_spectra(args.input)
    y = _target(args, A)
    L = args.L
    if L is None:
        full = calibrate.tpls_fit(A, y, min(A.values.shape), center=args.center)
        L = calibrate.select_projections(full, args.ssq_threshold, args.ssq_trace)
    model = calibrate.tpls_fit(A, y, L, center=args.center)
    lo, hi = args.scale
    scaled = calibrate.tpls_predict(model, lo, hi) if np.ptp(model.m) > 0 \
        else np.full_like(model.m, lo)
    hdr = _header(args, "tpls", [args.input, args.target])
    _emit_table(args, ["sample", "m", "scaled"],
                [(sid, float(a), float(b)) for sid, a, b in zip(A.sample_ids, model.m, scaled)],
                hdr)
    if args.ssq_out:
        io.write_table(args.ssq_out, ["projection", "ssq_x", "ssq_y"],
                       [(i + 1, float(x), float(y_)) for i, (x, y_) in
                        enumerate(zip(model.ssq_x, model.ssq_y))], hdr)


def cmd_cls(args):
    A = io.read_spectra(args.input)
    c = calibrate.cls_quantify(A, _target(args, A))
    _emit_table(args, ["sample", "c"], [(sid, float(v)) for sid, v in zip(A.sample_ids, c)],
                _header(args, "cls", [args.input, args.target]))


def cmd_mcr(args):
    if not (args.out or args.out_c or args.out_s):
        raise UsageError("mcr needs --out, --out-c or --out-s")
    A = io.read_spectra(args.input)
    S0 = io.read_spectra(args.s0).values if args.s0 else None
    cons = frozenset(c for c in args.constraints.split(",") if c)
    cfg = mcr.McrConfig(args.n, constraints=cons, max_iterations=args.max_iterations,
                        tol=args.tol, init=args.init, S0=S0, seed=args.seed,
                        alpha_fraction=args.alpha, simplisma_orient=args.orient)
    res = mcr.mcr_als(A, cfg)
    hdr = _header(args, "mcr", [args.input, args.s0])
    out = _out_dir(args.out) if args.out else None
    names = [f"c{i + 1}" for i in range(args.n)]
    c_path = args.out_c or (out / "C.csv" if out else None)
    s_path = args.out_s or (out / "S.csv" if out else None)
    if c_path:
        io.write_table(c_path, ["sample"] + names,
                       [[sid] + [float(v) for v in row] for sid, row in zip(A.sample_ids, res.C)],
                       hdr)
    if s_path:
        io.write_spectra(s_path, SpectraMatrix(res.S, A.axis, names), hdr, label="component")
    if out:
        io.write_table(out / "lof.csv", ["iteration", "lack_of_fit"],
                       [(i + 1, float(v)) for i, v in enumerate(res.lof_trace)], hdr)
        io.write_json(out / "summary.json", {
            "converged": res.converged, "iterations": res.iterations,
            "stop_reason": res.stop_reason, "rank_collapse": res.rank_collapse,
        }, hdr)
    if res.rank_collapse:
        raise FloatingPointError("MCR-ALS lost a component (rank collapse)")


def cmd_simplisma(args):
    A = io.read_spectra(args.input)
    S = mcr.simplisma(A, args.n, args.alpha, args.orient)
    io.write_spectra(args.out, SpectraMatrix(S, A.axis, [f"s{i + 1}" for i in range(args.n)]),
                     _header(args, "simplisma", [args.input]), label="component")


def _write_dataset(out: Path, ds: synth.Dataset, hdr):
    if ds.cube is not None:
        io.write_cube(out / "cube.csv", ds.cube, hdr)
        render_heatmap(ds.truth, out / "truth.pgm")
    else:
        io.write_spectra(out / "spectra.csv", ds.spectra, hdr)
        io.write_table(out / "truth.csv", ["sample"] + ds.names,
                       [[sid] + [float(v) for v in row]
                        for sid, row in zip(ds.spectra.sample_ids, ds.truth)], hdr)
    io.write_spectra(out / "pure.csv", SpectraMatrix(ds.pure, ds.spectra.axis, ds.names), hdr,
                     label="component")


def cmd_synth(args):
    makers = {"triliquid": synth.triliquid, "dilution": synth.dilution, "cube": synth.plume}
    ds = makers[args.kind](args.seed)
    hdr = _header(args, f"synth {args.kind}")
    _write_dataset(_out_dir(args.out), ds, hdr)


def cmd_eval(args):
    kind = args.eval_cmd
    if kind == "rmse":
        pred = io.read_column(args.pred, args.pred_column)
        truth = io.read_column(args.truth, args.truth_column)
        payload = {"rmse_percent": evaluate.rmse_percent(pred, truth, args.lo, args.hi)}
        inputs = [args.pred, args.truth]
    elif kind == "procrustes":
        a, b = io.read_vector(args.a), io.read_vector(args.b)
        payload = {"procrustes": evaluate.procrustes_distance(a, b, args.scaling)}
        inputs = [args.a, args.b]
    elif kind == "nncv":
        _, X = io.read_table(args.input)
        payload = {"nn_distance_cv": evaluate.nn_distance_cv(X)}
        inputs = [args.input]
    else:
        maps = io.read_spectra(args.maps).values
        mean, sd, _ = evaluate.pool_maps(list(maps), scale=not args.raw)
        payload = {"mean_argmax": int(np.argmax(mean)), "n_trials": int(maps.shape[0])}
        inputs = [args.maps]
        if args.width:
            if maps.shape[1] % args.width:
                raise SpectralDataError("map length is not a multiple of --width")
            mean, sd = mean.reshape(-1, args.width), sd.reshape(-1, args.width)
        if args.out_dir:
            out = _out_dir(args.out_dir)
            render_heatmap(np.atleast_2d(mean), out / "jackknife_mean.pgm")
            render_heatmap(np.atleast_2d(sd), out / "jackknife_sd.pgm")
    hdr = _header(args, f"eval {kind}", inputs)
    if args.out:
        io.write_json(args.out, payload, hdr)
    else:
        sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")


def cmd_pipeline(args):
    kwargs = {}
    if args.scenario == "plume":
        kwargs["jackknife"] = not args.no_jackknife
    result = scenarios.run(args.scenario, args.seed, **kwargs)
    report, arrays = result["report"], result["arrays"]
    hdr = _header(args, f"pipeline {args.scenario}")
    out = _out_dir(args.out)
    axis: WavelengthAxis = arrays["axis"]
    io.write_spectra(out / "spectra.csv", SpectraMatrix(arrays["spectra"], axis, arrays["names"]),
                     hdr, label="component")
    traces = report.pop("btem_traces", None) or {"target": report.pop("btem_trace")}
    for name, trace in traces.items():
        io.write_table(out / f"trace_{name}.csv", ["evaluations", "best_objective"], trace, hdr)
    for key in ("map", "jackknife_mean", "jackknife_sd"):
        if key in arrays:
            render_heatmap(arrays[key], out / f"{key}.pgm")
    io.write_json(out / "report.json", report, hdr)
    sys.stdout.write(json.dumps(_summary(report), sort_keys=True) + "\n")


def _summary(report: dict) -> dict:
    keep = {}
    for k, v in report.items():
        if isinstance(v, (int, float, str)):
            keep[k] = v
        elif k == "components":
            keep[k] = {n: {m: round(x, 6) for m, x in c.items()} for n, c in v.items()}
    return keep


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, seed=False):
    p.add_argument("--config", help="flat key = value file; flags override it")
    if seed:
        p.add_argument("--seed", type=int, default=None,
                       help="random seed (default: $UNMIX_SEED, else 0)")


def _anneal_flags(p):
    d = btem.AnnealSchedule()
    p.add_argument("--t-initial", type=float, default=d.t_initial)
    p.add_argument("--t-final", type=float, default=d.t_final)
    p.add_argument("--cooling", type=float, default=d.cooling)
    p.add_argument("--steps", type=int, default=d.steps_per_temperature,
                   help="proposals per temperature level")
    p.add_argument("--step-scale", type=float, default=d.step_scale)
    p.add_argument("--restarts", type=int, default=d.restarts)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="unmix", description="Pure-component recovery and calibration.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("svd", help="thin SVD: singular values, loadings, scores")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_svd)

    p = sub.add_parser("scree", help="singular value against index")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scree)

    p = sub.add_parser("btem", help="band-target entropy minimization")
    _common(p, seed=True)
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--band", type=_band, help="LO:HI on the data axis")
    p.add_argument("--deriv-order", "--sg-deriv", dest="deriv_order", type=int, default=1,
                   choices=(1, 2))
    p.add_argument("--norm-mode", default="max", choices=("max", "sum"))
    p.add_argument("--gamma", type=float, default=btem.BtemConfig(k=1).nonneg_weight,
                   help="non-negativity penalty weight")
    p.add_argument("--derivative", default="finite", choices=("finite", "sg"))
    p.add_argument("--sg-window", type=int, default=11)
    p.add_argument("--sg-poly", "--sg-order", dest="sg_poly", type=int, default=2)
    _anneal_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="CSV for the best-so-far objective trace")
    p.set_defaults(func=cmd_btem)

    for name, func, help_ in (("tpls", cmd_tpls, "target partial least squares"),
                              ("cls", cmd_cls, "classical least squares, one target")):
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.add_argument("--input", required=True)
        p.add_argument("--target", required=True, help="spectra CSV holding the target")
        p.add_argument("--target-row", type=int, default=0)
        p.add_argument("--out")
        if name == "tpls":
            p.add_argument("--L", "--projections", dest="L", type=int,
                           help="latent projections (default: by --ssq-threshold)")
            p.add_argument("--scale", type=_band, default=(0.0, 100.0),
                           help="LO:HI range for the scaled abundances")
            p.add_argument("--ssq-threshold", type=float, default=95.0)
            p.add_argument("--ssq-trace", default="x", choices=("x", "y"))
            p.add_argument("--center", action="store_true")
            p.add_argument("--ssq-out")
        p.set_defaults(func=func)

    p = sub.add_parser("mcr", help="MCR-ALS")
    _common(p, seed=True)
    p.add_argument("--input", required=True)
    p.add_argument("--n", "--components", dest="n", type=int, required=True)
    p.add_argument("--constraints", default="nonneg_C,nonneg_S,closure_C",
                   help="comma list of nonneg_C, nonneg_S, closure_C (or nonneg, closure)")
    p.add_argument("--init", default="simplisma", choices=("simplisma", "provided", "random"))
    p.add_argument("--s0", help="spectra CSV of initial estimates (init=provided)")
    p.add_argument("--max-iterations", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--orient", default="samples", choices=("samples", "variables"))
    p.add_argument("--out", help="output directory for C, S, lof trace and summary")
    p.add_argument("--out-c", help="concentration CSV")
    p.add_argument("--out-s", help="spectra CSV")
    p.set_defaults(func=cmd_mcr)

    p = sub.add_parser("simplisma", help="purest-variable initial spectra")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--orient", default="samples", choices=("samples", "variables"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simplisma)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    _common(p, seed=True)
    p.add_argument("kind", choices=("triliquid", "dilution", "cube"))
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="comparison metrics")
    esub = p.add_subparsers(dest="eval_cmd", parser_class=_Parser, required=True)
    e = esub.add_parser("rmse")
    _common(e)
    e.add_argument("--pred", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--pred-column")
    e.add_argument("--truth-column")
    e.add_argument("--lo", type=float, default=0.0)
    e.add_argument("--hi", type=float, default=100.0)
    e.add_argument("--out")
    e = esub.add_parser("procrustes")
    _common(e)
    e.add_argument("--a", required=True)
    e.add_argument("--b", required=True)
    e.add_argument("--scaling", default="unit", choices=("unit", "max"))
    e.add_argument("--out")
    e = esub.add_parser("nncv")
    _common(e)
    e.add_argument("--input", required=True, help="numeric table of scores")
    e.add_argument("--out")
    e = esub.add_parser("jackknife")
    _common(e)
    e.add_argument("--maps", required=True, help="spectra-format CSV, one trial map per row")
    e.add_argument("--width", type=int, help="image width for the heat maps")
    e.add_argument("--raw", action="store_true", help="pool without range scaling")
    e.add_argument("--out-dir")
    e.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="run an acceptance scenario end to end")
    _common(p, seed=True)
    p.add_argument("scenario", choices=scenarios.SCENARIOS)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-jackknife", action="store_true", help="plume: skip the resampling")
    p.set_defaults(func=cmd_pipeline)
    return parser


def _find_subparser(parser, argv):
    """The innermost subparser named by ``argv`` (for config defaults)."""
    node = parser
    for tok in argv:
        subs = [a for a in node._actions if isinstance(a, argparse._SubParsersAction)]
        if not subs or tok not in subs[0].choices:
            if tok.startswith("-"):
                continue
            break
        node = subs[0].choices[tok]
    return node


def _error(kind: str, code: int, message: str) -> int:
    msg = " ".join(str(message).split())
    sys.stderr.write(json.dumps({"error": kind, "exit": code, "message": msg}) + "\n")
    return code


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config")
        known, _ = pre.parse_known_args(argv)
        if known.config:
            _apply_config(_find_subparser(parser, argv), read_config(known.config))
        args = parser.parse_args(argv)
        if hasattr(args, "seed"):
            args.seed = resolve_seed(args.seed)
    except UsageError as exc:
        return _error("usage", EXIT_USAGE, exc)
    except OSError as exc:
        return _error("usage", EXIT_USAGE, exc)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", calibrate.CalibrationWarning)
            args.func(args)
    except UsageError as exc:
        return _error("usage", EXIT_USAGE, exc)
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        return _error("numerical", EXIT_NUMERICAL, exc)
    except (SpectralDataError, ValueError, OSError, KeyError) as exc:
        return _error("data", EXIT_DATA, exc)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
