import json
import subprocess
import sys

import numpy as np
import pytest

from unmix import io, synth
from unmix.cli import read_config, render_heatmap, resolve_seed, run


@pytest.fixture
def tri(tmp_path):
    assert run(["synth", "triliquid", "--seed", "1", "--out", str(tmp_path / "tri")]) == 0
    return tmp_path / "tri"


def _err(capsys):
    line = capsys.readouterr().err.strip().splitlines()[-1]
    return json.loads(line)


# --- exit codes -------------------------------------------------------------


def test_usage_errors_exit_1(capsys):
    assert run(["frobnicate"]) == 1
    assert _err(capsys)["error"] == "usage"
    assert run(["scree", "--input", "x.csv", "--bogus"]) == 1
    err = _err(capsys)
    assert err["exit"] == 1 and "--bogus" in err["message"]
    assert run(["mcr", "--input", "x.csv", "--components", "2"]) == 1


def test_data_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("w,1,2,3\ns1,1,2\n")
    assert run(["scree", "--input", str(bad)]) == 2
    err = _err(capsys)
    assert err["error"] == "data" and err["exit"] == 2 and "ragged" in err["message"]
    assert run(["scree", "--input", str(tmp_path / "missing.csv")]) == 2


def test_numerical_failure_exits_3(tmp_path, capsys):
    ax = np.arange(1.0, 7.0)
    A = np.array([[1, 2, 3, 2, 1, 0], [2, 4, 6, 4, 2, 0], [0, 1, 2, 3, 2, 1.0]])
    from unmix.core import SpectraMatrix, WavelengthAxis
    io.write_spectra(tmp_path / "a.csv", SpectraMatrix(A, WavelengthAxis(ax)))
    s0 = SpectraMatrix(np.vstack([A[0], -np.ones(6)]), WavelengthAxis(ax))
    io.write_spectra(tmp_path / "s0.csv", s0)
    code = run(["mcr", "--input", str(tmp_path / "a.csv"), "--components", "2",
                "--init", "provided", "--s0", str(tmp_path / "s0.csv"),
                "--out", str(tmp_path / "mcr")])
    assert code == 3 and _err(capsys)["error"] == "numerical"


# --- config and seed -----------------------------------------------------------


def test_config_file_and_flag_precedence(tri, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# flat config\nk = 3\nband = 2380:2460\nt-final = 0.01\nseed = 5\n"
                   "steps = 20\nrestarts = 1\n")
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    inp = str(tri / "spectra.csv")
    assert run(["btem", "--config", str(cfg), "--input", inp, "--out", str(out1)]) == 0
    assert run(["btem", "--config", str(cfg), "--input", inp, "--seed", "6",
                "--out", str(out2)]) == 0
    h1 = json.loads(out1.read_text().splitlines()[0][len(io.PROVENANCE_PREFIX):])
    h2 = json.loads(out2.read_text().splitlines()[0][len(io.PROVENANCE_PREFIX):])
    assert h1["seed"] == 5 and h2["seed"] == 6
    assert h1["options"]["k"] == 3 and h1["options"]["band"] == [2380.0, 2460.0]
    assert "out" not in h1["options"]


def test_config_rejects_unknown_key(tri, tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert run(["scree", "--config", str(cfg), "--input", str(tri / "spectra.csv")]) == 1
    assert "colour" in _err(capsys)["message"]
    assert read_config(tmp_path / "bad.cfg") == {"colour": "blue"}


def test_seed_fallback(monkeypatch):
    monkeypatch.delenv("UNMIX_SEED", raising=False)
    assert resolve_seed(None) == 0
    monkeypatch.setenv("UNMIX_SEED", "17")
    assert resolve_seed(None) == 17 and resolve_seed(3) == 3


# --- heat maps ----------------------------------------------------------------


def _pgm(path):
    tok = path.read_text().split()
    assert tok[0] == "P2" and tok[3] == "255"
    w, h = int(tok[1]), int(tok[2])
    return np.array(tok[4:], dtype=int).reshape(h, w)


def test_heatmap_constant_and_diagonal(tmp_path):
    render_heatmap(np.full((3, 4), 2.5), tmp_path / "c.pgm")
    assert np.all(_pgm(tmp_path / "c.pgm") == 0)
    pgm, csv = render_heatmap(np.eye(5) + 0.1, tmp_path / "d.pgm")
    img = _pgm(pgm)
    assert np.all(np.diag(img) == 255) and img.max() == 255 and img[0, 1] == 0
    _, raw = io.read_table(csv)
    np.testing.assert_allclose(raw, np.eye(5) + 0.1)


def test_heatmap_plume_brightest_at_stack(tmp_path):
    ds = synth.plume(seed=0)
    img = _pgm(render_heatmap(ds.truth, tmp_path / "p.pgm")[0])
    x, y = ds.meta["stack"]
    assert np.unravel_index(np.argmax(img), img.shape) == (y, x)


# --- commands -------------------------------------------------------------------


def test_scree_to_stdout(tri, capsys):
    assert run(["scree", "--input", str(tri / "spectra.csv")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "index,singular_value"
    vals = [float(r.split(",")[1]) for r in lines[1:]]
    assert len(vals) == 30 and vals == sorted(vals, reverse=True)


def test_tpls_cls_and_eval_chain(tri, tmp_path, capsys):
    inp, pure = str(tri / "spectra.csv"), str(tri / "pure.csv")
    pred = tmp_path / "pred.csv"
    assert run(["tpls", "--input", inp, "--target", pure, "--target-row", "1",
                "--projections", "3", "--scale", "0:100", "--out", str(pred),
                "--ssq-out", str(tmp_path / "ssq.csv")]) == 0
    assert run(["eval", "rmse", "--pred", str(pred), "--pred-column", "scaled",
                "--truth", str(tri / "truth.csv"), "--truth-column", "methanol",
                "--hi", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["rmse_percent"] < 0.1
    assert run(["cls", "--input", inp, "--target", pure, "--out", str(tmp_path / "c.csv")]) == 0


def test_svd_btem_mcr_simplisma_outputs(tri, tmp_path):
    inp = str(tri / "spectra.csv")
    assert run(["svd", "--input", inp, "--k", "3", "--out", str(tmp_path / "svd")]) == 0
    assert {p.name for p in (tmp_path / "svd").iterdir()} == {
        "singular_values.csv", "loadings.csv", "scores.csv"}
    assert run(["btem", "--input", inp, "--k", "3", "--band", "2380:2460", "--steps", "20",
                "--restarts", "1", "--out", str(tmp_path / "a.csv"),
                "--trace", str(tmp_path / "t.csv")]) == 0
    side = json.loads((tmp_path / "a.json").read_text())
    assert len(side["t"]) == 3 and "objective" in side
    assert run(["mcr", "--input", inp, "--components", "3", "--constraints", "nonneg,closure",
                "--out-c", str(tmp_path / "C.csv"), "--out-s", str(tmp_path / "S.csv")]) == 0
    C = np.array([io.read_column(tmp_path / "C.csv", f"c{i}") for i in (1, 2, 3)]).T
    np.testing.assert_allclose(C.sum(axis=1), 1.0)
    assert io.read_spectra(tmp_path / "S.csv").values.shape[0] == 3
    assert run(["simplisma", "--input", inp, "--n", "3", "--out", str(tmp_path / "s0.csv")]) == 0


def test_synth_cube_and_jackknife_eval(tmp_path, capsys):
    assert run(["synth", "cube", "--out", str(tmp_path / "cube")]) == 0
    names = {p.name for p in (tmp_path / "cube").iterdir()}
    assert {"cube.csv", "cube.json", "truth.pgm", "truth.csv", "pure.csv"} <= names
    maps = np.array([[0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 2.5, 3.0], [0.1, 1.0, 2.0, 3.0]])
    from unmix.core import SpectraMatrix, WavelengthAxis
    io.write_spectra(tmp_path / "maps.csv", SpectraMatrix(maps, WavelengthAxis(np.arange(4.0))))
    assert run(["eval", "jackknife", "--maps", str(tmp_path / "maps.csv"), "--width", "2",
                "--out-dir", str(tmp_path / "jk")]) == 0
    assert json.loads(capsys.readouterr().out)["mean_argmax"] == 3
    assert (tmp_path / "jk" / "jackknife_sd.pgm").exists()


def test_pipeline_dilution_report(tmp_path, capsys):
    assert run(["pipeline", "dilution", "--seed", "3", "--out", str(tmp_path / "d")]) == 0
    summary = json.loads(capsys.readouterr().out)
    report = json.loads((tmp_path / "d" / "report.json").read_text())
    assert summary["r_squared"] == report["r_squared"] > 0.90
    assert report["provenance"]["seed"] == 3


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "unmix.cli", "nope"], capture_output=True,
                          text=True)
    assert proc.returncode == 1
    assert json.loads(proc.stderr.strip())["exit"] == 1
