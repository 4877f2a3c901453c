import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from unmix import synth
from unmix.calibrate import (
    CalibrationWarning,
    cls_quantify,
    select_projections,
    ssq_threshold_lookup,
    tpls_fit,
    tpls_predict,
)
from unmix.core import SpectraMatrix, WavelengthAxis
from unmix.evaluate import rmse_percent
from unmix.preprocess import range_scale


def _axis(p):
    return WavelengthAxis(np.arange(p, dtype=float))


# --- CLS -------------------------------------------------------------------


def test_cls_exact_single_component():
    a = np.array([0.0, 1.0, 3.0, 1.0, 0.5])
    c = np.array([0.2, 1.0, 2.5])
    np.testing.assert_allclose(cls_quantify(np.outer(c, a), a), c, rtol=1e-13)


def test_cls_orthogonal_interferent_is_invisible():
    a = np.array([1.0, 1.0, 0.0, 0.0])
    s = np.array([1.0, -1.0, 2.0, 0.0])  # orthogonal to a
    c, ci = np.array([1.0, 2.0, 3.0]), np.array([5.0, -1.0, 0.3])
    np.testing.assert_allclose(cls_quantify(np.outer(c, a) + np.outer(ci, s), a), c, rtol=1e-13)


def test_cls_bias_from_overlapping_interferent():
    a = np.array([1.0, 2.0, 1.0, 0.0])
    s = np.array([0.0, 1.0, 2.0, 1.0])
    c, ci = np.array([1.0, 0.5, 0.0]), np.array([0.0, 1.0, 2.0])
    expected = c + (s @ a) / (a @ a) * ci
    np.testing.assert_allclose(cls_quantify(np.outer(c, a) + np.outer(ci, s), a), expected)


def test_cls_rejects_bad_target():
    with pytest.raises(ValueError):
        cls_quantify(np.ones((2, 3)), np.zeros(3))
    with pytest.raises(ValueError):
        cls_quantify(np.ones((2, 3)), np.ones(4))


# --- T-PLS oracles ---------------------------------------------------------


def test_tpls_rank_one():
    s = np.array([0.1, 0.7, 1.0, 0.4, 0.2, 0.05])
    c = np.array([0.3, 0.9, 0.5, 1.4])
    model = tpls_fit(np.outer(c, s), s, 1)
    assert np.corrcoef(model.m, c)[0, 1] == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(model.m, c / (c @ c), rtol=1e-10)
    assert model.ssq_y[-1] == pytest.approx(100.0)
    assert select_projections(model, 99.9) == 1


@pytest.mark.parametrize("seed", range(5))
def test_tpls_full_rank_matches_pinv(seed):
    rng = np.random.default_rng(seed)
    n, p = rng.integers(2, 11), rng.integers(12, 51)
    X, y = rng.normal(size=(n, p)), rng.normal(size=p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CalibrationWarning)
        model = tpls_fit(X, y, n)
    oracle = np.linalg.pinv(X.T) @ y
    assert np.linalg.norm(model.m - oracle) <= 1e-6 * np.linalg.norm(oracle)


def test_tpls_orthogonal_design_oracle():
    rng = np.random.default_rng(7)
    Q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
    C = Q[:, :3] * np.array([2.0, 1.0, 0.5])  # C^T C diagonal
    S, _ = np.linalg.qr(rng.normal(size=(40, 3)))
    S = S.T  # orthonormal rows
    # y is explained after one projection, so the fit stops early
    with pytest.warns(CalibrationWarning):
        model = tpls_fit(C @ S, S[0], 3)
    oracle = C @ np.linalg.solve(C.T @ C, np.eye(3)[0])
    assert np.linalg.norm(model.m - oracle) <= 1e-8 * np.linalg.norm(oracle)


def test_tpls_single_component_agrees_with_cls():
    s = np.array([0.2, 1.0, 0.6, 0.1, 0.0, 0.3])
    c = np.array([1.0, 2.0, 0.5])
    X = np.outer(c, s)
    # equal up to a positive scale, so equal once range-scaled
    np.testing.assert_allclose(tpls_predict(tpls_fit(X, s, 1)),
                               range_scale(cls_quantify(X, s), 0, 100), atol=1e-8)


# --- T-PLS invariants -------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**16), st.integers(3, 8), st.integers(10, 30))
def test_tpls_invariants(seed, n, p):
    rng = np.random.default_rng(seed)
    X, y = rng.normal(size=(n, p)), rng.normal(size=p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CalibrationWarning)
        model = tpls_fit(X, y, n)
    G = model.T.T @ model.T
    off = G - np.diag(np.diag(G))
    assert np.max(np.abs(off)) <= 1e-8 * np.max(np.diag(G))
    assert np.all(np.diff(model.x_residual) <= 1e-10 * model.x_residual[0])
    assert np.all(np.diff(model.y_residual) <= 1e-10 * max(model.y_residual[0], 1))
    assert np.all(np.diff(model.ssq_x) >= -1e-9) and np.all(np.diff(model.ssq_y) >= -1e-9)
    assert model.ssq_y[-1] <= 100.0 + 1e-9
    recomputed = model.W @ np.linalg.solve(model.P.T @ model.W, model.B)
    np.testing.assert_allclose(recomputed, model.m, atol=1e-10 * (1 + np.abs(model.m).max()))
    np.testing.assert_array_equal(model.Q, 1.0)


def test_tpls_coefficients_match_shorter_fit():
    rng = np.random.default_rng(1)
    X, y = rng.normal(size=(6, 25)), rng.normal(size=25)
    full = tpls_fit(X, y, 5)
    for n in (1, 2, 4):
        np.testing.assert_allclose(full.coefficients(n), tpls_fit(X, y, n).m, rtol=1e-10)


def test_tpls_rank_truncation_warns():
    X = np.outer([1.0, 2.0, 3.0], [1.0, 0.5, 0.2, 0.1])
    with pytest.warns(CalibrationWarning):
        model = tpls_fit(X, np.array([1.0, 0.5, 0.2, 0.1]), 3)
    assert model.L == 1


def test_tpls_errors():
    X = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    with pytest.raises(FloatingPointError):
        tpls_fit(X, np.array([0.0, 1.0, 0.0]), 1)
    with pytest.raises(ValueError):
        tpls_fit(X, np.ones(2), 1)
    with pytest.raises(ValueError):
        tpls_fit(X, np.ones(3), 3)


def test_tpls_deterministic():
    rng = np.random.default_rng(5)
    X, y = rng.normal(size=(5, 20)), rng.normal(size=20)
    a, b = tpls_fit(X, y, 3), tpls_fit(X, y, 3)
    assert np.array_equal(a.m, b.m) and np.array_equal(a.ssq_x, b.ssq_x)


# --- prediction and projection choice ---------------------------------------


def test_tpls_predict_range():
    X = np.array([[0.0, 1.0], [0.5, 1.0], [1.0, 1.0], [0.2, 0.3]])
    model = tpls_fit(X, np.array([1.0, 0.0]), 1)
    pred = tpls_predict(model)
    assert pred.min() == pytest.approx(0.0) and pred.max() == pytest.approx(100.0)
    assert list(np.argsort(pred)) == list(np.argsort(model.m))


def test_ssq_threshold_lookup():
    assert ssq_threshold_lookup([60, 90, 96, 99], 95) == 3
    assert ssq_threshold_lookup([60, 90, 96, 99], 60) == 1
    with pytest.warns(CalibrationWarning):
        assert ssq_threshold_lookup([60, 90], 95) == 2


def test_tpls_triliquid_methanol_true_target():
    ds = synth.triliquid(seed=0)
    model = tpls_fit(ds.spectra, ds.pure[1], 3)
    assert rmse_percent(model.m, 100 * ds.truth[:, 1]) <= 10


def test_tpls_plume_projection_choice():
    ds = synth.plume(seed=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CalibrationWarning)
        model = tpls_fit(ds.spectra, ds.pure[0], 20)
    L = select_projections(model, 99.99, trace="y")
    assert model.ssq_x[L - 1] > 98.0
    stack = ds.cube.pixel_index(*ds.meta["stack"])
    assert int(np.argmax(model.coefficients(L))) == stack
