import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from unmix import synth
from unmix.core import WavelengthAxis
from unmix.synth import ComponentSpec, MixtureDesign, gaussian_spectrum, simplex_design, synthesize


def _axis(lo=0.0, hi=100.0, step=0.5):
    return WavelengthAxis(np.arange(lo, hi + 1e-9, step))


def test_gaussian_peak_value_and_area():
    ax = _axis()
    s = gaussian_spectrum(ComponentSpec(((50.0, 4.0, 1.0),)), ax)
    assert s[np.searchsorted(ax.values, 50.0)] == pytest.approx(1.0)
    two = ComponentSpec(((30.0, 3.0, 2.0), (70.0, 5.0, 0.5)))
    area = np.trapezoid(gaussian_spectrum(two, ax), ax.values)
    assert area == pytest.approx(sum(h * w * math.sqrt(2 * math.pi) for _, w, h in two.peaks),
                                 rel=1e-6)


def test_gaussian_peaks_add_pointwise():
    ax = _axis()
    p1, p2 = (20.0, 3.0, 1.0), (60.0, 8.0, 0.3)
    both = gaussian_spectrum(ComponentSpec((p1, p2)), ax)
    np.testing.assert_allclose(
        both, gaussian_spectrum(ComponentSpec((p1,)), ax) + gaussian_spectrum(ComponentSpec((p2,)), ax))


def test_peak_outside_axis_and_bad_widths_raise():
    with pytest.raises(ValueError):
        gaussian_spectrum(ComponentSpec(((150.0, 2.0, 1.0),)), _axis())
    with pytest.raises(ValueError):
        ComponentSpec(((50.0, 0.0, 1.0),))


def test_simplex_design_counts():
    assert simplex_design(5, 3).shape == (15, 3)
    assert simplex_design(5, 3, exclude_pure=True).shape == (12, 3)
    np.testing.assert_allclose(simplex_design(2, 2), [[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        simplex_design(1, 3)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 7), st.integers(2, 4))
def test_simplex_rows_are_closed(levels, k):
    D = simplex_design(levels, k)
    np.testing.assert_allclose(D.sum(axis=1), 1.0)
    assert len({tuple(r) for r in D}) == len(D) == math.comb(levels - 1 + k - 1, k - 1)


def test_noise_free_is_exact_bilinear():
    ax = _axis()
    comps = (ComponentSpec(((30.0, 4.0, 1.0),)), ComponentSpec(((70.0, 6.0, 0.8),)))
    C = simplex_design(4, 2)
    A, truth = synthesize(comps, MixtureDesign(C, replicates=2), ax)
    S = np.array([gaussian_spectrum(c, ax) for c in comps])
    np.testing.assert_array_equal(truth, np.tile(C, (2, 1)))
    np.testing.assert_allclose(A.values, truth @ S, atol=1e-15)


def test_noise_level_and_reproducibility():
    ax = _axis(step=0.05)
    comps = (ComponentSpec(((50.0, 10.0, 1.0),)),)
    design = MixtureDesign(np.ones((20, 1)), noise_sd=0.01, seed=3)
    A, truth = synthesize(comps, design, ax)
    resid = A.values - truth @ gaussian_spectrum(comps[0], ax)[None, :]
    assert np.mean(np.abs(resid)) == pytest.approx(0.01 * math.sqrt(2 / math.pi), rel=0.05)
    again, _ = synthesize(comps, design, ax)
    assert np.array_equal(again.values, A.values)
    other, _ = synthesize(comps, MixtureDesign(np.ones((20, 1)), noise_sd=0.01, seed=4), ax)
    assert not np.array_equal(other.values, A.values)


def test_design_validation():
    with pytest.raises(ValueError):
        MixtureDesign([[-0.1, 1.1]])
    with pytest.raises(ValueError):
        MixtureDesign([[1.0]], replicates=0)


def test_triliquid_dataset():
    ds = synth.triliquid(seed=0)
    assert ds.spectra.values.shape[0] == 30 and ds.truth.shape == (30, 3)
    assert ds.meta["train"].sum() == 24
    np.testing.assert_allclose(ds.truth.sum(axis=1), 1.0)
    for name, (lo, hi) in ds.bands.items():
        j = ds.names.index(name)
        inside = (ds.spectra.axis.values >= lo) & (ds.spectra.axis.values <= hi)
        assert np.argmax(ds.pure[:, inside].max(axis=1)) == j


def test_dilution_dataset():
    ds = synth.dilution(seed=0)
    np.testing.assert_allclose(np.unique(ds.truth[:, 1]), synth.DILUTION_LEVELS)
    assert ds.spectra.values.shape == (15, 101)


def test_plume_dataset():
    ds = synth.plume(seed=0)
    cube = ds.cube
    assert (cube.height, cube.width, cube.spectra.values.shape[1]) == (16, 16, 36)
    assert np.unravel_index(np.argmax(ds.truth), ds.truth.shape) == (8, 5)


def test_zero_plume_is_pure_background():
    ax = WavelengthAxis(np.linspace(1270.0, 920.0, 36), unit="cm-1")
    bg = synth.Background(synth.PLUME_BACKGROUND, np.ones((3, 4, 5)))
    cube, _ = synth.synth_hypercube(5, 4, np.zeros((4, 5)), bg, synth.PLUME_TARGET, ax)
    expected = sum(gaussian_spectrum(c, ax) for c in synth.PLUME_BACKGROUND)
    np.testing.assert_allclose(cube.spectra.values, np.tile(expected, (20, 1)))
    with pytest.raises(ValueError):
        synth.synth_hypercube(5, 4, -np.ones((4, 5)), bg, synth.PLUME_TARGET, ax)
