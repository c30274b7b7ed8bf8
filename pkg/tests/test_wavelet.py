import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sbsteg.wavelet import SubBands, dwt2, filter_bank, idwt2, make_wavelet, subband_shape

pywt = pytest.importorskip("pywt")


@pytest.mark.parametrize("name", ["haar", "dmey"])
@pytest.mark.parametrize("shape", [(17, 23), (64, 64), (125, 125)])
def test_analysis_matches_pywavelets(name, shape, rng):
    x = rng.uniform(0, 255, size=shape)
    ours = dwt2(x, name)
    ca, (ch, cv, cd) = pywt.dwt2(x, name, mode="symmetric")
    for mine, ref in zip(ours.bands(), (ca, ch, cv, cd)):
        np.testing.assert_allclose(mine, ref, rtol=0, atol=1e-10)


def test_haar_synthesis_matches_pywavelets(rng):
    x = rng.uniform(0, 255, size=(64, 48))
    b = dwt2(x, "haar")
    ref = pywt.idwt2((b.cA, (b.cH, b.cV, b.cD)), "haar", mode="symmetric")
    np.testing.assert_allclose(idwt2(b), ref, atol=1e-10)


def test_dmey_synthesis_close_to_filter_bank_inverse(rng):
    # the plain filter-bank inverse is only approximate for dmey
    x = rng.uniform(0, 255, size=(64, 64))
    b = dwt2(x, "dmey")
    ref = pywt.idwt2((b.cA, (b.cH, b.cV, b.cD)), "dmey", mode="symmetric")
    assert np.max(np.abs(idwt2(b) - ref)) < 3.0
    assert np.max(np.abs(idwt2(b) - x)) < 1e-9


def test_constant_plane_haar():
    b = dwt2(np.full((10, 12), 7.0), "haar")
    np.testing.assert_allclose(b.cA, 14.0)
    for band in (b.cH, b.cV, b.cD):
        np.testing.assert_allclose(band, 0.0, atol=1e-12)
    np.testing.assert_allclose(idwt2(b), 7.0)


def test_inverse_of_constant_bands():
    shape = (20, 20)
    m = subband_shape(shape, "haar")
    zeros = np.zeros(m)
    b = SubBands(np.full(m, 2 * 3.5), zeros, zeros, zeros, make_wavelet("haar"), shape)
    np.testing.assert_allclose(idwt2(b), 3.5)


def test_subband_sizes():
    assert dwt2(np.zeros((250, 250)), "haar").cA.shape == (125, 125)
    assert dwt2(np.zeros((17, 23)), "haar").cA.shape == (9, 12)
    assert dwt2(np.zeros((250, 250)), "dmey").cA.shape == (155, 155)
    assert make_wavelet("dmey").length == 62
    assert make_wavelet("HAAR").length == 2


def test_haar_filters_orthonormal():
    fb = filter_bank("haar", 64)
    a = np.vstack([fb.lo, fb.hi])
    np.testing.assert_allclose(a @ a.T, np.eye(64), atol=1e-12)


def test_unknown_wavelet():
    with pytest.raises(ValueError):
        make_wavelet("db4")


def test_too_small_plane():
    with pytest.raises(ValueError):
        dwt2(np.zeros((1, 5)), "haar")


def test_band_dimension_mismatch():
    w = make_wavelet("haar")
    with pytest.raises(ValueError):
        SubBands(np.zeros((4, 4)), np.zeros((4, 4)), np.zeros((4, 4)), np.zeros((4, 5)), w, (8, 8))
    with pytest.raises(ValueError):
        SubBands(*(np.zeros((4, 4)),) * 4, wavelet=w, shape=(10, 10))


def test_batched_matches_single(rng):
    x = rng.uniform(0, 255, size=(3, 30, 22))
    batch = dwt2(x, "dmey")
    for k in range(3):
        single = dwt2(x[k], "dmey")
        np.testing.assert_allclose(batch.cD[k], single.cD, atol=1e-12)
    np.testing.assert_allclose(idwt2(batch), x, atol=1e-9)


def test_energy_concentrates_in_approximation(natural_images):
    for img in natural_images:
        b = dwt2(img[..., 2].astype(float), "dmey")
        detail = sum(np.sum(v ** 2) for v in (b.cH, b.cV, b.cD))
        assert np.sum(b.cA ** 2) > detail


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(-3, 3), beta=st.floats(-3, 3), seed=st.integers(0, 2 ** 16))
def test_linearity(alpha, beta, seed):
    r = np.random.default_rng(seed)
    p, q = r.normal(size=(2, 19, 16)) * 50
    lhs = dwt2(alpha * p + beta * q, "haar")
    bp, bq = dwt2(p, "haar"), dwt2(q, "haar")
    for l, x, y in zip(lhs.bands(), bp.bands(), bq.bands()):
        np.testing.assert_allclose(l, alpha * x + beta * y, atol=1e-9)


@settings(max_examples=15, deadline=None)
@given(h=st.integers(2, 40), w=st.integers(2, 40), name=st.sampled_from(["haar", "dmey"]),
       seed=st.integers(0, 2 ** 16))
def test_perfect_reconstruction_any_size(h, w, name, seed):
    x = np.random.default_rng(seed).uniform(0, 255, size=(h, w))
    tol = 1e-9 if name == "haar" else 1e-6
    assert np.max(np.abs(idwt2(dwt2(x, name)) - x)) <= tol
