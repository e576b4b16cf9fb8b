import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import naive_autocorrelation, naive_convolve, naive_dft
from phaseret.errors import InconsistentSpectrumError, InvalidArgumentError
from phaseret.grid import (autocorrelation, check_dims, conjugate_index, convolve, delta, dft,
                           folded_coords, idft, invert_image, translate)

even_side = st.sampled_from([4, 6, 8])
finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def small_images(max_d=2):
    return st.tuples(even_side, even_side).flatmap(
        lambda dims: arrays(np.float64, dims, elements=finite))


def test_delta_has_flat_spectrum():
    np.testing.assert_allclose(dft(delta((8, 8))), np.ones((8, 8)), atol=1e-15)


def test_constant_image_spectrum():
    X = dft(np.full((4, 6), 2.5))
    expected = np.zeros((4, 6))
    expected[0, 0] = 2.5 * 24
    np.testing.assert_allclose(X, expected, atol=1e-12)


def test_positive_exponent_convention():
    # a shifted delta picks up exp(+2 pi i v.k / n)
    f = delta((8,), at=(1,))
    np.testing.assert_allclose(dft(f), np.exp(2j * np.pi * np.arange(8) / 8), atol=1e-14)


@pytest.mark.parametrize("dims", [(4, 4), (4, 6), (8, 8), (4, 4, 4)])
def test_dft_matches_direct_sum(dims):
    rng = np.random.default_rng(sum(dims))
    f = rng.standard_normal(dims)
    ref = naive_dft(f)
    np.testing.assert_allclose(dft(f), ref, rtol=0, atol=1e-12 * np.abs(ref).max())


@settings(max_examples=30, deadline=None)
@given(small_images())
def test_roundtrip(f):
    scale = max(1.0, np.abs(f).max())
    np.testing.assert_allclose(idft(dft(f)), f, atol=1e-12 * scale)


@settings(max_examples=30, deadline=None)
@given(small_images())
def test_hermitian_symmetry(f):
    X = dft(f)
    scale = max(1.0, np.abs(X).max())
    np.testing.assert_allclose(conjugate_index(X), np.conj(X), atol=1e-12 * scale)
    assert abs(X[(0,) * f.ndim].imag) <= 1e-12 * scale


def test_idft_rejects_non_hermitian():
    X = dft(np.arange(16.0).reshape(4, 4))
    X[1, 2] += 1j * np.abs(X).max()
    with pytest.raises(InconsistentSpectrumError):
        idft(X)


def test_idft_discards_tiny_imaginary_part():
    f = np.random.default_rng(1).standard_normal((6, 6))
    X = dft(f)
    X[1, 1] += 1e-12j * np.abs(X).max()
    np.testing.assert_allclose(idft(X), f, atol=1e-10)


@pytest.mark.parametrize("dims", [(3, 4), (4, 5), (2, 4), (0, 4)])
def test_bad_dims(dims):
    with pytest.raises(InvalidArgumentError):
        check_dims(dims)
    with pytest.raises(InvalidArgumentError):
        dft(np.zeros(dims))


def test_non_finite_rejected():
    f = np.zeros((4, 4))
    f[0, 1] = np.nan
    with pytest.raises(InvalidArgumentError):
        dft(f)


@pytest.mark.parametrize("dims", [(4, 4), (6, 4), (8, 8)])
def test_convolution_and_autocorrelation_oracles(dims):
    rng = np.random.default_rng(7)
    f, g = rng.standard_normal(dims), rng.standard_normal(dims)
    np.testing.assert_allclose(convolve(f, g), naive_convolve(f, g), atol=1e-12)
    np.testing.assert_allclose(autocorrelation(f), naive_autocorrelation(f), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(small_images(), st.integers(-20, 20), st.integers(-20, 20))
def test_translation_and_inversion_identities(f, v0, v1):
    v = (v0, v1)
    coords = folded_coords(f.shape)
    phase = np.exp(2j * np.pi * sum(vi * c / n for vi, c, n in zip(v, coords, f.shape)))
    scale = max(1.0, np.abs(f).sum())
    np.testing.assert_allclose(dft(translate(f, v)), phase * dft(f), atol=1e-11 * scale)
    np.testing.assert_allclose(dft(invert_image(f)), np.conj(dft(f)), atol=1e-11 * scale)
    np.testing.assert_array_equal(invert_image(invert_image(f)), f)


def test_translate_convention():
    f = delta((4, 4))
    assert translate(f, (1, -1))[1, 3] == 1.0


def test_convolution_theorem():
    rng = np.random.default_rng(3)
    f, g = rng.standard_normal((8, 6)), rng.standard_normal((8, 6))
    np.testing.assert_allclose(dft(convolve(f, g)), dft(f) * dft(g), atol=1e-11)


def test_autocorrelation_is_inverse_of_power_spectrum():
    f = np.random.default_rng(5).standard_normal((8, 8))
    np.testing.assert_allclose(dft(autocorrelation(f)).real, np.abs(dft(f)) ** 2, atol=1e-10)
