"""Periodic rasters and the DFT pair used throughout the package.

Images are real ``numpy`` arrays whose shape is ``dims`` (every side even, at
least 4).  All indexing is periodic, i.e. taken mod the side length.

The transform follows the positive-exponent convention

    fhat[k] = sum_j f[j] * exp(+2 pi i j.k / n)

with no scaling on the forward transform and ``1/|J|`` on the inverse.  This is
the complex conjugate of the ``numpy``/``scipy`` forward FFT for real input, and
every tangent-phase formula in :mod:`phaseret.tangent` relies on it.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .errors import InconsistentSpectrumError, InvalidArgumentError

HERMITIAN_RTOL = 1e-8


def check_dims(shape: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(n) for n in shape)
    if len(dims) == 0:
        raise InvalidArgumentError("raster must have at least one axis")
    for n in dims:
        if n < 4 or n % 2:
            raise InvalidArgumentError(f"side lengths must be even and >= 4, got {dims}")
    return dims


def as_image(image) -> np.ndarray:
    """Validate ``image`` as a real raster and return it as float64."""
    arr = np.asarray(image, dtype=np.float64)
    check_dims(arr.shape)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("image contains NaN or Inf")
    return arr


def _check_same_dims(f: np.ndarray, g: np.ndarray) -> None:
    if f.shape != g.shape:
        raise InvalidArgumentError(f"dimension mismatch: {f.shape} vs {g.shape}")


def conjugate_index(x: np.ndarray) -> np.ndarray:
    """Return ``y`` with ``y[k] = x[-k mod n]`` on every axis."""
    return np.roll(np.flip(x), 1, axis=tuple(range(x.ndim)))


def dft(image) -> np.ndarray:
    """Forward DFT with the ``exp(+2 pi i j.k / n)`` kernel and no scaling."""
    f = as_image(image)
    return sfft.ifftn(f, norm="forward")


def hermitian_defect(spectrum: np.ndarray) -> float:
    """Relative size of the part of ``spectrum`` violating ``X[-k] = conj(X[k])``."""
    scale = np.linalg.norm(spectrum)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(spectrum - np.conj(conjugate_index(spectrum))) / scale)


def idft(spectrum) -> np.ndarray:
    """Inverse of :func:`dft` for a Hermitian-symmetric spectrum.

    Raises
    ------
    InconsistentSpectrumError
        If the spectrum departs from Hermitian symmetry by more than 1e-8
        (relative), i.e. cannot be the transform of a real image.
    """
    X = np.asarray(spectrum, dtype=np.complex128)
    check_dims(X.shape)
    defect = hermitian_defect(X)
    if defect > HERMITIAN_RTOL:
        raise InconsistentSpectrumError(f"spectrum is not Hermitian (relative defect {defect:.3e})")
    return np.ascontiguousarray(sfft.fftn(X, norm="forward").real)


def translate(image, v: Sequence[int]) -> np.ndarray:
    """Periodic translate: ``out[j] = image[j - v]``."""
    f = as_image(image)
    if len(v) != f.ndim:
        raise InvalidArgumentError(f"translation has {len(v)} components for a {f.ndim}-d image")
    return np.roll(f, tuple(int(x) for x in v), axis=tuple(range(f.ndim)))


def invert_image(image) -> np.ndarray:
    """Periodic inversion: ``out[j] = image[-j]``."""
    return conjugate_index(as_image(image))


def convolve(f, g) -> np.ndarray:
    """Periodic convolution ``[f * g]_j = sum_k f[j-k] g[k]``."""
    f = as_image(f)
    g = as_image(g)
    _check_same_dims(f, g)
    return sfft.irfftn(sfft.rfftn(f) * sfft.rfftn(g), s=f.shape)


def autocorrelation(image) -> np.ndarray:
    """Autocorrelation ``[F star F]_j = sum_l f[l] f[j+l]``; its DFT is ``|fhat|**2``."""
    f = as_image(image)
    spec = sfft.rfftn(f)
    return sfft.irfftn((spec * np.conj(spec)).real, s=f.shape)


def delta(dims: Sequence[int], at: Sequence[int] | None = None) -> np.ndarray:
    """Image equal to 1 at ``at`` (default the origin) and 0 elsewhere."""
    dims = check_dims(dims)
    out = np.zeros(dims)
    out[tuple(at) if at is not None else (0,) * len(dims)] = 1.0
    return out


def lattice_coords(dims: Sequence[int]) -> list[np.ndarray]:
    """Open coordinate grids ``j_0, j_1, ...`` broadcastable to ``dims``."""
    return list(np.ogrid[tuple(slice(0, n) for n in dims)])


def folded_coords(dims: Sequence[int]) -> list[np.ndarray]:
    """Coordinates folded into ``[-n/2, n/2)``, i.e. signed distance to the origin."""
    return [((c + n // 2) % n) - n // 2 for c, n in zip(lattice_coords(dims), dims)]
