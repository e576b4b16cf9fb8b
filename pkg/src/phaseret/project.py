"""Closest-point maps onto the magnitude torus and the auxiliary constraint sets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import scipy.fft as sfft

from .errors import InvalidArgumentError
from .grid import as_image
from .measure import check_magnitudes

ZERO_MODULUS = 1e-300


@dataclass(frozen=True)
class Support:
    mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))


@dataclass(frozen=True)
class NonNegative:
    pass


@dataclass(frozen=True)
class L1Ball:
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidArgumentError("L1 ball radius must be positive")


@dataclass(frozen=True)
class KnownReference:
    """Support constraint with exactly known values on part of the support.

    ``known`` marks the reference pixels, whose values are fixed to ``values``.
    """

    mask: np.ndarray
    known: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        known = np.asarray(self.known, dtype=bool)
        values = np.asarray(self.values, dtype=np.float64)
        if not (mask.shape == known.shape == values.shape):
            raise InvalidArgumentError("mask, known and values must share one shape")
        if np.any(known & ~mask):
            raise InvalidArgumentError("known pixels must lie inside the support")
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "known", known)
        object.__setattr__(self, "values", np.where(known, values, 0.0))


ConstraintSet = Union[Support, NonNegative, L1Ball, KnownReference]


class TorusProjector:
    """Projection onto the magnitude torus of fixed data ``a``.

    Holds the half-spectrum of ``a`` so repeated calls (solver loops) only pay
    for one real FFT pair.  The result is independent of the DFT sign convention.
    """

    def __init__(self, data):
        a = check_magnitudes(data)
        self.shape = a.shape
        last = a.shape[-1] // 2 + 1
        self._half = np.ascontiguousarray(a[..., :last])

    def __call__(self, image: np.ndarray) -> np.ndarray:
        spec = sfft.rfftn(image)
        mod = np.abs(spec)
        small = mod < ZERO_MODULUS
        mod[small] = 1.0
        spec /= mod
        spec[small] = 1.0
        spec *= self._half
        return sfft.irfftn(spec, s=self.shape)


def project_torus(data, image) -> np.ndarray:
    """Keep the DFT phase of ``image``, replace its modulus by ``data``.

    Frequencies where the image spectrum vanishes (modulus below 1e-300) take
    phase 1.
    """
    f = as_image(image)
    a = np.asarray(data, dtype=np.float64)
    if a.shape != f.shape:
        raise InvalidArgumentError(f"dimension mismatch: {a.shape} vs {f.shape}")
    return TorusProjector(a)(f)


def project_support(mask, image) -> np.ndarray:
    f = np.asarray(image, dtype=np.float64)
    m = np.asarray(mask, dtype=bool)
    if m.shape != f.shape:
        raise InvalidArgumentError(f"dimension mismatch: {m.shape} vs {f.shape}")
    return np.where(m, f, 0.0)


def project_nonneg(image) -> np.ndarray:
    return np.maximum(np.asarray(image, dtype=np.float64), 0.0)


def l1_threshold(values: np.ndarray, radius: float) -> float:
    """Soft threshold ``theta`` with ``sum(max(|x| - theta, 0)) == radius``.

    Assumes ``sum(|x|) > radius``; found exactly from sorted partial sums.
    """
    u = np.sort(np.abs(values).ravel())[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, u.size + 1)
    rho = np.nonzero(u * ks > css - radius)[0][-1]
    return float((css[rho] - radius) / (rho + 1))


def project_l1ball(radius: float, image) -> np.ndarray:
    """Euclidean projection onto ``{x : ||x||_1 <= radius}``."""
    if not radius > 0:
        raise InvalidArgumentError("L1 ball radius must be positive")
    f = np.asarray(image, dtype=np.float64)
    if np.abs(f).sum() <= radius:
        return f.copy()
    theta = l1_threshold(f, radius)
    return np.sign(f) * np.maximum(np.abs(f) - theta, 0.0)


def projector(constraint: ConstraintSet) -> Callable[[np.ndarray], np.ndarray]:
    """Return the closest-point map of a constraint set as a one-argument callable."""
    if isinstance(constraint, Support):
        mask = constraint.mask
        return lambda f: np.where(mask, f, 0.0)
    if isinstance(constraint, KnownReference):
        free = constraint.mask & ~constraint.known
        values = constraint.values
        return lambda f: np.where(free, f, values)
    if isinstance(constraint, NonNegative):
        return project_nonneg
    if isinstance(constraint, L1Ball):
        r = float(constraint.radius)
        return lambda f: project_l1ball(r, f)
    raise InvalidArgumentError(f"unknown constraint {constraint!r}")


def reflect(P: Callable[[np.ndarray], np.ndarray], image) -> np.ndarray:
    """Reflection ``2 P(F) - F`` through the set behind projection ``P``."""
    f = np.asarray(image, dtype=np.float64)
    return 2.0 * P(f) - f
