"""Measurement map, magnitude data, supports and distance to trivial associates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .errors import InconsistentSpectrumError, InvalidArgumentError
from .grid import as_image, check_dims, conjugate_index, dft, invert_image, translate

CONSISTENCY_RTOL = 1e-12


def measure(image) -> np.ndarray:
    """Magnitude DFT data ``a_k = |fhat_k|``."""
    return np.abs(dft(image))


def check_magnitudes(data, rtol: float = CONSISTENCY_RTOL) -> np.ndarray:
    """Validate magnitude data: non-negative and symmetric under ``k -> -k``."""
    a = np.asarray(data, dtype=np.float64)
    check_dims(a.shape)
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise InconsistentSpectrumError("magnitude data must be finite and non-negative")
    scale = a.max(initial=0.0)
    if scale > 0 and np.max(np.abs(a - conjugate_index(a))) > rtol * scale:
        raise InconsistentSpectrumError("magnitude data is not inversion symmetric; no real image has it")
    return a


def support_of(image, eps: float) -> np.ndarray:
    """Boolean mask of the pixels with ``|f_j| >= eps``."""
    if eps < 0:
        raise InvalidArgumentError("eps must be non-negative")
    return np.abs(as_image(image)) >= eps


def default_eps(image, rel: float = 1e-14) -> float:
    """Support threshold used for smooth synthetic images: ``rel * max|f|``."""
    return rel * float(np.max(np.abs(image)))


def pad_support(mask, p: int) -> np.ndarray:
    """Periodic ``p``-pixel neighbourhood of ``mask`` in the sup-norm."""
    if p < 0:
        raise InvalidArgumentError("p must be non-negative")
    out = np.asarray(mask, dtype=bool).copy()
    for axis, n in enumerate(out.shape):
        if 2 * p + 1 >= n:
            out = np.broadcast_to(out.any(axis=axis, keepdims=True), out.shape).copy()
            continue
        acc = out.copy()
        for s in range(1, p + 1):
            acc |= np.roll(out, s, axis=axis)
            acc |= np.roll(out, -s, axis=axis)
        out = acc
    return out


def has_small_support(mask) -> bool:
    """True if the mask fits in a periodic box whose sides are at most half the period."""
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        return True
    for axis, n in enumerate(m.shape):
        occupied = m.any(axis=tuple(i for i in range(m.ndim) if i != axis))
        if periodic_extent(occupied) > n // 2:
            return False
    return True


def periodic_extent(occupied: np.ndarray) -> int:
    """Length of the shortest periodic interval covering the true entries."""
    n = occupied.size
    idx = np.flatnonzero(occupied)
    if idx.size == 0:
        return 0
    gaps = np.diff(np.concatenate([idx, [idx[0] + n]]))
    return n - int(gaps.max()) + 1


def bounding_box(mask) -> tuple[tuple[int, int], ...]:
    """Per-axis ``(start, length)`` of the smallest periodic box holding the mask."""
    m = np.asarray(mask, dtype=bool)
    box = []
    for axis, n in enumerate(m.shape):
        occupied = m.any(axis=tuple(i for i in range(m.ndim) if i != axis))
        idx = np.flatnonzero(occupied)
        if idx.size == 0:
            box.append((0, 0))
            continue
        gaps = np.diff(np.concatenate([idx, [idx[0] + n]]))
        g = int(np.argmax(gaps))
        start = int(idx[(g + 1) % idx.size])
        box.append((start, n - int(gaps[g]) + 1))
    return tuple(box)


def box_mask(dims: Sequence[int], box) -> np.ndarray:
    """Boolean raster of a periodic box given as ``((start, length), ...)``."""
    out = np.ones(tuple(dims), dtype=bool)
    for axis, ((start, length), n) in enumerate(zip(box, dims)):
        sel = np.zeros(n, dtype=bool)
        sel[(start + np.arange(length)) % n] = True
        shape = [1] * len(dims)
        shape[axis] = n
        out &= sel.reshape(shape)
    return out


@dataclass(frozen=True)
class Associate:
    """A trivial associate ``sign * translate(invert?(reference), shift)``."""

    shift: tuple[int, ...]
    inverted: bool
    sign: int = 1

    def apply(self, reference) -> np.ndarray:
        base = invert_image(reference) if self.inverted else as_image(reference)
        return self.sign * translate(base, self.shift)


def _correlations(recon: np.ndarray, reference: np.ndarray) -> np.ndarray:
    # c[v] = sum_j recon[j] * reference[j - v]
    return sfft.irfftn(sfft.rfftn(recon) * np.conj(sfft.rfftn(reference)), s=recon.shape)


def _signs(signed: bool):
    return (1, -1) if signed else (1,)


def true_error(recon, reference, candidates: int = 4, signed: bool = False
               ) -> tuple[float, Associate]:
    """Distance from ``recon`` to the closest trivial associate of ``reference``.

    Alignment is found by FFT cross-correlation against the reference and its
    inversion; the exact distance is then evaluated at the ``candidates`` best
    shifts of each and the minimum returned together with the associate.
    ``signed=True`` also admits the negated associates, which share the
    magnitude data and every sign-symmetric constraint.
    """
    r = as_image(recon)
    f = as_image(reference)
    if r.shape != f.shape:
        raise InvalidArgumentError(f"dimension mismatch: {r.shape} vs {f.shape}")
    best = (np.inf, Associate((0,) * r.ndim, False))
    for inverted, base in ((False, f), (True, invert_image(f))):
        corr = _correlations(r, base).ravel()
        k = min(candidates, corr.size)
        for sign in _signs(signed):
            top = np.argpartition(sign * corr, -k)[-k:]
            for flat in top:
                shift = tuple(int(x) for x in np.unravel_index(flat, r.shape))
                dist = float(np.linalg.norm(r - sign * translate(base, shift)))
                if dist < best[0]:
                    best = (dist, Associate(shift, inverted, sign))
    return best


def true_error_exhaustive(recon, reference, signed: bool = False) -> tuple[float, Associate]:
    """Brute-force minimum over all ``2|J|`` associates (test oracle)."""
    r = as_image(recon)
    f = as_image(reference)
    best = (np.inf, Associate((0,) * r.ndim, False))
    for inverted in (False, True):
        base = invert_image(f) if inverted else f
        for sign in _signs(signed):
            for shift in np.ndindex(*r.shape):
                dist = float(np.linalg.norm(r - sign * translate(base, shift)))
                if dist < best[0]:
                    best = (dist, Associate(tuple(int(x) for x in shift), inverted, sign))
    return best
