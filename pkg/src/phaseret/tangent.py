"""Tangent and normal spaces of the magnitude torus and transversality diagnostics.

For a real image ``F`` with spectrum ``fhat_k = a_k exp(i phi_k)`` the tangent
space of its magnitude torus is spanned, one vector per conjugate pair
``{k, -k}`` with ``a_k > 0``, by the image-domain vectors

    u_k[j] = sqrt(2/|J|) * sin(2 pi j.k / n - phi_k)

and the normal space by the matching cosines (plus the self-conjugate
frequencies, ``2k = 0 mod n``, which only carry normal directions).  These
vectors are orthonormal by construction, so no Gram-Schmidt step is needed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla
from scipy.optimize import linprog

from .errors import InvalidArgumentError
from .grid import as_image, dft
from .measure import default_eps, measure, support_of

ACTIVE_CUTOFF = 1e-12
INTERSECTION_TOL = 1e-15
MAX_DENSE_PIXELS = 64 * 64
MAX_CONE_ROWS = 8192
LP_TOL = 1e-9
_ROW_CHUNK = 1024


@dataclass
class SubspaceBasis:
    """Orthonormal columns spanning a subspace of R^J (images flattened row-major).

    Coordinate subspaces (``label == "support"``) also keep their row indices
    so that products with them reduce to row selection.
    """

    columns: np.ndarray
    label: str
    dims: tuple
    rows: Optional[np.ndarray] = None

    @property
    def ambient_dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def dim(self) -> int:
        return self.columns.shape[1]

    def images(self) -> np.ndarray:
        """Columns reshaped to a stack of images, ``(dim, *dims)``."""
        return self.columns.T.reshape((self.dim,) + tuple(self.dims))


@dataclass
class AngleSpectrum:
    """Singular values of ``V^t U`` (descending) and ``1 - sigma`` computed stably."""

    sigma: np.ndarray
    one_minus_sigma: np.ndarray
    threshold: float = INTERSECTION_TOL
    right_vectors: Optional[np.ndarray] = field(default=None, repr=False)

    def log10_one_minus_sigma(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log10(np.maximum(self.one_minus_sigma, 0.0))


@dataclass
class _Frequencies:
    dims: tuple
    pairs: np.ndarray          # (npairs, d) representative k of each active pair
    self_conjugate: np.ndarray  # (nself, d) active k with 2k = 0
    pair_phase: np.ndarray
    self_phase: np.ndarray


def _frequencies(image: np.ndarray, cutoff: float) -> _Frequencies:
    dims = image.shape
    spec = dft(image)
    a = np.abs(spec)
    active = a > cutoff * a.max()
    flat = np.arange(a.size).reshape(dims)
    conj_flat = np.roll(np.flip(flat), 1, axis=tuple(range(len(dims))))
    rep = active & (flat < conj_flat)
    selfc = active & (flat == conj_flat)
    pairs = np.argwhere(rep)
    selfs = np.argwhere(selfc)
    return _Frequencies(
        dims=dims,
        pairs=pairs,
        self_conjugate=selfs,
        pair_phase=np.angle(spec[rep]),
        self_phase=np.angle(spec[selfc]),
    )


def _phase_rows(dims, rows: np.ndarray, ks: np.ndarray) -> np.ndarray:
    """``2 pi j.k / n`` for row pixels ``j`` (flat indices) against frequencies ``ks``."""
    coords = np.unravel_index(rows, dims)
    theta = np.zeros((rows.size, ks.shape[0]))
    for axis, n in enumerate(dims):
        prod = np.multiply.outer(coords[axis].astype(np.int64), ks[:, axis].astype(np.int64)) % n
        theta += prod * (2.0 * np.pi / n)
    return theta


def _rows_matrix(freq: _Frequencies, rows: np.ndarray, kind: str) -> np.ndarray:
    dims = freq.dims
    J = int(np.prod(dims))
    npairs = freq.pairs.shape[0]
    ncols = npairs if kind == "tangent" else npairs + freq.self_conjugate.shape[0]
    out = np.empty((rows.size, ncols))
    fn = np.sin if kind == "tangent" else np.cos
    for start in range(0, rows.size, _ROW_CHUNK):
        sl = slice(start, start + _ROW_CHUNK)
        theta = _phase_rows(dims, rows[sl], freq.pairs)
        theta -= freq.pair_phase
        out[sl, :npairs] = fn(theta) * np.sqrt(2.0 / J)
        if kind == "normal" and freq.self_conjugate.shape[0]:
            theta = _phase_rows(dims, rows[sl], freq.self_conjugate) - freq.self_phase
            out[sl, npairs:] = np.cos(theta) / np.sqrt(J)
    return out


def _check_dense(dims) -> None:
    if int(np.prod(dims)) > MAX_DENSE_PIXELS:
        raise InvalidArgumentError(
            f"dense tangent bases are limited to {MAX_DENSE_PIXELS} pixels, got {dims}")


def tangent_basis(image, cutoff: float = ACTIVE_CUTOFF) -> SubspaceBasis:
    """Orthonormal basis of the torus tangent space at ``image``.

    One column per conjugate frequency pair whose modulus exceeds
    ``cutoff * max(a)``; vanishing frequencies lower the dimension.
    """
    f = as_image(image)
    _check_dense(f.shape)
    freq = _frequencies(f, cutoff)
    cols = _rows_matrix(freq, np.arange(f.size), "tangent")
    return SubspaceBasis(cols, "tangent", f.shape)


def normal_basis(image, cutoff: float = ACTIVE_CUTOFF) -> SubspaceBasis:
    """Orthonormal basis of the normal space at ``image`` (cosine partners of the tangent)."""
    f = as_image(image)
    _check_dense(f.shape)
    freq = _frequencies(f, cutoff)
    cols = _rows_matrix(freq, np.arange(f.size), "normal")
    return SubspaceBasis(cols, "normal", f.shape)


def tangent_synthesize(image, coeffs, cutoff: float = ACTIVE_CUTOFF) -> np.ndarray:
    """Images ``U @ coeffs`` for the tangent basis of ``image``, computed by FFT.

    ``coeffs`` is ``(npairs,)`` or ``(npairs, r)``; the result has shape
    ``dims`` or ``(r, *dims)``.  Works for any image size.
    """
    f = as_image(image)
    freq = _frequencies(f, cutoff)
    return _synthesize(freq, np.asarray(coeffs, dtype=float))


def _synthesize(freq: _Frequencies, coeffs: np.ndarray) -> np.ndarray:
    single = coeffs.ndim == 1
    c = coeffs[:, None] if single else coeffs
    dims = freq.dims
    J = int(np.prod(dims))
    spec = np.zeros((c.shape[1],) + tuple(dims), dtype=complex)
    idx = (slice(None),) + tuple(freq.pairs.T)
    spec[idx] = (c * np.exp(-1j * freq.pair_phase)[:, None]).T
    axes = tuple(range(1, len(dims) + 1))
    # sum_k Y_k exp(+2 pi i j.k/n) is the unscaled inverse FFT
    out = np.sqrt(2.0 / J) * sfft.ifftn(spec, axes=axes, norm="forward").imag
    return out[0] if single else out


def support_basis(mask) -> SubspaceBasis:
    """Standard basis vectors ``e_j`` for the pixels of ``mask``."""
    m = np.asarray(mask, dtype=bool)
    rows = np.flatnonzero(m)
    cols = np.zeros((m.size, rows.size))
    cols[rows, np.arange(rows.size)] = 1.0
    return SubspaceBasis(cols, "support", m.shape, rows=rows)


def principal_angles(V: SubspaceBasis, U: SubspaceBasis, keep_vectors: bool = False) -> AngleSpectrum:
    """Cosines of the principal angles between ``V`` and ``U`` (SVD of ``V^t U``).

    ``1 - sigma`` is evaluated from the sines ``||(I - V V^t) U x||`` for
    angles below 45 degrees, which keeps it accurate far below 1e-16.
    """
    if V.ambient_dim != U.ambient_dim:
        raise InvalidArgumentError("subspaces live in different ambient spaces")
    if V.rows is not None:
        H = U.columns[V.rows]
    else:
        H = V.columns.T @ U.columns
    if min(H.shape) == 0:
        return AngleSpectrum(np.zeros(0), np.zeros(0))
    Y, s, Xt = sla.svd(H, full_matrices=False, lapack_driver="gesdd")
    s = np.clip(s, 0.0, 1.0)
    one_minus = 1.0 - s
    small = s > np.sqrt(0.5)
    if small.any():
        X = Xt[small].T
        if V.rows is not None:
            off = np.ones(U.ambient_dim, dtype=bool)
            off[V.rows] = False
            resid = U.columns[off] @ X
        else:
            resid = U.columns @ X - V.columns @ (Y[:, small] * s[small])
        sines = np.linalg.norm(resid, axis=0)
        one_minus[small] = sines**2 / (1.0 + s[small])
    return AngleSpectrum(s, one_minus, right_vectors=Xt.T if keep_vectors else None)


def intersection_dimension(spectrum: AngleSpectrum, tol: Optional[float] = None) -> int:
    """Number of singular values with ``sigma >= 1 - tol`` (default 1e-15)."""
    tol = spectrum.threshold if tol is None else tol
    if not 0 < tol < 1:
        raise InvalidArgumentError("tol must lie in (0, 1)")
    return int(np.count_nonzero(spectrum.one_minus_sigma <= tol))


def support_intersection(image, mask, cutoff: float = ACTIVE_CUTOFF,
                         keep_vectors: bool = False) -> AngleSpectrum:
    """Angle spectrum between the tangent space at ``image`` and ``B_mask``."""
    return principal_angles(support_basis(mask), tangent_basis(image, cutoff), keep_vectors)


def intersection_directions(image, mask, tol: float = INTERSECTION_TOL,
                            cutoff: float = ACTIVE_CUTOFF) -> np.ndarray:
    """Orthonormal images spanning ``T^0 cap B_mask`` (stack of shape ``(dim, *dims)``).

    Each direction is the tangent vector of a counted singular value with its
    tiny off-support residue removed.
    """
    spec = support_intersection(image, mask, cutoff, keep_vectors=True)
    keep = spec.one_minus_sigma <= tol
    f = as_image(image)
    images = tangent_synthesize(f, spec.right_vectors[:, keep], cutoff)
    if images.ndim == f.ndim:
        images = images[None]
    m = np.asarray(mask, dtype=bool).ravel()
    flat = images.reshape(images.shape[0], -1)
    q, _ = np.linalg.qr(flat[:, m].T)
    out = np.zeros_like(flat)
    out[:, m] = q.T
    return out.reshape(images.shape)


def spectrum_rows(spectrum: AngleSpectrum):
    """Rows ``(n, sigma, log10(1 - sigma))`` with ``n`` starting at 1."""
    logs = spectrum.log10_one_minus_sigma()
    return [(i + 1, float(s), float(l)) for i, (s, l) in enumerate(zip(spectrum.sigma, logs))]


def write_spectrum_csv(path, spectrum: AngleSpectrum) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "sigma", "log10_one_minus_sigma"])
        for n, s, l in spectrum_rows(spectrum):
            w.writerow([n, repr(s), repr(l)])


def theorem_bound(kernel, kernel_mask, cutoff: float = ACTIVE_CUTOFF) -> float:
    """Lower bound ``|J_t| - (|J| - |S_g|)/2`` for an inversion-symmetric kernel ``g``.

    ``|J_t|`` is the tangent dimension at ``g`` (its number of active
    conjugate pairs).
    """
    g = as_image(kernel)
    nt = _frequencies(g, cutoff).pairs.shape[0]
    return nt - (g.size - int(np.count_nonzero(kernel_mask))) / 2.0


@dataclass
class ConeResult:
    lineality_dim: int
    cone_span_dim: int
    candidate_rows: int
    free_rows: int


def nonneg_cone_dimension(image, eps: Optional[float] = None, cutoff: float = ACTIVE_CUTOFF,
                          tol: float = INTERSECTION_TOL, lp_tol: float = LP_TOL,
                          max_rows: int = MAX_CONE_ROWS) -> ConeResult:
    """Dimensions of ``{tau in T^0 : tau_j >= 0 wherever f_j = 0}`` for ``f >= 0``.

    ``f_j = 0`` means ``f_j < eps`` (default ``1e-14 max f``); the image is
    truncated to that support first.  Returns the lineality dimension
    (``T^0 cap B_S``) and the dimension of the linear span of the cone.

    Procedure: for every translation ``v`` with ``(S + v) cap S`` empty, the
    normal vectors ``F^(v) + F^(-v)`` are non-negative and vanish on ``S``, so
    orthogonality forces ``tau = 0`` on ``S + v``.  Only the remaining pixels
    ``R`` carry inequality constraints.  The subspace ``K`` of tangent vectors
    vanishing off ``S cup R`` comes from a principal-angle computation, and
    one linear program over ``K`` (maximise capped slacks) separates the
    constraints that are tight on the whole cone from those that are not.
    """
    f = as_image(image)
    eps = default_eps(f) if eps is None else eps
    # round-off negatives below the threshold count as zero pixels
    if -f.min() >= eps:
        raise InvalidArgumentError("cone dimension is defined for non-negative images")
    S = support_of(f, eps) & (f > 0)
    f = np.where(S, f, 0.0)
    dims = f.shape
    freq = _frequencies(f, cutoff)

    Sf = S.astype(float)
    diff_set = sfft.irfftn(np.abs(sfft.rfftn(Sf)) ** 2, s=dims) > 0.5
    forced = sfft.irfftn(sfft.rfftn(Sf) * sfft.rfftn((~diff_set).astype(float)), s=dims) > 0.5
    free = ~S & ~forced
    Q = S | free
    rows = np.flatnonzero(Q)
    if rows.size > max_rows:
        raise InvalidArgumentError(
            f"{rows.size} unconstrained rows exceed the limit {max_rows}; support too large")

    UQ = _rows_matrix(freq, rows, "tangent")
    _, s, Xt = sla.svd(UQ, full_matrices=False, lapack_driver="gesdd")
    near = s > np.sqrt(0.5)
    X = Xt[near].T
    taus = _synthesize(freq, X).reshape(X.shape[1], -1)
    outside = np.ones(f.size, dtype=bool)
    outside[rows] = False
    sines = np.linalg.norm(taus[:, outside], axis=1)
    one_minus = sines**2 / (1.0 + s[near])
    K = X[:, one_minus <= tol]
    if K.shape[1] == 0:
        return ConeResult(0, 0, int(rows.size), int(np.count_nonzero(free)))

    free_rows = np.flatnonzero(free.ravel())
    # K has orthonormal coefficient columns, so rows of A are unit-scale tangent values on R
    A = taus[one_minus <= tol][:, free_rows].T
    sine_tol = np.sqrt(2.0 * tol)
    if A.shape[0] == 0:
        return ConeResult(K.shape[1], K.shape[1], int(rows.size), 0)
    # work modulo the lineality space: y = Sigma V^t beta, constraints U_r y >= 0
    U, s, _ = sla.svd(A, full_matrices=False, lapack_driver="gesdd")
    rank = int(np.count_nonzero(s > sine_tol))
    lineality = A.shape[1] - rank
    if rank == 0:
        return ConeResult(lineality, lineality, int(rows.size), int(free_rows.size))
    B = U[:, :rank]
    implicit = _implicit_equalities(B, lp_tol)
    span = lineality + rank
    if implicit.any():
        span -= int(np.count_nonzero(sla.svdvals(B[implicit]) > sine_tol))
    return ConeResult(int(lineality), int(span), int(rows.size), int(free_rows.size))


def _implicit_equalities(A: np.ndarray, lp_tol: float) -> np.ndarray:
    """Rows ``i`` with ``(A x)_i = 0`` for every ``x`` in the cone ``A x >= 0``.

    Solves ``max sum t`` subject to ``A x >= t``, ``0 <= t <= 1`` after
    scaling rows to unit length.  Every constraint that is not an implicit
    equality reaches ``t_i = 1`` at the optimum (the cone is closed under
    addition), the others stay at 0.
    """
    norms = np.linalg.norm(A, axis=1)
    live = norms > lp_tol
    implicit = ~live
    if not live.any():
        return implicit
    As = A[live] / norms[live, None]
    m, q = As.shape
    c = np.concatenate([np.zeros(q), -np.ones(m)])
    A_ub = np.hstack([-As, np.eye(m)])
    bounds = [(-1e4, 1e4)] * q + [(0.0, 1.0)] * m
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(m), bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": lp_tol,
                           "dual_feasibility_tolerance": lp_tol})
    if res.status != 0:
        raise RuntimeError(f"cone linear program failed: {res.message}")
    implicit[live] = res.x[q:] < 0.5
    return implicit


def quadratic_separation_exponent(image, tau, ts=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5)) -> float:
    """Log-log slope of ``||M(F) - M(F + t tau)||`` against ``t``.

    About 2 along directions where the tangent space meets the constraint
    (quadratic separation), about 1 for transversal directions.
    """
    f = as_image(image)
    d = np.asarray(tau, dtype=float)
    norm = np.linalg.norm(d)
    if norm == 0:
        raise InvalidArgumentError("direction must be non-zero")
    d = d / norm
    a = measure(f)
    ts = np.asarray(ts, dtype=float)
    dist = np.array([np.linalg.norm(a - measure(f + t * d)) for t in ts])
    if np.all(dist < 1e-13):
        raise InvalidArgumentError("degenerate fit: all distances below 1e-13")
    keep = dist > 0
    slope = np.polyfit(np.log(ts[keep]), np.log(dist[keep]), 1)[0]
    return float(slope)


def smoothed_support_bound(base, kernel, eps: float, cutoff: float = ACTIVE_CUTOFF) -> float:
    """Theorem-style lower bound for ``tangent(base * kernel) cap B_S``.

    The kernel support is taken at the level that guarantees
    ``S_base + S_kernel`` lies inside the thresholded support of the
    convolution: ``kernel >= eps / min(base on its support)``.
    """
    b = as_image(base)
    g = as_image(kernel)
    bmin = float(b[b > 0].min())
    kernel_mask = g >= eps / bmin
    return theorem_bound(g, kernel_mask, cutoff)


__all__ = [
    "SubspaceBasis", "AngleSpectrum", "ConeResult", "tangent_basis", "normal_basis",
    "tangent_synthesize", "support_basis", "principal_angles", "intersection_dimension",
    "support_intersection", "intersection_directions", "spectrum_rows", "write_spectrum_csv",
    "theorem_bound", "smoothed_support_bound", "nonneg_cone_dimension",
    "quadratic_separation_exponent",
]
