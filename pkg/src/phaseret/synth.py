"""Scene generators for the numerical experiments.

Continuous scenes are sampled at ``x = j / N`` (``N`` is half the side
length), so the lattice covers ``[0, 2)^d``.  Disc centres, radii and the
radial-power profile are expressed in those units.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError, PlacementError, SpectralOverlapError
from .grid import check_dims, convolve, dft, folded_coords, invert_image, lattice_coords, translate
from .measure import (bounding_box, box_mask, has_small_support, pad_support, support_of,
                      true_error)

DISC_COUNT = (3, 10)
DISC_RADIUS = (0.03, 0.15)
DISC_INTENSITY = (0.5, 1.5)
MAX_RETRIES = 100
ROUNDOFF_RTOL = 1e-12
FAMILIES = ("discs", "radial_power", "smoothed_discs", "microlocal", "reducible_pair",
            "inversion_symmetric")

# wave-packet defaults reproducing the four-packet example at N = 512
MICROLOCAL_WAVEVECTORS = ((0, 0), (70, 60), (-60, 70), (200, 200))
MICROLOCAL_SHIFTS = ((0, 0), (-8, 0), (0, -8), (8, 8))
MICROLOCAL_SIGMA = 0.0225
SPECTRAL_OVERLAP_RTOL = 1e-13


@dataclass
class SceneSpec:
    """What to generate.  ``params`` holds the family-specific settings."""

    family: str
    dims: tuple
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgumentError(f"unknown scene family {self.family!r}")
        self.dims = check_dims(self.dims)
        self.params = dict(self.params)

    def to_json(self) -> str:
        d = asdict(self)
        d["dims"] = list(self.dims)
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        unknown = set(d) - {"family", "dims", "seed", "params"}
        if unknown:
            raise InvalidArgumentError(f"unknown scene keys: {sorted(unknown)}")
        return cls(d["family"], tuple(d["dims"]), int(d.get("seed", 0)), d.get("params", {}))

    @classmethod
    def from_json(cls, text: str) -> "SceneSpec":
        return cls.from_dict(json.loads(text))


def default_box(dims: Sequence[int], side: Optional[int] = None):
    """Centred box of side ``side`` pixels per axis (default ``N``, half the period)."""
    box = []
    for n in dims:
        s = n // 2 if side is None else int(side)
        box.append(((n - s) // 2, s))
    return tuple(box)


def _sample_coords(dims):
    return [c / (n // 2) for c, n in zip(lattice_coords(dims), dims)]


def _draw_discs(rng: np.random.Generator, dims, params: dict):
    if "discs" in params:
        return [(np.asarray(d["center"], float), float(d["radius"]), float(d["intensity"]))
                for d in params["discs"]]
    box = params.get("support_box") or default_box(dims, params.get("box_side"))
    lo_n, hi_n = params.get("count", DISC_COUNT)
    r_lo, r_hi = params.get("radius", DISC_RADIUS)
    a_lo, a_hi = params.get("intensity", DISC_INTENSITY)
    count = int(rng.integers(lo_n, hi_n + 1))
    discs = []
    for _ in range(count):
        r = float(rng.uniform(r_lo, r_hi))
        alpha = float(rng.uniform(a_lo, a_hi))
        center = []
        for (start, length), n in zip(box, dims):
            half = n // 2
            # keep every sampled pixel of the disc inside [start, start + length - 1]
            lo = start / half + r
            hi = (start + length - 1) / half - r
            if hi < lo:
                raise PlacementError(f"disc of radius {r:.3f} does not fit the support box {box}")
            center.append(rng.uniform(lo, hi))
        discs.append((np.asarray(center), r, alpha))
    return discs


def _radial_sum(dims, discs, power: int) -> np.ndarray:
    x = _sample_coords(dims)
    out = np.zeros(tuple(dims))
    for c, r, alpha in discs:
        dist = np.sqrt(sum((xi - ci) ** 2 for xi, ci in zip(x, c)))
        inside = dist <= r
        out += np.where(inside, alpha * dist**power if power else alpha, 0.0)
    return out


def gen_discs(spec: SceneSpec) -> np.ndarray:
    """Point samples of a sum of constant discs ("hard" object)."""
    return gen_radial_power(spec, power=0)


def gen_radial_power(spec: SceneSpec, power: Optional[int] = None) -> np.ndarray:
    """Samples of ``sum_i alpha_i chi(|x - c_i| <= r_i) |x - c_i|^k``.

    ``k`` comes from ``power`` or ``spec.params["k"]``; ``k = 0`` gives discs.
    """
    k = int(spec.params.get("k", 0) if power is None else power)
    if k < 0:
        raise InvalidArgumentError("k must be non-negative")
    rng = np.random.default_rng(spec.seed)
    for _ in range(MAX_RETRIES):
        discs = _draw_discs(rng, spec.dims, spec.params)
        img = _radial_sum(spec.dims, discs, k)
        if img.any():
            return img
        if "discs" in spec.params:
            break
    raise PlacementError("scene has no pixel inside any disc")


def gaussian_kernel(k: int, dims: Sequence[int], center: str = "origin") -> np.ndarray:
    """Sampled Gaussian ``c_k exp(-16 N^2 |x|^2 / (k+1)^2)`` with unit l1 norm.

    ``center="origin"`` gives a kernel with ``g[-j] = g[j]``.  ``center="half"``
    samples at half-integer offsets, which makes it symmetric about
    ``j = -1/2`` on every axis; its DFT then vanishes on the Nyquist lines.
    """
    if k < 1:
        raise InvalidArgumentError("smoothing level k must be >= 1")
    dims = check_dims(dims)
    offset = {"origin": 0.0, "half": 0.5}.get(center)
    if offset is None:
        raise InvalidArgumentError(f"unknown kernel centre {center!r}")
    # x = j / N, so 16 N^2 |x|^2 = 16 |j|^2 in pixel units
    r2 = sum((c + offset) ** 2 for c in folded_coords(dims))
    g = np.exp(-16.0 * r2 / (k + 1) ** 2)
    return g / g.sum()


def smooth(image, k: int, center: str = "origin") -> np.ndarray:
    img = np.asarray(image, dtype=float)
    return convolve(img, gaussian_kernel(k, img.shape, center))


def gen_smoothed_discs(spec: SceneSpec) -> np.ndarray:
    """Disc scene convolved with ``G_k`` (``k = 0`` returns the discs unchanged)."""
    base = gen_discs(spec)
    k = int(spec.params.get("k", 0))
    return base if k == 0 else smooth(base, k, spec.params.get("kernel_center", "origin"))


@dataclass
class Packet:
    sigma: float
    center: tuple
    wavevector: tuple
    amplitude: float = 1.0


def packet_image(dims, packet: Packet) -> np.ndarray:
    """``A exp(-sigma^2 |j - l|^2) cos(pi <k, j - l> / N)`` with periodic distances.

    Wavevectors are DFT frequency indices.
    """
    coords = lattice_coords(dims)
    r2 = 0.0
    phase = 0.0
    for c, n, l, kk in zip(coords, dims, packet.center, packet.wavevector):
        dj = ((c - l + n // 2) % n) - n // 2
        r2 = r2 + dj.astype(float) ** 2
        phase = phase + 2.0 * np.pi * kk * dj / n
    return packet.amplitude * np.exp(-(packet.sigma**2) * r2) * np.cos(phase)


def default_packets(dims, sigma: float = MICROLOCAL_SIGMA) -> list[Packet]:
    center = tuple(n // 2 for n in dims)
    return [Packet(sigma, center, kk) for kk in MICROLOCAL_WAVEVECTORS]


def spectral_overlaps(components: Sequence[np.ndarray], rtol: float = SPECTRAL_OVERLAP_RTOL):
    """Pairs ``(l, m)`` whose spectral supports (above ``rtol`` of the global max) meet."""
    mags = [np.abs(dft(c)) for c in components]
    top = max(m.max() for m in mags)
    supports = [m > rtol * top for m in mags]
    return [(l, m) for l in range(len(mags)) for m in range(l + 1, len(mags))
            if np.any(supports[l] & supports[m])]


def combine_packets(components: Sequence[np.ndarray], shifts=None, signs=None,
                    inversions=None) -> np.ndarray:
    """``sum_l (-1)^beta_l  T_{v_l} [inverted?] F_l``."""
    n = len(components)
    shifts = shifts or [(0,) * components[0].ndim] * n
    signs = signs or [0] * n
    inversions = inversions or [False] * n
    out = np.zeros_like(components[0])
    for comp, v, b, inv in zip(components, shifts, signs, inversions):
        c = invert_image(comp) if inv else comp
        out += (-1.0) ** b * translate(c, v)
    return out


def gen_microlocal_pair(spec: SceneSpec) -> tuple[np.ndarray, np.ndarray]:
    """Two packet sums with matching magnitude data but no associate relation.

    Params: ``packets`` (list of dicts with sigma/center/wavevector), or
    ``sigma`` for the default four packets; ``shifts``, ``signs`` and
    ``inversions`` describe the second image.
    """
    p = spec.params
    if "packets" in p:
        packets = [Packet(float(q["sigma"]), tuple(q["center"]), tuple(q["wavevector"]),
                          float(q.get("amplitude", 1.0))) for q in p["packets"]]
    else:
        packets = default_packets(spec.dims, float(p.get("sigma", MICROLOCAL_SIGMA)))
    comps = [packet_image(spec.dims, q) for q in packets]
    bad = spectral_overlaps(comps, float(p.get("overlap_rtol", SPECTRAL_OVERLAP_RTOL)))
    if bad:
        raise SpectralOverlapError(f"packets overlap in frequency: {bad}")
    shifts = [tuple(v) for v in p.get("shifts", MICROLOCAL_SHIFTS[:len(comps)])]
    F_a = combine_packets(comps)
    F_b = combine_packets(comps, shifts, p.get("signs"), p.get("inversions"))
    return F_a, F_b


def _rect_factor(rng, dims, start, size, low=0.1):
    out = np.zeros(tuple(dims))
    sl = tuple(slice(s, s + z) for s, z in zip(start, size))
    out[sl] = rng.uniform(low, 1.0, size=tuple(size))
    return out


def _centered_factor(rng, dims, half_width, low=0.1):
    side = [2 * h + 1 for h in half_width]
    block = np.zeros(tuple(dims))
    block[tuple(slice(0, s) for s in side)] = rng.uniform(low, 1.0, size=tuple(side))
    return translate(block, [-h for h in half_width])


def reducible_from_factors(F1, F2) -> tuple[np.ndarray, np.ndarray]:
    """``(F1 * F2, F1 * inverted F2)``: equal magnitude data by construction."""
    return convolve(F1, F2), convolve(F1, invert_image(F2))


def gen_reducible_pair(seed: int, dims=(64, 64), factor1_size=(16, 16), factor2_half=(4, 4),
                       min_separation: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """Non-negative pair ``(F, F')`` from a reducible Z-transform.

    ``F1`` is supported on a rectangle, ``F2`` on an origin-centred rectangle
    of odd sides, so both supports are inversion symmetric while the values
    are not.  Draws whose ``F'`` lies within ``min_separation ||F||`` of an
    associate of ``F`` are redrawn.
    """
    dims = check_dims(dims)
    rng = np.random.default_rng(seed)
    start = [(n - s) // 2 for n, s in zip(dims, factor1_size)]
    for _ in range(MAX_RETRIES):
        F1 = _rect_factor(rng, dims, start, factor1_size)
        F2 = _centered_factor(rng, dims, factor2_half)
        F, Fp = reducible_from_factors(F1, F2)
        # the true supports are Minkowski sums of the factor rectangles; drop FFT round-off
        F = np.where(F > ROUNDOFF_RTOL * F.max(), F, 0.0)
        Fp = np.where(Fp > ROUNDOFF_RTOL * Fp.max(), Fp, 0.0)
        if true_error(Fp, F)[0] > min_separation * np.linalg.norm(F):
            return F, Fp
    raise PlacementError("could not draw a non-degenerate reducible pair")


def polygon_mask(dims: Sequence[int], vertices: Sequence[Sequence[float]]) -> np.ndarray:
    """Even-odd rasterisation of a polygon given by ``(row, col)`` pixel vertices."""
    if len(dims) != 2:
        raise InvalidArgumentError("polygon masks are two-dimensional")
    rr, cc = np.mgrid[0:dims[0], 0:dims[1]]
    inside = np.zeros(tuple(dims), dtype=bool)
    verts = [tuple(map(float, v)) for v in vertices]
    for (r0, c0), (r1, c1) in zip(verts, verts[1:] + verts[:1]):
        crosses = (r0 > rr) != (r1 > rr)
        with np.errstate(divide="ignore", invalid="ignore"):
            c_at = c0 + (rr - r0) * (c1 - c0) / (r1 - r0)
        inside ^= crosses & (cc < c_at)
    return inside


def apply_sharp_mask(image, mask, pad: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Cut ``image`` with ``mask``; return it with the ``pad``-pixel neighbourhood of the mask."""
    m = np.asarray(mask, dtype=bool)
    return np.where(m, np.asarray(image, dtype=float), 0.0), pad_support(m, pad)


def l_shape_reference(dims: Sequence[int], arm: int = 10, width: int = 3,
                      value: float = 1.0) -> np.ndarray:
    """Asymmetric L-shaped constant block anchored at the origin."""
    out = np.zeros(tuple(dims))
    out[:arm, :width] = value
    out[arm - width:arm, :arm - 2] = value
    return out


def add_reference_object(image, reference, offset, eps: float = 1e-10, image_pad: int = 1,
                         reference_pad: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Place a known object at ``offset`` next to ``image``.

    Returns the sum and the support constraint: the ``image_pad``-pixel
    neighbourhood of the image's bounding box together with the
    ``reference_pad``-pixel neighbourhood of the placed reference.
    """
    img = np.asarray(image, dtype=float)
    ref = translate(reference, offset)
    ref_support = ref != 0
    img_support = support_of(img, eps)
    if np.any(ref_support & img_support):
        raise InvalidArgumentError("reference object overlaps the image support")
    mask = pad_support(ref_support, reference_pad)
    if img_support.any():
        mask |= pad_support(box_mask(img.shape, bounding_box(img_support)), image_pad)
    return img + ref, mask


def gen_inversion_symmetric(seed: int, dims, support_size: int) -> np.ndarray:
    """Random image with ``g[-j] = g[j]`` and exactly ``support_size`` non-zero pixels."""
    dims = check_dims(dims)
    total = int(np.prod(dims))
    if not 0 <= support_size <= total:
        raise InvalidArgumentError("support_size out of range")
    rng = np.random.default_rng(seed)
    flat = np.arange(total).reshape(dims)
    conj = invert_image(flat.astype(float)).astype(np.int64)
    dist = sum(np.abs(c) for c in folded_coords(dims))
    order = np.lexsort((rng.random(total), dist.ravel()))
    selfc = flat.ravel() == conj.ravel()
    g = np.zeros(total)
    count = 0
    if support_size % 2:
        g[0] = rng.uniform(0.5, 1.5)
        count = 1
    for idx in order:
        if count >= support_size:
            break
        if selfc[idx] or g[idx] != 0:
            continue
        if support_size - count < 2:
            break
        val = rng.uniform(0.5, 1.5)
        g[idx] = val
        g[conj.ravel()[idx]] = val
        count += 2
    if count != support_size:
        raise PlacementError("could not reach the requested support size")
    return g.reshape(dims)


def generate(spec: SceneSpec):
    """Dispatch on ``spec.family``; pair families return a tuple of images."""
    fam = spec.family
    if fam == "discs":
        return gen_discs(spec)
    if fam == "radial_power":
        return gen_radial_power(spec)
    if fam == "smoothed_discs":
        return gen_smoothed_discs(spec)
    if fam == "microlocal":
        return gen_microlocal_pair(spec)
    if fam == "reducible_pair":
        p = spec.params
        return gen_reducible_pair(spec.seed, spec.dims, tuple(p.get("factor1_size", (16, 16))),
                                  tuple(p.get("factor2_half", (4, 4))))
    if fam == "inversion_symmetric":
        return gen_inversion_symmetric(spec.seed, spec.dims, int(spec.params["support_size"]))
    raise InvalidArgumentError(fam)


def is_small(image, eps: float = 0.0) -> bool:
    return has_small_support(support_of(image, eps) if eps > 0 else np.asarray(image) != 0)
