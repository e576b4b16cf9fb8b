import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import naive_convolve
from phaseret.errors import InvalidArgumentError, PlacementError, SpectralOverlapError
from phaseret.grid import dft, invert_image, translate
from phaseret.measure import bounding_box, has_small_support, measure, true_error
from phaseret.synth import (FAMILIES, Packet, SceneSpec, add_reference_object, apply_sharp_mask,
                            combine_packets, default_box, gaussian_kernel, gen_discs,
                            gen_inversion_symmetric, gen_microlocal_pair, gen_radial_power,
                            gen_reducible_pair, generate, is_small, l_shape_reference,
                            packet_image, polygon_mask, reducible_from_factors, smooth,
                            spectral_overlaps)


def disc(center_px, radius_px, intensity, n):
    half = n // 2
    return {"center": [c / half for c in center_px], "radius": radius_px / half,
            "intensity": intensity}


# ----------------------------------------------------------------- discs


def test_single_pixel_disc():
    F = gen_discs(SceneSpec("discs", (32, 32), params={"discs": [disc((10, 12), 0.5, 1.3, 32)]}))
    assert np.count_nonzero(F) == 1
    assert F[10, 12] == 1.3


def test_disjoint_discs_l1_is_weighted_pixel_count():
    n = 64
    discs = [disc((16, 16), 3.2, 0.7, n), disc((40, 20), 4.1, 1.2, n), disc((30, 45), 2.5, 1.0, n)]
    F = gen_discs(SceneSpec("discs", (n, n), params={"discs": discs}))
    rr, cc = np.mgrid[0:n, 0:n]
    expected = 0.0
    for d in discs:
        (r0, c0), rad = [c * (n // 2) for c in d["center"]], d["radius"] * (n // 2)
        expected += d["intensity"] * np.count_nonzero((rr - r0) ** 2 + (cc - c0) ** 2 <= rad**2)
    assert np.isclose(np.abs(F).sum(), expected, rtol=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_discs_fit_support_box(seed):
    dims = (64, 48)
    F = gen_discs(SceneSpec("discs", dims, seed))
    box = default_box(dims)
    rows, cols = np.nonzero(F)
    (r0, h), (c0, w) = box
    assert rows.min() >= r0 and rows.max() < r0 + h
    assert cols.min() >= c0 and cols.max() < c0 + w
    assert is_small(F) and has_small_support(F != 0)


def test_discs_are_deterministic():
    spec = SceneSpec("discs", (64, 64), seed=7)
    assert np.array_equal(gen_discs(spec), gen_discs(spec))
    assert not np.array_equal(gen_discs(spec), gen_discs(SceneSpec("discs", (64, 64), seed=8)))


def test_infeasible_placement_raises():
    with pytest.raises(PlacementError):
        gen_discs(SceneSpec("discs", (64, 64), params={"box_side": 2, "radius": (0.5, 0.6)}))


# -------------------------------------------------------------- smoothing


@pytest.mark.parametrize("k", [1, 3, 6])
@pytest.mark.parametrize("center", ["origin", "half"])
def test_kernel_normalised(k, center):
    G = gaussian_kernel(k, (32, 32), center)
    assert abs(G.sum() - 1) < 1e-12 and G.min() >= 0


@pytest.mark.parametrize("k", [1, 4])
def test_kernel_inversion_symmetric(k):
    G = gaussian_kernel(k, (32, 32))
    assert np.array_equal(invert_image(G), G)


def test_half_kernel_symmetric_about_half_pixel_and_vanishes_on_nyquist():
    G = gaussian_kernel(3, (16, 16), "half")
    # g[j] = g[-1 - j]
    assert np.array_equal(G, G[::-1, ::-1])
    g = dft(G)
    assert np.abs(g[8, :]).max() < 1e-15 and np.abs(g[:, 8]).max() < 1e-15


def test_kernel_support_grows_with_k():
    widths = []
    for k in (1, 2, 4, 6):
        G = gaussian_kernel(k, (32, 32))
        (_, w), _ = bounding_box(G >= 1e-14 * G.max())
        widths.append(w)
    assert widths == sorted(widths) and widths[0] < widths[-1] < 32
    G1 = gaussian_kernel(1, (32, 32))
    (r0, w), _ = bounding_box(G1 >= 1e-14 * G1.max())
    assert w <= 7 and (r0 + w // 2) % 32 == 0


def test_smooth_delta_is_kernel():
    d = np.zeros((16, 16))
    d[0, 0] = 1.0
    assert np.allclose(smooth(d, 2), gaussian_kernel(2, (16, 16)), atol=1e-15)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_smooth_preserves_mass_of_nonnegative(seed, k):
    F = np.random.default_rng(seed).uniform(0, 1, (12, 12))
    assert np.isclose(smooth(F, k).sum(), F.sum(), rtol=1e-12)


def test_smooth_matches_direct_convolution():
    F = np.random.default_rng(3).uniform(0, 1, (8, 8))
    assert np.allclose(smooth(F, 2), naive_convolve(F, gaussian_kernel(2, (8, 8))), atol=1e-12)


def test_smoothing_attenuates_spectrum_by_kernel():
    F = gen_discs(SceneSpec("discs", (32, 32), seed=2))
    k = 3
    lhs = dft(smooth(F, k))
    rhs = dft(F) * dft(gaussian_kernel(k, F.shape))
    assert np.abs(lhs - rhs).max() < 1e-10 * np.abs(rhs).max()


def test_kernel_rejects_k0():
    with pytest.raises(InvalidArgumentError):
        gaussian_kernel(0, (8, 8))


# ---------------------------------------------------------- radial powers


def test_radial_power_k0_is_discs():
    spec = SceneSpec("radial_power", (64, 64), seed=4, params={"k": 0})
    assert np.array_equal(gen_radial_power(spec), gen_discs(spec))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_radial_power_vanishes_at_centre_and_matches_formula(k):
    n = 32
    discs = [disc((10, 11), 4.0, 0.8, n), disc((22, 20), 3.0, 1.4, n)]
    F = gen_radial_power(SceneSpec("radial_power", (n, n), params={"k": k, "discs": discs}))
    assert F[10, 11] == 0 and F[22, 20] == 0
    x = np.mgrid[0:n, 0:n] / (n // 2)
    expected = np.zeros((n, n))
    for d in discs:
        dist = np.sqrt(((x - np.array(d["center"])[:, None, None]) ** 2).sum(0))
        expected += np.where(dist <= d["radius"], d["intensity"] * dist**k, 0.0)
    assert np.allclose(F, expected, atol=1e-15)


# -------------------------------------------------------------- microlocal


def test_microlocal_zero_shift_is_identity():
    Fa, Fb = gen_microlocal_pair(SceneSpec("microlocal", (512, 512),
                                           params={"shifts": [[0, 0]] * 4}))
    assert np.array_equal(Fa, Fb)


def test_microlocal_pair_matches_data():
    Fa, Fb = gen_microlocal_pair(SceneSpec("microlocal", (512, 512)))
    a, b = measure(Fa), measure(Fb)
    assert np.abs(a - b).max() < 1e-14 * a.max()
    assert true_error(Fb, Fa)[0] > 0.1 * np.linalg.norm(Fa)


def test_single_packet_translation_is_associate():
    comp = packet_image((128, 128), Packet(0.1, (64, 64), (10, 7)))
    moved = combine_packets([comp], [(5, -3)])
    assert np.abs(measure(comp) - measure(moved)).max() < 1e-15 * measure(comp).max()
    assert true_error(moved, comp)[0] < 1e-12


def test_microlocal_overlap_raises():
    spec = SceneSpec("microlocal", (128, 128), params={"packets": [
        {"sigma": 0.05, "center": [64, 64], "wavevector": [0, 0]},
        {"sigma": 0.05, "center": [64, 64], "wavevector": [2, 0]}]})
    with pytest.raises(SpectralOverlapError):
        gen_microlocal_pair(spec)


def test_spectral_overlaps_lists_pairs():
    comps = [packet_image((64, 64), Packet(0.3, (32, 32), kk)) for kk in ((0, 0), (1, 0), (20, 20))]
    assert (0, 1) in spectral_overlaps(comps)


def test_reference_breaks_microlocal_symmetry():
    n = 512
    Fa, Fb = gen_microlocal_pair(SceneSpec("microlocal", (n, n)))
    ref = translate(l_shape_reference((n, n), value=Fa.max()), (n // 2 + 40, n // 2 + 40))
    a, b = measure(Fa + ref), measure(Fb + ref)
    assert np.abs(a - b).max() >= 1e-6 * a.max()


# ---------------------------------------------------------- reducible pair


@pytest.mark.parametrize("seed", range(3))
def test_reducible_pair(seed):
    F, Fp = gen_reducible_pair(seed)
    assert F.min() >= 0 and Fp.min() >= 0
    a = measure(F)
    assert np.abs(a - measure(Fp)).max() <= 1e-12 * a.max()
    assert true_error(Fp, F)[0] > 0.05 * np.linalg.norm(F)
    assert bounding_box(F != 0) == bounding_box(Fp != 0)
    assert is_small(F)


def test_symmetric_factor_gives_identical_pair():
    rng = np.random.default_rng(0)
    F1 = np.zeros((16, 16))
    F1[4:8, 5:9] = rng.uniform(0.1, 1, (4, 4))
    F2 = np.zeros((16, 16))
    F2[0, 0] = 2.0
    F2[1, 0] = F2[-1, 0] = 0.5
    F, Fp = reducible_from_factors(F1, F2)
    assert np.allclose(F, Fp, atol=1e-14)


# ---------------------------------------------------- masks and references


def test_full_mask_is_identity():
    F = gen_discs(SceneSpec("discs", (32, 32), seed=1))
    G, S = apply_sharp_mask(F, np.ones(F.shape, bool))
    assert np.array_equal(G, F) and S.all()


def test_polygon_mask_cut():
    F = smooth(gen_discs(SceneSpec("discs", (64, 64), seed=1)), 3)
    mask = polygon_mask(F.shape, [(18, 16), (16, 34), (28, 44), (46, 40), (45, 22)])
    assert not np.array_equal(mask, invert_image(mask.astype(float)).astype(bool))
    G, S = apply_sharp_mask(F, mask)
    assert np.array_equal(G != 0, mask & (F != 0))
    assert S[mask].all() and S.sum() > mask.sum()


def test_polygon_mask_square():
    m = polygon_mask((10, 10), [(2, 2), (2, 6), (6, 6), (6, 2)])
    assert m.sum() == 16 and m[2:6, 2:6].all()


def test_reference_on_zero_image():
    ref = l_shape_reference((32, 32))
    G, S = add_reference_object(np.zeros((32, 32)), ref, (5, 7))
    placed = translate(ref, (5, 7))
    assert np.array_equal(G, placed)
    assert S[placed != 0].all() and not S[0, 0] and S.sum() > (placed != 0).sum()


def test_reference_support_includes_image_box():
    F = gen_discs(SceneSpec("discs", (64, 64), seed=1))
    G, S = add_reference_object(F, l_shape_reference((64, 64)), (50, 50))
    (r0, h), (c0, w) = bounding_box(F != 0)
    assert S[r0 - 1:r0 + h + 1, c0 - 1:c0 + w + 1].all()
    assert np.array_equal(G - F, translate(l_shape_reference((64, 64)), (50, 50)))


def test_reference_overlap_raises():
    F = gen_discs(SceneSpec("discs", (64, 64), seed=1))
    r, c = np.argwhere(F != 0)[0]
    with pytest.raises(InvalidArgumentError):
        add_reference_object(F, l_shape_reference((64, 64)), (r, c))


def test_l_shape_has_no_inversion_symmetry():
    ref = l_shape_reference((32, 32))
    for v in np.ndindex(32, 32):
        assert not np.array_equal(translate(invert_image(ref), v), ref)


# ------------------------------------------------------- inversion symmetric


@pytest.mark.parametrize("size", [0, 1, 6, 9, 40])
def test_inversion_symmetric(size):
    g = gen_inversion_symmetric(3, (16, 16), size)
    assert np.array_equal(invert_image(g), g)
    assert np.abs(dft(g).imag).max() < 1e-12
    assert np.count_nonzero(g) == size


# ----------------------------------------------------------------- specs


def test_scene_spec_json_roundtrip():
    spec = SceneSpec("smoothed_discs", (64, 32), 5, {"k": 3, "box_side": 12})
    back = SceneSpec.from_json(spec.to_json())
    assert back == spec
    assert json.loads(spec.to_json())["dims"] == [64, 32]


def test_scene_spec_rejects_unknown():
    with pytest.raises(InvalidArgumentError):
        SceneSpec("blobs", (8, 8))
    with pytest.raises(InvalidArgumentError):
        SceneSpec.from_dict({"family": "discs", "dims": [8, 8], "colour": 1})


@pytest.mark.parametrize("family", FAMILIES)
def test_generate_is_deterministic(family):
    params = {"support_size": 10} if family == "inversion_symmetric" else {}
    dims = (512, 512) if family == "microlocal" else (64, 64)
    spec = SceneSpec(family, dims, 2, params)
    a, b = generate(spec), generate(spec)
    assert np.array_equal(np.asarray(a), np.asarray(b))


@pytest.mark.parametrize("family", ["discs", "radial_power"])
def test_small_support_families(family):
    assert is_small(generate(SceneSpec(family, (64, 64), 3, {"k": 2})))
