import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import grid_l1_projection, torus_projection_by_phase_search
from phaseret.errors import InvalidArgumentError
from phaseret.grid import dft, idft
from phaseret.measure import measure
from phaseret.project import (KnownReference, L1Ball, NonNegative, Support, TorusProjector, project_l1ball,
                              project_nonneg, project_support, project_torus, projector, reflect)

rng = np.random.default_rng(11)
img8 = arrays(np.float64, (8, 8), elements=st.floats(-3, 3, allow_nan=False))


def random_torus_point(a, gen):
    return project_torus(a, gen.standard_normal(a.shape))


def test_torus_projection_lands_on_torus_and_is_idempotent():
    a = measure(rng.random((16, 16)))
    P = project_torus(a, rng.standard_normal((16, 16)))
    np.testing.assert_allclose(measure(P), a, rtol=0, atol=1e-10 * a.max())
    np.testing.assert_allclose(project_torus(a, P), P, atol=1e-12)


def test_torus_projection_keeps_phase_and_zero_convention():
    f = rng.standard_normal((8, 8))
    a = measure(rng.standard_normal((8, 8)))
    X = dft(project_torus(a, f))
    phase = dft(f) / np.abs(dft(f))
    np.testing.assert_allclose(X, a * phase, atol=1e-12)
    # zero image has zero spectrum: every phase is taken to be 1
    np.testing.assert_allclose(project_torus(a, np.zeros((8, 8))), idft(a.astype(complex)),
                               atol=1e-12)


def test_torus_projection_matches_phase_search_4x4():
    a = measure(rng.random((4, 4)))
    f = rng.standard_normal((4, 4))
    X = dft(f)
    expected = np.array([torus_projection_by_phase_search(ak, zk) for ak, zk in
                         zip(a.ravel(), X.ravel())]).reshape(4, 4)
    # self-conjugate frequencies have a real coefficient, so only the sign is free
    for k in [(0, 0), (0, 2), (2, 0), (2, 2)]:
        expected[k] = a[k] * np.sign(X[k].real)
    np.testing.assert_allclose(dft(project_torus(a, f)), expected, atol=5e-3 * a.max())
    # the projection beats every sampled torus point
    P = project_torus(a, f)
    gen = np.random.default_rng(0)
    for _ in range(100):
        G = random_torus_point(a, gen)
        assert np.linalg.norm(f - P) <= np.linalg.norm(f - G) + 1e-12


def test_torus_shape_mismatch():
    with pytest.raises(InvalidArgumentError):
        project_torus(np.ones((4, 4)), np.zeros((4, 6)))


def test_support_projection():
    f = rng.standard_normal((8, 8))
    g = rng.standard_normal((8, 8))
    m = rng.random((8, 8)) > 0.5
    np.testing.assert_array_equal(project_support(np.ones((8, 8), bool), f), f)
    assert not project_support(np.zeros((8, 8), bool), f).any()
    P = project_support(m, f)
    assert abs(np.vdot(f - P, project_support(m, g))) < 1e-12
    np.testing.assert_array_equal(project_support(m, P), P)


def test_nonneg_projection_is_exhaustive_optimum_2x2():
    for _ in range(20):
        f = rng.standard_normal((2, 2))
        # closest orthant point: search over which coordinates are clamped to zero
        best = min((np.linalg.norm(f - np.where(np.array(p).reshape(2, 2), np.maximum(f, 0), 0)), p)
                   for p in itertools.product([0, 1], repeat=4))
        assert abs(np.linalg.norm(f - project_nonneg(f)) - best[0]) < 1e-15
    np.testing.assert_array_equal(project_nonneg(np.abs(f)), np.abs(f))
    assert not project_nonneg(-np.abs(f) - 1).any()


def test_l1_hand_example():
    np.testing.assert_allclose(project_l1ball(2.0, np.array([3.0, 1.0])), [2.0, 0.0])
    y = np.array([0.5, -0.2])
    np.testing.assert_array_equal(project_l1ball(1.0, y), y)


@pytest.mark.parametrize("seed", range(10))
def test_l1_matches_grid_search(seed):
    g = np.random.default_rng(seed)
    y = g.standard_normal(3) * 3
    r = float(g.uniform(0.1, 2.0))
    np.testing.assert_allclose(project_l1ball(r, y), grid_l1_projection(y, r), atol=1e-6)


def test_l1_radius_must_be_positive():
    with pytest.raises(InvalidArgumentError):
        L1Ball(0.0)
    with pytest.raises(InvalidArgumentError):
        project_l1ball(-1.0, np.ones(3))


@settings(max_examples=25, deadline=None)
@given(img8, st.floats(0.1, 20))
def test_projections_idempotent_and_proximal(f, radius):
    mask = np.zeros((8, 8), bool)
    mask[:3, 2:6] = True
    gen = np.random.default_rng(1)
    for c in (Support(mask), NonNegative(), L1Ball(radius)):
        P = projector(c)
        p = P(f)
        np.testing.assert_allclose(P(p), p, atol=1e-12)
        for _ in range(100):
            G = P(gen.standard_normal((8, 8)) * 3)
            assert np.linalg.norm(f - p) <= np.linalg.norm(f - G) + 1e-12
        if isinstance(c, L1Ball):
            assert np.abs(p).sum() <= radius * (1 + 1e-12)


def test_reflect():
    f = rng.standard_normal((8, 8))
    full = projector(Support(np.ones((8, 8), bool)))
    np.testing.assert_array_equal(reflect(full, f), f)
    P = projector(Support(rng.random((8, 8)) > 0.4))
    np.testing.assert_allclose(reflect(P, reflect(P, f)), f, atol=1e-12)
    fixed = P(f)
    np.testing.assert_allclose(reflect(P, fixed), fixed, atol=1e-15)
    assert not np.allclose(reflect(P, f), f)


def test_l1_minimal_on_torus_at_nonnegative_image():
    F = rng.random((16, 16)) * (rng.random((16, 16)) > 0.6)
    assert abs(dft(F)[0, 0].real - np.abs(F).sum()) < 1e-12 * np.abs(F).sum()
    a = measure(F)
    P = TorusProjector(a)
    gen = np.random.default_rng(5)
    for i in range(200):
        # random phase perturbation of F that stays on the torus
        noise = gen.standard_normal((16, 16)) * (0.5 if i % 2 else 0.01)
        G = P(F + noise)
        assert np.abs(G).sum() >= np.abs(F).sum() - 1e-9


@settings(max_examples=50, deadline=None)
@given(img8)
def test_known_reference_projection_is_closest_point(f):
    mask = np.zeros((8, 8), bool)
    mask[1:5, 1:6] = True
    known = np.zeros_like(mask)
    known[1, 1:4] = True
    values = np.where(known, 2.0, 0.0)
    P = projector(KnownReference(mask, known, values))
    g = P(f)
    assert np.array_equal(g[known], values[known])
    assert np.all(g[~mask] == 0)
    assert np.array_equal(g[mask & ~known], f[mask & ~known])
    assert np.array_equal(P(g), g)
    # any other member of the set is at least as far away
    other = g + np.where(mask & ~known, rng.standard_normal((8, 8)), 0.0)
    assert np.linalg.norm(f - g) <= np.linalg.norm(f - other) + 1e-12


def test_known_reference_rejects_bad_masks():
    mask = np.zeros((4, 4), bool)
    known = np.zeros((4, 4), bool)
    known[0, 0] = True
    with pytest.raises(InvalidArgumentError):
        KnownReference(mask, known, np.ones((4, 4)))
    with pytest.raises(InvalidArgumentError):
        KnownReference(mask, known[:3], np.ones((4, 4)))
