import numpy as np
import pytest

from gpi_isac import (
    AngularGrid,
    BeamMask,
    RadarScene,
    UlaArray,
    rect_mask,
    steering_vector,
    target_matrices,
    uniform_grid,
)
from oracles import steering


def test_broadside_steering_is_all_ones():
    np.testing.assert_allclose(steering_vector(UlaArray(4), 0.0), np.ones(4))


def test_endfire_phase_step():
    np.testing.assert_allclose(steering_vector(UlaArray(2), np.pi / 2), [1, -1], atol=1e-15)


def test_steering_norm():
    a = steering_vector(UlaArray(8), np.pi / 6)
    assert np.vdot(a, a).real == pytest.approx(8.0, abs=1e-12)


@pytest.mark.parametrize("spacing", [0.25, 0.5, 0.7])
def test_steering_matches_loop(spacing):
    arr = UlaArray(6, spacing)
    for theta in np.linspace(-1.5, 1.5, 7):
        np.testing.assert_allclose(arr.steering(theta), steering(6, spacing, theta), atol=1e-12)
    batch = arr.steering(np.array([0.1, -0.4]))
    assert batch.shape == (2, 6)
    np.testing.assert_allclose(batch[1], steering(6, spacing, -0.4), atol=1e-12)


def test_steering_rejects_nonfinite():
    with pytest.raises(ValueError):
        steering_vector(UlaArray(4), np.nan)


@pytest.mark.parametrize("n,spacing", [(0, 0.5), (3, 0.0), (2.5, 0.5)])
def test_array_validation(n, spacing):
    with pytest.raises(ValueError):
        UlaArray(n, spacing)


def test_uniform_grid_small():
    np.testing.assert_allclose(uniform_grid(2).angles, [-np.pi / 2, np.pi / 2])
    np.testing.assert_allclose(uniform_grid(3).angles, [-np.pi / 2, 0, np.pi / 2], atol=1e-15)


def test_uniform_grid_256():
    g = uniform_grid(256)
    assert len(g) == 256
    assert g.angles[0] == -np.pi / 2 and g.angles[-1] == np.pi / 2
    np.testing.assert_allclose(np.diff(g.angles), np.pi / 255, rtol=1e-12)


def test_uniform_grid_rejects_one_point():
    with pytest.raises(ValueError):
        uniform_grid(1)


@pytest.mark.parametrize("angles", [[0.2, 0.1], [0.0, 0.0], [0.0, 2.0], []])
def test_grid_validation(angles):
    with pytest.raises(ValueError):
        AngularGrid(angles)


def test_grid_is_read_only():
    g = uniform_grid(4)
    with pytest.raises(ValueError):
        g.angles[0] = 0.0


def test_rect_mask_small():
    m = rect_mask(uniform_grid(3), [0.0], 0.1)
    np.testing.assert_array_equal(m.values, [0, 1, 0])


def test_rect_mask_empty_centers():
    m = rect_mask(uniform_grid(16), [], 0.3)
    assert m.is_zero


def test_rect_mask_three_plateaus():
    g = uniform_grid(256)
    m = rect_mask(g, [-np.pi / 4, 0, np.pi / 4], np.pi / 12)
    edges = np.flatnonzero(np.diff(m.values))
    assert edges.size == 6  # three rising and three falling edges
    for c in (-np.pi / 4, 0, np.pi / 4):
        inside = np.abs(g.angles - c) <= np.pi / 12
        assert np.all(m.values[inside] == 1)


def test_rect_mask_idempotent():
    g = uniform_grid(64)
    m1 = rect_mask(g, [0.3, -0.2], 0.1)
    m2 = rect_mask(g, [0.3, -0.2, 0.3, -0.2], 0.1)
    np.testing.assert_array_equal(m1.values, m2.values)


def test_mask_validation():
    g = uniform_grid(4)
    with pytest.raises(ValueError):
        BeamMask(g, [0, 0, 1])
    with pytest.raises(ValueError):
        BeamMask(g, [0, 0, 1.5, 0])
    with pytest.raises(ValueError):
        rect_mask(g, [0.0], 0.0)


def test_target_matrix_single_broadside():
    g_tar, g_cl = target_matrices(RadarScene(((0.0, 1.0),)), UlaArray(2))
    np.testing.assert_allclose(g_tar, np.ones((2, 2)))
    np.testing.assert_array_equal(g_cl, np.zeros((2, 2)))


def test_target_matrix_two_targets():
    arr = UlaArray(4)
    scene = RadarScene(((np.pi / 4, 1.0), (-np.pi / 4, 1.0)))
    g_tar, _ = target_matrices(scene, arr)
    expected = sum(np.outer(steering(4, 0.5, t), steering(4, 0.5, t).conj())
                   for t in (np.pi / 4, -np.pi / 4))
    np.testing.assert_allclose(g_tar, expected, atol=1e-12)


def test_target_matrix_rank(rng):
    arr = UlaArray(6)
    angles = rng.uniform(-1.4, 1.4, 9)
    coeffs = rng.standard_normal(9) + 1j * rng.standard_normal(9)
    scene = RadarScene(tuple(zip(angles[:2], coeffs[:2])), tuple(zip(angles[2:], coeffs[2:])))
    g_tar, g_cl = target_matrices(scene, arr)
    rank = lambda m: int(np.sum(np.linalg.svd(m, compute_uv=False) > 1e-10))  # noqa: E731
    assert rank(g_tar) <= 2
    assert rank(g_cl) <= 6


def test_scene_validation():
    with pytest.raises(ValueError):
        RadarScene(((2.0, 1.0),))
    with pytest.raises(ValueError):
        RadarScene().require_target()
    s = RadarScene(((0.1, 1),), ((0.2, 0.5j),))
    assert s.target_angles == [0.1] and s.clutter_angles == [0.2]
