import numpy as np
import pytest

from facademap.dataset import PipelineConfig
from facademap.masks import (
    disc_dilate,
    disc_erode,
    feather_contours,
    occlusion_masks,
    rasterize_points,
)

from conftest import brute_dilate, brute_erode, disc_offsets, identity_camera


def cam_plain(width=480, height=270):
    # fx=fy=1, principal point at the origin: world (x, y, 1) projects to (x, y)
    return identity_camera(fx=1, fy=1, cx=0, cy=0, width=width, height=height)


def test_rasterize_rounds_half_up():
    cam = cam_plain()
    mask = rasterize_points(cam, np.array([[100.4, 200.6, 1.0]]))
    assert mask[201, 100]
    assert mask.sum() == 1


def test_rasterize_skips_behind_and_outside():
    cam = cam_plain()
    pts = np.array(
        [
            [10.0, 10.0, -1.0],  # behind
            [500.0, 10.0, 1.0],  # right of frame
            [-0.2, 10.0, 1.0],  # left of frame (continuous out)
            [479.8, 10.0, 1.0],  # in frame but rounds to column 480
        ]
    )
    mask = rasterize_points(cam, pts)
    assert mask.sum() == 0


def test_rasterize_cube_group_at_edge():
    from facademap.dataset import PipelineConfig
    from facademap.geometry import project_points
    from facademap.occlusion import OccluderSet, cube_dilate

    cam = cam_plain()
    center = np.array([[4790.0, 1000.0, 10.0]])  # projects to (479, 100), right edge
    occ = OccluderSet(1, center, np.zeros(1, bool), np.array([0]))
    group = cube_dilate(occ, 1.5)
    mask = rasterize_points(cam, group.points)
    # oracle: project each of the 9 points and keep the in-frame ones
    uv, valid = project_points(cam, group.points)
    expected = set()
    for (u, v), ok in zip(uv, valid):
        if ok and 0 <= u < cam.width and 0 <= v < cam.height:
            c, r = int(np.floor(u + 0.5)), int(np.floor(v + 0.5))
            if c < cam.width and r < cam.height:
                expected.add((r, c))
    assert 0 < len(expected) < 9  # some corners fall off frame
    assert set(map(tuple, np.argwhere(mask))) == expected


def test_rasterize_multiple_points():
    cam = cam_plain()
    pts = np.array([[10.2, 20.2, 1.0], [10.4, 20.4, 1.0], [30.0, 40.0, 1.0]])
    mask = rasterize_points(cam, pts)
    assert mask[20, 10] and mask[40, 30]
    assert mask.sum() == 2


def test_dilate_single_pixel_is_lattice_disc():
    r = 11
    mask = np.zeros((40, 40), bool)
    mask[20, 20] = True
    out = disc_dilate(mask, r)
    assert out.sum() == len(disc_offsets(r))  # brute-force lattice count
    np.testing.assert_array_equal(out, brute_dilate(mask, r))


def test_dilate_distributes_over_union(rng):
    a = rng.random((50, 60)) < 0.02
    b = rng.random((50, 60)) < 0.02
    r = 6
    np.testing.assert_array_equal(
        disc_dilate(a | b, r), disc_dilate(a, r) | disc_dilate(b, r)
    )


def test_dilate_empty():
    assert disc_dilate(np.zeros((10, 10), bool), 5).sum() == 0


def test_erode_border_band():
    full = np.ones((60, 60), bool)
    out = disc_erode(full, 20)
    assert not out[:20, :].any() and not out[:, :20].any()
    assert not out[-20:, :].any() and not out[:, -20:].any()
    assert out[30, 30]
    np.testing.assert_array_equal(out, brute_erode(full, 20))


def test_erode_empty():
    assert disc_erode(np.zeros((10, 10), bool), 3).sum() == 0


def test_point_opening_matches_brute_force():
    # dilate then erode with unequal radii, away from borders
    mask = np.zeros((61, 61), bool)
    mask[30, 30] = True
    got = disc_erode(disc_dilate(mask, 12), 5)
    expected = brute_erode(brute_dilate(mask, 12), 5)
    np.testing.assert_array_equal(got, expected)
    assert got[30, 30]  # the seed survives since erode_r < dilate_r


def test_random_masks_match_brute_force(rng):
    for _ in range(8):
        mask = rng.random((40, 55)) < rng.uniform(0.002, 0.6)
        for r in (1, 3, 8):
            np.testing.assert_array_equal(disc_dilate(mask, r), brute_dilate(mask, r))
            np.testing.assert_array_equal(disc_erode(mask, r), brute_erode(mask, r))


def test_extensivity_and_antiextensivity(rng):
    mask = rng.random((48, 48)) < 0.1
    r = 4
    dil = disc_dilate(mask, r)
    ero = disc_erode(mask, r)
    assert np.all(dil[mask])  # input subset of dilation
    assert np.all(mask[ero])  # erosion subset of input


def test_classical_opening_idempotent(rng):
    for _ in range(10):
        mask = rng.random((64, 64)) < rng.uniform(0.02, 0.5)
        r = int(rng.integers(2, 8))
        opened = disc_dilate(disc_erode(mask, r), r)
        again = disc_dilate(disc_erode(opened, r), r)
        np.testing.assert_array_equal(opened, again)


def test_feather_w0_equals_hard(rng):
    mask = rng.random((30, 30)) < 0.3
    np.testing.assert_array_equal(feather_contours(mask, 0), mask.astype(np.float32))


def test_feather_interior_and_boundary():
    mask = np.zeros((60, 60), bool)
    mask[10:50, 10:50] = True
    soft = feather_contours(mask, 10)
    assert soft[30, 30] == 1.0  # deep interior
    assert soft[10, 30] == pytest.approx(0.1)  # on the set boundary, distance 1
    assert soft[9, 30] == 0.0  # outside the mask
    assert soft[19, 30] == pytest.approx(1.0)  # distance 10 -> ramp complete


def test_feather_monotone_to_exterior():
    mask = np.zeros((60, 60), bool)
    mask[10:50, 10:50] = True
    soft = feather_contours(mask, 12)
    row = soft[30, 30:]
    assert np.all(np.diff(row) <= 1e-9)


def test_feather_weights_in_range(rng):
    mask = rng.random((40, 40)) < 0.5
    soft = feather_contours(mask, 7)
    assert soft.min() >= 0.0 and soft.max() <= 1.0
    assert np.all(soft[~mask] == 0.0)


def test_occlusion_masks_cover_seeds(rng):
    cfg = PipelineConfig(dilate_r=12, erode_r=5, feather_w=3).validate()
    cam = cam_plain(width=200, height=150)
    pts = np.column_stack(
        [rng.uniform(20, 180, 15), rng.uniform(20, 130, 15), np.ones(15)]
    )
    hard, soft = occlusion_masks(cam, pts, cfg)
    seeds = rasterize_points(cam, pts)
    assert np.all(hard[seeds])  # every projected occluder pixel is covered
    assert np.all(soft[~hard] == 0.0)
    assert soft.max() <= 1.0
