import math

import numpy as np
import pytest

from facademap.dataset import LaserFrame, PipelineConfig
from facademap.facades import (
    DegenerateClusterError,
    assemble_quad,
    bottom_altitude,
    fit_vertical_plane,
    project_endpoints,
    top_altitude,
)
from facademap.geometry import Point3, Segment2, VerticalPlane, signed_plane_distance

CFG = PipelineConfig()


def sse(plane, pts):
    d = signed_plane_distance(plane, pts)
    return float(np.sum(d * d))


def test_fit_exact_wall():
    pts = np.array([[3.0, y, z] for y in range(5) for z in range(3)])
    sensors = np.array([[10.0, 2.0, 2.5]])
    plane = fit_vertical_plane(pts, sensors)
    assert abs(plane.nx) == pytest.approx(1.0)
    assert plane.ny == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(signed_plane_distance(plane, pts), 0.0, atol=1e-9)
    # street side: sensor at x=10 must be on the positive side
    assert signed_plane_distance(plane, Point3(10, 2, 2.5)) > 0


def test_fit_residuals_match_noise(rng):
    sigma = 0.03
    ys = rng.uniform(0, 20, 1000)
    pts = np.column_stack(
        [3.0 + rng.normal(0, sigma, 1000), ys + rng.normal(0, sigma, 1000), rng.uniform(0, 8, 1000)]
    )
    plane = fit_vertical_plane(pts)
    rms = math.sqrt(sse(plane, pts) / 1000)
    assert 0.5 * sigma <= rms <= 1.5 * sigma


def test_fit_rotation_equivariance(rng):
    pts = np.column_stack(
        [np.full(200, 3.0) + rng.normal(0, 0.02, 200), rng.uniform(0, 10, 200), np.zeros(200)]
    )
    p0 = fit_vertical_plane(pts)
    ang = math.radians(30)
    rot = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
    pts_rot = pts.copy()
    pts_rot[:, :2] = pts[:, :2] @ rot.T
    p1 = fit_vertical_plane(pts_rot)
    n0 = rot @ np.array([p0.nx, p0.ny])
    flip = np.sign(np.dot(n0, [p1.nx, p1.ny]))
    np.testing.assert_allclose(flip * np.array([p1.nx, p1.ny]), n0, atol=1e-9)


def test_fit_degenerate_cases():
    with pytest.raises(DegenerateClusterError):
        fit_vertical_plane(np.array([[1.0, 1.0, 0.0]]))
    same = np.tile([2.0, 3.0, 0.0], (10, 1))
    same[:, 2] = np.arange(10)  # planimetrically identical
    with pytest.raises(DegenerateClusterError):
        fit_vertical_plane(same)
    square = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float)
    with pytest.raises(DegenerateClusterError):
        fit_vertical_plane(square)  # isotropic covariance


def test_fit_tls_optimality(rng):
    pts = np.column_stack(
        [rng.normal(0, 0.05, 300), rng.uniform(0, 12, 300), rng.uniform(0, 5, 300)]
    )
    pts[:, 0] += 3.0
    plane = fit_vertical_plane(pts)
    base = sse(plane, pts)
    ang = math.atan2(plane.ny, plane.nx)
    for dang in (-0.01, 0.01):
        tilted = VerticalPlane(math.cos(ang + dang), math.sin(ang + dang), plane.d)
        # keep the offset optimal for the tilted normal (centroid projection)
        c = pts[:, :2].mean(axis=0)
        tilted = VerticalPlane(tilted.nx, tilted.ny, tilted.nx * c[0] + tilted.ny * c[1])
        assert sse(tilted, pts) >= base - 1e-9
    for dd in (-0.001, 0.001):
        shifted = VerticalPlane(plane.nx, plane.ny, plane.d + dd)
        assert sse(shifted, pts) >= base - 1e-9


def test_project_endpoints_axis():
    plane = VerticalPlane(1, 0, 3)
    e1, e2 = project_endpoints(plane, Segment2(1, (2.8, 0), (3.2, 10)))
    np.testing.assert_allclose(e1, [3, 0], atol=1e-12)
    np.testing.assert_allclose(e2, [3, 10], atol=1e-12)


def test_project_endpoint_already_on_plane():
    plane = VerticalPlane(1, 0, 3)
    e1, _ = project_endpoints(plane, Segment2(1, (3.0, 1.0), (3.0, 9.0)))
    np.testing.assert_allclose(e1, [3, 1], atol=1e-15)


def test_project_endpoints_oblique():
    plane = VerticalPlane(0.6, 0.8, 5)
    # oracle: t = 0.6*10 + 0.8*0 - 5 = 1, e = (10,0) - 1*(0.6, 0.8)
    e1, _ = project_endpoints(plane, Segment2(1, (10, 0), (0, 10)))
    np.testing.assert_allclose(e1, [9.4, -0.8], atol=1e-12)
    assert signed_plane_distance(plane, e1) == pytest.approx(0.0, abs=1e-12)


def test_project_perpendicular_segment_degenerate():
    plane = VerticalPlane(1, 0, 3)
    with pytest.raises(DegenerateClusterError):
        project_endpoints(plane, Segment2(1, (0, 5), (10, 5)))


def frames_at(zs):
    return {i: LaserFrame(i, Point3(0, 0, z)) for i, z in enumerate(zs)}


def test_bottom_altitude_mean():
    frames = frames_at([52.0, 52.2])
    assert bottom_altitude([0, 1], frames, CFG) == pytest.approx(49.75)


def test_bottom_altitude_single_frame():
    frames = frames_at([10.0])
    assert bottom_altitude([0], frames, CFG) == pytest.approx(7.65)


def test_bottom_altitude_dedup():
    frames = frames_at([52.0, 52.2])
    dup = bottom_altitude([0, 0, 0, 1], frames, CFG)
    once = bottom_altitude([0, 1], frames, CFG)
    assert dup == once


def test_bottom_altitude_occlusion_invariance(rng):
    frames = frames_at(rng.uniform(9, 11, 30))
    fids = np.repeat(np.arange(30), 10)
    full = bottom_altitude(fids, frames, CFG)
    # drop 70% of the entries but keep every distinct frame id
    keep = np.concatenate([np.arange(30) * 10, rng.permutation(300)[:60]])
    reduced = bottom_altitude(fids[np.unique(keep)], frames, CFG)
    assert reduced == full


def test_top_altitude_flat():
    z = np.array([10.0, 10.0, 10.0])
    fids = np.array([0, 1, 2])
    z_top, profile, lod = top_altitude(z, fids, 0.25)
    assert (z_top, lod) == (10.0, "smooth")
    assert profile.msd == 0.0


def test_top_altitude_detailed():
    z = np.array([8.0, 10.0, 12.0])
    fids = np.array([0, 1, 2])
    z_top, profile, lod = top_altitude(z, fids, 0.25)
    # oracle: mean 10, msd = (4 + 0 + 4) / 3
    assert profile.msd == pytest.approx(8.0 / 3.0)
    assert lod == "detailed"
    assert z_top == pytest.approx(12.0)


def test_top_altitude_smooth_median():
    z = np.array([10.0, 10.1, 9.9])
    fids = np.array([0, 1, 2])
    z_top, profile, lod = top_altitude(z, fids, 0.25)
    assert profile.msd == pytest.approx(0.02 / 3.0)
    assert lod == "smooth"
    assert z_top == pytest.approx(10.0)


def test_top_altitude_median_lower_of_two():
    z = np.array([1.0, 2.0, 3.0, 4.0])
    fids = np.array([0, 1, 2, 3])
    z_top, profile, lod = top_altitude(z, fids, 1e9)
    assert profile.median == 2.0
    assert z_top == 2.0


def test_top_altitude_per_frame_maxima():
    # two points per frame; only the higher one counts
    z = np.array([5.0, 9.0, 6.0, 9.0])
    fids = np.array([0, 0, 1, 1])
    _, profile, _ = top_altitude(z, fids, 0.25)
    assert profile.frame_tops == ((0, 9.0), (1, 9.0))
    assert profile.msd == 0.0


def test_top_altitude_equal_maxima_any_tau():
    z = np.array([7.0, 7.0])
    fids = np.array([0, 1])
    for tau in (0.0, 0.25, 100.0):
        z_top, _, _ = top_altitude(z, fids, tau)
        assert z_top == 7.0


def test_assemble_quad():
    plane = VerticalPlane(1, 0, 3)
    quad = assemble_quad(plane, (3, 0), (3, 10), 49.75, 60.0, 0.1, "smooth")
    verts = quad.vertices()
    np.testing.assert_allclose(
        verts,
        [[3, 0, 49.75], [3, 10, 49.75], [3, 10, 60], [3, 0, 60]],
    )
    assert np.max(np.abs(signed_plane_distance(plane, verts))) <= 1e-6
    with pytest.raises(ValueError):
        assemble_quad(plane, (3, 0), (3, 10), 60.0, 60.0, 0.1, "smooth")
