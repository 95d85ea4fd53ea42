import numpy as np
import pytest

from facademap.dataset import (
    DataFormatError,
    PipelineConfig,
    load_cadastre,
    load_cameras,
    load_config,
    load_dataset,
    load_frames,
    load_points,
    read_quads,
    write_cameras,
    write_points,
    write_quads,
)
from facademap.geometry import FacadeQuad, VerticalPlane
from facademap.images import write_ppm

from conftest import identity_camera


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_point_line_format(tmp_path):
    p = _write(tmp_path, "p.txt", "1.02 2.03 4.5 7\n")
    pts, fids, lines = load_points(p)
    np.testing.assert_allclose(pts, [[1.02, 2.03, 4.5]])
    assert fids.tolist() == [7]
    assert lines.tolist() == [1]


def test_cadastre_line_format(tmp_path):
    p = _write(tmp_path, "c.txt", "12 0.0 0.0 10.0 0.0\n")
    segs = load_cadastre(p)
    assert segs[0].id == 12
    assert segs[0].p1 == (0.0, 0.0)
    assert segs[0].p2 == (10.0, 0.0)


def test_malformed_line_names_file_and_line(tmp_path):
    p = _write(tmp_path, "p.txt", "1 2 3 0\nbad line here\n")
    with pytest.raises(DataFormatError) as err:
        load_points(p)
    assert "p.txt:2" in str(err.value)


def test_dangling_frame_is_referential_error(tmp_path):
    pp = _write(tmp_path, "p.txt", "0 0 0 99\n")
    fp = _write(tmp_path, "f.txt", "0 0 0 2.5\n")
    cp = _write(tmp_path, "c.txt", "1 0 0 10 0\n")
    img = tmp_path / "i.ppm"
    write_ppm(np.zeros((2, 2, 3), dtype=np.uint8), img)
    cam = identity_camera(width=2, height=2)
    camp = tmp_path / "cams.txt"
    write_cameras([cam], ["i.ppm"], camp)
    with pytest.raises(DataFormatError) as err:
        load_dataset(pp, fp, cp, camp)
    assert "99" in str(err.value)
    assert "p.txt:1" in str(err.value)


def test_duplicate_frame_rejected(tmp_path):
    p = _write(tmp_path, "f.txt", "0 0 0 1\n0 1 1 1\n")
    with pytest.raises(DataFormatError):
        load_frames(p)


def test_camera_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, (4, 6, 3), dtype=np.uint8)
    write_ppm(img, tmp_path / "cam0.ppm")
    cam = identity_camera(fx=123.25, fy=100.5, cx=3.0, cy=2.0, width=6, height=4)
    path = tmp_path / "cams.txt"
    write_cameras([cam], ["cam0.ppm"], path)
    views = load_cameras(path)
    assert len(views) == 1
    got = views[0].camera
    assert (got.fx, got.fy, got.cx, got.cy) == (123.25, 100.5, 3.0, 2.0)
    np.testing.assert_array_equal(got.pose.rotation, np.eye(3))
    np.testing.assert_array_equal(views[0].image, img)


def test_corrupt_rotation_is_loud(tmp_path):
    write_ppm(np.zeros((2, 2, 3), dtype=np.uint8), tmp_path / "i.ppm")
    line = "0 i.ppm 100 100 1 1 2 2 " + " ".join(
        ["0.5", "0", "0", "0", "1", "0", "0", "0", "1"]
    ) + " 0 0 0\n"
    p = _write(tmp_path, "cams.txt", line)
    with pytest.raises(DataFormatError) as err:
        load_cameras(p)
    assert "orthonormal" in str(err.value)


def test_image_size_mismatch_rejected(tmp_path):
    write_ppm(np.zeros((3, 3, 3), dtype=np.uint8), tmp_path / "i.ppm")
    cam = identity_camera(width=2, height=2)
    path = tmp_path / "cams.txt"
    write_cameras([cam], ["i.ppm"], path)
    with pytest.raises(DataFormatError):
        load_cameras(path)


def test_parse_is_deterministic(tmp_path, rng):
    pts = rng.normal(size=(50, 3)) * 10
    fids = rng.integers(0, 5, 50)
    p = tmp_path / "p.txt"
    write_points(pts, fids, p)
    a = load_points(p)
    b = load_points(p)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_config_defaults(tmp_path):
    p = _write(tmp_path, "c.cfg", "")
    cfg = load_config(p)
    assert cfg == PipelineConfig()
    assert cfg.grid_step == 0.05
    assert cfg.neighborhood == 1.0
    assert cfg.min_cluster_pts == 500


def test_config_override(tmp_path):
    p = _write(tmp_path, "c.cfg", "# comment\ngrid_step = 0.10\n")
    cfg = load_config(p)
    assert cfg.grid_step == 0.10
    assert cfg.neighborhood == 1.0


def test_config_invariant_violation(tmp_path):
    p = _write(tmp_path, "c.cfg", "erode_r = 60\n")
    with pytest.raises(DataFormatError) as err:
        load_config(p)
    assert "erode_r" in str(err.value)


def test_config_unknown_key(tmp_path):
    p = _write(tmp_path, "c.cfg", "grid_stepp = 0.1\n")
    with pytest.raises(DataFormatError) as err:
        load_config(p)
    assert "grid_stepp" in str(err.value)


def test_config_non_numeric(tmp_path):
    p = _write(tmp_path, "c.cfg", "grid_step = tiny\n")
    with pytest.raises(DataFormatError):
        load_config(p)


def test_config_bool(tmp_path):
    p = _write(tmp_path, "c.cfg", "cube_dilation_enabled = true\n")
    assert load_config(p).cube_dilation_enabled is True


def test_quads_round_trip(tmp_path):
    plane = VerticalPlane(0, 1, 0.5)
    quads = {
        3: FacadeQuad((0, 0.5), (10, 0.5), 49.75, 60.0, plane, 0.125, "smooth"),
        1: FacadeQuad((2, 0.5), (4, 0.5), 1.0, 3.0, plane, 2.5, "detailed"),
    }
    path = tmp_path / "q.txt"
    write_quads(quads, path)
    got = read_quads(path)
    assert sorted(got) == [1, 3]
    assert got[3].e1 == (0.0, 0.5)
    assert got[3].z_bottom == pytest.approx(49.75)
    assert got[1].lod_flag == "detailed"
    assert got[1].msd == pytest.approx(2.5)
