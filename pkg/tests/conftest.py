import numpy as np
import pytest

from facademap.geometry import PinholeCamera, RigidPose


def shift_mask(mask, dx, dy, fill=False):
    """Translate a boolean raster by (dx rows, dy cols), filling with `fill`."""
    out = np.full_like(mask, fill)
    h, w = mask.shape
    r0, r1 = max(0, dx), min(h, h + dx)
    c0, c1 = max(0, dy), min(w, w + dy)
    out[r0:r1, c0:c1] = mask[r0 - dx : r1 - dx, c0 - dy : c1 - dy]
    return out


def disc_offsets(r):
    offs = []
    for dx in range(-r, r + 1):
        for dy in range(-r, r + 1):
            if dx * dx + dy * dy <= r * r:
                offs.append((dx, dy))
    return offs


def brute_dilate(mask, r):
    """Sliding-window dilation straight from the definition."""
    out = np.zeros_like(mask)
    for dx, dy in disc_offsets(r):
        out |= shift_mask(mask, dx, dy)
    return out


def brute_erode(mask, r):
    """Sliding-window erosion; outside-image counts as unset."""
    out = np.ones_like(mask)
    for dx, dy in disc_offsets(r):
        out &= shift_mask(mask, dx, dy, fill=False)
    return out


def random_rotation(rng):
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def identity_camera(fx=100.0, fy=100.0, cx=0.0, cy=0.0, width=1920, height=1080):
    return PinholeCamera(fx, fy, cx, cy, width, height, RigidPose(np.eye(3), np.zeros(3)))


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
