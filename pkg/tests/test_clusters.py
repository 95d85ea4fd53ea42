import numpy as np
import pytest

from facademap.clusters import extract_facade_clusters
from facademap.dataset import PipelineConfig
from facademap.geometry import Segment2, segment_frame_coords


def make_cfg(**kw):
    base = dict(min_cluster_pts=1)
    base.update(kw)
    return PipelineConfig(**base).validate()


def brute_assign(points, indices, cadastre, cfg):
    """Direct per-point application of the stated rule (oracle)."""
    out = {}
    for i in indices:
        best = None
        for seg in sorted(cadastre, key=lambda s: s.id):
            s, t = segment_frame_coords(seg, points[i])
            if abs(t) <= cfg.neighborhood and -cfg.occ_extent_margin <= s <= seg.length + cfg.occ_extent_margin:
                if best is None or abs(t) < best[0]:
                    best = (abs(t), seg.id)
        if best is not None:
            out.setdefault(best[1], []).append(i)
    return out


def test_neighborhood_inclusion():
    seg = Segment2(1, (0, 0), (10, 0))
    pts = np.array([[5.0, 0.8, 2.0], [5.0, 1.2, 2.0]])
    cfg = make_cfg()
    clusters = extract_facade_clusters([0, 1], pts, [seg], cfg)
    assert len(clusters) == 1
    assert clusters[0].point_indices.tolist() == [0]  # t=0.8 in, t=1.2 out


def test_count_threshold_inclusive():
    seg = Segment2(1, (0, 0), (100, 0))
    xs = np.linspace(0, 100, 500)
    pts = np.column_stack([xs, np.full(500, 0.2), np.zeros(500)])
    cfg = make_cfg(min_cluster_pts=500)
    assert len(extract_facade_clusters(np.arange(500), pts, [seg], cfg)) == 1
    assert len(extract_facade_clusters(np.arange(499), pts[:499], [seg], cfg)) == 0


def test_extent_cap():
    seg = Segment2(1, (0, 0), (10, 0))
    cfg = make_cfg()  # occ_extent_margin = 0.5
    pts = np.array(
        [[-0.4, 0.1, 0], [10.4, -0.1, 0], [-0.7, 0.1, 0], [10.7, 0.1, 0]]
    )
    clusters = extract_facade_clusters(np.arange(4), pts, [seg], cfg)
    assert clusters[0].point_indices.tolist() == [0, 1]


def test_nearest_segment_disjointness():
    segs = [Segment2(1, (0, 0), (10, 0)), Segment2(2, (0, 1.0), (10, 1.0))]
    ys = np.array([0.1, 0.3, 0.45, 0.55, 0.7, 0.9])
    pts = np.column_stack([np.full(6, 5.0), ys, np.zeros(6)])
    cfg = make_cfg()
    clusters = extract_facade_clusters(np.arange(6), pts, segs, cfg)
    by_id = {c.segment_id: set(c.point_indices.tolist()) for c in clusters}
    assert by_id[1] & by_id[2] == set()
    assert by_id[1] | by_id[2] == set(range(6))
    assert by_id[1] == {0, 1, 2}  # nearest wins; 0.45 closer to y=0
    assert by_id[2] == {3, 4, 5}


def test_tie_goes_to_smaller_id():
    segs = [Segment2(5, (0, 0), (10, 0)), Segment2(2, (0, 1.0), (10, 1.0))]
    pts = np.array([[5.0, 0.5, 0.0]])  # exactly between
    clusters = extract_facade_clusters([0], pts, segs, make_cfg())
    assert [c.segment_id for c in clusters if c.count] == [2]


def test_monotone_in_neighborhood(rng):
    segs = [Segment2(1, (0, 0), (10, 0)), Segment2(2, (3, 4), (12, 4))]
    pts = rng.uniform(-2, 14, size=(300, 3))
    pts[:, 1] = rng.uniform(-2, 6, size=300)
    idx = np.arange(300)
    small = extract_facade_clusters(idx, pts, segs, make_cfg(neighborhood=0.6))
    big = extract_facade_clusters(idx, pts, segs, make_cfg(neighborhood=1.4))
    union_small = set(np.concatenate([c.point_indices for c in small]).tolist()) if small else set()
    union_big = set(np.concatenate([c.point_indices for c in big]).tolist()) if big else set()
    assert union_small <= union_big


def test_matches_brute_force_on_two_walls(rng):
    # two parallel facades 4 m apart, points hugging each wall
    segs = [Segment2(1, (0, 0), (20, 0)), Segment2(2, (0, 4), (20, 4))]
    n = 400
    wall = rng.integers(0, 2, n)
    pts = np.column_stack(
        [
            rng.uniform(0, 20, n),
            wall * 4.0 + rng.normal(0, 0.05, n),
            rng.uniform(0, 5, n),
        ]
    )
    cfg = make_cfg()
    clusters = extract_facade_clusters(np.arange(n), pts, segs, cfg)
    got = {c.segment_id: sorted(c.point_indices.tolist()) for c in clusters}
    expected = brute_assign(pts, range(n), segs, cfg)
    assert got == {k: sorted(v) for k, v in expected.items()}
    # every wall point assigned to its own wall
    for c in clusters:
        w = 0 if c.segment_id == 1 else 1
        assert np.all(wall[c.point_indices] == w)


def test_membership_certificate(rng):
    segs = [Segment2(1, (2, 1), (14, 3))]
    pts = rng.uniform(0, 16, size=(500, 3))
    cfg = make_cfg()
    clusters = extract_facade_clusters(np.arange(500), pts, segs, cfg)
    for c in clusters:
        s, t = segment_frame_coords(segs[0], pts[c.point_indices])
        assert np.all(np.abs(t) <= cfg.neighborhood)
        assert np.all(s >= -cfg.occ_extent_margin)
        assert np.all(s <= segs[0].length + cfg.occ_extent_margin)


def test_empty_cadastre_rejected():
    with pytest.raises(ValueError):
        extract_facade_clusters([0], np.zeros((1, 3)), [], make_cfg())


def test_output_sorted_by_segment_id():
    segs = [Segment2(9, (0, 0), (10, 0)), Segment2(1, (0, 5), (10, 5))]
    pts = np.array([[5, 0.1, 0], [5, 5.1, 0]])
    clusters = extract_facade_clusters([0, 1], pts, segs, make_cfg())
    assert [c.segment_id for c in clusters] == [1, 9]
