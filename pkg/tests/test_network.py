import json

import numpy as np
import pytest

from etalab.network import (
    PAIR_CLASSES,
    AdjacencyRule,
    CALIBRATED_CLASS_WEIGHTS,
    RoadNetwork,
    Segment,
    build_grid,
    classify_pair,
    segment_graph,
)


@pytest.mark.parametrize("p,n_vertices,n_segments", [
    (1, 4, 8),
    (3, 16, 48),
    (30, 961, 3720),
])
def test_grid_counts(p, n_vertices, n_segments):
    net = build_grid(p)
    assert net.n_vertices == n_vertices
    assert net.n_segments == n_segments


def test_segment_requires_grid_adjacency():
    Segment((0, 0), (0, 1))
    Segment((2, 1), (1, 1))
    with pytest.raises(ValueError):
        Segment((0, 0), (1, 1))
    with pytest.raises(ValueError):
        Segment((0, 0), (0, 0))
    with pytest.raises(ValueError):
        Segment((0, 0), (0, 2))


def test_segment_direction_and_reverse():
    s = Segment((1, 0), (1, 1))
    assert s.direction == (0, 1)
    assert s.reversed() == Segment((1, 1), (1, 0))
    assert s.undirected() == s.reversed().undirected()


def test_segment_id_roundtrip(grid3):
    for sid in range(grid3.n_segments):
        seg = grid3.segment(sid)
        assert grid3.segment_id(seg.tail, seg.head) == sid
        rid = grid3.reverse_id(sid)
        assert grid3.segment(rid) == seg.reversed()
        assert grid3.reverse_id(rid) == sid


def test_segment_ordering_is_canonical(grid3):
    segs = grid3.segments
    assert list(segs) == sorted(segs, key=lambda s: (s.tail, s.head))


def test_out_in_segments(grid3):
    for v in grid3.vertices():
        outs = grid3.out_segments(v)
        ins = grid3.in_segments(v)
        assert all(grid3.segment(s).tail == v for s in outs)
        assert all(grid3.segment(s).head == v for s in ins)
        assert len(outs) == len(ins)
    # corner degree 2, edge degree 3, interior degree 4
    assert len(grid3.out_segments((0, 0))) == 2
    assert len(grid3.out_segments((0, 1))) == 3
    assert len(grid3.out_segments((1, 1))) == 4


def test_path_segments(grid3):
    path = [(1, 0), (1, 1), (2, 1), (3, 1)]
    ids = grid3.path_segments(path)
    assert len(ids) == 3
    for sid, (tail, head) in zip(ids, zip(path, path[1:])):
        seg = grid3.segment(sid)
        assert (seg.tail, seg.head) == (tail, head)
    with pytest.raises(ValueError):
        grid3.path_segments([(0, 0), (1, 1)])


def test_json_roundtrip(grid3):
    text = grid3.to_json()
    again = RoadNetwork.from_json(text)
    assert again == grid3
    assert again.segments == grid3.segments
    assert again.to_json() == text
    payload = json.loads(text)
    assert payload["p"] == 3
    assert len(payload["segments"]) == 48


def test_classify_pair_cases(grid3):
    sid = grid3.segment_id
    seg = grid3.segment

    def cls(a, b):
        return classify_pair(seg(sid(*a)), seg(sid(*b)))

    assert cls(((0, 0), (0, 1)), ((0, 1), (0, 0))) == "reverse"
    assert cls(((0, 0), (0, 1)), ((0, 1), (0, 2))) == "straight"
    assert cls(((0, 0), (0, 1)), ((0, 1), (1, 1))) == "turn"
    assert cls(((0, 1), (0, 0)), ((0, 1), (0, 2))) == "parallel_collinear"
    assert cls(((0, 1), (0, 0)), ((0, 1), (1, 1))) == "parallel_perpendicular"
    assert cls(((0, 0), (0, 1)), ((2, 1), (2, 2))) is None


def test_classify_pair_symmetric(grid3):
    rng = np.random.default_rng(7)
    picks = rng.integers(0, grid3.n_segments, size=(200, 2))
    for a, b in picks:
        if a == b:
            continue
        sa, sb = grid3.segment(int(a)), grid3.segment(int(b))
        assert classify_pair(sa, sb) == classify_pair(sb, sa)


@pytest.mark.parametrize("rule", [
    AdjacencyRule.SHARE_ANY_ENDPOINT,
    AdjacencyRule.HEAD_TO_TAIL_CHAIN,
    AdjacencyRule.UNDIRECTED_EDGE_INCIDENCE,
    AdjacencyRule.CALIBRATED,
])
def test_adjacency_symmetric_zero_diag(grid3, rule):
    g = segment_graph(grid3, rule=rule)
    a = g.adjacency
    assert np.array_equal(a, a.T)
    assert np.all(np.diag(a) == 0.0)
    assert np.allclose(g.degrees, a.sum(axis=1))


def test_share_any_endpoint_min_degree_p1():
    g = segment_graph(build_grid(1), rule=AdjacencyRule.SHARE_ANY_ENDPOINT)
    assert g.degrees.min() >= 3


def test_rule_class_weights(grid3):
    g = segment_graph(grid3, rule=AdjacencyRule.CALIBRATED)
    rng = np.random.default_rng(11)
    picks = rng.integers(0, grid3.n_segments, size=(300, 2))
    for a, b in picks:
        if a == b:
            continue
        kind = classify_pair(grid3.segment(int(a)), grid3.segment(int(b)))
        expected = CALIBRATED_CLASS_WEIGHTS[kind] if kind else 0.0
        assert g.adjacency[a, b] == pytest.approx(expected, abs=0.0)


def test_undirected_incidence_excludes_reverse(grid3):
    g = segment_graph(grid3, rule=AdjacencyRule.UNDIRECTED_EDGE_INCIDENCE)
    for sid in range(grid3.n_segments):
        assert g.adjacency[sid, grid3.reverse_id(sid)] == 0.0


def test_chain_rule_links_reverse(grid3):
    g = segment_graph(grid3, rule=AdjacencyRule.HEAD_TO_TAIL_CHAIN)
    for sid in range(0, grid3.n_segments, 5):
        assert g.adjacency[sid, grid3.reverse_id(sid)] == 1.0


def test_calibrated_weights_frozen():
    assert set(CALIBRATED_CLASS_WEIGHTS) == set(PAIR_CLASSES)
    assert CALIBRATED_CLASS_WEIGHTS["straight"] == 1.0
    for w in CALIBRATED_CLASS_WEIGHTS.values():
        assert 0.0 < w < 2.5
