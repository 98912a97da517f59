from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stovsg import (
    BoundingBox2D,
    Command,
    InputRejected,
    LatencyTag,
    NotFound,
    PixelMask,
    cosine,
    empty_graph,
    ingest_sequence,
    normalize_label,
    validate_graph,
)
from stovsg.model import freeze_array

from conftest import axis, make_camera, make_detection, make_frame_input
from oracles import cosine_oracle


def test_normalize_label():
    assert normalize_label("  Red   MUG ") == "red mug"
    assert normalize_label("apple") == "apple"
    assert normalize_label(" \t ") == ""


def test_bounding_box_validity():
    assert BoundingBox2D(0, 0, 1, 1).is_valid()
    assert not BoundingBox2D(1, 0, 1, 2).is_valid()  # zero width
    assert not BoundingBox2D(0, 3, 2, 1).is_valid()
    assert not BoundingBox2D(0, 0, math.nan, 1).is_valid()


def test_pixel_mask_dedup_keeps_first_occurrence_order():
    mask = PixelMask.from_pixels([[3, 1], [1, 1], [3, 1], [2, 0]])
    assert mask.pixels.tolist() == [[3, 1], [1, 1], [2, 0]]
    assert len(mask) == 3


def test_pixel_mask_bounds_and_shape():
    mask = PixelMask.from_pixels([[0, 0], [4, 3]])
    assert mask.in_bounds(5, 4)
    assert not mask.in_bounds(4, 4)
    assert PixelMask.from_pixels(np.zeros((0, 2))).in_bounds(1, 1)
    with pytest.raises(InputRejected):
        PixelMask.from_pixels([[1, 2, 3]])


def test_cosine_known_values_and_rejections():
    a = np.array([1.0, 0.0])
    b = np.array([1.0, 1.0])
    assert math.isclose(cosine(a, b), 1 / math.sqrt(2), rel_tol=1e-12)
    assert math.isclose(cosine(a, a), 1.0, rel_tol=1e-12)
    with pytest.raises(InputRejected):
        cosine(a, np.zeros(2))
    with pytest.raises(InputRejected):
        cosine(a, np.ones(3))


def test_cosine_self_similarity_never_exceeds_one():
    # normalized vectors can self-dot to 1 + 1ulp; a raw 1 - cos would then
    # go negative and poison downstream non-negative cost matrices
    rng = np.random.default_rng(0)
    for _ in range(300):
        v = rng.standard_normal(16)
        v = v / np.linalg.norm(v)
        assert cosine(v, v) <= 1.0
        assert cosine(v, -v) >= -1.0


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=6), st.integers(0, 10_000))
def test_cosine_is_bounded_and_matches_oracle(values, seed):
    a = np.array(values)
    rng = np.random.default_rng(seed)
    b = rng.uniform(-5, 5, size=len(values))
    if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
        return
    got = cosine(a, b)
    assert -1.0 <= got <= 1.0  # clamped: rounding must never leak past the bounds
    assert math.isclose(got, cosine_oracle(a, b), rel_tol=1e-12, abs_tol=1e-12)


def test_latency_tag_observed_time():
    tag = LatencyTag(capture_time=5.0, transmission_latency=0.5)
    assert tag.observed_time == 5.5


def test_command_arrival_time():
    cmd = Command(text="go", embedding=axis(0), issue_time=2.0, latency=0.75)
    assert cmd.arrival_time == 2.75


def test_freeze_array_is_read_only():
    arr = freeze_array([1.0, 2.0])
    with pytest.raises(ValueError):
        arr[0] = 3.0


def test_camera_violations():
    assert make_camera().violations() == []
    bad_rot = make_camera(rotation=np.eye(3) * 2.0)
    assert any("orthonormal" in v for v in bad_rot.violations())
    bad_focal = make_camera(fx=-1.0)
    assert any("focal" in v for v in bad_focal.violations())


def _two_frame_graph(config):
    frames = [
        make_frame_input(1.0, detections=(make_detection(),)),
        make_frame_input(2.0, detections=(make_detection(),)),
    ]
    return ingest_sequence(empty_graph(), frames, config)


def test_validate_graph_accepts_built_graph(config):
    graph = _two_frame_graph(config)
    assert validate_graph(graph) == []
    assert validate_graph(empty_graph()) == []


def test_validate_graph_flags_duplicate_node_ids(config):
    graph = _two_frame_graph(config)
    f0 = graph.frames[0]
    clone = replace(graph.frames[1], nodes=(replace(f0.nodes[0], frame_index=2),))
    broken = replace(graph, frames=(f0, clone))
    problems = validate_graph(broken)
    assert any("duplicate node id" in p for p in problems)


def test_validate_graph_flags_non_monotone_capture(config):
    graph = _two_frame_graph(config)
    f0, f1 = graph.frames
    swapped = replace(
        f1, latency_tag=LatencyTag(capture_time=0.5, transmission_latency=0.5)
    )
    problems = validate_graph(replace(graph, frames=(f0, swapped)))
    assert any("capture time" in p for p in problems)


def test_validate_graph_flags_dangling_temporal_edge(config):
    graph = _two_frame_graph(config)
    edge = replace(graph.temporal_edges[-1], dst_node=999)
    problems = validate_graph(replace(graph, temporal_edges=(graph.temporal_edges[0], edge)))
    assert problems


def test_graph_lookup_helpers(config):
    graph = _two_frame_graph(config)
    node = graph.frames[0].nodes[0]
    assert graph.node(node.node_id) is node
    assert graph.frame(2) is graph.frames[1]
    assert graph.newest_frame is graph.frames[1]
    with pytest.raises(NotFound):
        graph.node(12345)
    with pytest.raises(NotFound):
        graph.frame(3)
