from __future__ import annotations

import json
import math

import numpy as np
import pytest

from stovsg import (
    Command,
    DepthImage,
    FormatError,
    PixelMask,
    QueryConfig,
    SUBGRAPH_SCHEMA,
    canonical_dumps,
    command_to_dict,
    decode_mask,
    dumps,
    empty_graph,
    encode_mask,
    extract_subgraph,
    generate_stream,
    graph_from_dict,
    graph_to_dict,
    ingest_sequence,
    make_random_scenario,
    make_scenario,
    parse_stream,
    parse_subgraph,
    read_command,
    read_commands,
    read_depth_file,
    read_graph,
    read_scenario,
    read_truth,
    scenario_to_dict,
    serialize_subgraph,
    subgraph_payload,
    truth_to_dict,
    validate_graph,
    write_depth_file,
    write_graph,
    write_scenario,
    write_stream,
    write_truth,
)

from conftest import axis, make_detection, make_frame_input


def test_mask_runs_are_row_major_and_maximal():
    pixels = np.array([[5, 2], [3, 2], [4, 2], [9, 2], [3, 1]])
    runs = encode_mask(PixelMask.from_pixels(pixels))
    assert runs == [[1, 3, 1], [2, 3, 3], [2, 9, 1]]
    decoded = decode_mask(runs)
    assert sorted(map(tuple, decoded.pixels)) == sorted(map(tuple, pixels))


def test_mask_codec_round_trips_random_masks():
    rng = np.random.default_rng(8)
    for _ in range(25):
        n = int(rng.integers(1, 60))
        pixels = rng.integers(0, 20, size=(n, 2))
        mask = PixelMask.from_pixels(pixels)
        back = decode_mask(encode_mask(mask))
        assert sorted(map(tuple, back.pixels)) == sorted(map(tuple, mask.pixels))


def test_mask_codec_rejects_malformed_runs():
    assert encode_mask(PixelMask.from_pixels(np.zeros((0, 2), dtype=np.int64))) == []
    assert len(decode_mask([])) == 0
    with pytest.raises(FormatError):
        decode_mask([[1, 2]])
    with pytest.raises(FormatError):
        decode_mask([[1, 2, 0]])
    with pytest.raises(FormatError):
        decode_mask([[1, 2, -3]])


def test_depth_file_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    values = rng.uniform(0.0, 3.0, size=(6, 9)).astype(np.float32)
    values[0, 0] = 0.0
    path = tmp_path / "d.bin"
    write_depth_file(DepthImage(values), path)
    back = read_depth_file(path)
    assert back.values.dtype == np.float32
    np.testing.assert_array_equal(back.values, values)


def test_depth_file_size_validation(tmp_path):
    path = tmp_path / "d.bin"
    write_depth_file(DepthImage(np.ones((4, 4), dtype=np.float32)), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-3])
    with pytest.raises(FormatError):
        read_depth_file(path)
    path.write_bytes(raw[:5])
    with pytest.raises(FormatError):
        read_depth_file(path)


def test_stream_round_trips_losslessly(tmp_path):
    spec = make_scenario("same_class_distractor", {"seed": 5, "delay": 0.5})
    inputs, _ = generate_stream(spec)
    path = tmp_path / "stream.jsonl"
    write_stream(inputs, path)
    header, back = parse_stream(path)
    assert header["image_width"] == spec.image_width
    assert header["feature_dim"] == spec.feature_dim
    assert len(back) == len(inputs)
    for orig, parsed in zip(inputs, back):
        assert parsed.latency_tag == orig.latency_tag
        oc, pc = orig.camera, parsed.camera
        assert (pc.fx, pc.fy, pc.cx, pc.cy) == (oc.fx, oc.fy, oc.cx, oc.cy)
        np.testing.assert_array_equal(pc.rotation, oc.rotation)
        np.testing.assert_array_equal(pc.translation, oc.translation)
        np.testing.assert_array_equal(parsed.depth.values, orig.depth.values)
        assert len(parsed.detections) == len(orig.detections)
        for od, pd in zip(orig.detections, parsed.detections):
            assert pd.box.as_tuple() == od.box.as_tuple()
            assert pd.label == od.label
            np.testing.assert_array_equal(pd.f_img, od.f_img)
            np.testing.assert_array_equal(pd.f_txt, od.f_txt)
            assert sorted(map(tuple, pd.mask.pixels)) == sorted(map(tuple, od.mask.pixels))
        assert len(parsed.relation_candidates) == len(orig.relation_candidates)
        for oc, pc in zip(orig.relation_candidates, parsed.relation_candidates):
            assert (pc.src, pc.dst, pc.relation) == (oc.src, oc.dst, oc.relation)
            assert pc.zone.as_tuple() == oc.zone.as_tuple()


def test_stream_parser_rejects_corruption(tmp_path):
    spec = make_random_scenario(2)
    inputs, _ = generate_stream(spec)
    path = tmp_path / "stream.jsonl"
    write_stream(inputs, path)
    lines = path.read_text().splitlines()

    record = json.loads(lines[1])
    record["frame_index"] = 5
    (tmp_path / "bad_index.jsonl").write_text("\n".join([lines[0], dumps(record)]) + "\n")
    with pytest.raises(FormatError):
        parse_stream(tmp_path / "bad_index.jsonl")

    header = json.loads(lines[0])
    header["schema"] = "something-else/9"
    (tmp_path / "bad_schema.jsonl").write_text("\n".join([dumps(header)] + lines[1:]) + "\n")
    with pytest.raises(FormatError):
        parse_stream(tmp_path / "bad_schema.jsonl")

    (tmp_path / "empty.jsonl").write_text("")
    with pytest.raises(FormatError):
        parse_stream(tmp_path / "empty.jsonl")

    (tmp_path / "garbled.jsonl").write_text(lines[0] + "\n{not json\n")
    with pytest.raises(FormatError):
        parse_stream(tmp_path / "garbled.jsonl")


def occluded_graph(config):
    inputs = [
        make_frame_input(1.0, detections=(make_detection(x0=10), make_detection(x0=60, label="apple", f_img=axis(3), f_txt=axis(4)))),
        make_frame_input(2.0, detections=(make_detection(x0=12),)),
        make_frame_input(3.0, detections=(make_detection(x0=14),)),
    ]
    return ingest_sequence(empty_graph(), inputs, config)


def test_graph_round_trips_byte_identically(tmp_path, config):
    graph = occluded_graph(config)
    path = tmp_path / "graph.json"
    write_graph(graph, path)
    back = read_graph(path)
    assert validate_graph(back) == []
    assert graph_to_dict(back) == graph_to_dict(graph)
    write_graph(back, tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == path.read_bytes()


def test_graph_from_dict_matches_file_reader(tmp_path, config):
    graph = occluded_graph(config)
    path = tmp_path / "graph.json"
    write_graph(graph, path)
    from_text = graph_from_dict(json.loads(path.read_text()))
    assert graph_to_dict(from_text) == graph_to_dict(read_graph(path))


def test_scenario_round_trips(tmp_path):
    for family in ("occlusion_after_command", "target_moved", "same_class_distractor", "moved_reference"):
        spec = make_scenario(family, {"seed": 3, "delay": 2.0})
        path = tmp_path / f"{family}.json"
        write_scenario(spec, path)
        back = read_scenario(path)
        assert scenario_to_dict(back) == scenario_to_dict(spec)
    fuzz = make_random_scenario(17)
    write_scenario(fuzz, tmp_path / "fuzz.json")
    assert scenario_to_dict(read_scenario(tmp_path / "fuzz.json")) == scenario_to_dict(fuzz)


def test_unbounded_visibility_serializes_as_null():
    spec = make_scenario("occlusion_after_command", {"delay": 1.0})
    data = scenario_to_dict(spec)
    target = data["objects"][0]
    assert target["visibility"][-1][1] is None
    assert math.isinf(spec.objects[0].visibility[-1][1])


def test_truth_round_trips(tmp_path):
    _, truth = generate_stream(make_scenario("target_moved", {"seed": 1, "delay": 1.0}))
    path = tmp_path / "truth.json"
    write_truth(truth, path)
    back = read_truth(path)
    assert truth_to_dict(back) == truth_to_dict(truth)


def test_command_files(tmp_path):
    command = Command(text="pick up the red mug", embedding=axis(0), issue_time=2.05, latency=0.5)
    single = tmp_path / "one.json"
    single.write_text(dumps(command_to_dict(command)))
    got = read_command(single)
    assert got.text == command.text and got.issue_time == 2.05 and got.latency == 0.5
    np.testing.assert_array_equal(got.embedding, command.embedding)

    multi = tmp_path / "many.json"
    multi.write_text(dumps({"commands": [command_to_dict(command), command_to_dict(command)]}))
    assert len(read_commands(multi)) == 2

    bad = dict(command_to_dict(command), schema="other/1")
    single.write_text(dumps(bad))
    with pytest.raises(FormatError):
        read_command(single)

    no_latency = command_to_dict(command)
    del no_latency["latency"]
    single.write_text(dumps(no_latency))
    assert read_command(single).latency == 0.0


def test_canonical_float_formatting():
    assert canonical_dumps(0.3) == "0.3"
    assert canonical_dumps(1e-07) == "1e-07"
    assert canonical_dumps(2.0) == "2"  # integral floats lose the point
    assert canonical_dumps(-0.0) == "0"  # signed zero would not survive a reparse
    assert canonical_dumps(1.0 / 3.0) == "0.333333"
    assert canonical_dumps(123456789.0) == "1.23457e+08"
    assert canonical_dumps(True) == "true"
    assert canonical_dumps(1) == "1"
    assert canonical_dumps(np.float64(0.5)) == "0.5"
    assert canonical_dumps(np.array([1.5, 2.0])) == "[1.5,2]"
    assert canonical_dumps({"b": 2, "a": 1}) == '{"b":2,"a":1}'  # insertion order kept
    with pytest.raises(FormatError):
        canonical_dumps(float("nan"))
    with pytest.raises(FormatError):
        canonical_dumps(float("inf"))
    with pytest.raises(FormatError):
        canonical_dumps(object())


def test_canonical_formatting_is_idempotent():
    doc = {
        "schema": "x/1",
        "values": [math.pi, 1.0 / 3.0, 2.0, -0.0, 1e-9, 123456789.0],
        "nested": {"score": 0.1234567890123},
    }
    once = canonical_dumps(doc)
    again = canonical_dumps(json.loads(once))
    assert once == again


def test_golden_subgraph_bytes():
    payload = {
        "schema": SUBGRAPH_SCHEMA,
        "command_text": "pick up the red mug",
        "aligned_frame_index": 3,
        "aligned_frame_time": 0.3,
        "latency_tag": {"capture_time": 0.3, "transmission_latency": 0.5},
        "nodes": [
            {
                "id": 1,
                "class": "red mug",
                "centroid": [0.1234567, -0.5, 1.5],
                "size": [0.1, 0.1, 0.12],
                "score": 1.25,
                "spatial_relations": [{"relation": "near", "subject": 1, "object": 2}],
                "motion_history": [[0.3, [0.1234567, -0.5, 1.5]]],
            }
        ],
        "scene_dynamics": [{"time": 0.4, "track_id": 2, "event": "appeared"}],
    }
    expected = (
        '{"schema":"stovsg-subgraph/1","command_text":"pick up the red mug",'
        '"aligned_frame_index":3,"aligned_frame_time":0.3,'
        '"latency_tag":{"capture_time":0.3,"transmission_latency":0.5},'
        '"nodes":[{"id":1,"class":"red mug","centroid":[0.123457,-0.5,1.5],'
        '"size":[0.1,0.1,0.12],"score":1.25,'
        '"spatial_relations":[{"relation":"near","subject":1,"object":2}],'
        '"motion_history":[[0.3,[0.123457,-0.5,1.5]]]}],'
        '"scene_dynamics":[{"time":0.4,"track_id":2,"event":"appeared"}]}'
    )
    assert serialize_subgraph(payload) == expected
    assert serialize_subgraph(parse_subgraph(expected)) == expected


def test_subgraph_payload_from_a_real_graph(config):
    graph = occluded_graph(config)
    command = Command(text="pick up the red mug", embedding=axis(0), issue_time=1.6)
    sub = extract_subgraph(graph, command, QueryConfig())
    payload = subgraph_payload(sub)
    assert list(payload) == [
        "schema",
        "command_text",
        "aligned_frame_index",
        "aligned_frame_time",
        "latency_tag",
        "nodes",
        "scene_dynamics",
    ]
    scores = [n["score"] for n in payload["nodes"]]
    assert scores == sorted(scores, reverse=True)
    text = serialize_subgraph(sub)
    assert serialize_subgraph(parse_subgraph(text)) == text  # canonical fixed point


def test_parse_subgraph_rejects_other_documents():
    with pytest.raises(FormatError):
        parse_subgraph('{"schema":"stovsg-graph/1"}')
    with pytest.raises(FormatError):
        parse_subgraph("{broken")


def test_dumps_refuses_non_finite():
    with pytest.raises(ValueError):
        dumps({"x": float("nan")})
