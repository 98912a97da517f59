"""Versioned on-disk formats: streams, graphs, scenarios, truth, subgraphs.

Every payload carries a ``schema`` identifier.  Writers emit a canonical
form — fixed key order, compact separators, shortest-round-trip floats —
so equal values always produce identical bytes, and ``write(parse(x))``
reproduces a canonical file ``x`` exactly.  The planner-facing subgraph
payload is the one exception to full precision: its floats are printed
with six significant digits, and serializing a parsed payload is a fixed
point at the byte level.
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import FormatError
from .geometry import DepthImage
from .model import (
    BoundingBox2D,
    CameraModel,
    Command,
    Detection,
    FrameGraph,
    LatencyTag,
    ObjectNode,
    PixelMask,
    RelationCandidate,
    SceneGraph4D,
    SpatialEdge,
    TemporalEdge,
    Track,
    TrackStatus,
)
from .query import TaskSubgraph
from .sim import (
    CommandTruth,
    DetectionTruth,
    FrameTruth,
    GroundTruthLog,
    LatencyProfile,
    NoiseModel,
    ScenarioSpec,
    SimCommand,
    SimObject,
)
from .store import FrameInput

STREAM_SCHEMA = "stovsg-stream/1"
GRAPH_SCHEMA = "stovsg-graph/1"
SCENARIO_SCHEMA = "stovsg-scenario/1"
SUBGRAPH_SCHEMA = "stovsg-subgraph/1"
TRUTH_SCHEMA = "stovsg-truth/1"
METRICS_SCHEMA = "stovsg-metrics/1"
COMMAND_SCHEMA = "stovsg-command/1"


def dumps(obj: Any) -> str:
    """Compact JSON with shortest-round-trip floats (lossless)."""
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _require(data: Mapping, key: str, where: str):
    if key not in data:
        raise FormatError(f"{where}: missing key {key!r}")
    return data[key]


def _check_schema(data: Mapping, expected: str, where: str) -> None:
    schema = _require(data, "schema", where)
    if schema != expected:
        raise FormatError(f"{where}: expected schema {expected!r}, got {schema!r}")


def _floats(values, where: str) -> list[float]:
    try:
        out = [float(v) for v in values]
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{where}: expected a number array: {exc}") from exc
    if not all(math.isfinite(v) for v in out):
        raise FormatError(f"{where}: non-finite number")
    return out


# --- six-significant-digit canonical writer (subgraph payloads) -----------


def _fmt6(x: float) -> str:
    if not math.isfinite(x):
        raise FormatError(f"cannot serialize non-finite float {x}")
    if x == 0.0:
        return "0"  # "-0" would reparse as the int 0 and break idempotence
    return f"{x:.6g}"


def canonical_dumps(obj: Any) -> str:
    """Canonical compact JSON with floats at six significant digits.

    Formatting is idempotent: parsing the output and serializing again
    yields identical bytes.
    """
    parts: list[str] = []

    def write(o: Any) -> None:
        if o is None:
            parts.append("null")
        elif isinstance(o, bool):
            parts.append("true" if o else "false")
        elif isinstance(o, (int, np.integer)):
            parts.append(str(int(o)))
        elif isinstance(o, (float, np.floating)):
            parts.append(_fmt6(float(o)))
        elif isinstance(o, str):
            parts.append(json.dumps(o))
        elif isinstance(o, Mapping):
            parts.append("{")
            for i, (k, v) in enumerate(o.items()):
                if i:
                    parts.append(",")
                parts.append(json.dumps(str(k)))
                parts.append(":")
                write(v)
            parts.append("}")
        elif isinstance(o, (list, tuple, np.ndarray)):
            seq = o.tolist() if isinstance(o, np.ndarray) else o
            parts.append("[")
            for i, v in enumerate(seq):
                if i:
                    parts.append(",")
                write(v)
            parts.append("]")
        else:
            raise FormatError(f"cannot serialize {type(o).__name__} canonically")

    write(obj)
    return "".join(parts)


# --- run-length mask codec -------------------------------------------------


def encode_mask(mask: PixelMask) -> list[list[int]]:
    """Encode pixels as [row, start_col, run_length] triples in row-major order."""
    if len(mask) == 0:
        return []
    arr = mask.pixels
    order = np.lexsort((arr[:, 0], arr[:, 1]))
    p = arr[order]
    runs: list[list[int]] = []
    start = 0
    for i in range(1, len(p) + 1):
        if i == len(p) or p[i, 1] != p[start, 1] or p[i, 0] != p[i - 1, 0] + 1:
            runs.append([int(p[start, 1]), int(p[start, 0]), i - start])
            start = i
    return runs


def decode_mask(runs: Sequence, where: str = "mask") -> PixelMask:
    pixels = []
    for run in runs:
        if len(run) != 3:
            raise FormatError(f"{where}: run must be [row, col, length], got {run}")
        v, u0, n = (int(x) for x in run)
        if n <= 0:
            raise FormatError(f"{where}: non-positive run length {n}")
        pixels.append(np.stack([np.arange(u0, u0 + n), np.full(n, v)], axis=1))
    if not pixels:
        return PixelMask.from_pixels(np.zeros((0, 2), dtype=np.int64))
    return PixelMask.from_pixels(np.concatenate(pixels))


# --- binary depth files ----------------------------------------------------


def write_depth_file(depth: DepthImage, path: str | Path) -> None:
    """Little-endian: width and height as uint32, then row-major float32 metres."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", depth.width, depth.height))
        fh.write(np.ascontiguousarray(depth.values, dtype="<f4").tobytes())


def read_depth_file(path: str | Path) -> DepthImage:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise FormatError(f"depth file {path}: truncated header")
    width, height = struct.unpack_from("<II", raw)
    expected = 8 + 4 * width * height
    if len(raw) != expected:
        raise FormatError(f"depth file {path}: expected {expected} bytes, got {len(raw)}")
    values = np.frombuffer(raw, dtype="<f4", offset=8).reshape(height, width)
    return DepthImage(values)


# --- camera / box / tag helpers -------------------------------------------


def camera_to_dict(camera: CameraModel) -> dict:
    return {
        "fx": camera.fx,
        "fy": camera.fy,
        "cx": camera.cx,
        "cy": camera.cy,
        "rotation": camera.rotation.tolist(),
        "translation": camera.translation.tolist(),
    }


def camera_from_dict(data: Mapping, where: str = "camera") -> CameraModel:
    try:
        return CameraModel(
            fx=float(_require(data, "fx", where)),
            fy=float(_require(data, "fy", where)),
            cx=float(_require(data, "cx", where)),
            cy=float(_require(data, "cy", where)),
            rotation=np.array(_require(data, "rotation", where), dtype=np.float64),
            translation=np.array(_require(data, "translation", where), dtype=np.float64),
        )
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{where}: {exc}") from exc


def _box_to_list(box: BoundingBox2D) -> list[float]:
    return [box.x_min, box.y_min, box.x_max, box.y_max]


def _box_from_list(values, where: str) -> BoundingBox2D:
    vals = _floats(values, where)
    if len(vals) != 4:
        raise FormatError(f"{where}: box needs 4 numbers, got {len(vals)}")
    return BoundingBox2D(*vals)


def _tag_to_dict(tag: LatencyTag) -> dict:
    return {"capture_time": tag.capture_time, "transmission_latency": tag.transmission_latency}


def _tag_from_dict(data: Mapping, where: str) -> LatencyTag:
    return LatencyTag(
        capture_time=float(_require(data, "capture_time", where)),
        transmission_latency=float(_require(data, "transmission_latency", where)),
    )


# --- detection stream (line-delimited JSON + depth sidecars) ----------------


def _depth_dir_name(stream_path: Path) -> str:
    stem = stream_path.name
    if stem.endswith(".jsonl"):
        stem = stem[: -len(".jsonl")]
    return f"{stem}_depth"


def write_stream(inputs: Sequence[FrameInput], path: str | Path) -> None:
    """Write frames as one JSON record per line plus binary depth sidecars.

    Depth images land in ``<name>_depth/frame_NNNNNN.bin`` next to the
    stream file and are referenced by relative path from each record.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    depth_dir = _depth_dir_name(path)
    feature_dim = None
    for frame in inputs:
        if frame.detections:
            feature_dim = int(frame.detections[0].f_img.shape[0])
            break
    width = inputs[0].depth.width if inputs else 0
    height = inputs[0].depth.height if inputs else 0

    lines = [
        dumps(
            {
                "schema": STREAM_SCHEMA,
                "feature_dim": feature_dim,
                "image_width": width,
                "image_height": height,
            }
        )
    ]
    for k, frame in enumerate(inputs, start=1):
        depth_ref = f"{depth_dir}/frame_{k:06d}.bin"
        write_depth_file(frame.depth, path.parent / depth_ref)
        record = {
            "frame_index": k,
            "latency_tag": _tag_to_dict(frame.latency_tag),
            "camera": camera_to_dict(frame.camera),
            "detections": [
                {
                    "box": _box_to_list(det.box),
                    "mask_rle": encode_mask(det.mask),
                    "label": det.label,
                    "f_img": det.f_img.tolist(),
                    "f_txt": det.f_txt.tolist(),
                }
                for det in frame.detections
            ],
            "relation_candidates": [
                {
                    "src": cand.src,
                    "dst": cand.dst,
                    "relation": cand.relation,
                    "zone": _box_to_list(cand.zone),
                }
                for cand in frame.relation_candidates
            ],
            "depth_ref": depth_ref,
        }
        lines.append(dumps(record))
    path.write_text("\n".join(lines) + "\n")


def parse_stream(path: str | Path) -> tuple[dict, list[FrameInput]]:
    """Read a stream file back into frame inputs (header dict, frames)."""
    path = Path(path)
    text = path.read_text()
    lines = [line for line in text.split("\n") if line.strip()]
    if not lines:
        raise FormatError(f"stream {path}: empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"stream {path}: bad header: {exc}") from exc
    _check_schema(header, STREAM_SCHEMA, f"stream {path}")
    width = int(_require(header, "image_width", "stream header"))
    height = int(_require(header, "image_height", "stream header"))

    frames: list[FrameInput] = []
    for lineno, line in enumerate(lines[1:], start=2):
        where = f"stream {path}:{lineno}"
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{where}: {exc}") from exc
        index = int(_require(record, "frame_index", where))
        if index != lineno - 1:
            raise FormatError(f"{where}: frame_index {index} out of order (expected {lineno - 1})")
        tag = _tag_from_dict(_require(record, "latency_tag", where), where)
        camera = camera_from_dict(_require(record, "camera", where), where)
        depth_ref = record.get("depth_ref")
        if depth_ref is None:
            depth = DepthImage(np.zeros((height, width), dtype=np.float32))
        else:
            depth = read_depth_file(path.parent / depth_ref)
        detections = []
        for d, det in enumerate(_require(record, "detections", where)):
            dwhere = f"{where} detection {d}"
            detections.append(
                Detection(
                    box=_box_from_list(_require(det, "box", dwhere), dwhere),
                    mask=decode_mask(_require(det, "mask_rle", dwhere), dwhere),
                    label=str(_require(det, "label", dwhere)),
                    f_img=np.array(_floats(_require(det, "f_img", dwhere), dwhere)),
                    f_txt=np.array(_floats(_require(det, "f_txt", dwhere), dwhere)),
                )
            )
        candidates = []
        for c, cand in enumerate(record.get("relation_candidates", [])):
            cwhere = f"{where} candidate {c}"
            candidates.append(
                RelationCandidate(
                    src=int(_require(cand, "src", cwhere)),
                    dst=int(_require(cand, "dst", cwhere)),
                    relation=str(_require(cand, "relation", cwhere)),
                    zone=_box_from_list(_require(cand, "zone", cwhere), cwhere),
                )
            )
        frames.append(
            FrameInput(
                latency_tag=tag,
                camera=camera,
                depth=depth,
                detections=tuple(detections),
                relation_candidates=tuple(candidates),
            )
        )
    return header, frames


# --- graph export / import --------------------------------------------------


def _node_to_dict(node: ObjectNode) -> dict:
    return {
        "node_id": node.node_id,
        "frame_index": node.frame_index,
        "box": _box_to_list(node.box),
        "mask_rle": encode_mask(node.mask),
        "label": node.label,
        "f_img": node.f_img.tolist(),
        "f_txt": node.f_txt.tolist(),
        "centroid": node.centroid.tolist(),
        "size": node.size.tolist(),
        "points": node.points.tolist(),
        "obs_time": node.obs_time,
    }


def _node_from_dict(data: Mapping, where: str) -> ObjectNode:
    return ObjectNode(
        node_id=int(_require(data, "node_id", where)),
        frame_index=int(_require(data, "frame_index", where)),
        box=_box_from_list(_require(data, "box", where), where),
        mask=decode_mask(_require(data, "mask_rle", where), where),
        label=str(_require(data, "label", where)),
        f_img=np.array(_floats(_require(data, "f_img", where), where)),
        f_txt=np.array(_floats(_require(data, "f_txt", where), where)),
        centroid=np.array(_floats(_require(data, "centroid", where), where)),
        size=np.array(_floats(_require(data, "size", where), where)),
        points=np.array(_require(data, "points", where), dtype=np.float64).reshape(-1, 3),
        obs_time=float(_require(data, "obs_time", where)),
    )


def graph_to_dict(graph: SceneGraph4D) -> dict:
    return {
        "schema": GRAPH_SCHEMA,
        "camera": camera_to_dict(graph.camera) if graph.camera is not None else None,
        "next_node_id": graph.next_node_id,
        "next_track_id": graph.next_track_id,
        "frames_dropped": graph.frames_dropped,
        "frames": [
            {
                "frame_index": fg.frame_index,
                "latency_tag": _tag_to_dict(fg.latency_tag),
                "image_width": fg.image_width,
                "image_height": fg.image_height,
                "nodes": [_node_to_dict(n) for n in fg.nodes],
                "spatial_edges": [
                    {"src": e.src, "dst": e.dst, "relation": e.relation, "cost": e.cost}
                    for e in fg.spatial_edges
                ],
            }
            for fg in graph.frames
        ],
        "temporal_edges": [
            {
                "relation": e.relation,
                "track_id": e.track_id,
                "event_frame": e.event_frame,
                "src_node": e.src_node,
                "src_frame": e.src_frame,
                "dst_node": e.dst_node,
                "dst_frame": e.dst_frame,
            }
            for e in graph.temporal_edges
        ],
        "tracks": [
            {
                "track_id": t.track_id,
                "centroid": t.centroid.tolist(),
                "descriptor": t.descriptor.tolist(),
                "label": t.label,
                "last_seen_time": t.last_seen_time,
                "status": t.status.value,
                "history": list(t.history),
                "velocity": t.velocity.tolist(),
            }
            for _, t in sorted(graph.tracks.items())
        ],
    }


def graph_from_dict(data: Mapping) -> SceneGraph4D:
    where = "graph"
    _check_schema(data, GRAPH_SCHEMA, where)
    camera_raw = _require(data, "camera", where)
    camera = camera_from_dict(camera_raw) if camera_raw is not None else None
    frames = []
    for fdata in _require(data, "frames", where):
        fwhere = f"graph frame {fdata.get('frame_index')}"
        frames.append(
            FrameGraph(
                frame_index=int(_require(fdata, "frame_index", fwhere)),
                latency_tag=_tag_from_dict(_require(fdata, "latency_tag", fwhere), fwhere),
                nodes=tuple(
                    _node_from_dict(n, f"{fwhere} node") for n in _require(fdata, "nodes", fwhere)
                ),
                spatial_edges=tuple(
                    SpatialEdge(
                        src=int(_require(e, "src", fwhere)),
                        dst=int(_require(e, "dst", fwhere)),
                        relation=str(_require(e, "relation", fwhere)),
                        cost=float(_require(e, "cost", fwhere)),
                    )
                    for e in _require(fdata, "spatial_edges", fwhere)
                ),
                image_width=int(_require(fdata, "image_width", fwhere)),
                image_height=int(_require(fdata, "image_height", fwhere)),
            )
        )
    edges = []
    for edata in _require(data, "temporal_edges", where):
        ewhere = "graph temporal edge"
        edges.append(
            TemporalEdge(
                relation=str(_require(edata, "relation", ewhere)),
                track_id=int(_require(edata, "track_id", ewhere)),
                event_frame=int(_require(edata, "event_frame", ewhere)),
                src_node=None if edata.get("src_node") is None else int(edata["src_node"]),
                src_frame=None if edata.get("src_frame") is None else int(edata["src_frame"]),
                dst_node=None if edata.get("dst_node") is None else int(edata["dst_node"]),
                dst_frame=None if edata.get("dst_frame") is None else int(edata["dst_frame"]),
            )
        )
    tracks: dict[int, Track] = {}
    for tdata in _require(data, "tracks", where):
        twhere = f"graph track {tdata.get('track_id')}"
        try:
            status = TrackStatus(_require(tdata, "status", twhere))
        except ValueError as exc:
            raise FormatError(f"{twhere}: {exc}") from exc
        track = Track(
            track_id=int(_require(tdata, "track_id", twhere)),
            centroid=np.array(_floats(_require(tdata, "centroid", twhere), twhere)),
            descriptor=np.array(_floats(_require(tdata, "descriptor", twhere), twhere)),
            label=str(_require(tdata, "label", twhere)),
            last_seen_time=float(_require(tdata, "last_seen_time", twhere)),
            status=status,
            history=tuple(int(n) for n in _require(tdata, "history", twhere)),
            velocity=np.array(_floats(_require(tdata, "velocity", twhere), twhere)),
        )
        tracks[track.track_id] = track
    return SceneGraph4D(
        frames=tuple(frames),
        temporal_edges=tuple(edges),
        tracks=MappingProxyType(tracks),
        camera=camera,
        next_node_id=int(_require(data, "next_node_id", where)),
        next_track_id=int(_require(data, "next_track_id", where)),
        frames_dropped=int(_require(data, "frames_dropped", where)),
    )


def write_graph(graph: SceneGraph4D, path: str | Path) -> None:
    Path(path).write_text(dumps(graph_to_dict(graph)) + "\n")


def read_graph(path: str | Path) -> SceneGraph4D:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"graph {path}: {exc}") from exc
    return graph_from_dict(data)


# --- scenario files ---------------------------------------------------------


def _interval_to_list(interval: tuple[float, float]) -> list:
    start, end = interval
    return [start, None if math.isinf(end) else end]


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    return {
        "schema": SCENARIO_SCHEMA,
        "family": spec.family,
        "seed": spec.seed,
        "duration": spec.duration,
        "frame_rate": spec.frame_rate,
        "image_width": spec.image_width,
        "image_height": spec.image_height,
        "feature_dim": spec.feature_dim,
        "camera": camera_to_dict(spec.camera),
        "noise": {
            "centroid_sigma": spec.noise.centroid_sigma,
            "feature_sigma": spec.noise.feature_sigma,
            "dropout_prob": spec.noise.dropout_prob,
            "label_flip_prob": spec.noise.label_flip_prob,
        },
        "uplink": [list(step) for step in spec.uplink.steps],
        "downlink": [list(step) for step in spec.downlink.steps],
        "near_threshold": spec.near_threshold,
        "objects": [
            {
                "true_id": obj.true_id,
                "label": obj.label,
                "size": list(obj.size),
                "txt_archetype": obj.txt_archetype.tolist(),
                "img_archetype": obj.img_archetype.tolist(),
                "waypoints": [[t, p.tolist()] for t, p in obj.waypoints],
                "visibility": [_interval_to_list(iv) for iv in obj.visibility],
            }
            for obj in spec.objects
        ],
        "commands": [
            {
                "text": cmd.text,
                "embedding": cmd.embedding.tolist(),
                "intended_id": cmd.intended_id,
                "issue_time": cmd.issue_time,
            }
            for cmd in spec.commands
        ],
    }


def scenario_from_dict(data: Mapping) -> ScenarioSpec:
    where = "scenario"
    _check_schema(data, SCENARIO_SCHEMA, where)
    objects = []
    for odata in _require(data, "objects", where):
        owhere = f"scenario object {odata.get('true_id')}"
        visibility = []
        for iv in _require(odata, "visibility", owhere):
            if len(iv) != 2:
                raise FormatError(f"{owhere}: visibility interval needs 2 entries")
            end = math.inf if iv[1] is None else float(iv[1])
            visibility.append((float(iv[0]), end))
        objects.append(
            SimObject(
                true_id=int(_require(odata, "true_id", owhere)),
                label=str(_require(odata, "label", owhere)),
                size=tuple(_floats(_require(odata, "size", owhere), owhere)),
                txt_archetype=np.array(_floats(_require(odata, "txt_archetype", owhere), owhere)),
                img_archetype=np.array(_floats(_require(odata, "img_archetype", owhere), owhere)),
                waypoints=tuple(
                    (float(t), np.array(_floats(p, owhere)))
                    for t, p in _require(odata, "waypoints", owhere)
                ),
                visibility=tuple(visibility),
            )
        )
    noise_raw = _require(data, "noise", where)
    commands = tuple(
        SimCommand(
            text=str(_require(c, "text", "scenario command")),
            embedding=np.array(_floats(_require(c, "embedding", "scenario command"), "scenario command")),
            intended_id=int(_require(c, "intended_id", "scenario command")),
            issue_time=float(_require(c, "issue_time", "scenario command")),
        )
        for c in _require(data, "commands", where)
    )
    return ScenarioSpec(
        family=str(_require(data, "family", where)),
        seed=int(_require(data, "seed", where)),
        duration=float(_require(data, "duration", where)),
        frame_rate=float(_require(data, "frame_rate", where)),
        image_width=int(_require(data, "image_width", where)),
        image_height=int(_require(data, "image_height", where)),
        feature_dim=int(_require(data, "feature_dim", where)),
        camera=camera_from_dict(_require(data, "camera", where)),
        objects=tuple(objects),
        noise=NoiseModel(
            centroid_sigma=float(_require(noise_raw, "centroid_sigma", where)),
            feature_sigma=float(_require(noise_raw, "feature_sigma", where)),
            dropout_prob=float(_require(noise_raw, "dropout_prob", where)),
            label_flip_prob=float(_require(noise_raw, "label_flip_prob", where)),
        ),
        uplink=LatencyProfile(tuple((float(t), float(d)) for t, d in _require(data, "uplink", where))),
        downlink=LatencyProfile(tuple((float(t), float(d)) for t, d in _require(data, "downlink", where))),
        near_threshold=float(_require(data, "near_threshold", where)),
        commands=commands,
    )


def write_scenario(spec: ScenarioSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(spec), indent=2, allow_nan=False) + "\n")


def read_scenario(path: str | Path) -> ScenarioSpec:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"scenario {path}: {exc}") from exc
    return scenario_from_dict(data)


# --- ground-truth log -------------------------------------------------------


def truth_to_dict(truth: GroundTruthLog) -> dict:
    return {
        "schema": TRUTH_SCHEMA,
        "frames": [
            {
                "frame_index": ft.frame_index,
                "capture_time": ft.capture_time,
                "detections": [
                    {"true_id": dt.true_id, "label": dt.label, "centroid": dt.centroid.tolist()}
                    for dt in ft.detections
                ],
                "relations": [list(rel) for rel in ft.relations],
            }
            for ft in truth.frames
        ],
        "commands": [
            {
                "intended_id": ct.intended_id,
                "issue_time": ct.issue_time,
                "arrival_time": ct.arrival_time,
                "centroid_at_issue": ct.centroid_at_issue.tolist(),
                "centroid_at_arrival": ct.centroid_at_arrival.tolist(),
            }
            for ct in truth.commands
        ],
    }


def truth_from_dict(data: Mapping) -> GroundTruthLog:
    where = "truth"
    _check_schema(data, TRUTH_SCHEMA, where)
    frames = tuple(
        FrameTruth(
            frame_index=int(_require(f, "frame_index", where)),
            capture_time=float(_require(f, "capture_time", where)),
            detections=tuple(
                DetectionTruth(
                    true_id=int(_require(d, "true_id", where)),
                    label=str(_require(d, "label", where)),
                    centroid=np.array(_floats(_require(d, "centroid", where), where)),
                )
                for d in _require(f, "detections", where)
            ),
            relations=tuple(
                (int(a), int(b), str(rel)) for a, b, rel in _require(f, "relations", where)
            ),
        )
        for f in _require(data, "frames", where)
    )
    commands = tuple(
        CommandTruth(
            intended_id=int(_require(c, "intended_id", where)),
            issue_time=float(_require(c, "issue_time", where)),
            arrival_time=float(_require(c, "arrival_time", where)),
            centroid_at_issue=np.array(_floats(_require(c, "centroid_at_issue", where), where)),
            centroid_at_arrival=np.array(_floats(_require(c, "centroid_at_arrival", where), where)),
        )
        for c in _require(data, "commands", where)
    )
    return GroundTruthLog(frames=frames, commands=commands)


def write_truth(truth: GroundTruthLog, path: str | Path) -> None:
    Path(path).write_text(dumps(truth_to_dict(truth)) + "\n")


def read_truth(path: str | Path) -> GroundTruthLog:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"truth {path}: {exc}") from exc
    return truth_from_dict(data)


# --- command files ----------------------------------------------------------


def command_to_dict(command: Command) -> dict:
    return {
        "schema": COMMAND_SCHEMA,
        "text": command.text,
        "embedding": command.embedding.tolist(),
        "issue_time": command.issue_time,
        "latency": command.latency,
    }


def command_from_dict(data: Mapping, where: str = "command") -> Command:
    if "schema" in data and data["schema"] != COMMAND_SCHEMA:
        raise FormatError(f"{where}: expected schema {COMMAND_SCHEMA!r}, got {data['schema']!r}")
    return Command(
        text=str(_require(data, "text", where)),
        embedding=np.array(_floats(_require(data, "embedding", where), where)),
        issue_time=float(_require(data, "issue_time", where)),
        latency=float(data.get("latency", 0.0)),
    )


def read_command(path: str | Path) -> Command:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"command {path}: {exc}") from exc
    return command_from_dict(data, where=f"command {path}")


def read_commands(path: str | Path) -> list[Command]:
    """A command file holds either one command object or {"commands": [...]}."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"commands {path}: {exc}") from exc
    if isinstance(data, Mapping) and "commands" in data:
        return [command_from_dict(c, f"commands {path}") for c in data["commands"]]
    return [command_from_dict(data, f"command {path}")]


# --- planner-facing subgraph payload ----------------------------------------


def subgraph_payload(sub: TaskSubgraph) -> dict:
    """Assemble the ordered payload dict for a task subgraph."""
    nodes = []
    for node, score in sub.nodes:
        relations = [
            {"relation": e.relation, "subject": e.src, "object": e.dst}
            for e in sorted(sub.edges, key=lambda e: (e.src, e.dst, e.relation))
            if node.node_id in (e.src, e.dst)
        ]
        history = [[t, c.tolist()] for t, c in sub.history.get(node.node_id, ())]
        nodes.append(
            {
                "id": node.node_id,
                "class": node.label,
                "centroid": node.centroid.tolist(),
                "size": node.size.tolist(),
                "score": score,
                "spatial_relations": relations,
                "motion_history": history,
            }
        )
    return {
        "schema": SUBGRAPH_SCHEMA,
        "command_text": sub.command.text,
        "aligned_frame_index": sub.aligned_frame_index,
        "aligned_frame_time": sub.aligned_capture_time,
        "latency_tag": _tag_to_dict(sub.latency_tag),
        "nodes": nodes,
        "scene_dynamics": [
            {"time": t, "track_id": tid, "event": event} for t, tid, event in sub.dynamics
        ],
    }


def serialize_subgraph(sub: TaskSubgraph | Mapping) -> str:
    """Canonical subgraph text; serialize(parse(text)) == text."""
    payload = sub if isinstance(sub, Mapping) else subgraph_payload(sub)
    if "schema" not in payload or payload["schema"] != SUBGRAPH_SCHEMA:
        raise FormatError(f"subgraph payload must declare schema {SUBGRAPH_SCHEMA!r}")
    return canonical_dumps(payload)


def parse_subgraph(text: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"subgraph: {exc}") from exc
    _check_schema(data, SUBGRAPH_SCHEMA, "subgraph")
    return data
