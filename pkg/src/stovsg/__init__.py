"""Latency-aware 4-D scene graphs for delayed teleoperation streams.

Builds a per-frame object graph from segmented RGB-D detections, links
frames with identity and lifecycle edges, and grounds open-vocabulary
operator commands against the frame the operator was actually looking at
when they spoke — then follows the target forward to an up-to-date pose.
"""

from .assignment import min_cost_assignment
from .config import CONFIG_SCHEMA, EngineConfig, load_config, save_config
from .errors import EngineError, FormatError, InputRejected, NoAlignedFrame, NotFound
from .geometry import (
    DepthImage,
    centroid_and_size,
    iou,
    lift_mask,
    lift_pixel,
    project_point,
    union_box,
)
from .formats import (
    COMMAND_SCHEMA,
    GRAPH_SCHEMA,
    METRICS_SCHEMA,
    SCENARIO_SCHEMA,
    STREAM_SCHEMA,
    SUBGRAPH_SCHEMA,
    TRUTH_SCHEMA,
    canonical_dumps,
    command_from_dict,
    command_to_dict,
    decode_mask,
    dumps,
    encode_mask,
    graph_from_dict,
    graph_to_dict,
    parse_stream,
    parse_subgraph,
    read_command,
    read_commands,
    read_depth_file,
    read_graph,
    read_scenario,
    read_truth,
    scenario_from_dict,
    scenario_to_dict,
    serialize_subgraph,
    subgraph_payload,
    truth_from_dict,
    truth_to_dict,
    write_depth_file,
    write_graph,
    write_scenario,
    write_stream,
    write_truth,
)
from .metrics import (
    GroundingRecord,
    MetricsReport,
    evaluate,
    node_truth_map,
    score_graph,
    score_grounding,
)
from .model import (
    APPEARED,
    DISAPPEARED,
    SAME_INSTANCE,
    AssociationOutcome,
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
    cosine,
    empty_graph,
    normalize_label,
    validate_graph,
)
from .query import (
    STATUS_LIVE,
    STATUS_LOST,
    GroundingResult,
    QueryConfig,
    TaskSubgraph,
    extract_subgraph,
    ground_command,
    score_nodes,
)
from .replay import (
    SuiteResult,
    SuiteRow,
    TrialResult,
    build_graph,
    commands_from_scenario,
    format_suite,
    grounded_true_ids,
    run_suite,
    run_trial,
)
from .sim import (
    FAMILIES,
    FAMILY_DISTRACTOR,
    FAMILY_MOVED_REFERENCE,
    FAMILY_OCCLUSION,
    FAMILY_TARGET_MOVED,
    CommandTruth,
    DetectionTruth,
    FrameTruth,
    GroundTruthLog,
    LatencyProfile,
    NoiseModel,
    ScenarioSpec,
    SimCommand,
    SimObject,
    generate_stream,
    latency_channel,
    make_random_scenario,
    make_scenario,
    noise_preset,
)
from .spatial import SpatialWeights, resolve_ambiguous, spatial_cost
from .store import (
    FrameInput,
    frame_at_operator_time,
    ingest_frame,
    ingest_sequence,
    lifecycle_events,
    track_history,
)
from .temporal import (
    MOTION_CONSTANT_VELOCITY,
    MOTION_LAST,
    CostMatrix,
    TemporalWeights,
    associate,
    build_cost_matrix,
    eligible_tracks,
    predicted_centroid,
    solve_assignment,
    temporal_cost,
)

__version__ = "0.1.0"

__all__ = [
    "APPEARED",
    "COMMAND_SCHEMA",
    "CONFIG_SCHEMA",
    "DISAPPEARED",
    "FAMILIES",
    "FAMILY_DISTRACTOR",
    "FAMILY_MOVED_REFERENCE",
    "FAMILY_OCCLUSION",
    "FAMILY_TARGET_MOVED",
    "GRAPH_SCHEMA",
    "METRICS_SCHEMA",
    "MOTION_CONSTANT_VELOCITY",
    "MOTION_LAST",
    "SAME_INSTANCE",
    "SCENARIO_SCHEMA",
    "STATUS_LIVE",
    "STATUS_LOST",
    "STREAM_SCHEMA",
    "SUBGRAPH_SCHEMA",
    "TRUTH_SCHEMA",
    "AssociationOutcome",
    "BoundingBox2D",
    "CameraModel",
    "Command",
    "CommandTruth",
    "CostMatrix",
    "DepthImage",
    "Detection",
    "DetectionTruth",
    "EngineConfig",
    "EngineError",
    "FormatError",
    "FrameGraph",
    "FrameInput",
    "FrameTruth",
    "GroundTruthLog",
    "GroundingRecord",
    "GroundingResult",
    "InputRejected",
    "LatencyProfile",
    "LatencyTag",
    "MetricsReport",
    "NoAlignedFrame",
    "NoiseModel",
    "NotFound",
    "ObjectNode",
    "PixelMask",
    "QueryConfig",
    "RelationCandidate",
    "ScenarioSpec",
    "SceneGraph4D",
    "SimCommand",
    "SimObject",
    "SpatialEdge",
    "SpatialWeights",
    "SuiteResult",
    "SuiteRow",
    "TaskSubgraph",
    "TemporalEdge",
    "TemporalWeights",
    "Track",
    "TrackStatus",
    "TrialResult",
    "associate",
    "build_cost_matrix",
    "build_graph",
    "canonical_dumps",
    "centroid_and_size",
    "command_from_dict",
    "command_to_dict",
    "commands_from_scenario",
    "cosine",
    "decode_mask",
    "dumps",
    "eligible_tracks",
    "empty_graph",
    "encode_mask",
    "evaluate",
    "extract_subgraph",
    "format_suite",
    "frame_at_operator_time",
    "generate_stream",
    "graph_from_dict",
    "graph_to_dict",
    "ground_command",
    "grounded_true_ids",
    "ingest_frame",
    "ingest_sequence",
    "iou",
    "latency_channel",
    "lifecycle_events",
    "lift_mask",
    "lift_pixel",
    "load_config",
    "make_random_scenario",
    "make_scenario",
    "min_cost_assignment",
    "node_truth_map",
    "noise_preset",
    "normalize_label",
    "parse_stream",
    "parse_subgraph",
    "predicted_centroid",
    "project_point",
    "read_command",
    "read_commands",
    "read_depth_file",
    "read_graph",
    "read_scenario",
    "read_truth",
    "resolve_ambiguous",
    "run_suite",
    "run_trial",
    "save_config",
    "scenario_from_dict",
    "scenario_to_dict",
    "score_graph",
    "score_grounding",
    "score_nodes",
    "serialize_subgraph",
    "solve_assignment",
    "spatial_cost",
    "subgraph_payload",
    "temporal_cost",
    "track_history",
    "truth_from_dict",
    "truth_to_dict",
    "union_box",
    "validate_graph",
    "write_depth_file",
    "write_graph",
    "write_scenario",
    "write_stream",
    "write_truth",
]
