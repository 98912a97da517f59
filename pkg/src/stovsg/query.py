"""Command grounding against the latency-aligned frame.

The operator issued their command while looking at a *past* frame: the
newest one whose tagged arrival time precedes the issue time.  Grounding
therefore scores that frame's nodes, picks the winner, and only then walks
the winner's track forward to the present to recover an execution-time
pose.  A compact task subgraph around the winner is what a downstream
planner consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .errors import InputRejected, NoAlignedFrame, NotFound
from .model import (
    Command,
    FrameGraph,
    ObjectNode,
    SceneGraph4D,
    SpatialEdge,
    Track,
    cosine,
)
from .store import frame_at_operator_time, lifecycle_events

STATUS_LIVE = "live"
STATUS_LOST = "target-lost"


@dataclass(frozen=True)
class QueryConfig:
    """Scoring and subgraph extraction knobs."""

    beta: float = 0.5  # weight of the image-feature term
    top_k: int = 5
    neighbor_hops: int = 1
    history_depth: int | None = None  # None keeps the whole track history


@dataclass(frozen=True, eq=False)
class TaskSubgraph:
    """Planner-facing slice of the graph anchored at the aligned frame."""

    command: Command
    aligned_frame_index: int
    aligned_capture_time: float
    latency_tag: object
    nodes: tuple[tuple[ObjectNode, float], ...]  # (node, score), best first
    seed_ids: tuple[int, ...]  # the top-k node ids before neighbor expansion
    edges: tuple[SpatialEdge, ...]
    history: Mapping[int, tuple[tuple[float, np.ndarray], ...]]  # node id -> (time, centroid)
    dynamics: tuple[tuple[float, int, str], ...]  # (time, track_id, event)


@dataclass(frozen=True, eq=False)
class GroundingResult:
    """Outcome of resolving a command to a physical target."""

    command: Command
    aligned_frame_index: int
    aligned_node: ObjectNode
    score: float
    track_id: int | None
    status: str  # "live" or "target-lost"
    current_node: ObjectNode  # newest observation of the target
    centroid: np.ndarray  # execution-time (or last-known) position
    size: np.ndarray


def score_nodes(frame: FrameGraph, command: Command, cfg: QueryConfig = QueryConfig()) -> list[tuple[int, float]]:
    """Command relevance per node: text cosine plus ``beta`` times image cosine.

    Returns (node_id, score) sorted by descending score; exact ties order
    by ascending node id.
    """
    if cfg.beta < 0:
        raise InputRejected(f"beta must be non-negative, got {cfg.beta}")
    scored = []
    for node in frame.nodes:
        s = cosine(command.embedding, node.f_txt) + cfg.beta * cosine(command.embedding, node.f_img)
        scored.append((node.node_id, s))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored


def _frames_until(graph: SceneGraph4D, as_of: float | None) -> tuple[FrameGraph, ...]:
    if as_of is None:
        return graph.frames
    return tuple(fg for fg in graph.frames if fg.capture_time <= as_of)


def _view_until(graph: SceneGraph4D, frames: tuple[FrameGraph, ...]) -> SceneGraph4D:
    """The graph restricted to ``frames``, so alignment respects the cutoff."""
    return graph if len(frames) == len(graph.frames) else replace(graph, frames=frames)


def _track_of_node(graph: SceneGraph4D, node_id: int) -> Track | None:
    for track in graph.tracks.values():
        if node_id in track.history:
            return track
    return None


def _node_history(
    graph: SceneGraph4D, node_id: int, cfg: QueryConfig, cutoff_frame: int
) -> tuple[tuple[float, np.ndarray], ...]:
    track = _track_of_node(graph, node_id)
    if track is None:
        node = graph.node(node_id)
        entries = [(node.obs_time, node.centroid)]
    else:
        entries = []
        for nid in track.history:
            node = graph.node(nid)
            if node.frame_index <= cutoff_frame:
                entries.append((node.obs_time, node.centroid))
    if cfg.history_depth is not None:
        entries = entries[-cfg.history_depth :] if cfg.history_depth > 0 else []
    return tuple(entries)


def extract_subgraph(
    graph: SceneGraph4D,
    command: Command,
    cfg: QueryConfig = QueryConfig(),
    as_of: float | None = None,
    latency_aware: bool = True,
    fallback_to_earliest: bool = False,
) -> TaskSubgraph:
    """Build the task subgraph for a command.

    Scores the aligned frame, keeps the top-k nodes, pulls in spatial
    neighbors up to ``neighbor_hops`` away, attaches per-node motion
    history and the lifecycle events between the aligned frame and the
    newest one.  The result is closed: every edge endpoint is included.
    Without latency awareness the anchor is simply the newest frame.
    """
    frames = _frames_until(graph, as_of)
    if not frames:
        raise NoAlignedFrame("graph has no frames")
    if latency_aware:
        aligned = frame_at_operator_time(
            _view_until(graph, frames),
            command.issue_time,
            fallback_to_earliest=fallback_to_earliest,
        )
    else:
        aligned = frames[-1]
    ranked = score_nodes(aligned, command, cfg)
    scores = dict(ranked)
    seeds = [nid for nid, _ in ranked[: max(cfg.top_k, 0)]]

    # undirected adjacency over the aligned frame's spatial edges
    adjacency: dict[int, set[int]] = {}
    for edge in aligned.spatial_edges:
        adjacency.setdefault(edge.src, set()).add(edge.dst)
        adjacency.setdefault(edge.dst, set()).add(edge.src)

    included = set(seeds)
    frontier = set(seeds)
    for _ in range(max(cfg.neighbor_hops, 0)):
        frontier = {nxt for nid in frontier for nxt in adjacency.get(nid, ())} - included
        if not frontier:
            break
        included |= frontier

    by_id = {node.node_id: node for node in aligned.nodes}
    picked = sorted(included, key=lambda nid: (-scores[nid], nid))
    edges = tuple(
        e for e in aligned.spatial_edges if e.src in included and e.dst in included
    )
    newest = frames[-1]
    history = {
        nid: _node_history(graph, nid, cfg, cutoff_frame=newest.frame_index) for nid in picked
    }
    dynamics = lifecycle_events(graph, aligned.capture_time, newest.capture_time)
    return TaskSubgraph(
        command=command,
        aligned_frame_index=aligned.frame_index,
        aligned_capture_time=aligned.capture_time,
        latency_tag=aligned.latency_tag,
        nodes=tuple((by_id[nid], scores[nid]) for nid in picked),
        seed_ids=tuple(seeds),
        edges=edges,
        history=history,
        dynamics=dynamics,
    )


def ground_command(
    graph: SceneGraph4D,
    command: Command,
    cfg: QueryConfig = QueryConfig(),
    as_of: float | None = None,
    latency_aware: bool = True,
    fallback_to_earliest: bool = False,
) -> GroundingResult:
    """Resolve a command to a target node and an execution-time pose.

    Latency-aware mode anchors on the frame the operator was looking at
    when they spoke, then follows the winner's track identity forward to
    its newest observation (bounded by ``as_of`` when given).  When the
    track is gone from the newest frame the result reports ``target-lost``
    with the last-known pose.  Naive mode scores the newest frame directly.
    """
    frames = _frames_until(graph, as_of)
    if not frames:
        raise NoAlignedFrame("graph has no frames")
    newest = frames[-1]

    if latency_aware:
        aligned = frame_at_operator_time(
            _view_until(graph, frames),
            command.issue_time,
            fallback_to_earliest=fallback_to_earliest,
        )
    else:
        aligned = newest
    ranked = score_nodes(aligned, command, cfg)
    if not ranked:
        raise NotFound(f"frame {aligned.frame_index} has no nodes to ground against")
    best_id, best_score = ranked[0]
    aligned_node = graph.node(best_id)

    track = _track_of_node(graph, best_id)
    if track is None:
        # node never entered a track (shouldn't happen for ingested frames)
        current = aligned_node
        track_id = None
    else:
        visible = [nid for nid in track.history if graph.node(nid).frame_index <= newest.frame_index]
        current = graph.node(visible[-1]) if visible else aligned_node
        track_id = track.track_id
    # a target is live exactly when it was observed in the newest visible frame
    status = STATUS_LIVE if current.frame_index == newest.frame_index else STATUS_LOST

    return GroundingResult(
        command=command,
        aligned_frame_index=aligned.frame_index,
        aligned_node=aligned_node,
        score=float(best_score),
        track_id=track_id,
        status=status,
        current_node=current,
        centroid=current.centroid,
        size=current.size,
    )
