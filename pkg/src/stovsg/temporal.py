"""Track-to-detection matching across frames.

Each new frame's nodes are matched against the live tracks (active ones,
plus recently disappeared ones still inside the reappearance grace period)
by a cost mixing 3D motion, appearance, and label agreement.  A globally
optimal one-to-one assignment is solved, then gated: only pairs under the
acceptance threshold hold; everything else either spawns a new track or
marks a disappearance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .assignment import min_cost_assignment
from .errors import InputRejected
from .model import AssociationOutcome, ObjectNode, Track, TrackStatus, cosine

MOTION_LAST = "last"
MOTION_CONSTANT_VELOCITY = "constant_velocity"


@dataclass(frozen=True)
class TemporalWeights:
    """Cost weights and gating for cross-frame identity matching."""

    w_pos: float = 0.4
    w_vis: float = 0.4
    delta_cls: float = 0.2
    d_max: float = 1.0  # metres; motion term saturates here
    eta: float = 0.5  # accept a pair only when its cost is strictly below
    grace_period: float = 10.0  # seconds a disappeared track stays matchable


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Dense track-by-node cost block with its id maps."""

    values: np.ndarray  # (T, N) float64
    track_ids: tuple[int, ...]
    node_ids: tuple[int, ...]


def predicted_centroid(track: Track, now: float, motion_model: str = MOTION_LAST) -> np.ndarray:
    """Where we expect the track now; optionally extrapolates at constant velocity."""
    if motion_model == MOTION_LAST:
        return track.centroid
    if motion_model == MOTION_CONSTANT_VELOCITY:
        dt = now - track.last_seen_time
        return track.centroid + track.velocity * max(dt, 0.0)
    raise InputRejected(f"unknown motion model {motion_model!r}")


def temporal_cost(
    track: Track,
    node: ObjectNode,
    w: TemporalWeights = TemporalWeights(),
    expected_centroid: np.ndarray | None = None,
) -> float:
    """Matching cost between one track and one candidate node.

    Motion is the centroid gap normalized by ``d_max`` and clamped to 1, so
    a far-off candidate is penalized no worse than ``w_pos``; appearance is
    one minus the cosine between the track descriptor and the node's image
    feature; a flat ``delta_cls`` is added when labels disagree.
    """
    if w.d_max <= 0:
        raise InputRejected(f"d_max must be positive, got {w.d_max}")
    ref = track.centroid if expected_centroid is None else np.asarray(expected_centroid, dtype=np.float64)
    gap = float(np.linalg.norm(ref - node.centroid))
    pos = w.w_pos * min(gap / w.d_max, 1.0)
    vis = w.w_vis * (1.0 - cosine(track.descriptor, node.f_img))
    cls = w.delta_cls if track.label != node.label else 0.0
    return pos + vis + cls


def eligible_tracks(tracks: Mapping[int, Track], w: TemporalWeights, now: float) -> list[Track]:
    """Active tracks plus disappeared ones still within the grace period."""
    out = []
    for tid in sorted(tracks):
        track = tracks[tid]
        if track.status is TrackStatus.ACTIVE:
            out.append(track)
        elif track.status is TrackStatus.DISAPPEARED and now - track.last_seen_time <= w.grace_period:
            out.append(track)
    return out


def build_cost_matrix(
    tracks: Mapping[int, Track] | Sequence[Track],
    nodes: Sequence[ObjectNode],
    w: TemporalWeights,
    now: float,
    motion_model: str = MOTION_LAST,
) -> CostMatrix:
    """Pairwise costs between matchable tracks (rows) and frame nodes (cols).

    Rows are ordered by ascending track id, columns follow the frame's node
    order; a mapping input is filtered to matchable tracks first.
    """
    if isinstance(tracks, Mapping):
        rows = eligible_tracks(tracks, w, now)
    else:
        rows = sorted(tracks, key=lambda t: t.track_id)
    values = np.zeros((len(rows), len(nodes)), dtype=np.float64)
    for i, track in enumerate(rows):
        ref = predicted_centroid(track, now, motion_model)
        for j, node in enumerate(nodes):
            values[i, j] = temporal_cost(track, node, w, expected_centroid=ref)
    return CostMatrix(
        values=values,
        track_ids=tuple(t.track_id for t in rows),
        node_ids=tuple(n.node_id for n in nodes),
    )


def solve_assignment(matrix: CostMatrix) -> list[tuple[int, int]]:
    """Optimal one-to-one (row, col) pairs for a cost block.

    Requires finite, non-negative entries.  Ties between equal-cost optima
    resolve to the lexicographically smallest pair sequence.
    """
    if matrix.values.size and float(matrix.values.min()) < 0:
        raise InputRejected("cost matrix entries must be non-negative")
    return min_cost_assignment(matrix.values)


def associate(
    tracks: Mapping[int, Track],
    nodes: Sequence[ObjectNode],
    w: TemporalWeights,
    now: float,
    motion_model: str = MOTION_LAST,
) -> AssociationOutcome:
    """Match a frame's nodes against live tracks and gate by threshold.

    Every matchable track lands in exactly one of ``accepted`` or
    ``disappeared``, and every node in exactly one of ``accepted`` or
    ``new_nodes``; assignment pairs at or above ``eta`` are rejected.
    """
    matrix = build_cost_matrix(tracks, nodes, w, now, motion_model)
    pairs = solve_assignment(matrix)

    accepted: list[tuple[int, int, float]] = []
    matched_tracks: set[int] = set()
    matched_nodes: set[int] = set()
    for row, col in pairs:
        cost = float(matrix.values[row, col])
        if cost < w.eta:
            tid = matrix.track_ids[row]
            nid = matrix.node_ids[col]
            accepted.append((tid, nid, cost))
            matched_tracks.add(tid)
            matched_nodes.add(nid)

    new_nodes = tuple(nid for nid in matrix.node_ids if nid not in matched_nodes)
    disappeared = tuple(tid for tid in matrix.track_ids if tid not in matched_tracks)
    return AssociationOutcome(
        accepted=tuple(accepted),
        new_nodes=new_nodes,
        disappeared=disappeared,
    )
