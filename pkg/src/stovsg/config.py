"""Engine configuration: one object, one JSON file, all defaults explicit."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FormatError
from .query import QueryConfig
from .spatial import SpatialWeights
from .temporal import MOTION_CONSTANT_VELOCITY, MOTION_LAST, TemporalWeights

CONFIG_SCHEMA = "stovsg-config/1"


@dataclass(frozen=True)
class EngineConfig:
    """Every tunable in one place; the zero-argument form is the default."""

    spatial: SpatialWeights = field(default_factory=SpatialWeights)
    temporal: TemporalWeights = field(default_factory=TemporalWeights)
    query: QueryConfig = field(default_factory=QueryConfig)
    max_points: int = 2048  # per-node point cap at ingestion
    max_frames: int | None = None  # optional frame retention window
    motion_model: str = MOTION_LAST
    descriptor_alpha: float = 0.3  # appearance EMA mixing factor
    fallback_to_earliest: bool = False  # pre-arrival queries use the first frame
    fifo_channel: bool = False  # force in-order delivery on simulated channels
    centroid_tol: float = 0.05  # metres; node-accuracy gate for scoring

    def to_dict(self) -> dict:
        return {
            "schema": CONFIG_SCHEMA,
            "spatial": {
                "w_iou": self.spatial.w_iou,
                "w_area": self.spatial.w_area,
                "w_ctr": self.spatial.w_ctr,
            },
            "temporal": {
                "w_pos": self.temporal.w_pos,
                "w_vis": self.temporal.w_vis,
                "delta_cls": self.temporal.delta_cls,
                "d_max": self.temporal.d_max,
                "eta": self.temporal.eta,
                "grace_period": self.temporal.grace_period,
            },
            "query": {
                "beta": self.query.beta,
                "top_k": self.query.top_k,
                "neighbor_hops": self.query.neighbor_hops,
                "history_depth": self.query.history_depth,
            },
            "engine": {
                "max_points": self.max_points,
                "max_frames": self.max_frames,
                "motion_model": self.motion_model,
                "descriptor_alpha": self.descriptor_alpha,
                "fallback_to_earliest": self.fallback_to_earliest,
                "fifo_channel": self.fifo_channel,
                "centroid_tol": self.centroid_tol,
            },
        }

    @staticmethod
    def from_dict(data: dict) -> "EngineConfig":
        if not isinstance(data, dict):
            raise FormatError("config must be a JSON object")
        schema = data.get("schema", CONFIG_SCHEMA)
        if schema != CONFIG_SCHEMA:
            raise FormatError(f"unsupported config schema {schema!r}")
        known = {"schema", "spatial", "temporal", "query", "engine"}
        unknown = set(data) - known
        if unknown:
            raise FormatError(f"unknown config keys: {sorted(unknown)}")

        def section(name: str, fields: set[str]) -> dict:
            raw = data.get(name, {})
            if not isinstance(raw, dict):
                raise FormatError(f"config section {name!r} must be an object")
            bad = set(raw) - fields
            if bad:
                raise FormatError(f"unknown keys in config section {name!r}: {sorted(bad)}")
            return raw

        sp = section("spatial", {"w_iou", "w_area", "w_ctr"})
        tp = section("temporal", {"w_pos", "w_vis", "delta_cls", "d_max", "eta", "grace_period"})
        qy = section("query", {"beta", "top_k", "neighbor_hops", "history_depth"})
        en = section(
            "engine",
            {
                "max_points",
                "max_frames",
                "motion_model",
                "descriptor_alpha",
                "fallback_to_earliest",
                "fifo_channel",
                "centroid_tol",
            },
        )
        cfg = EngineConfig(
            spatial=SpatialWeights(**sp),
            temporal=TemporalWeights(**tp),
            query=QueryConfig(**qy),
            **en,
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        t = self.temporal
        if t.d_max <= 0:
            raise FormatError(f"temporal.d_max must be positive, got {t.d_max}")
        if t.grace_period < 0:
            raise FormatError(f"temporal.grace_period must be non-negative, got {t.grace_period}")
        if min(t.w_pos, t.w_vis, t.delta_cls) < 0:
            raise FormatError("temporal weights must be non-negative")
        if min(self.spatial.w_iou, self.spatial.w_area, self.spatial.w_ctr) < 0:
            raise FormatError("spatial weights must be non-negative")
        if self.query.beta < 0:
            raise FormatError(f"query.beta must be non-negative, got {self.query.beta}")
        if self.query.top_k < 1:
            raise FormatError(f"query.top_k must be at least 1, got {self.query.top_k}")
        if self.query.neighbor_hops < 0:
            raise FormatError(f"query.neighbor_hops must be non-negative, got {self.query.neighbor_hops}")
        if self.query.history_depth is not None and self.query.history_depth < 0:
            raise FormatError("query.history_depth must be non-negative or null")
        if self.motion_model not in (MOTION_LAST, MOTION_CONSTANT_VELOCITY):
            raise FormatError(f"unknown engine.motion_model {self.motion_model!r}")
        if not 0 < self.descriptor_alpha <= 1:
            raise FormatError(f"engine.descriptor_alpha must be in (0, 1], got {self.descriptor_alpha}")
        if self.max_points < 1:
            raise FormatError(f"engine.max_points must be at least 1, got {self.max_points}")
        if self.max_frames is not None and self.max_frames < 1:
            raise FormatError("engine.max_frames must be at least 1 or null")
        if self.centroid_tol <= 0:
            raise FormatError(f"engine.centroid_tol must be positive, got {self.centroid_tol}")


def load_config(path: str | Path | None) -> EngineConfig:
    """Read a config file; ``None`` returns the built-in defaults."""
    if path is None:
        return EngineConfig()
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"config file {path} is not valid JSON: {exc}") from exc
    except TypeError as exc:
        raise FormatError(f"config file {path}: {exc}") from exc
    try:
        return EngineConfig.from_dict(data)
    except TypeError as exc:  # unexpected kwarg types from **section
        raise FormatError(f"config file {path}: {exc}") from exc


def save_config(config: EngineConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n")
