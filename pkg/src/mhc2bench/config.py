"""Run configuration shared by all pipeline stages."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

from .augmentation import WINDOW_SIZES
from .exceptions import ValidationError


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    k: int = 9
    window_length: int = 9
    year_cutoff: int = 2020
    validation_fraction: float = 0.05
    overlap_ratio: float = 0.25
    validation_mode: str = "stratified"
    cluster_identity: float = 0.8
    n_negatives: int = 4
    n_positives: int = 2
    length_jitter: int = 0
    window_sizes: tuple = WINDOW_SIZES
    window_draws: int = 8
    neighbor_distance: int = 15
    threshold_grid: str = "exact"
    aggregation: str = "max"
    accuracy_threshold: float = 0.5
    strict_cross_task: bool = False
    exclude_other_epitopes: bool = False
    mixmhc2_filter: bool = False

    def __post_init__(self):
        object.__setattr__(self, "window_sizes", tuple(int(s) for s in self.window_sizes))
        checks = [
            (self.k >= 1, "k must be >= 1"),
            (self.window_length >= 1, "window_length must be >= 1"),
            (0.0 <= self.validation_fraction < 1.0, "validation_fraction must be in [0, 1)"),
            (0.0 <= self.overlap_ratio <= 1.0, "overlap_ratio must be in [0, 1]"),
            (self.validation_mode in ("stratified", "cluster"), "validation_mode: stratified|cluster"),
            (0.0 < self.cluster_identity <= 1.0, "cluster_identity must be in (0, 1]"),
            (self.n_negatives >= 0, "n_negatives must be >= 0"),
            (self.n_positives >= 0, "n_positives must be >= 0"),
            (0 <= self.length_jitter <= 2, "length_jitter must be in [0, 2]"),
            (bool(self.window_sizes) and min(self.window_sizes) >= 1, "window_sizes must be positive"),
            (self.window_draws >= 1, "window_draws must be >= 1"),
            (self.neighbor_distance >= 1, "neighbor_distance must be >= 1"),
            (self.threshold_grid in ("exact", "fixed"), "threshold_grid: exact|fixed"),
            (self.aggregation in ("max", "mean"), "aggregation: max|mean"),
            (0.0 <= self.accuracy_threshold <= 1.0, "accuracy_threshold must be in [0, 1]"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValidationError(msg)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window_sizes"] = list(self.window_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValidationError(f"unknown config keys: {unknown}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def replace(self, **changes) -> "RunConfig":
        d = self.to_dict()
        d.update({k: v for k, v in changes.items() if v is not None})
        return type(self).from_dict(d)
