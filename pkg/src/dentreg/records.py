from __future__ import annotations

import math
from dataclasses import dataclass, field

from .camera import CameraParams

METHODS = ("landmarks-set1", "landmarks-set2", "landmarks-set3", "regions")


@dataclass(frozen=True)
class ComparisonScore:
    """One scored (AM photograph, PM scan) comparison; lower score is better."""

    am_id: str
    pm_id: str
    method: str
    score: float
    unscorable: bool = False
    reason: str | None = None
    params: CameraParams | None = None
    seed: int | None = None
    evaluations: int = 0
    restarts: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.unscorable and not math.isfinite(self.score):
            raise ValueError("a scorable comparison needs a finite score")

    @classmethod
    def failed(cls, am_id, pm_id, method, reason, seed=None):
        return cls(am_id, pm_id, method, math.inf, True, reason, seed=seed)

    def to_dict(self) -> dict:
        return {
            "am_id": self.am_id, "pm_id": self.pm_id, "method": self.method,
            "score": None if self.unscorable else self.score,
            "unscorable": self.unscorable, "reason": self.reason,
            "params": None if self.params is None else self.params.to_dict(),
            "seed": self.seed, "evaluations": self.evaluations,
            "restarts": self.restarts, "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d) -> "ComparisonScore":
        params = d.get("params")
        return cls(
            d["am_id"], d["pm_id"], d["method"],
            math.inf if d.get("score") is None else float(d["score"]),
            bool(d.get("unscorable", False)), d.get("reason"),
            None if params is None else CameraParams.from_dict(params),
            d.get("seed"), int(d.get("evaluations", 0)), int(d.get("restarts", 0)),
            dict(d.get("extra") or {}),
        )
