"""Run configuration, case manifests and the JSON schemas shipped with them."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from importlib import resources

import jsonschema

from .camera import IntrinsicConventions
from .errors import InvalidConfig, ManifestError
from .ident import AMCase, CompareSettings, PMCase
from .mvmo import OptimizerConfig
from .pnpf import SolverOptions


def load_schema(name: str) -> dict:
    text = resources.files("dentreg").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(document, name: str):
    """Raise :class:`jsonschema.ValidationError` if ``document`` breaks schema ``name``."""
    jsonschema.validate(document, load_schema(name))


@dataclass(frozen=True)
class RunConfig:
    method: str = "regions"
    seed: int = 0
    workers: int = 0  # 0: one worker per available CPU
    out_dir: str = "out"
    restarts: int = 3
    intrinsics: IntrinsicConventions = field(default_factory=IntrinsicConventions)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    solver: SolverOptions = field(default_factory=SolverOptions)
    lr_bandwidth: object = "silverman"
    lr_floor: float = 1e-12
    lr_leave_one_out: bool = False

    @classmethod
    def from_dict(cls, data) -> "RunConfig":
        try:
            validate(data, "config")
        except jsonschema.ValidationError as exc:
            raise InvalidConfig(f"config: {exc.message}") from exc
        intr = data.get("intrinsics", {})
        opt = data.get("optimizer", {})
        solver = dict(data.get("solver", {}))
        for key in ("focal_starts", "rotation_seeds"):
            if key in solver:
                solver[key] = tuple(float(v) for v in solver[key])
        lr = data.get("lr", {})
        try:
            return cls(
                method=data.get("method", "regions"),
                seed=int(data.get("seed", 0)),
                workers=int(data.get("workers", 0)),
                out_dir=data.get("out_dir", "out"),
                restarts=int(data.get("restarts", 3)),
                intrinsics=IntrinsicConventions(**intr),
                optimizer=OptimizerConfig(**opt),
                solver=SolverOptions(**solver),
                lr_bandwidth=lr.get("bandwidth", "silverman"),
                lr_floor=float(lr.get("floor", 1e-12)),
                lr_leave_one_out=bool(lr.get("leave_one_out", False)),
            )
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(f"config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidConfig(f"{path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        opt = self.optimizer.to_dict()
        opt.pop("seed")
        return {
            "method": self.method, "seed": self.seed, "workers": self.workers,
            "out_dir": self.out_dir, "restarts": self.restarts,
            "intrinsics": {"sensor_width_mm": self.intrinsics.sensor_width_mm,
                           "base_standoff_mm": self.intrinsics.base_standoff_mm,
                           "z_near_mm": self.intrinsics.z_near_mm},
            "optimizer": opt,
            "solver": {**self.solver.__dict__,
                       "focal_starts": list(self.solver.focal_starts),
                       "rotation_seeds": list(self.solver.rotation_seeds)},
            "lr": {"bandwidth": self.lr_bandwidth, "floor": self.lr_floor,
                   "leave_one_out": self.lr_leave_one_out},
        }

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)

    def compare_settings(self) -> CompareSettings:
        return CompareSettings(self.method, self.intrinsics,
                               replace(self.optimizer, seed=self.seed), self.solver, self.restarts)


@dataclass(frozen=True)
class Manifest:
    path: str
    am: list
    pm: list
    truth: dict


def load_manifest(path) -> Manifest:
    """Parse a case manifest; file paths are resolved relative to it."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    try:
        validate(data, "manifest")
    except jsonschema.ValidationError as exc:
        raise ManifestError(f"{path}: {exc.message}") from exc
    root = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return None if p is None else os.path.normpath(os.path.join(root, p))

    am = [AMCase(e["id"], resolve(e.get("segmentation")), resolve(e.get("landmarks")),
                 resolve(e.get("photo")),
                 None if e.get("image_size") is None else tuple(e["image_size"]),
                 e.get("occlusion_level")) for e in data["am"]]
    pm = [PMCase(e["id"], resolve(e["mesh"]), resolve(e.get("landmarks"))) for e in data["pm"]]
    truth = dict(data.get("truth", {}))
    pm_ids = {p.id for p in pm}
    am_ids = {a.id for a in am}
    for a, p in truth.items():
        if a not in am_ids:
            raise ManifestError("truth names an unknown AM case", a)
        if p not in pm_ids:
            raise ManifestError(f"truth names unknown PM case {p!r}", a)
    return Manifest(os.path.abspath(path), am, pm, truth)
