"""Experiment configuration files.

A config is a JSON object::

    {
      "schema_version": 1,
      "kind": "restarts",
      "seed": 0,
      "restarts": 10,
      "output_dir": "out/restarts",
      "scene": {"family": "discs", "dims": [256, 256], "seed": 0, "params": {}},
      "constraint": {"type": "support", "p": 1, "eps": 1e-14},
      "solver": {"max_iters": 50000, "record_every": 100},
      "params": {}
    }

Unknown keys anywhere in this structure are rejected.  ``params`` holds the
kind-specific settings listed in ``KIND_PARAMS``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import InvalidArgumentError
from .synth import SceneSpec

SCHEMA_VERSION = 1

KINDS = ("table1", "table2", "fig4_spectra", "fig4_1_spectra", "restarts",
         "nonunique_microlocal", "nonunique_reducible", "sharp_mask", "holography",
         "linear_model")

TOP_KEYS = {"schema_version", "kind", "seed", "restarts", "output_dir", "scene", "constraint",
            "solver", "params"}
CONSTRAINT_KEYS = {"type", "p", "eps", "radius"}
CONSTRAINT_TYPES = ("support", "nonneg", "l1")
SOLVER_KEYS = {"max_iters", "record_every", "stagnation_window", "stagnation_rel_tol", "method",
               "convergence_rtol", "signed_error"}

KIND_PARAMS = {
    "table1": {"samples", "ks", "ps", "kernel_center"},
    "table2": {"samples", "ks"},
    "fig4_spectra": {"ks", "p"},
    "fig4_1_spectra": {"ks", "p"},
    "restarts": {"normalize", "success_tol", "min_success", "min_stagnated", "square_factor"},
    "nonunique_microlocal": {"max_rel_diff"},
    "nonunique_reducible": {"samples", "min_separation", "max_rel_diff"},
    "sharp_mask": {"vertices", "normalize", "success_tol", "baseline_floor", "baseline_restarts"},
    "holography": {"offset", "arm", "width", "value", "normalize", "success_tol", "baseline_floor",
                   "baseline_restarts", "known_reference"},
    "linear_model": {"trials", "rows", "cols"},
}


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise InvalidArgumentError(f"unknown keys in {where}: {sorted(unknown)}")


@dataclass
class ConstraintSpec:
    type: str = "support"
    p: int = 0
    eps: Optional[float] = None
    radius: Optional[float] = None

    def __post_init__(self):
        if self.type not in CONSTRAINT_TYPES:
            raise InvalidArgumentError(f"unknown constraint type {self.type!r}")
        if self.p < 0:
            raise InvalidArgumentError("padding p must be non-negative")
        if self.type == "l1" and self.radius is not None and self.radius <= 0:
            raise InvalidArgumentError("l1 radius must be positive")


@dataclass
class ExperimentConfig:
    kind: str
    scene: Optional[SceneSpec] = None
    constraint: ConstraintSpec = field(default_factory=ConstraintSpec)
    solver: dict = field(default_factory=dict)
    restarts: int = 1
    seed: int = 0
    output_dir: str = "out"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown experiment kind {self.kind!r}")
        if self.restarts < 1:
            raise InvalidArgumentError("restarts must be >= 1")
        _reject_unknown(self.solver, SOLVER_KEYS, "solver")
        _reject_unknown(self.params, KIND_PARAMS[self.kind], f"params for {self.kind}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        _reject_unknown(d, TOP_KEYS, "config")
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise InvalidArgumentError(f"unsupported schema_version {version}")
        if "kind" not in d:
            raise InvalidArgumentError("config needs a 'kind'")
        cons = d.get("constraint", {})
        _reject_unknown(cons, CONSTRAINT_KEYS, "constraint")
        scene = SceneSpec.from_dict(d["scene"]) if d.get("scene") is not None else None
        return cls(kind=d["kind"], scene=scene, constraint=ConstraintSpec(**cons),
                   solver=dict(d.get("solver", {})), restarts=int(d.get("restarts", 1)),
                   seed=int(d.get("seed", 0)), output_dir=str(d.get("output_dir", "out")),
                   params=dict(d.get("params", {})))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InvalidArgumentError(f"{path}: {exc}") from exc
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        scene = None
        if self.scene is not None:
            scene = json.loads(self.scene.to_json())
        cons = {k: v for k, v in vars(self.constraint).items() if v is not None}
        return {"schema_version": SCHEMA_VERSION, "kind": self.kind, "seed": self.seed,
                "restarts": self.restarts, "output_dir": self.output_dir, "scene": scene,
                "constraint": cons, "solver": dict(self.solver), "params": dict(self.params)}

    def ensure_output_dir(self) -> str:
        os.makedirs(self.output_dir, exist_ok=True)
        if not os.access(self.output_dir, os.W_OK):
            raise InvalidArgumentError(f"output_dir {self.output_dir!r} is not writable")
        return self.output_dir
