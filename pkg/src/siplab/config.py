"""Versioned, schema-validated experiment configuration.

Configurations are plain JSON documents validated against a strict schema
(unknown keys are hard errors, preventing silent typos in physics
parameters) and parsed into the domain objects of the other modules.
``parse(serialize(config))`` is the identity.
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import jsonschema

from .fields import TestFunction, TestFunctionKind
from .jumpkernel import KernelFamily, KernelSpec
from .simulate import InitialProfile, ProfileKind, SimParams

SCHEMA_VERSION = 1


class ExperimentKind(str, Enum):
    HYDRO = "hydro"
    STATIONARY_FLUCT = "stationary_fluct"
    NONEQ_FLUCT = "noneq_fluct"
    DUALITY_CHECK = "duality_check"
    MOSCO_CHECK = "mosco_check"
    MOMENT_BOUNDS = "moment_bounds"


_KERNEL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["d", "beta"],
    "properties": {
        "d": {"type": "integer", "enum": [1, 2]},
        "beta": {"type": "number", "exclusiveMinimum": 0.0, "exclusiveMaximum": 2.0},
        "family": {"type": "string", "enum": [f.value for f in KernelFamily]},
        "window": {"type": ["integer", "null"], "minimum": 1},
        "image_folds": {"type": "integer", "minimum": 0},
        "table": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["z", "weight"],
                "properties": {
                    "z": {"type": "array", "items": {"type": "integer"},
                          "minItems": 1, "maxItems": 2},
                    "weight": {"type": "number", "minimum": 0.0},
                },
            },
        },
    },
}

_PROFILE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"type": "string", "enum": [p.value for p in ProfileKind]},
        "level": {"type": "number", "minimum": 0.0},
        "amplitude": {"type": "number", "minimum": 0.0},
        "center": {"type": "number"},
        "width": {"type": "number", "exclusiveMinimum": 0.0},
        "table": {"type": "array", "items": {"type": "number", "minimum": 0.0}},
    },
}

_TEST_FUNCTION_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"type": "string", "enum": [k.value for k in TestFunctionKind]},
        "mode": {"type": "integer", "minimum": 0},
        "phase": {"type": "string", "enum": ["cos", "sin"]},
        "amplitude": {"type": "number"},
        "center": {"type": "number"},
        "width": {"type": "number", "exclusiveMinimum": 0.0},
        "table": {"type": "array", "items": {"type": "number"}},
        "label": {"type": "string"},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "kind", "kernel", "alpha", "horizon",
                 "profile", "replicas", "n_ladder", "master_seed"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "kind": {"type": "string", "enum": [k.value for k in ExperimentKind]},
        "kernel": _KERNEL_SCHEMA,
        "alpha": {"type": "number", "exclusiveMinimum": 0.0},
        "horizon": {"type": "number", "minimum": 0.0},
        "snapshot_times": {"type": "array", "items": {"type": "number", "minimum": 0.0}},
        "profile": _PROFILE_SCHEMA,
        "test_functions": {"type": "array", "items": _TEST_FUNCTION_SCHEMA},
        "replicas": {"type": "integer", "minimum": 1},
        "n_ladder": {"type": "array", "items": {"type": "integer", "minimum": 4},
                     "minItems": 1},
        "out_dir": {"type": "string"},
        "master_seed": {"type": "integer", "minimum": 0},
    },
}


class ConfigError(ValueError):
    """Invalid experiment configuration (schema violation or bad physics)."""


@dataclass
class ExperimentConfig:
    """Fully parsed experiment description.

    Equality is defined through the serialized form, so
    ``parse(serialize(c)) == c`` holds for every valid configuration.
    """

    kind: ExperimentKind
    kernel: KernelSpec
    alpha: float
    horizon: float
    snapshot_times: tuple = ()
    profile: InitialProfile = None
    test_functions: tuple = ()
    replicas: int = 1
    n_ladder: tuple = (32,)
    out_dir: str = "out"
    master_seed: int = 0

    def __post_init__(self):
        if self.replicas < 1:
            raise ConfigError("replica count must be >= 1")
        ladder = list(self.n_ladder)
        if ladder != sorted(set(ladder)):
            raise ConfigError("n-ladder must be strictly increasing")
        for t in self.snapshot_times:
            if not 0.0 <= t <= self.horizon:
                raise ConfigError("snapshot times must lie in [0, horizon]")

    def sim_params(self) -> SimParams:
        return SimParams(alpha=self.alpha, beta=self.kernel.beta,
                         horizon=self.horizon,
                         snapshot_times=tuple(self.snapshot_times),
                         seed=self.master_seed)

    def __eq__(self, other):
        if not isinstance(other, ExperimentConfig):
            return NotImplemented
        return serialize(self) == serialize(other)


def _kernel_to_doc(spec: KernelSpec) -> dict:
    doc = {"d": spec.d, "beta": spec.beta, "family": spec.family.value,
           "window": spec.window, "image_folds": spec.image_folds}
    if spec.table is not None:
        doc["table"] = [{"z": list(z), "weight": float(w)}
                        for z, w in sorted(spec.table.items())]
    return doc


def _kernel_from_doc(doc: dict) -> KernelSpec:
    table = None
    if "table" in doc:
        table = {tuple(row["z"]): float(row["weight"]) for row in doc["table"]}
    return KernelSpec(d=doc["d"], beta=doc["beta"],
                      family=KernelFamily(doc.get("family", "power_law_lattice")),
                      window=doc.get("window"),
                      image_folds=doc.get("image_folds", 3),
                      table=table)


def _profile_to_doc(profile: InitialProfile) -> dict:
    doc = {"kind": profile.kind.value}
    if profile.kind is ProfileKind.CONSTANT:
        doc["level"] = profile.level
    elif profile.kind is ProfileKind.GAUSSIAN_BUMP:
        doc.update(level=profile.level, amplitude=profile.amplitude,
                   center=profile.center, width=profile.width)
    else:
        doc["table"] = [float(v) for v in profile.table]
    return doc


def _profile_from_doc(doc: dict) -> InitialProfile:
    kind = ProfileKind(doc["kind"])
    return InitialProfile(kind=kind, level=doc.get("level", 0.0),
                          amplitude=doc.get("amplitude", 0.0),
                          center=doc.get("center", 0.5),
                          width=doc.get("width", 0.1),
                          table=tuple(doc["table"]) if "table" in doc else None)


def _test_function_to_doc(phi: TestFunction) -> dict:
    doc = {"kind": phi.kind.value, "label": phi.label}
    if phi.kind is TestFunctionKind.FOURIER_MODE:
        doc.update(mode=phi.mode, phase=phi.phase, amplitude=phi.amplitude)
    elif phi.kind is TestFunctionKind.GAUSSIAN_BUMP:
        doc.update(amplitude=phi.amplitude, center=phi.center, width=phi.width)
    else:
        doc["table"] = [float(v) for v in phi.table]
    return doc


def _test_function_from_doc(doc: dict) -> TestFunction:
    kind = TestFunctionKind(doc["kind"])
    return TestFunction(kind=kind, mode=doc.get("mode", 1),
                        phase=doc.get("phase", "cos"),
                        amplitude=doc.get("amplitude", 1.0),
                        center=doc.get("center", 0.5),
                        width=doc.get("width", 0.1),
                        table=tuple(doc["table"]) if "table" in doc else None,
                        label=doc.get("label", ""))


def serialize(config: ExperimentConfig) -> dict:
    """JSON-ready document for an experiment configuration."""
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": config.kind.value,
        "kernel": _kernel_to_doc(config.kernel),
        "alpha": config.alpha,
        "horizon": config.horizon,
        "snapshot_times": [float(t) for t in config.snapshot_times],
        "profile": _profile_to_doc(config.profile),
        "test_functions": [_test_function_to_doc(p) for p in config.test_functions],
        "replicas": config.replicas,
        "n_ladder": [int(n) for n in config.n_ladder],
        "out_dir": config.out_dir,
        "master_seed": config.master_seed,
    }


def parse(doc: dict) -> ExperimentConfig:
    """Validate a JSON document against the schema and build the config."""
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"configuration rejected: {exc.message}") from exc
    try:
        return ExperimentConfig(
            kind=ExperimentKind(doc["kind"]),
            kernel=_kernel_from_doc(doc["kernel"]),
            alpha=doc["alpha"],
            horizon=doc["horizon"],
            snapshot_times=tuple(doc.get("snapshot_times", ())),
            profile=_profile_from_doc(doc["profile"]),
            test_functions=tuple(_test_function_from_doc(p)
                                 for p in doc.get("test_functions", ())),
            replicas=doc["replicas"],
            n_ladder=tuple(doc["n_ladder"]),
            out_dir=doc.get("out_dir", "out"),
            master_seed=doc["master_seed"],
        )
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"configuration rejected: {exc}") from exc


def load(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
    return parse(doc)


def dump(config: ExperimentConfig, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(serialize(config), fh, indent=2, sort_keys=True)
        fh.write("\n")
