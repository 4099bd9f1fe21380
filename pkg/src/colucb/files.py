"""Versioned JSON files for structures, instances and experiments.

Structure::

    {"format": "colucb.structure", "version": 1, "num_arms": 3, "groups": [[0, 1], [1, 2]]}

Instance (a structure plus one reward model per arm)::

    {"format": "colucb.instance", "version": 1, "num_arms": 3, "groups": [[0, 1], [1, 2]],
     "arms": [{"kind": "gaussian", "mean": 0.9, "variance": 1.0}, {"kind": "bernoulli", "mean": 0.5}, ...]}

Experiment::

    {"format": "colucb.experiment", "version": 1,
     "instance": <inline instance object> | "relative/or/absolute/path.json",
     "policies": ["ColUCB", "IndependentUCB"], "horizon": 20000, "num_seeds": 50,
     "base_seed": 0, "const_scale": 0.01, "coupled": true, "default_arm": "empirical_best"}

Floats go through ``json`` (shortest repr), so values round-trip exactly.
"""
from __future__ import annotations

import json
import os
from pathlib import Path

from .core import GroupStructure, Instance, RewardModel, build_instance

VERSION = 1


class FormatError(ValueError):
    pass


def _expect(doc: dict, fmt: str) -> None:
    if not isinstance(doc, dict):
        raise FormatError("top-level JSON value must be an object")
    if doc.get("format") != fmt:
        raise FormatError(f"expected format {fmt!r}, got {doc.get('format')!r}")
    if doc.get("version") != VERSION:
        raise FormatError(f"unsupported {fmt} version {doc.get('version')!r}")


def structure_to_dict(structure: GroupStructure) -> dict:
    return {"format": "colucb.structure", "version": VERSION, "num_arms": structure.num_arms,
            "groups": structure.as_lists()}


def structure_from_dict(doc: dict) -> GroupStructure:
    try:
        return GroupStructure.from_lists(int(doc["num_arms"]), doc["groups"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed structure: {exc}") from exc


def model_to_dict(model: RewardModel) -> dict:
    if model.kind == "bernoulli":
        return {"kind": "bernoulli", "mean": model.mean}
    return {"kind": "gaussian", "mean": model.mean, "variance": model.variance}


def model_from_dict(doc: dict) -> RewardModel:
    try:
        kind = doc["kind"]
        if kind == "bernoulli":
            return RewardModel.bernoulli(doc["mean"])
        if kind == "gaussian":
            return RewardModel.gaussian(doc["mean"], doc.get("variance", 1.0))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed reward model: {exc}") from exc
    raise FormatError(f"unknown reward kind {kind!r}")


def instance_to_dict(instance: Instance) -> dict:
    d = structure_to_dict(instance.structure)
    d["format"] = "colucb.instance"
    d["arms"] = [model_to_dict(r) for r in instance.rewards]
    return d


def instance_from_dict(doc: dict) -> Instance:
    _expect(doc, "colucb.instance")
    structure = structure_from_dict(doc)
    if not isinstance(doc.get("arms"), list):
        raise FormatError("instance needs an 'arms' list")
    return build_instance(structure, [model_from_dict(a) for a in doc["arms"]])


def read_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc


def write_json(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n")


def save_structure(path, structure: GroupStructure) -> None:
    write_json(path, structure_to_dict(structure))


def save_instance(path, instance: Instance) -> None:
    write_json(path, instance_to_dict(instance))


def load_instance(path) -> Instance:
    return instance_from_dict(read_json(path))


def load_structure_or_instance(path) -> tuple[GroupStructure, Instance | None]:
    doc = read_json(path)
    fmt = doc.get("format") if isinstance(doc, dict) else None
    if fmt == "colucb.instance":
        inst = instance_from_dict(doc)
        return inst.structure, inst
    _expect(doc, "colucb.structure")
    return structure_from_dict(doc), None


def load_structure(path) -> GroupStructure:
    return load_structure_or_instance(path)[0]


def resolve_instance(ref, base_dir) -> tuple[Instance, str | None]:
    """An experiment's ``instance`` entry: inline object or a path relative to the experiment file."""
    if isinstance(ref, dict):
        return instance_from_dict(ref), None
    if isinstance(ref, str):
        p = ref if os.path.isabs(ref) else os.path.join(base_dir, ref)
        return load_instance(p), p
    raise FormatError("experiment 'instance' must be an object or a path")
