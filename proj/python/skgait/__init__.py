"""Skeleton gait recognition: geometry, fusion, anthropometrics, losses and the training/evaluation pipeline."""

import json as _json

from ._skgait import (
    JOINTS,
    PARENT_OF,
    SOURCE_JOINT_OF,
    SOURCE_JOINTS,
    Model,
    SkgaitError,
    anthropometrics,
    apply_transform,
    arcface,
    batch_hard_triplet,
    chain_to_master,
    dual_skeleton,
    evaluate,
    fuse,
    joint_name,
)
from . import _skgait


def count_parameters(config=None, include_classifier=True):
    """Trainable parameters of the model described by `config` (a run-config dict)."""
    return _skgait.count_parameters(_json.dumps(config or {}), include_classifier)


def run(command, config=None):
    """Run a CLI command ("gen-synth", "fuse", "train", "eval", "params", "export-embeddings")."""
    return _skgait.run_command(command, _json.dumps(config or {}))


__all__ = [
    "JOINTS",
    "PARENT_OF",
    "SOURCE_JOINT_OF",
    "SOURCE_JOINTS",
    "Model",
    "SkgaitError",
    "anthropometrics",
    "apply_transform",
    "arcface",
    "batch_hard_triplet",
    "chain_to_master",
    "count_parameters",
    "dual_skeleton",
    "evaluate",
    "fuse",
    "joint_name",
    "run",
]
