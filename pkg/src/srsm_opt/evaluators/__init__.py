"""Evaluators: the contract plus analytic, bone, spine and external-process implementations."""

from .base import Evaluator, ResponseSet
from .benchmarks import FunctionEvaluator, SphereEvaluator, box_space
from .bone import BoneConfig, BoneEvaluator, bone_responses, combine_sides
from .external import ExternalProcessEvaluator, read_responses, write_design
from .spine import (
    LIGAMENTS,
    MOTIONS,
    LoadCase,
    SegmentParams,
    SpineConfig,
    SpineEvaluator,
    calibrate_intact,
    curve_names,
    generate_targets,
    spine_surrogate,
    tdr_params,
)

__all__ = [
    "BoneConfig",
    "BoneEvaluator",
    "Evaluator",
    "ExternalProcessEvaluator",
    "FunctionEvaluator",
    "LIGAMENTS",
    "LoadCase",
    "MOTIONS",
    "ResponseSet",
    "SegmentParams",
    "SphereEvaluator",
    "SpineConfig",
    "SpineEvaluator",
    "bone_responses",
    "box_space",
    "calibrate_intact",
    "combine_sides",
    "curve_names",
    "generate_targets",
    "read_responses",
    "spine_surrogate",
    "tdr_params",
    "write_design",
]
