"""Run configuration: schema, validation with line-referenced errors, and problem assembly."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .evaluators import BoneConfig, BoneEvaluator, ExternalProcessEvaluator, SphereEvaluator, SpineConfig, SpineEvaluator
from .evaluators.spine import LIGAMENTS, MOTIONS
from .optimizer import OptimizerConfig
from .problem import ConstraintSpec, ObjectiveSpec, load_curves_csv
from .space import PRESET_NAMES, DesignSpace, GeometryConfig, LinearConstraint, VariableSpec, get_preset
from .srsm import DomainConfig, SRSMSettings, TerminationConfig

__all__ = ["ConfigError", "RunConfig", "build_problem", "dump_config", "load_config", "output_root", "parse_config"]


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class VariableModel(_Strict):
    name: str
    kind: Literal["continuous", "discrete"] = "continuous"
    lower: float | None = None
    upper: float | None = None
    levels: list[float] | None = None


class LinearConstraintModel(_Strict):
    name: str
    coefficients: dict[str, float]
    sense: Literal["<=", ">=", "<", ">"]
    bound: float = 0.0


class SpaceModel(_Strict):
    preset: Literal["bone_inferior", "bone_superior", "single_articulation", "dual_articulation", "custom"]
    variables: list[VariableModel] | None = None
    baseline: dict[str, float] | None = None
    linear_constraints: list[LinearConstraintModel] = []
    geometry: dict[str, Any] = {}

    @model_validator(mode="after")
    def _custom_needs_variables(self):
        if self.preset == "custom" and not self.variables:
            raise ValueError("custom spaces need a 'variables' list")
        if self.preset != "custom" and self.variables:
            raise ValueError("'variables' is only allowed with preset 'custom'")
        return self


class EvaluatorModel(_Strict):
    kind: Literal["bone", "spine", "sphere", "external"]
    side: Literal["inferior", "superior", "both"] | None = None
    mode: Literal["tdr", "intact", "synthetic"] = "tdr"
    constants: dict[str, Any] = {}
    command: str | None = None
    workdir: str | None = None
    timeout: float = 4 * 3600.0
    center: list[float] | None = None

    @model_validator(mode="after")
    def _external_needs_command(self):
        if self.kind == "external" and not self.command:
            raise ValueError("external evaluators need a 'command'")
        return self


class ObjectiveModel(_Strict):
    kind: Literal["weighted_scalar", "curve_mse"]
    response: str
    weight: float = Field(1.0, ge=0)
    absolute: bool = True
    target: str = "intact"  # "intact" or a CSV path with time,<response> columns
    normalization: float | None = Field(None, gt=0)


class ConstraintModel(_Strict):
    response: str
    bound: float
    direction: Literal["<=", ">="] = "<="
    scale: float | None = Field(None, gt=0)


class SamplerModel(_Strict):
    samples_per_iteration: int | None = Field(None, ge=1)
    pool_factor: int = Field(100, ge=1)
    use_sampling_constraints: bool = True


class OptimizerModel(_Strict):
    population: int = Field(100, ge=4)
    generations: int = Field(250, ge=1)
    crossover_rate: float = Field(0.9, ge=0, le=1)
    mutation_rate: float | None = Field(None, ge=0, le=1)
    mutation_sigma: float = Field(0.1, gt=0)
    blend_alpha: float = Field(0.5, ge=0)
    penalty_factor: float = Field(1e3, gt=0)
    penalty_milestones: list[int] = [50, 100, 150, 200]
    refine_steps: int = Field(200, ge=0)
    refine_tol: float = Field(1e-6, gt=0)
    fd_step: float = Field(1e-4, gt=0)


class TerminationModel(_Strict):
    tol_p: float = Field(0.01, ge=0)
    tol_f: float = Field(0.01, ge=0)
    max_iterations: int = Field(50, ge=1)


class DomainModel(_Strict):
    gamma_osc: float = Field(0.6, gt=0, le=1)
    gamma_pan: float = Field(1.0, gt=0, le=1)
    gamma_shrink: float = Field(0.75, gt=0, le=1)
    pan_threshold: float = Field(0.95, gt=0, le=1)
    resolution_floor: float = Field(0.005, gt=0, le=0.5)
    reuse_window: float = Field(1.2, ge=1)


class RunConfig(_Strict):
    name: str = "run"
    comment: str | list[str] | None = None
    mode: Literal["single", "split_then_combine"] = "single"
    space: SpaceModel
    evaluator: EvaluatorModel
    objectives: list[ObjectiveModel] = Field(min_length=1)
    constraints: list[ConstraintModel] = []
    sampler: SamplerModel = SamplerModel()
    optimizer: OptimizerModel = OptimizerModel()
    termination: TerminationModel = TerminationModel()
    domain_reduction: DomainModel = DomainModel()
    seed: int = Field(0, ge=0)
    parallelism: int = Field(1, ge=1)
    output_dir: str | None = None

    @model_validator(mode="after")
    def _split_needs_bone(self):
        if self.mode == "split_then_combine" and self.evaluator.kind != "bone":
            raise ValueError("split_then_combine mode is defined for the bone evaluator")
        return self


def _locate(text: str, loc) -> int | None:
    """1-based line of the innermost key of a pydantic error location."""
    lines = text.splitlines()
    line = 0
    found = None
    for part in loc:
        if isinstance(part, int):
            continue
        needle = f'"{part}"'
        for i in range(line, len(lines)):
            if needle in lines[i]:
                line = i
                found = i + 1
                break
    return found


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        msgs = []
        for err in exc.errors():
            where = _locate(text, err["loc"])
            path = ".".join(str(p) for p in err["loc"])
            prefix = f"{source}:{where}" if where else source
            msgs.append(f"{prefix}: {path}: {err['msg']}")
        raise ConfigError("\n".join(msgs)) from None


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read config: {exc}") from None
    return parse_config(text, str(p))


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json", exclude_none=True), indent=2) + "\n"


def output_root() -> Path:
    return Path(os.environ.get("SRSM_OPT_DIR", "runs"))


def build_space(cfg: SpaceModel, preset_override: str | None = None) -> DesignSpace:
    try:
        return _build_space(cfg, preset_override)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"space: {exc}") from None


def _build_space(cfg: SpaceModel, preset_override: str | None = None) -> DesignSpace:
    try:
        geometry = GeometryConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in cfg.geometry.items()})
    except TypeError as exc:
        raise ConfigError(f"space.geometry: {exc}") from None
    preset = preset_override or cfg.preset
    if preset != "custom":
        space = get_preset(preset, geometry)
    else:
        variables = tuple(
            VariableSpec(v.name, kind=v.kind, lower=v.lower, upper=v.upper, levels=tuple(v.levels) if v.levels else ())
            for v in cfg.variables
        )
        space = DesignSpace("custom", variables, "custom", geometry=geometry, baseline=cfg.baseline)
    if cfg.linear_constraints:
        lcs = tuple(LinearConstraint(c.name, c.coefficients, c.sense, c.bound) for c in cfg.linear_constraints)
        space = DesignSpace(space.name, space.variables, space.kind, space.constants, space.geometry, space.baseline, space.optimized, lcs)
    if cfg.baseline and preset != "custom":
        merged = dict(space.baseline or {})
        merged.update(cfg.baseline)
        space = DesignSpace(space.name, space.variables, space.kind, space.constants, space.geometry, merged, space.optimized, space.linear_constraints)
    return space


def build_evaluator(cfg: EvaluatorModel, space: DesignSpace, run_dir: Path | None = None):
    try:
        if cfg.kind == "bone":
            return BoneEvaluator(space, side=cfg.side, config=BoneConfig(geometry=space.geometry, **cfg.constants))
        if cfg.kind == "spine":
            return SpineEvaluator(space, SpineConfig(geometry=space.geometry, **cfg.constants), mode=cfg.mode)
        if cfg.kind == "sphere":
            return SphereEvaluator(space, center=cfg.center)
        workdir = Path(cfg.workdir) if cfg.workdir else (run_dir or output_root()) / "work"
        return ExternalProcessEvaluator(cfg.command, workdir, space, cfg.timeout)
    except TypeError as exc:
        raise ConfigError(f"evaluator.constants: {exc}") from None


def build_objectives(cfg: RunConfig, evaluator) -> tuple[list[ObjectiveSpec], dict]:
    """Objective specs plus the target curves they reference."""
    targets_cache = None
    specs, used = [], {}
    for o in cfg.objectives:
        target = None
        if o.kind == "curve_mse":
            if o.target == "intact":
                if not isinstance(evaluator, SpineEvaluator):
                    raise ConfigError(f"objective {o.response}: 'intact' targets need the spine evaluator")
                if targets_cache is None:
                    targets_cache = evaluator.targets()
                if o.response not in targets_cache:
                    raise ConfigError(f"objective {o.response}: no such intact curve")
                target = targets_cache[o.response]
            else:
                curves = load_curves_csv(o.target)
                if o.response not in curves:
                    raise ConfigError(f"objective {o.response}: column missing in {o.target}")
                target = curves[o.response]
            used[o.response] = target
        specs.append(ObjectiveSpec(o.kind, o.response, o.weight, o.absolute, target, o.normalization))
    return specs, used


def build_settings(cfg: RunConfig, seed: int | None = None, parallelism: int | None = None) -> SRSMSettings:
    o = cfg.optimizer
    opt = OptimizerConfig(
        population=o.population,
        generations=o.generations,
        crossover_rate=o.crossover_rate,
        mutation_rate=o.mutation_rate,
        mutation_sigma=o.mutation_sigma,
        blend_alpha=o.blend_alpha,
        penalty_factor=o.penalty_factor,
        penalty_milestones=tuple(o.penalty_milestones),
        refine_steps=o.refine_steps,
        refine_tol=o.refine_tol,
        fd_step=o.fd_step,
    )
    return SRSMSettings(
        samples_per_iteration=cfg.sampler.samples_per_iteration,
        pool_factor=cfg.sampler.pool_factor,
        optimizer=opt,
        termination=TerminationConfig(**cfg.termination.model_dump()),
        domain=DomainConfig(**cfg.domain_reduction.model_dump()),
        seed=cfg.seed if seed is None else seed,
        parallelism=cfg.parallelism if parallelism is None else parallelism,
        use_sampling_constraints=cfg.sampler.use_sampling_constraints,
    )


def build_problem(cfg: RunConfig, run_dir: Path | None = None, preset_override: str | None = None, seed: int | None = None, parallelism: int | None = None):
    """``(space, evaluator, objectives, constraints, settings, targets)`` for one run."""
    space = build_space(cfg.space, preset_override)
    evaluator = build_evaluator(cfg.evaluator, space, run_dir)
    if preset_override is not None and isinstance(evaluator, BoneEvaluator) and cfg.evaluator.side is None:
        evaluator = BoneEvaluator(space, config=evaluator.config)
    objectives, targets = build_objectives(cfg, evaluator)
    constraints = [ConstraintSpec(c.response, c.bound, c.direction, c.scale) for c in cfg.constraints]
    return space, evaluator, objectives, constraints, build_settings(cfg, seed, parallelism), targets


def eq2_objectives(motions=MOTIONS) -> list[dict]:
    return [
        {"kind": "curve_mse", "response": f"{q}_{m}", "weight": 1.0, "target": "intact"}
        for m in motions
        for q in [f"strain_{lig}" for lig in LIGAMENTS] + ["force_facet"]
    ]


def template(preset: str) -> dict:
    """Annotated template config for one of the four implant problems."""
    if preset not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {preset!r}")
    base = {
        "name": preset,
        "space": {"preset": preset},
        "sampler": {"samples_per_iteration": None, "pool_factor": 100},
        "optimizer": OptimizerModel().model_dump(),
        "termination": TerminationModel().model_dump(),
        "domain_reduction": DomainModel().model_dump(),
        "seed": 0,
        "parallelism": 1,
        "output_dir": f"runs/{preset}",
    }
    if preset.startswith("bone_"):
        base["comment"] = [
            "Weighted subsidence + expulsion displacement, stress and micromotion constraints.",
            "Run 'srsm-opt doe' first to calibrate the expulsion weight.",
        ]
        base["sampler"]["samples_per_iteration"] = 125
        base["evaluator"] = {"kind": "bone", "constants": {}}
        base["objectives"] = [
            {"kind": "weighted_scalar", "response": "d_subsidence", "weight": 1.0, "absolute": True},
            {"kind": "weighted_scalar", "response": "d_expulsion", "weight": 1.0, "absolute": True},
        ]
        base["constraints"] = [
            {"response": "sigma_max", "bound": 0.3, "direction": "<="},
            {"response": "d_micro", "bound": 0.150, "direction": "<="},
        ]
    else:
        base["comment"] = ["Sum of 16 normalized curve errors against the intact segment, stress and impingement constraints."]
        base["sampler"]["samples_per_iteration"] = 30 if preset == "single_articulation" else 100
        base["evaluator"] = {"kind": "spine", "mode": "tdr", "constants": {}}
        base["objectives"] = eq2_objectives()
        base["constraints"] = [
            {"response": "sigma_max", "bound": 0.3, "direction": "<="},
            {"response": "impingement", "bound": 0.0, "direction": "<="},
        ]
    return base
