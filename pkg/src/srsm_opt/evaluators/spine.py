"""Quasi-static single-DOF spinal segment surrogate.

For each motion the applied moment ramps up after a settling phase and, at
every 10 ms output step, the rotation is found by bisection on the scalar
moment balance

    M(t) + bias = joint(phi) + sum_lig r * F_lig + r_facet * F_facet

The intact joint is a cubic rotational spring with a fixed translation
coupling; an implanted joint is a preloaded ball articulation whose
anteroposterior travel is limited by stiff trough walls.  Angles are in
degrees, lengths in mm, forces in N and moments in N*m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .. import kernels
from ..problem import Curve
from ..space import DesignPoint, DesignSpace, GeometryConfig
from .base import Evaluator, ResponseSet

__all__ = [
    "LIGAMENTS",
    "MOTIONS",
    "IntactJoint",
    "Ligament",
    "LoadCase",
    "SegmentParams",
    "SpineConfig",
    "SpineEvaluator",
    "TDRJoint",
    "calibrate_intact",
    "curve_names",
    "generate_targets",
    "spine_surrogate",
    "tdr_params",
]

MOTIONS = ("flexion", "extension", "lateral_bending", "axial_rotation")
LIGAMENTS = ("capsular", "interspinal", "flavum")


@dataclass(frozen=True)
class LoadCase:
    name: str
    moment: float
    preload: float = 73.6
    ramp_duration: float = 1.0
    settling: float = 0.1
    sign: int = 1  # direction of the reported angle / translation
    couples_translation: bool = False

    def __post_init__(self):
        if self.ramp_duration <= 0 or self.settling < 0:
            raise ValueError("ramp_duration must be positive and settling non-negative")

    def moment_curve(self, dt: float = 0.010) -> np.ndarray:
        n = int(round((self.settling + self.ramp_duration) / dt)) + 1
        t = np.arange(n) * dt
        return self.moment * np.clip((t - self.settling) / self.ramp_duration, 0.0, 1.0)


DEFAULT_LOAD_CASES = {
    "flexion": LoadCase("flexion", 1.8, sign=1, couples_translation=True),
    "extension": LoadCase("extension", 1.0, sign=-1, couples_translation=True),
    "lateral_bending": LoadCase("lateral_bending", 1.8),
    "axial_rotation": LoadCase("axial_rotation", 1.8),
}


@dataclass(frozen=True)
class Ligament:
    name: str
    lever_arms: Mapping[str, float]  # mm, per motion
    rest_length: float | None = None  # mm; None -> calibrated
    translation_coupling: float = 0.5  # mm of elongation per mm of translation
    slack: float = 0.0
    stiffness: float = 20.0  # N per unit strain

    def __post_init__(self):
        if self.stiffness < 0 or self.slack < 0:
            raise ValueError("ligament stiffness and slack must be non-negative")


@dataclass(frozen=True)
class Facet:
    lever_arms: Mapping[str, float]  # mm
    engagement: Mapping[str, float]  # deg
    stiffness: Mapping[str, float]  # N/deg

    def __post_init__(self):
        if any(v < 0 for v in self.stiffness.values()):
            raise ValueError("facet stiffness must be non-negative")


@dataclass(frozen=True)
class IntactJoint:
    k1: Mapping[str, float]  # N*m/deg
    k3: Mapping[str, float]  # N*m/deg^3
    kappa: Mapping[str, float]  # mm/deg

    kind = 0

    def vector(self, motion: str) -> np.ndarray:
        return np.array([self.k1[motion], self.k3[motion], self.kappa[motion], 0, 0, 0, 0, 0], dtype=float)


@dataclass(frozen=True)
class TDRJoint:
    preload: float
    r_eff: float  # mm, rotation centre to contact
    x_c: float  # mm, anterior offset of the rotation centre
    travel_ant: float  # mm
    travel_post: float  # mm
    k_wall_ant: float  # N/mm
    k_wall_post: float  # N/mm
    k_art: Mapping[str, float]  # N*m/deg per motion, residual soft-tissue stiffness
    contact_radius: float  # mm
    clearance_available: float  # mm

    kind = 1

    def vector(self, motion: str) -> np.ndarray:
        return np.array(
            [self.preload, self.r_eff, self.x_c, self.travel_ant, self.travel_post, self.k_wall_ant, self.k_wall_post, self.k_art[motion]],
            dtype=float,
        )


@dataclass(frozen=True)
class SegmentParams:
    ligaments: tuple[Ligament, ...]
    facet: Facet
    joint: IntactJoint | TDRJoint
    scale: float = 0.75
    lever_shift: Mapping[str, float] = field(default_factory=lambda: {"flexion": 1.0, "extension": 1.0, "lateral_bending": 0.0, "axial_rotation": 0.5})


@dataclass(frozen=True)
class SpineConfig:
    dt: float = 0.010
    load_cases: Mapping[str, LoadCase] = field(default_factory=lambda: dict(DEFAULT_LOAD_CASES))
    ligaments: tuple[Ligament, ...] = (
        Ligament("capsular", {"flexion": 12.0, "extension": 6.0, "lateral_bending": 10.0, "axial_rotation": 8.0}, 5.0, 0.4, 0.0, 20.0),
        Ligament("interspinal", {"flexion": 40.0, "extension": 4.0, "lateral_bending": 6.0, "axial_rotation": 5.0}, None, 1.0, 0.0, 15.0),
        Ligament("flavum", {"flexion": 25.0, "extension": 3.0, "lateral_bending": 8.0, "axial_rotation": 4.0}, 12.0, 0.6, 0.0, 20.0),
    )
    facet_lever_arms: Mapping[str, float] = field(default_factory=lambda: {"flexion": 12.0, "extension": 12.0, "lateral_bending": 15.0, "axial_rotation": 20.0})
    facet_engagement: Mapping[str, float] = field(default_factory=lambda: {"flexion": 90.0, "extension": 2.0, "lateral_bending": 1.5, "axial_rotation": 0.5})
    # calibration targets of the intact segment
    target_angle: Mapping[str, float] = field(default_factory=lambda: {"flexion": 5.48, "extension": 6.16, "lateral_bending": 3.20, "axial_rotation": 2.49})
    target_translation: Mapping[str, float] = field(default_factory=lambda: {"flexion": 1.03, "extension": 1.19})
    target_facet_force: Mapping[str, float] = field(default_factory=lambda: {"flexion": 0.0, "extension": 53.77, "lateral_bending": 8.04, "axial_rotation": 47.41})
    target_interspinal_flexion_strain: float = 0.638
    cubic_fraction: float = 0.0  # share of the intact joint moment carried by the cubic term
    # implanted joint
    scale: float = 0.75
    cor_height: float = 2.0  # mm added to the scaled sphere radius
    # share of the intact joint stiffness kept by the remaining soft tissue
    residual_fraction: float = 0.75
    k_wall0: float = 400.0  # N/mm
    wall_r0: float = 0.5  # mm
    load_x: float = 0.0  # mm, AP position of the follower load
    rim_length: float = 8.0  # mm, lever of the rim for impingement
    clearance_gap0: float = 1.0  # mm
    hertz_c: float = 1.0
    hertz_kappa: float = 1.0
    geometry: GeometryConfig = field(default_factory=GeometryConfig)

    def updated(self, **changes) -> "SpineConfig":
        return replace(self, **changes)


def curve_names(motions=MOTIONS) -> list[str]:
    """The 16 tracked curves: three ligament strains and the facet force per motion."""
    out = []
    for m in motions:
        out += [f"strain_{lig}_{m}" for lig in LIGAMENTS] + [f"force_facet_{m}"]
    return out


def _lever(lig: Ligament, motion: str, shift: float) -> float:
    return max(lig.lever_arms[motion] + shift, 0.1)


def calibrate_intact(cfg: SpineConfig = SpineConfig()) -> SegmentParams:
    """Closed-form intact calibration against the preoperative targets.

    Interspinal rest length gives the peak flexion strain, facet stiffness
    the peak facet force, and the joint spring carries the remaining moment
    at the target angle.
    """
    rad = {m: math.radians(a) for m, a in cfg.target_angle.items()}
    tau = {m: cfg.target_translation.get(m, 0.0) for m in MOTIONS}
    ligs = []
    for lig in cfg.ligaments:
        if lig.rest_length is None:
            if lig.name != "interspinal":
                raise ValueError(f"rest length of {lig.name} must be given")
            elong = lig.lever_arms["flexion"] * rad["flexion"] + lig.translation_coupling * tau["flexion"]
            lig = replace(lig, rest_length=elong / (cfg.target_interspinal_flexion_strain + lig.slack))
        ligs.append(lig)
    k_facet = {}
    for m in MOTIONS:
        over = cfg.target_angle[m] - cfg.facet_engagement[m]
        f = cfg.target_facet_force.get(m, 0.0)
        if f > 0 and over <= 0:
            raise ValueError(f"facet engagement for {m} must be below the target angle")
        k_facet[m] = f / over if f > 0 else 0.0
    facet = Facet(dict(cfg.facet_lever_arms), dict(cfg.facet_engagement), k_facet)
    k1, k3, kappa = {}, {}, {}
    for m in MOTIONS:
        phi = cfg.target_angle[m]
        carried = 0.0
        for lig in ligs:
            eps = max(0.0, (lig.lever_arms[m] * rad[m] + lig.translation_coupling * tau[m]) / lig.rest_length - lig.slack)
            carried += lig.lever_arms[m] * lig.stiffness * eps / 1000.0
        carried += facet.lever_arms[m] * k_facet[m] * max(0.0, phi - facet.engagement[m]) / 1000.0
        rest = cfg.load_cases[m].moment - carried
        if rest <= 0:
            raise ValueError(f"passive structures alone exceed the {m} moment; lower their stiffness")
        k3[m] = cfg.cubic_fraction * rest / phi ** 3
        k1[m] = (1.0 - cfg.cubic_fraction) * rest / phi
        kappa[m] = tau[m] / phi
    return SegmentParams(tuple(ligs), facet, IntactJoint(k1, k3, kappa), cfg.scale, {m: 0.0 for m in MOTIONS})


def _wall(k0: float, depth: float, fillet: float, r0: float) -> float:
    depth = max(depth, 0.0)
    return k0 * depth / (depth + fillet + r0)


def _series(a: float, b: float) -> float:
    return a * b / (a + b) if a + b > 0 else 0.0


def tdr_params(resolved: Mapping[str, float], kind: str, intact: SegmentParams, cfg: SpineConfig = SpineConfig()) -> SegmentParams:
    """Implanted segment: intact soft tissue plus a joint built from the design."""
    s = cfg.scale
    clr = cfg.geometry.radial_clearance
    if kind == "single_articulation":
        radius = resolved["sphere_radius"]
        r_eff = s * (radius + resolved["sphere_origin_zshift"]) + cfg.cor_height
        x_c = s * resolved["sphere_origin_xshift"]
        half = 0.5 * resolved["cylinder_height"]
        off = resolved["cylinder_offset"]
        t_ant = s * max(0.0, half + off) + clr
        t_post = s * max(0.0, half - off) + clr
        depth = s * resolved["trough_depth"]
        k_ant = _wall(cfg.k_wall0, depth, s * resolved["torus1_radius1"], cfg.wall_r0)
        k_post = _wall(cfg.k_wall0, depth, s * resolved["torus2_radius1"], cfg.wall_r0)
        contact = s * radius
        avail = cfg.clearance_gap0 + s * (resolved["sphere_origin_zshift"] + resolved["cylinder_height"])
    elif kind == "dual_articulation":
        radius = 0.5 * (resolved["middle_top_sphere_R"] + resolved["middle_bottom_sphere_R"])
        r_eff = s * (radius + 0.5 * resolved["middle_cylinder_h"]) + cfg.cor_height
        x_c = s * resolved["midline_xshift"]
        t_ant = t_post = 0.0
        ks_ant, ks_post = [], []
        for sfx in ("_sup", "_inf"):
            half = 0.5 * resolved["cylinder_height" + sfx]
            off = resolved["cylinder_offset" + sfx]
            t_ant += s * max(0.0, half + off) + clr
            t_post += s * max(0.0, half - off) + clr
            depth = s * resolved["trough_depth" + sfx]
            ks_ant.append(_wall(cfg.k_wall0, depth, s * resolved["torus1_radius1" + sfx], cfg.wall_r0))
            ks_post.append(_wall(cfg.k_wall0, depth, s * resolved["torus2_radius1" + sfx], cfg.wall_r0))
        # the insert settles where both interfaces share the load: springs in series
        k_ant = _series(*ks_ant)
        k_post = _series(*ks_post)
        contact = s * radius
        avail = cfg.clearance_gap0 + s * 0.5 * (resolved["cylinder_height_sup"] + resolved["cylinder_height_inf"])
    else:
        raise ValueError(f"no implanted-joint mapping for design space kind {kind!r}")
    joint = TDRJoint(
        preload=cfg.load_cases["flexion"].preload,
        r_eff=r_eff,
        x_c=x_c,
        travel_ant=t_ant,
        travel_post=t_post,
        k_wall_ant=k_ant,
        k_wall_post=k_post,
        k_art={m: cfg.residual_fraction * intact.joint.k1[m] for m in MOTIONS},
        contact_radius=contact,
        clearance_available=avail,
    )
    default_shift = SegmentParams((), intact.facet, joint).lever_shift
    return SegmentParams(intact.ligaments, intact.facet, joint, s, default_shift)


def spine_surrogate(params: SegmentParams, case: LoadCase, cfg: SpineConfig = SpineConfig()) -> ResponseSet:
    """Sweep one load case; curves for the motion plus peak scalars."""
    m = case.name
    moment = case.moment_curve(cfg.dt)
    joint = params.joint
    shift = params.lever_shift.get(m, 0.0) * (joint.x_c if isinstance(joint, TDRJoint) else 0.0)
    lig = np.array(
        [[_lever(l, m, shift), l.translation_coupling, l.rest_length, l.slack, l.stiffness] for l in params.ligaments],
        dtype=float,
    ).reshape(-1, 5)
    facet = np.array([max(params.facet.lever_arms[m] + shift, 0.1), params.facet.stiffness[m], params.facet.engagement[m]], dtype=float)
    couples = 1 if case.couples_translation else 0
    bias = 0.0
    if isinstance(joint, TDRJoint) and couples:
        bias = case.sign * case.preload * (cfg.load_x - joint.x_c) / 1000.0
    ok, phi, tau, strain, ffacet, wall, res = kernels.segment_sweep(
        moment, float(bias), lig, facet, joint.vector(m), int(joint.kind), int(case.sign), couples
    )
    if not ok:
        return ResponseSet.failed("no_equilibrium")
    curves = {}
    for j, l in enumerate(params.ligaments):
        curves[f"strain_{l.name}_{m}"] = Curve(strain[j], cfg.dt, "strain", "")
    curves[f"force_facet_{m}"] = Curve(ffacet, cfg.dt, "force", "N")
    end = -1
    scalars = {
        f"angle_{m}": float(case.sign * phi[end]),
        f"translation_{m}": float(case.sign * tau[end]),
        f"peak_facet_{m}": float(ffacet.max()),
        f"residual_{m}": float(np.abs(res).max()),
    }
    for j, l in enumerate(params.ligaments):
        scalars[f"peak_strain_{l.name}_{m}"] = float(strain[j].max())
    if isinstance(joint, TDRJoint):
        lig_force = (lig[:, 4][:, None] * strain).sum(axis=0)
        contact_force = case.preload + lig_force + wall
        scalars[f"sigma_{m}"] = float(
            cfg.hertz_c * contact_force.max() / (math.pi * joint.contact_radius * cfg.geometry.radial_clearance * cfg.hertz_kappa) / 1000.0
        )
        if couples:
            need = np.radians(np.abs(phi)) * cfg.rim_length * params.scale
            scalars[f"impingement_{m}"] = float(np.max(need - joint.clearance_available))
    return ResponseSet(scalars, curves, settling_end=case.settling)


def _sweep_all(params: SegmentParams, cfg: SpineConfig, motions=MOTIONS) -> ResponseSet:
    scalars, curves = {}, {}
    settling = 0.0
    for m in motions:
        rs = spine_surrogate(params, cfg.load_cases[m], cfg)
        if not rs.ok:
            return ResponseSet.failed(f"{rs.reason} in {m}")
        scalars.update(rs.scalars)
        curves.update(rs.curves)
        settling = max(settling, rs.settling_end)
    sig = [v for k, v in scalars.items() if k.startswith("sigma_")]
    imp = [v for k, v in scalars.items() if k.startswith("impingement_")]
    if sig:
        scalars["sigma_max"] = max(sig)
    if imp:
        scalars["impingement"] = max(imp)
    scalars["equilibrium_residual"] = max(v for k, v in scalars.items() if k.startswith("residual_"))
    return ResponseSet(scalars, curves, settling_end=settling)


def generate_targets(params: SegmentParams | None = None, cfg: SpineConfig = SpineConfig(), motions=MOTIONS) -> dict[str, Curve]:
    """Intact-segment curves used as matching targets."""
    params = calibrate_intact(cfg) if params is None else params
    rs = _sweep_all(params, cfg, motions)
    if not rs.ok:
        raise RuntimeError(f"intact sweep failed: {rs.status}")
    return dict(rs.curves)


class SpineEvaluator(Evaluator):
    """Implanted-segment surrogate for the articulation design spaces.

    ``mode="intact"`` ignores the design and sweeps the calibrated intact
    segment; ``mode="synthetic"`` does the same but also reports the implant
    scalars as zero, giving a candidate that reproduces the targets exactly.
    """

    name = "spine"

    def __init__(self, space: DesignSpace | None = None, config: SpineConfig | None = None, mode: str = "tdr", motions=MOTIONS):
        super().__init__(space)
        if mode not in ("tdr", "intact", "synthetic"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode == "tdr" and (space is None or space.kind not in ("single_articulation", "dual_articulation")):
            raise ValueError("tdr mode needs an articulation design space")
        geo = space.geometry if space is not None else GeometryConfig()
        self.config = config or SpineConfig(geometry=geo)
        self.mode = mode
        self.motions = tuple(motions)
        self.intact = calibrate_intact(self.config)

    def targets(self) -> dict[str, Curve]:
        return generate_targets(self.intact, self.config, self.motions)

    def params_for(self, resolved: Mapping[str, float]) -> SegmentParams:
        if self.mode != "tdr":
            return self.intact
        return tdr_params(resolved, self.space.kind, self.intact, self.config)

    def _evaluate(self, point: DesignPoint) -> ResponseSet:
        rs = _sweep_all(self.params_for(point.resolved), self.config, self.motions)
        if rs.ok and self.mode == "synthetic":
            rs = rs.with_scalars({"sigma_max": 0.0, "impingement": -1.0})
        return rs
