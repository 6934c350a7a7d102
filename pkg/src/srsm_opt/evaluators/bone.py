"""Closed-form bone-implant interface surrogate.

A lumped stand-in for the subsidence and expulsion simulations: bearing
area and spike geometry set an effective foundation stiffness, and the
test loads divided by that stiffness give the displacements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

from ..space import DesignPoint, DesignSpace, GeometryConfig, spike_count, spike_tip_area
from .base import Evaluator, ResponseSet

__all__ = ["BoneConfig", "BoneEvaluator", "bone_responses", "SIDES"]

# side -> (plate prefix, spike-grid prefix)
SIDES = {"inferior": ("bottom_", "fix_2_"), "superior": ("top_", "fix_1_")}


@dataclass(frozen=True)
class BoneConfig:
    f_subsidence: float = 150.0  # N
    k_cortical: float = 12.0  # N/mm per mm^2
    k_trabecular: float = 3.0  # N/mm per mm^2
    beta: float = 0.5  # cortical loss per unit hole fraction
    f_expulsion: float = 40.0  # N, double the 20 N acceptance load
    k_lock: float = 25.0  # N/mm per mm^2 of frontal spike area
    k_friction: float = 1.0  # 1/mm
    mu: float = 0.3
    f_service: float = 10.0  # N
    geometry: GeometryConfig = field(default_factory=GeometryConfig)

    def updated(self, **changes) -> "BoneConfig":
        return replace(self, **changes)


def bone_responses(r: Mapping[str, float], side: str, cfg: BoneConfig = BoneConfig()) -> dict:
    """Scalar responses of one interface from a resolved mapping.

    Raises ``ZeroDivisionError`` on degenerate geometry.
    """
    plate, fix = SIDES[side]
    g = cfg.geometry
    fx, fy = g.inferior_footprint if side == "inferior" else g.superior_footprint
    footprint = fx * fy
    corner = (4.0 - math.pi) * r[plate + "base_radius"] ** 2
    edges = (1.0 - math.pi / 4.0) * (
        fy * r[plate + "minor_radius_anterior"]
        + fy * r[plate + "minor_radius_posterior"]
        + 2.0 * fx * r[plate + "minor_radius_lateral"]
    )
    a_bearing = footprint - corner - edges

    n = float(spike_count(r, fix))
    tip_per = float(spike_tip_area(r, fix, g.tip_area_mode))
    a_tip = n * tip_per
    hole = n * r[fix + "bottom_x_len"] * r[fix + "bottom_y_len"] / footprint
    tip_y = max(0.0, r[fix + "bottom_y_len"] - 2.0 * r[fix + "top_y_shift_lat"])
    a_front = n * r[fix + "height"] * (r[fix + "bottom_y_len"] + tip_y) / 2.0

    k_sub = cfg.k_cortical * a_bearing * (1.0 - cfg.beta * hole) + cfg.k_trabecular * a_tip
    k_ap = cfg.k_lock * a_front + cfg.k_friction * cfg.mu * cfg.f_subsidence
    if not (k_sub > 0.0 and k_ap > 0.0 and n * tip_per > 0.0):
        raise ZeroDivisionError("degenerate_geometry")
    return {
        "d_subsidence": cfg.f_subsidence / k_sub,
        "d_expulsion": cfg.f_expulsion / k_ap,
        "d_micro": cfg.f_service / k_ap,
        "sigma_max": cfg.f_subsidence / (n * tip_per) / 1000.0,
        "bearing_area": a_bearing,
        "tip_area": a_tip,
        "front_area": a_front,
    }


def combine_sides(inf: Mapping[str, float], sup: Mapping[str, float]) -> dict:
    """Whole-implant responses: subsidence adds up, the rest take the worse side."""
    out = {k: max(inf[k], sup[k]) for k in ("d_expulsion", "d_micro", "sigma_max")}
    out["d_subsidence"] = inf["d_subsidence"] + sup["d_subsidence"]
    return out


class BoneEvaluator(Evaluator):
    """``side`` is ``inferior``, ``superior`` or ``both`` (defaults from the space)."""

    name = "bone"

    def __init__(self, space: DesignSpace | None = None, side: str | None = None, config: BoneConfig | None = None):
        super().__init__(space)
        if side is None:
            if space is None or space.kind not in ("bone_inferior", "bone_superior"):
                raise ValueError("side must be given for non-bone spaces")
            side = space.kind.split("_")[1]
        if side not in ("inferior", "superior", "both"):
            raise ValueError(f"unknown side {side!r}")
        self.side = side
        geo = space.geometry if space is not None else GeometryConfig()
        self.config = config or BoneConfig(geometry=geo)

    def responses(self, resolved: Mapping[str, float]) -> dict:
        if self.side == "both":
            return combine_sides(bone_responses(resolved, "inferior", self.config), bone_responses(resolved, "superior", self.config))
        return bone_responses(resolved, self.side, self.config)

    def evaluate_mapping(self, resolved: Mapping[str, float]) -> ResponseSet:
        try:
            return ResponseSet(self.responses(resolved))
        except ZeroDivisionError:
            return ResponseSet.failed("degenerate_geometry")
        except KeyError as exc:
            return ResponseSet.failed(f"missing_variable: {exc}")

    def _evaluate(self, point: DesignPoint) -> ResponseSet:
        return self.evaluate_mapping(point.resolved)
