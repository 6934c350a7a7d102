"""Design variables, regions, dependent-variable rules and sampling constraints.

The three implant design spaces (bone-implant interface, single articulation
and dual articulation) are available through :func:`tdr_presets` and
:func:`get_preset`.  All geometry helpers accept either scalars or numpy
arrays in the resolved-variable mapping so that whole populations can be
checked at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

__all__ = [
    "DegenerateGeometryError",
    "DesignPoint",
    "DesignSpace",
    "FeasibilityReport",
    "GeometryConfig",
    "LinearConstraint",
    "Region",
    "VariableSpec",
    "check_sampling_constraints",
    "denormalize",
    "get_preset",
    "normalize",
    "resolve_dependents",
    "sampling_checks",
    "sampling_violations",
    "tdr_presets",
]

PRESET_NAMES = ("bone_inferior", "bone_superior", "single_articulation", "dual_articulation")


class DegenerateGeometryError(ValueError):
    """Raised when a dependent variable cannot be computed."""


@dataclass(frozen=True)
class GeometryConfig:
    """Fixed implant dimensions and constraint thresholds (mm)."""

    # (anteroposterior x, mediolateral y) outline of each endplate
    inferior_footprint: tuple[float, float] = (15.0, 17.0)
    superior_footprint: tuple[float, float] = (12.0, 17.0)
    core_height: float = 6.0
    radial_clearance: float = 0.07
    # vertical gap between the sphere-origin plane and the trough floor; 4.60 - 1.16 - 1.45
    articulation_gap: float = 1.99
    # assembled-height offset of the mobile insert; 1.98 - 0.75 - 1.46 + 2 * 1.1
    insert_height_offset: float = 1.97
    max_tip_area: float = 2.5
    tip_area_mode: str = "tip"
    min_tip_edge: float = 0.25
    min_spike_height: float = 0.5
    max_spike_height: float = 2.0
    max_distraction: float = 4.0
    peripheral_margin: float = 1.0
    min_trough_depth: float = 0.25

    def __post_init__(self):
        if self.tip_area_mode not in ("tip", "outer"):
            raise ValueError(f"tip_area_mode must be 'tip' or 'outer', got {self.tip_area_mode!r}")


@dataclass(frozen=True)
class VariableSpec:
    name: str
    kind: str = "continuous"
    lower: float | None = None
    upper: float | None = None
    levels: tuple[float, ...] = ()
    dependent_rule: str | None = None

    def __post_init__(self):
        if self.dependent_rule is not None:
            if self.lower is not None or self.upper is not None or self.levels:
                raise ValueError(f"dependent variable {self.name!r} cannot carry bounds")
            return
        if self.kind == "continuous":
            if self.lower is None or self.upper is None or not self.lower < self.upper:
                raise ValueError(f"variable {self.name!r} needs lower < upper")
        elif self.kind == "discrete":
            levels = tuple(float(v) for v in self.levels)
            if not levels or list(levels) != sorted(set(levels)):
                raise ValueError(f"discrete variable {self.name!r} needs sorted unique levels")
            object.__setattr__(self, "levels", levels)
            object.__setattr__(self, "lower", levels[0])
            object.__setattr__(self, "upper", levels[-1])
        else:
            raise ValueError(f"unknown variable kind {self.kind!r}")

    @property
    def is_dependent(self) -> bool:
        return self.dependent_rule is not None

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete" and not self.is_dependent


@dataclass(frozen=True)
class LinearConstraint:
    """``sum(coefficients[name] * x[name]) <sense> bound`` for custom spaces."""

    name: str
    coefficients: Mapping[str, float]
    sense: str
    bound: float = 0.0

    def __post_init__(self):
        if self.sense not in ("<=", ">=", "<", ">"):
            raise ValueError(f"bad constraint sense {self.sense!r}")


@dataclass(frozen=True)
class DesignSpace:
    name: str
    variables: tuple[VariableSpec, ...]
    kind: str = "custom"
    constants: Mapping[str, float] = field(default_factory=dict)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    baseline: Mapping[str, float] | None = None
    optimized: Mapping[str, float] | None = None
    linear_constraints: tuple[LinearConstraint, ...] = ()

    def __post_init__(self):
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ValueError("variable names must be unique")
        if not any(not v.is_dependent for v in self.variables):
            raise ValueError("a design space needs at least one sampled variable")
        object.__setattr__(self, "variables", tuple(self.variables))

    @property
    def sampled(self) -> tuple[VariableSpec, ...]:
        return tuple(v for v in self.variables if not v.is_dependent)

    @property
    def dependents(self) -> tuple[VariableSpec, ...]:
        return tuple(v for v in self.variables if v.is_dependent)

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.sampled]

    @property
    def dim(self) -> int:
        return len(self.sampled)

    @property
    def lower(self) -> np.ndarray:
        return np.array([v.lower for v in self.sampled], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([v.upper for v in self.sampled], dtype=float)

    @property
    def discrete_mask(self) -> np.ndarray:
        return np.array([v.is_discrete for v in self.sampled], dtype=bool)

    @property
    def omega_norm(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def spec(self, name: str) -> VariableSpec:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def vector(self, mapping: Mapping[str, float]) -> np.ndarray:
        """Sampled-variable vector from a name->value mapping."""
        return np.array([float(mapping[n]) for n in self.names], dtype=float)

    def baseline_vector(self) -> np.ndarray:
        if self.baseline is None:
            lo, hi = self.lower, self.upper
            return snap_discrete(0.5 * (lo + hi), self)
        return self.vector(self.baseline)

    def resolve(self, values) -> dict:
        """Resolved mapping (sampled + dependent) for one point or a batch.

        ``values`` is ``(d,)`` or ``(n, d)``; the mapping holds floats or
        ``(n,)`` arrays accordingly.
        """
        arr = np.asarray(values, dtype=float)
        if arr.shape[-1] != self.dim:
            raise ValueError(f"expected {self.dim} sampled values, got {arr.shape[-1]}")
        cols = arr.T if arr.ndim == 2 else arr
        resolved = {}
        for i, name in enumerate(self.names):
            resolved[name] = cols[i] if arr.ndim == 2 else float(cols[i])
        resolved.update({k: v for k, v in self.constants.items() if k not in resolved})
        pending = list(self.dependents)
        while pending:
            progressed = False
            for var in list(pending):
                rule = DEPENDENT_RULES[var.dependent_rule]
                if all(r in resolved for r in rule.requires):
                    resolved[var.name] = rule(resolved, self.geometry)
                    pending.remove(var)
                    progressed = True
            if not progressed:
                missing = [v.name for v in pending]
                raise ValueError(f"cannot resolve dependent variables {missing}")
        return resolved

    def in_bounds(self, values, tol: float = 1e-9) -> bool:
        v = np.asarray(values, dtype=float)
        if v.shape != (self.dim,):
            return False
        if np.any(v < self.lower - tol) or np.any(v > self.upper + tol):
            return False
        for i, spec in enumerate(self.sampled):
            if spec.is_discrete and np.min(np.abs(np.asarray(spec.levels) - v[i])) > tol:
                return False
        return True

    def with_geometry(self, **changes) -> "DesignSpace":
        return replace(self, geometry=replace(self.geometry, **changes))


# ---------------------------------------------------------------------------
# Dependent-variable rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Rule:
    requires: tuple[str, ...]
    fn: Callable

    def __call__(self, r, geo):
        return self.fn(r, geo)


def _cap_radius(base_r, cap_h):
    cap_h_arr = np.asarray(cap_h, dtype=float)
    if np.any(cap_h_arr == 0.0):
        raise DegenerateGeometryError("spherical cap height is zero")
    return (base_r ** 2 + cap_h ** 2) / (2.0 * cap_h)


DEPENDENT_RULES: dict[str, _Rule] = {
    "single_cylinder_radius": _Rule(
        ("sphere_radius",), lambda r, g: r["sphere_radius"] + g.radial_clearance
    ),
    "single_trough_depth": _Rule(
        ("sphere_radius", "sphere_origin_zshift"),
        lambda r, g: r["sphere_radius"] - r["sphere_origin_zshift"] - g.articulation_gap,
    ),
    "cap_radius_top": _Rule(
        ("middle_cylinder_r", "middle_top_sphere_h"),
        lambda r, g: _cap_radius(r["middle_cylinder_r"], r["middle_top_sphere_h"]),
    ),
    "cap_radius_bottom": _Rule(
        ("middle_cylinder_r", "middle_bottom_sphere_h"),
        lambda r, g: _cap_radius(r["middle_cylinder_r"], r["middle_bottom_sphere_h"]),
    ),
    "dual_cylinder_radius_sup": _Rule(
        ("middle_top_sphere_R",), lambda r, g: r["middle_top_sphere_R"] + g.radial_clearance
    ),
    "dual_cylinder_radius_inf": _Rule(
        ("middle_bottom_sphere_R",), lambda r, g: r["middle_bottom_sphere_R"] + g.radial_clearance
    ),
    "insert_height": _Rule(
        ("trough_depth_sup", "trough_depth_inf", "middle_top_sphere_h", "middle_bottom_sphere_h"),
        lambda r, g: g.insert_height_offset
        + r["trough_depth_sup"]
        + r["trough_depth_inf"]
        - r["middle_top_sphere_h"]
        - r["middle_bottom_sphere_h"],
    ),
}


# ---------------------------------------------------------------------------
# Regions and points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Region:
    center: np.ndarray
    half_range: np.ndarray

    def __post_init__(self):
        c = np.array(self.center, dtype=float)
        h = np.array(self.half_range, dtype=float)
        if c.shape != h.shape or c.ndim != 1:
            raise ValueError("center and half_range must be 1-D of equal length")
        if np.any(h <= 0):
            raise ValueError("half_range must be positive")
        c.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_range", h)

    def __eq__(self, other):
        if not isinstance(other, Region):
            return NotImplemented
        return np.array_equal(self.center, other.center) and np.array_equal(self.half_range, other.half_range)

    __hash__ = None

    @classmethod
    def full(cls, space: DesignSpace) -> "Region":
        lo, hi = space.lower, space.upper
        return cls(0.5 * (lo + hi), 0.5 * (hi - lo))

    @classmethod
    def from_bounds(cls, lower, upper) -> "Region":
        lo = np.asarray(lower, dtype=float)
        hi = np.asarray(upper, dtype=float)
        return cls(0.5 * (lo + hi), 0.5 * (hi - lo))

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.half_range

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.half_range

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def contains(self, values, tol: float = 1e-9) -> np.ndarray:
        v = np.atleast_2d(np.asarray(values, dtype=float))
        return np.all((v >= self.lower - tol) & (v <= self.upper + tol), axis=1)

    def scaled(self, factor: float) -> "Region":
        return Region(self.center, self.half_range * factor)

    def intersect(self, other: "Region") -> "Region":
        lo = np.maximum(self.lower, other.lower)
        hi = np.minimum(self.upper, other.upper)
        if np.any(hi <= lo):
            raise ValueError("regions do not overlap")
        return Region.from_bounds(lo, hi)

    def volume_fraction(self, space: DesignSpace) -> float:
        return float(np.prod(2.0 * self.half_range / (space.upper - space.lower)))

    def to_dict(self) -> dict:
        return {"center": self.center.tolist(), "half_range": self.half_range.tolist()}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Region":
        return cls(np.asarray(data["center"], dtype=float), np.asarray(data["half_range"], dtype=float))


@dataclass(frozen=True)
class DesignPoint:
    values: np.ndarray
    resolved: Mapping[str, float]
    id: int = -1
    iteration: int = 0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def resolve_dependents(values, space: DesignSpace, id: int = -1, iteration: int = 0) -> DesignPoint:
    """Build a :class:`DesignPoint` with every dependent variable computed."""
    v = np.asarray(values, dtype=float)
    if v.shape != (space.dim,):
        raise ValueError(f"expected {space.dim} sampled values, got shape {v.shape}")
    return DesignPoint(v, space.resolve(v), id=id, iteration=iteration)


def snap_discrete(values, space: DesignSpace) -> np.ndarray:
    """Replace discrete coordinates by their nearest level."""
    x = np.array(values, dtype=float, copy=True)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    for i, spec in enumerate(space.sampled):
        if spec.is_discrete:
            levels = np.asarray(spec.levels)
            nearest = np.abs(x2[:, i, None] - levels[None, :]).argmin(axis=1)
            x2[:, i] = levels[nearest]
    return x2[0] if single else x2


def normalize(values, region: Region) -> np.ndarray:
    """Affine map of design values onto the region's unit cube."""
    return (np.asarray(values, dtype=float) - region.lower) / (2.0 * region.half_range)


def denormalize(u, region: Region, space: DesignSpace | None = None) -> np.ndarray:
    """Inverse of :func:`normalize`; discrete variables snap to their nearest level."""
    x = region.lower + np.asarray(u, dtype=float) * (2.0 * region.half_range)
    if space is not None and space.discrete_mask.any():
        x = snap_discrete(x, space)
    return x


# ---------------------------------------------------------------------------
# Sampling constraints
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    measured: object
    bound: object
    sense: str

    def satisfied(self):
        m, b = np.asarray(self.measured), np.asarray(self.bound)
        if self.sense == "<=":
            return m <= b
        if self.sense == ">=":
            return m >= b
        if self.sense == "<":
            return m < b
        return m > b

    def violation(self, strict_eps: float = 1e-9):
        """Non-negative violation amount scaled by ``max(|bound|, 1)``."""
        m, b = np.asarray(self.measured, dtype=float), np.asarray(self.bound, dtype=float)
        scale = np.maximum(np.abs(b), 1.0)
        if self.sense in ("<=", "<"):
            gap = m - b + (strict_eps if self.sense == "<" else 0.0)
        else:
            gap = b - m + (strict_eps if self.sense == ">" else 0.0)
        return np.maximum(gap, 0.0) / scale


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    violations: tuple[tuple[str, float, float], ...] = ()

    def __post_init__(self):
        if self.feasible != (len(self.violations) == 0):
            raise ValueError("feasible must equal 'no violations'")

    @property
    def names(self) -> list[str]:
        return [v[0] for v in self.violations]


def spike_tip_area(r, prefix: str, mode: str = "tip"):
    """Distal area of one spike of a fixation grid (clamped at zero)."""
    tip_x = r[prefix + "bottom_x_len"] - r[prefix + "top_x_shift_ant"] - r[prefix + "top_x_shift_pos"]
    tip_y = r[prefix + "bottom_y_len"] - 2.0 * r[prefix + "top_y_shift_lat"]
    tip = np.maximum(tip_x, 0.0) * np.maximum(tip_y, 0.0)
    if mode == "tip":
        return tip
    h = r[prefix + "height"]
    bx, by = r[prefix + "bottom_x_len"], r[prefix + "bottom_y_len"]
    tx, ty = np.maximum(tip_x, 0.0), np.maximum(tip_y, 0.0)
    ant = 0.5 * (by + ty) * np.hypot(h, r[prefix + "top_x_shift_ant"])
    pos = 0.5 * (by + ty) * np.hypot(h, r[prefix + "top_x_shift_pos"])
    lat = (bx + tx) * np.hypot(h, r[prefix + "top_y_shift_lat"])
    return tip + ant + pos + lat


def spike_count(r, prefix: str):
    return np.rint(r[prefix + "number_x"]) * np.rint(r[prefix + "number_y"])


def _bone_checks(r, space: DesignSpace) -> list[Check]:
    g = space.geometry
    inferior = space.kind == "bone_inferior"
    plate = "bottom_" if inferior else "top_"
    fix = "fix_2_" if inferior else "fix_1_"
    other_fix = "fix_1_" if inferior else "fix_2_"
    fx, fy = g.inferior_footprint if inferior else g.superior_footprint

    checks = []
    n = spike_count(r, fix)
    checks.append(Check("tip_area", n * spike_tip_area(r, fix, g.tip_area_mode), g.max_tip_area, "<="))
    h = r[fix + "height"]
    checks.append(Check("spike_height_min", h, g.min_spike_height, ">="))
    checks.append(Check("spike_height_max", h, g.max_spike_height, "<="))
    other_h = r.get(other_fix + "height", space.constants.get(other_fix + "height", 0.0))
    checks.append(Check("distraction", h + other_h, g.max_distraction, "<="))
    tip_x = r[fix + "bottom_x_len"] - r[fix + "top_x_shift_ant"] - r[fix + "top_x_shift_pos"]
    tip_y = r[fix + "bottom_y_len"] - 2.0 * r[fix + "top_y_shift_lat"]
    checks.append(Check("tip_edge_x", tip_x, g.min_tip_edge, ">="))
    checks.append(Check("tip_edge_y", tip_y, g.min_tip_edge, ">="))
    for side in ("anterior", "lateral", "posterior"):
        checks.append(
            Check("major>minor", r[plate + "major_radius_" + side], r[plate + "minor_radius_" + side], ">")
        )
    nx, ny = np.rint(r[fix + "number_x"]), np.rint(r[fix + "number_y"])
    # distal (tip) extent of the spike grid, centred on the endplate
    ext_x = nx * r[fix + "bottom_x_len"] + (nx - 1) * r[fix + "gap_x"] - r[fix + "top_x_shift_ant"] - r[fix + "top_x_shift_pos"]
    ext_y = ny * r[fix + "bottom_y_len"] + (ny - 1) * r[fix + "gap_y"] - 2.0 * r[fix + "top_y_shift_lat"]
    checks.append(Check("peripheral_extent_x", ext_x, fx - 2.0 * g.peripheral_margin, "<="))
    checks.append(Check("peripheral_extent_y", ext_y, fy - 2.0 * g.peripheral_margin, "<="))
    return checks


def _single_checks(r, space: DesignSpace) -> list[Check]:
    g = space.geometry
    return [Check("trough_depth_min", r["trough_depth"], g.min_trough_depth, ">=")]


def _dual_checks(r, space: DesignSpace) -> list[Check]:
    width = 2.0 * r["middle_cylinder_r"]
    height = r["middle_cylinder_h"] + r["middle_top_sphere_h"] + r["middle_bottom_sphere_h"]
    return [
        Check("insert_width>height", width, height, ">"),
        Check("insert_cylinder_h_min", r["middle_cylinder_h"], 0.0, ">="),
        Check("top_cap<=hemisphere", r["middle_top_sphere_h"], r["middle_cylinder_r"], "<="),
        Check("bottom_cap<=hemisphere", r["middle_bottom_sphere_h"], r["middle_cylinder_r"], "<="),
    ]


_PRESET_CHECKS = {
    "bone_inferior": _bone_checks,
    "bone_superior": _bone_checks,
    "single_articulation": _single_checks,
    "dual_articulation": _dual_checks,
}


def sampling_checks(resolved: Mapping, space: DesignSpace, preset: str | None = None) -> list[Check]:
    """All sampling constraints of ``space`` evaluated on a resolved mapping."""
    kind = space.kind if preset is None else preset
    if kind in _PRESET_CHECKS:
        checks = _PRESET_CHECKS[kind](resolved, space)
    elif kind in ("custom", "none"):
        checks = []
    else:
        raise KeyError(f"unknown preset {kind!r}")
    for lc in space.linear_constraints:
        total = sum(coef * resolved[name] for name, coef in lc.coefficients.items())
        checks.append(Check(lc.name, total, lc.bound, lc.sense))
    return checks


def check_sampling_constraints(point: DesignPoint, preset: str | None = None, space: DesignSpace | None = None) -> FeasibilityReport:
    """Evaluate the sampling constraints of a resolved point.

    ``preset`` names the constraint family; it defaults to ``space.kind``.
    When ``space`` is omitted the preset's default design space is used.
    """
    if space is None:
        if preset is None:
            raise ValueError("need a preset name or a design space")
        space = get_preset(preset)
    viol = []
    for c in sampling_checks(point.resolved, space, preset):
        if not bool(c.satisfied()):
            viol.append((c.name, float(c.measured), float(c.bound)))
    return FeasibilityReport(not viol, tuple(viol))


def sampling_violations(X, space: DesignSpace) -> np.ndarray:
    """Scaled violations ``(n, m)`` of the sampling constraints for a batch."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    checks = sampling_checks(space.resolve(X), space)
    if not checks:
        return np.zeros((X.shape[0], 0))
    cols = [np.broadcast_to(np.asarray(c.violation(), dtype=float), (X.shape[0],)) for c in checks]
    return np.stack(cols, axis=1)


def sampling_feasible(X, space: DesignSpace) -> tuple[np.ndarray, list[str], np.ndarray]:
    """Feasibility mask for a batch plus per-constraint failure counts."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    checks = sampling_checks(space.resolve(X), space)
    mask = np.ones(X.shape[0], dtype=bool)
    names, counts = [], []
    for c in checks:
        ok = np.broadcast_to(np.asarray(c.satisfied()), (X.shape[0],))
        mask &= ok
        names.append(c.name)
        counts.append(int((~ok).sum()))
    return mask, names, np.asarray(counts, dtype=int)


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

# (name, min, max, levels, baseline, optimized)
TABLE1_INFERIOR_PLATE = [
    ("bottom_base_radius", 0.25, 5.0, None, 3.0, 4.09),
    ("bottom_major_radius_anterior", 0.25, 7.0, None, 7.0, 3.78),
    ("bottom_major_radius_lateral", 0.25, 7.0, None, 7.0, 6.28),
    ("bottom_major_radius_posterior", 0.25, 7.0, None, 7.0, 2.67),
    ("bottom_minor_radius_anterior", 0.25, 2.0, None, 1.5, 1.92),
    ("bottom_minor_radius_lateral", 0.25, 2.0, None, 1.5, 1.66),
    ("bottom_minor_radius_posterior", 0.25, 2.0, None, 1.5, 0.34),
]
TABLE1_SUPERIOR_PLATE = [
    ("top_base_radius", 0.25, 3.0, None, 3.0, 1.30),
    ("top_major_radius_anterior", 0.25, 5.0, None, 5.0, 1.97),
    ("top_major_radius_lateral", 0.25, 5.0, None, 5.0, 1.80),
    ("top_major_radius_posterior", 0.25, 5.0, None, 5.0, 3.53),
    ("top_minor_radius_anterior", 0.25, 1.0, None, 1.0, 0.41),
    ("top_minor_radius_lateral", 0.25, 1.0, None, 1.0, 0.51),
    ("top_minor_radius_posterior", 0.25, 1.0, None, 1.0, 1.00),
]
TABLE1_FIX_1 = [
    ("fix_1_number_x", 2, 3, (2, 3), 2, 3),
    ("fix_1_number_y", 2, 3, (2, 3), 2, 3),
    ("fix_1_height", 0.5, 2.0, None, 1.25, 0.89),
    ("fix_1_bottom_x_len", 1.0, 3.0, None, 3.0, 1.89),
    ("fix_1_bottom_y_len", 1.0, 3.0, None, 3.0, 1.13),
    ("fix_1_gap_x", 0.0, 3.0, None, 1.5, 0.83),
    ("fix_1_gap_y", 0.0, 5.0, None, 2.0, 1.81),
    ("fix_1_top_x_shift_ant", 0.0, 2.5, None, 0.5, 1.17),
    ("fix_1_top_y_shift_lat", 0.0, 1.5, None, 1.35, 0.39),
    ("fix_1_top_x_shift_pos", 0.0, 2.5, None, 2.0, 0.29),
]
TABLE1_FIX_2 = [
    ("fix_2_number_x", 2, 3, (2, 3), 2, 3),
    ("fix_2_number_y", 2, 3, (2, 3), 2, 2),
    ("fix_2_height", 0.5, 2.0, None, 1.25, 0.77),
    ("fix_2_bottom_x_len", 1.0, 3.0, None, 3.0, 2.65),
    ("fix_2_bottom_y_len", 1.0, 3.0, None, 3.0, 2.58),
    ("fix_2_gap_x", 0.0, 5.0, None, 2.0, 3.42),
    ("fix_2_gap_y", 0.0, 5.0, None, 2.0, 4.96),
    ("fix_2_top_x_shift_ant", 0.0, 2.5, None, 0.5, 1.48),
    ("fix_2_top_y_shift_lat", 0.0, 1.5, None, 1.35, 0.72),
    ("fix_2_top_x_shift_pos", 0.0, 2.5, None, 2.0, 0.85),
]
# dependent rows carry the rule name in place of bounds
TABLE2 = [
    ("sphere_origin_xshift", -7.5, 7.5, None, 0.0, -0.17),
    ("sphere_origin_zshift", 0.0, 5.85, None, 1.16, 2.39),
    ("sphere_radius", 3.0, 7.35, None, 4.60, 4.96),
    ("cylinder_radius", "single_cylinder_radius", None, None, 4.67, 5.03),
    ("cylinder_height", 0.0, 5.0, None, 1.84, 2.16),
    ("cylinder_offset", -2.5, 2.5, None, -0.24, 0.99),
    ("trough_depth", "single_trough_depth", None, None, 1.45, 0.58),
    ("torus1_radius1", 0.0, 7.0, None, 2.31, 1.94),
    ("torus2_radius1", 0.0, 7.0, None, 1.82, 0.02),
]
TABLE3 = [
    ("midline_xshift", -3.95, 3.95, None, 0.0, 0.21),
    ("cylinder_radius_sup", "dual_cylinder_radius_sup", None, None, 4.67, 3.09),
    ("cylinder_height_sup", 0.0, 5.0, None, 1.0, 0.58),
    ("cylinder_offset_sup", -2.5, 2.5, None, 0.0, -0.27),
    ("trough_depth_sup", 0.5, 1.0, None, 0.75, 0.84),
    ("torus1_radius1_sup", 0.0, 7.0, None, 0.5, 0.12),
    ("torus2_radius1_sup", 0.0, 7.0, None, 0.5, 2.04),
    ("cylinder_radius_inf", "dual_cylinder_radius_inf", None, None, 4.67, 3.10),
    ("cylinder_height_inf", 0.0, 5.0, None, 1.84, 2.10),
    ("cylinder_offset_inf", -2.5, 2.5, None, -0.24, 1.01),
    ("trough_depth_inf", 0.5, 2.0, None, 1.46, 0.92),
    ("torus1_radius1_inf", 0.0, 7.0, None, 2.31, 6.73),
    ("torus2_radius1_inf", 0.0, 7.0, None, 1.82, 5.41),
    ("middle_cylinder_h", "insert_height", None, None, 1.98, 1.93),
    ("middle_cylinder_r", 1.0, 4.95, None, 3.0, 2.17),
    ("middle_top_sphere_R", "cap_radius_top", None, None, 4.60, 3.02),
    ("middle_top_sphere_h", 0.5, 2.5, None, 1.1, 0.92),
    ("middle_bottom_sphere_R", "cap_radius_bottom", None, None, 4.60, 3.03),
    ("middle_bottom_sphere_h", 0.5, 2.5, None, 1.1, 0.92),
]


def _build(name: str, kind: str, rows: Sequence[tuple], constants=None, geometry=None) -> DesignSpace:
    variables = []
    baseline, optimized = {}, {}
    for vname, lo, hi, levels, base, opt in rows:
        if isinstance(lo, str):
            variables.append(VariableSpec(vname, dependent_rule=lo))
        elif levels is not None:
            variables.append(VariableSpec(vname, kind="discrete", levels=tuple(float(x) for x in levels)))
        else:
            variables.append(VariableSpec(vname, lower=float(lo), upper=float(hi)))
        baseline[vname] = float(base)
        optimized[vname] = float(opt)
    return DesignSpace(
        name=name,
        variables=tuple(variables),
        kind=kind,
        constants=dict(constants or {}),
        geometry=geometry or GeometryConfig(),
        baseline=baseline,
        optimized=optimized,
    )


def get_preset(name: str, geometry: GeometryConfig | None = None) -> DesignSpace:
    """One of the named implant design spaces."""
    if name == "bone_inferior":
        # the superior spikes stay at their baseline height for the distraction check
        return _build(name, name, TABLE1_INFERIOR_PLATE + TABLE1_FIX_2, {"fix_1_height": 1.25}, geometry)
    if name == "bone_superior":
        return _build(name, name, TABLE1_SUPERIOR_PLATE + TABLE1_FIX_1, {"fix_2_height": 1.25}, geometry)
    if name == "single_articulation":
        return _build(name, name, TABLE2, geometry=geometry)
    if name == "dual_articulation":
        return _build(name, name, TABLE3, geometry=geometry)
    raise KeyError(f"unknown design-space preset {name!r}; choose from {PRESET_NAMES}")


def tdr_presets(geometry: GeometryConfig | None = None) -> dict[str, DesignSpace]:
    """The four named implant design spaces keyed by preset name."""
    return {name: get_preset(name, geometry) for name in PRESET_NAMES}
