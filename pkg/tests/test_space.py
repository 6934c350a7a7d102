import numpy as np
import pytest

from srsm_opt.space import (
    PRESET_NAMES,
    DesignSpace,
    GeometryConfig,
    LinearConstraint,
    Region,
    VariableSpec,
    check_sampling_constraints,
    denormalize,
    get_preset,
    normalize,
    resolve_dependents,
    sampling_feasible,
    sampling_violations,
    snap_discrete,
    spike_tip_area,
    tdr_presets,
)

# Transcribed from the published design-space tables: name -> (min, max, baseline, optimized).
PLATE_INF = {
    "bottom_base_radius": (0.25, 5.0, 3.0, 4.09),
    "bottom_major_radius_anterior": (0.25, 7.0, 7.0, 3.78),
    "bottom_major_radius_lateral": (0.25, 7.0, 7.0, 6.28),
    "bottom_major_radius_posterior": (0.25, 7.0, 7.0, 2.67),
    "bottom_minor_radius_anterior": (0.25, 2.0, 1.5, 1.92),
    "bottom_minor_radius_lateral": (0.25, 2.0, 1.5, 1.66),
    "bottom_minor_radius_posterior": (0.25, 2.0, 1.5, 0.34),
}
PLATE_SUP = {
    "top_base_radius": (0.25, 3.0, 3.0, 1.30),
    "top_major_radius_anterior": (0.25, 5.0, 5.0, 1.97),
    "top_major_radius_lateral": (0.25, 5.0, 5.0, 1.80),
    "top_major_radius_posterior": (0.25, 5.0, 5.0, 3.53),
    "top_minor_radius_anterior": (0.25, 1.0, 1.0, 0.41),
    "top_minor_radius_lateral": (0.25, 1.0, 1.0, 0.51),
    "top_minor_radius_posterior": (0.25, 1.0, 1.0, 1.00),
}
FIX_1 = {
    "fix_1_number_x": (2, 3, 2, 3),
    "fix_1_number_y": (2, 3, 2, 3),
    "fix_1_height": (0.5, 2.0, 1.25, 0.89),
    "fix_1_bottom_x_len": (1.0, 3.0, 3.0, 1.89),
    "fix_1_bottom_y_len": (1.0, 3.0, 3.0, 1.13),
    "fix_1_gap_x": (0.0, 3.0, 1.5, 0.83),
    "fix_1_gap_y": (0.0, 5.0, 2.0, 1.81),
    "fix_1_top_x_shift_ant": (0.0, 2.5, 0.5, 1.17),
    "fix_1_top_y_shift_lat": (0.0, 1.5, 1.35, 0.39),
    "fix_1_top_x_shift_pos": (0.0, 2.5, 2.0, 0.29),
}
FIX_2 = {
    "fix_2_number_x": (2, 3, 2, 3),
    "fix_2_number_y": (2, 3, 2, 2),
    "fix_2_height": (0.5, 2.0, 1.25, 0.77),
    "fix_2_bottom_x_len": (1.0, 3.0, 3.0, 2.65),
    "fix_2_bottom_y_len": (1.0, 3.0, 3.0, 2.58),
    "fix_2_gap_x": (0.0, 5.0, 2.0, 3.42),
    "fix_2_gap_y": (0.0, 5.0, 2.0, 4.96),
    "fix_2_top_x_shift_ant": (0.0, 2.5, 0.5, 1.48),
    "fix_2_top_y_shift_lat": (0.0, 1.5, 1.35, 0.72),
    "fix_2_top_x_shift_pos": (0.0, 2.5, 2.0, 0.85),
}
SINGLE = {
    "sphere_origin_xshift": (-7.5, 7.5, 0.0, -0.17),
    "sphere_origin_zshift": (0.0, 5.85, 1.16, 2.39),
    "sphere_radius": (3.0, 7.35, 4.60, 4.96),
    "cylinder_height": (0.0, 5.0, 1.84, 2.16),
    "cylinder_offset": (-2.5, 2.5, -0.24, 0.99),
    "torus1_radius1": (0.0, 7.0, 2.31, 1.94),
    "torus2_radius1": (0.0, 7.0, 1.82, 0.02),
}
SINGLE_DEP = {"cylinder_radius": (4.67, 5.03), "trough_depth": (1.45, 0.58)}
DUAL = {
    "midline_xshift": (-3.95, 3.95, 0.0, 0.21),
    "cylinder_height_sup": (0.0, 5.0, 1.0, 0.58),
    "cylinder_offset_sup": (-2.5, 2.5, 0.0, -0.27),
    "trough_depth_sup": (0.5, 1.0, 0.75, 0.84),
    "torus1_radius1_sup": (0.0, 7.0, 0.5, 0.12),
    "torus2_radius1_sup": (0.0, 7.0, 0.5, 2.04),
    "cylinder_height_inf": (0.0, 5.0, 1.84, 2.10),
    "cylinder_offset_inf": (-2.5, 2.5, -0.24, 1.01),
    "trough_depth_inf": (0.5, 2.0, 1.46, 0.92),
    "torus1_radius1_inf": (0.0, 7.0, 2.31, 6.73),
    "torus2_radius1_inf": (0.0, 7.0, 1.82, 5.41),
    "middle_cylinder_r": (1.0, 4.95, 3.0, 2.17),
    "middle_top_sphere_h": (0.5, 2.5, 1.1, 0.92),
    "middle_bottom_sphere_h": (0.5, 2.5, 1.1, 0.92),
}
DUAL_DEP = {
    "cylinder_radius_sup": (4.67, 3.09),
    "cylinder_radius_inf": (4.67, 3.10),
    "middle_cylinder_h": (1.98, 1.93),
    "middle_top_sphere_R": (4.60, 3.02),
    "middle_bottom_sphere_R": (4.60, 3.03),
}
TABLES = {
    "bone_inferior": {**PLATE_INF, **FIX_2},
    "bone_superior": {**PLATE_SUP, **FIX_1},
    "single_articulation": SINGLE,
    "dual_articulation": DUAL,
}
# dependents whose derivation rule is an interpretation get the looser tolerance
LOOSE = {"trough_depth", "middle_cylinder_h"}


def _point(space, table, column):
    return space.vector({k: v[column] for k, v in table.items()})


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_preset_bounds_match_tables(name):
    space = get_preset(name)
    table = TABLES[name]
    assert sorted(space.names) == sorted(table)
    for var in space.sampled:
        lo, hi, _, _ = table[var.name]
        assert (var.lower, var.upper) == (lo, hi)
        if var.name.endswith(("number_x", "number_y")):
            assert var.levels == (2.0, 3.0)


def test_dimensions():
    spaces = tdr_presets()
    assert [spaces[n].dim for n in PRESET_NAMES] == [17, 17, 7, 14]
    assert len(spaces) == 4


@pytest.mark.parametrize("name", PRESET_NAMES)
@pytest.mark.parametrize("column", [2, 3])
def test_table_values_inside_bounds(name, column):
    space = get_preset(name)
    x = _point(space, TABLES[name], column)
    assert space.in_bounds(x)


@pytest.mark.parametrize(
    "name,deps", [("single_articulation", SINGLE_DEP), ("dual_articulation", DUAL_DEP)]
)
@pytest.mark.parametrize("col", [0, 1])
def test_dependent_rules_reproduce_tables(name, deps, col):
    space = get_preset(name)
    r = space.resolve(_point(space, TABLES[name], col + 2))
    for dep, values in deps.items():
        tol = 0.05 if dep in LOOSE else 0.02
        assert r[dep] == pytest.approx(values[col], rel=tol), dep


def test_cap_radius_hand_value():
    # sphere through the rim of a cap: R = (r^2 + h^2) / (2h)
    space = get_preset("dual_articulation")
    r = space.resolve(_point(space, DUAL, 2))
    assert r["middle_top_sphere_R"] == pytest.approx((3.0**2 + 1.1**2) / 2.2, abs=1e-12)
    assert r["cylinder_radius_sup"] == pytest.approx(r["middle_top_sphere_R"] + 0.07, abs=1e-12)


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_baselines_pass_sampling_constraints(name):
    space = get_preset(name)
    point = resolve_dependents(space.baseline_vector(), space)
    report = check_sampling_constraints(point, space=space)
    assert report.feasible, report.violations


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_optimized_designs_pass_sampling_constraints(name):
    space = get_preset(name)
    point = resolve_dependents(_point(space, TABLES[name], 3), space)
    assert check_sampling_constraints(point, space=space).feasible


def test_optimized_fix_1_tip_area():
    r = {k: v[3] for k, v in FIX_1.items()}
    tip = spike_tip_area(r, "fix_1_")
    assert tip == pytest.approx((1.89 - 1.17 - 0.29) * (1.13 - 2 * 0.39), abs=1e-12)
    assert 9 * tip == pytest.approx(1.3545, abs=1e-9)
    assert 9 * tip <= 2.5


def test_optimized_insert_width_exceeds_height():
    space = get_preset("dual_articulation")
    r = space.resolve(_point(space, DUAL, 3))
    assert 2 * r["middle_cylinder_r"] == pytest.approx(4.34)
    assert r["middle_cylinder_h"] + 0.92 + 0.92 < 4.34


def test_minor_equal_major_is_infeasible():
    space = get_preset("bone_inferior")
    base = dict(space.baseline)
    base["bottom_minor_radius_anterior"] = base["bottom_major_radius_anterior"] = 2.0
    point = resolve_dependents(space.vector(base), space)
    report = check_sampling_constraints(point, space=space)
    assert not report.feasible
    assert "major>minor" in report.names


def test_tip_area_mode_outer_adds_side_faces():
    r = {k: v[2] for k, v in FIX_2.items()}
    assert spike_tip_area(r, "fix_2_", "outer") > spike_tip_area(r, "fix_2_", "tip")
    with pytest.raises(ValueError):
        GeometryConfig(tip_area_mode="sides")


def test_batch_feasibility_agrees_with_pointwise(rng):
    space = get_preset("bone_superior")
    X = space.lower + rng.random((200, space.dim)) * (space.upper - space.lower)
    X = snap_discrete(X, space)
    mask, names, counts = sampling_feasible(X, space)
    viol = sampling_violations(X, space)
    assert viol.shape == (200, len(names))
    for i in range(0, 200, 17):
        rep = check_sampling_constraints(resolve_dependents(X[i], space), space=space)
        assert rep.feasible == bool(mask[i])
    assert counts.sum() >= (~mask).sum()
    assert np.all(viol[mask] == 0.0)


def test_normalize_examples():
    region = Region.from_bounds([0.0, -2.0, 10.0], [4.0, 2.0, 20.0])
    assert np.allclose(normalize(region.center, region), 0.5)
    assert np.allclose(normalize(region.lower, region), 0.0)


def test_round_trip(rng):
    region = Region.from_bounds([-7.5, 0.0, 3.0], [7.5, 5.85, 7.35])
    p = region.lower + rng.random((100, 3)) * (region.upper - region.lower)
    assert np.max(np.abs(denormalize(normalize(p, region), region) - p)) <= 1e-12


def test_denormalize_snaps_discrete_levels():
    space = get_preset("bone_inferior")
    region = Region.full(space)
    x = denormalize(np.full(space.dim, 0.8), region, space)
    for i, var in enumerate(space.sampled):
        if var.is_discrete:
            assert x[i] == 3.0


def test_region_validation_and_intersection():
    with pytest.raises(ValueError):
        Region(np.zeros(2), np.array([1.0, 0.0]))
    a = Region.from_bounds([0, 0], [2, 2])
    b = Region.from_bounds([1, -1], [3, 1])
    c = a.intersect(b)
    assert np.allclose(c.lower, [1, 0]) and np.allclose(c.upper, [2, 1])
    with pytest.raises(ValueError):
        a.intersect(Region.from_bounds([5, 5], [6, 6]))
    assert Region.from_dict(a.to_dict()) == a
    assert a != b


def test_variable_spec_validation():
    with pytest.raises(ValueError):
        VariableSpec("x", lower=1.0, upper=1.0)
    with pytest.raises(ValueError):
        VariableSpec("n", kind="discrete", levels=(3, 2))
    with pytest.raises(ValueError):
        VariableSpec("d", lower=0.0, upper=1.0, dependent_rule="insert_height")
    with pytest.raises(ValueError):
        DesignSpace("dup", (VariableSpec("a", lower=0, upper=1), VariableSpec("a", lower=0, upper=1)))


def test_in_bounds_rejects_off_level_and_out_of_range():
    space = get_preset("bone_inferior")
    x = space.baseline_vector()
    assert space.in_bounds(x)
    i = space.names.index("fix_2_number_x")
    y = x.copy()
    y[i] = 2.5
    assert not space.in_bounds(y)
    y = x.copy()
    y[0] = 10.0
    assert not space.in_bounds(y)
    assert not space.in_bounds(x[:-1])


def test_linear_constraint_on_custom_space():
    space = DesignSpace(
        "tri",
        (VariableSpec("a", lower=0, upper=1), VariableSpec("b", lower=0, upper=1)),
        linear_constraints=(LinearConstraint("a>b", {"a": 1.0, "b": -1.0}, ">", 0.0),),
    )
    mask, names, _ = sampling_feasible(np.array([[0.6, 0.2], [0.2, 0.6], [0.5, 0.5]]), space)
    assert names == ["a>b"]
    assert mask.tolist() == [True, False, False]


def test_unknown_preset():
    with pytest.raises(KeyError):
        get_preset("triple_articulation")
