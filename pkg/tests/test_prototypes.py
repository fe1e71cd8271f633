import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from actionproto.clustering import EffectClass
from actionproto.errors import DegenerateClass
from actionproto.prototypes import (ActionPrototype, PrototypeFile, baseline_fixed_rgng,
                                    baseline_random, baseline_uniform, baseline_uniform_grid,
                                    budget_from_scalars, generate_prototypes, grid_shape,
                                    normalized_stats, prototype_budget, row_sizes,
                                    snap_to_members)
from actionproto.stairworld import MotionCommand, SimConfig, StairWorld

# (cv, std) rows and the budgets worked out by hand:
# term = max(1 - cv, 0.05) * std, xi = max(1, floor(term / min positive term))
BUDGET_TABLES = [
    # terms 0.18, 0.5 -> 0.5 / 0.18 = 2.78
    ([(0.1, 0.2), (0.5, 1.0)], [1, 2]),
    # identical rows: ratio 1 everywhere
    ([(0.3, 0.5), (0.3, 0.5), (0.3, 0.5)], [1, 1, 1]),
    # cv = 2 is clamped: 0.05 * 4 = 0.2 against 0.5 * 0.1 = 0.05
    ([(2.0, 4.0), (0.5, 0.1)], [4, 1]),
    # cv = 0, stds 1, 2, 3
    ([(0.0, 1.0), (0.0, 2.0), (0.0, 3.0)], [1, 2, 3]),
    # zero-spread class has term 0: excluded from the minimum, still gets 1
    ([(0.0, 0.0), (0.5, 0.4), (0.2, 1.0)], [1, 1, 4]),
    # 0.27 / 0.09 is 3 in exact arithmetic but 2.9999999999999996 in floating point
    ([(0.7, 0.3), (0.1, 0.3)], [1, 3]),
    # cv exactly 1 and above 1 both clamp to the floor
    ([(1.0, 2.0), (1.7, 2.0), (0.0, 0.3)], [1, 1, 3]),
]


@pytest.mark.parametrize("rows,expected", BUDGET_TABLES)
def test_budget_tables_by_hand(rows, expected):
    cv, std = zip(*rows)
    _, xi = budget_from_scalars(cv, std)
    assert xi.tolist() == expected


def test_budget_terms_by_hand():
    term, _ = budget_from_scalars([0.1, 0.5], [0.2, 1.0])
    np.testing.assert_allclose(term, [0.18, 0.5], atol=1e-15)


def test_all_zero_terms_give_one_each():
    _, xi = budget_from_scalars([0.0, 0.0], [0.0, 0.0])
    assert xi.tolist() == [1, 1]


def make_class(index, members, mean, std, motion_mean=(1.0, 3.0)):
    return EffectClass(index, np.asarray(members), np.asarray(mean, float),
                       np.asarray(std, float), np.asarray(motion_mean, float))


def test_prototype_budget_from_class_statistics():
    classes = [make_class(0, range(10), [1.0, 0.0], [0.1, 0.2]),
               make_class(1, range(10, 30), [2.0, 0.0], [0.4, 0.0])]
    b = prototype_budget(classes)
    # per-dimension max |mean| scaling: dim 0 by 2, dim 1 (all zero) by 1
    mean_s = np.array([0.5, 1.0])
    std_s = np.array([math.hypot(0.05, 0.2), 0.2])
    cv = std_s / mean_s
    term = np.maximum(1 - cv, 0.05) * std_s
    np.testing.assert_allclose(b.cv, cv, atol=1e-15)
    np.testing.assert_allclose(b.term, term, atol=1e-15)
    assert b.xi.tolist() == [1, 1]


def test_identical_classes_get_one_prototype_each():
    classes = [make_class(k, range(5 * k, 5 * k + 5), [1.0, 0.3], [0.1, 0.1]) for k in range(4)]
    assert prototype_budget(classes).xi.tolist() == [1, 1, 1, 1]


def test_budget_capped_at_class_size():
    classes = [make_class(0, range(2), [1.0, 1.0], [0.01, 0.01]),
               make_class(1, range(2, 5), [1.0, 1.0], [0.5, 0.5])]
    b = prototype_budget(classes)
    assert b.xi.tolist() == [1, 3]
    assert prototype_budget(classes, max_per_class=2).xi.tolist() == [1, 2]


def test_small_class_raises():
    with pytest.raises(DegenerateClass):
        prototype_budget([make_class(0, [3], [1.0], [0.0])])


def test_stored_budget_recomputes(clustered):
    classes, _, _ = clustered
    b = prototype_budget(classes)
    _, xi = budget_from_scalars(b.cv, b.std)
    assert np.array_equal(np.minimum(xi, [len(c) for c in classes]), b.xi)
    assert b.xi[np.argmin(np.where(b.term > 0, b.term, np.inf))] == 1
    assert all(r["xi"] >= 1 for r in b.rows())


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 3), st.floats(0.01, 5)), min_size=2, max_size=8),
       st.floats(1.0, 4.0))
def test_budget_monotone_in_std(rows, factor):
    cv, std = map(np.array, zip(*rows))
    _, xi = budget_from_scalars(cv, std)
    bumped = std.copy()
    bumped[0] *= factor
    _, xi2 = budget_from_scalars(cv, bumped)
    assert xi2[0] >= xi[0]


def test_normalized_stats_share_scale():
    m, s = normalized_stats([[2.0, -4.0], [1.0, 2.0]], [[0.2, 0.4], [0.1, 0.0]])
    np.testing.assert_allclose(m, [[1.0, 1.0], [0.5, 0.5]])
    np.testing.assert_allclose(s, [[0.1, 0.1], [0.05, 0.0]])


# -- generation -------------------------------------------------------------

def square_class():
    motions = np.array([[0.5, 2.0], [0.7, 2.0], [0.5, 4.0], [0.7, 4.0]])
    c = EffectClass.from_members(0, np.arange(4), np.zeros((4, 2)) + [0, 0.3], motions)
    return c, motions


def test_budget_one_gives_class_mean():
    c, motions = square_class()
    budget = prototype_budget([c])
    protos = generate_prototypes([c], budget, motions, snap=False)
    assert len(protos) == 1
    assert protos[0].motion == pytest.approx((0.6, 3.0), abs=1e-12)


def test_snapping_picks_nearest_distinct_members():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 10.0], [1.0, 10.0]])
    # scaled box: both centres are nearest to member 0; the closer one keeps it
    out = snap_to_members([[0.1, 0.5], [0.2, 0.0]], pts)
    np.testing.assert_array_equal(out, [[0.0, 0.0], [1.0, 0.0]])
    # an exact member is a fixed point
    np.testing.assert_array_equal(snap_to_members(pts[2:3], pts), pts[2:3])


def test_snapped_class_mean_is_a_member():
    c, motions = square_class()
    (p,) = generate_prototypes([c], prototype_budget([c]), motions)
    assert list(p.motion) in motions.tolist()


def test_every_snapped_prototype_reproduces_its_class_effect(clustered):
    classes, labeled, _ = clustered
    motions, effects = labeled.motions(), labeled.effects()
    protos = generate_prototypes(classes, prototype_budget(classes), motions, seed=0)
    world = StairWorld(labeled.config)
    for p in protos:
        s, _, _, _ = world.step(world.reset(), p.motion, record=False)
        member = effects[classes[p.class_index].members]
        assert any(abs(s.pos_up - z) <= 1e-9 for z in member[:, 1])
        lv = round(s.pos_up / 0.3)
        assert abs(classes[p.class_index].effect_mean[1] - lv * 0.3) <= 0.05


def test_budget_three_gives_three_contained_prototypes():
    rng = np.random.default_rng(0)
    motions = np.column_stack([rng.uniform(0.4, 0.9, 50), rng.uniform(2.0, 5.0, 50)])
    c = EffectClass.from_members(0, np.arange(50), np.zeros((50, 1)), motions)
    budget = prototype_budget([c])
    budget.xi[:] = 3
    protos = generate_prototypes([c], budget, motions, seed=1)
    assert len(protos) == 3
    pm = np.array([p.motion for p in protos])
    assert np.all(pm >= motions.min(0)) and np.all(pm <= motions.max(0))


def test_total_count_and_containment_on_default_world(clustered):
    classes, labeled, _ = clustered
    motions = labeled.motions()
    budget = prototype_budget(classes)
    protos = generate_prototypes(classes, budget, motions, seed=0)
    assert len(protos) == budget.total
    cfg = labeled.config
    for p in protos:
        pts = motions[classes[p.class_index].members]
        assert np.all(np.array(p.motion) >= pts.min(0) - 1e-12)
        assert np.all(np.array(p.motion) <= pts.max(0) + 1e-12)
        assert cfg.angle_min <= p.motion.angle <= cfg.angle_max
        assert cfg.mag_min <= p.motion.magnitude <= cfg.mag_max


def test_fixed_rgng_five_per_class(clustered):
    classes, labeled, _ = clustered
    motions = labeled.motions()
    six = classes[:6]
    protos = baseline_fixed_rgng(six, 5, motions, seed=0)
    assert len(protos) == 30
    for p in protos:
        pts = motions[classes[p.class_index].members]
        assert np.all(np.array(p.motion) >= pts.min(0) - 1e-12)
        assert np.all(np.array(p.motion) <= pts.max(0) + 1e-12)


def test_fixed_rgng_one_per_class_is_class_mean(clustered):
    classes, labeled, _ = clustered
    protos = baseline_fixed_rgng(classes, 1, labeled.motions(), snap=False)
    assert len(protos) == len(classes)
    for p, c in zip(protos, classes):
        assert p.motion == pytest.approx(tuple(c.motion_mean), abs=1e-12)


def test_budget_must_cover_classes():
    c, motions = square_class()
    b = prototype_budget([c])
    other = EffectClass(5, c.members, c.effect_mean, c.effect_std, c.motion_mean)
    with pytest.raises(ValueError):
        generate_prototypes([c, other], b, motions)


# -- baselines --------------------------------------------------------------

def test_random_baseline():
    cfg = SimConfig()
    assert baseline_random(0, cfg) == []
    protos = baseline_random(12, cfg, seed=3)
    assert len(protos) == 12
    assert all(cfg.angle_min <= p.motion.angle <= cfg.angle_max
               and cfg.mag_min <= p.motion.magnitude <= cfg.mag_max for p in protos)
    assert all(p.class_index == -1 for p in protos)
    assert protos == baseline_random(12, cfg, seed=3)


def test_uniform_grid_single_cell_is_box_centre():
    cfg = SimConfig()
    (p,) = baseline_uniform_grid(1, 1, cfg)
    assert p.motion == pytest.approx(((0.3 + 1.45) / 2, (0.5 + 7.0) / 2))


def test_uniform_grid_three_by_four():
    cfg = SimConfig()
    protos = baseline_uniform_grid(3, 4, cfg)
    assert len(protos) == 12
    pm = np.array([p.motion for p in protos])
    angles, mags = np.unique(pm[:, 0]), np.unique(pm[:, 1])
    assert len(angles) == 3 and len(mags) == 4
    np.testing.assert_allclose(np.diff(angles), (1.45 - 0.3) / 3)
    np.testing.assert_allclose(np.diff(mags), (7.0 - 0.5) / 4)
    assert np.all(pm > cfg.motion_low) and np.all(pm < cfg.motion_high)


@pytest.mark.parametrize("n,shape", [(12, (3, 4)), (16, (4, 4)), (7, (1, 7)), (1, (1, 1))])
def test_grid_shape(n, shape):
    assert grid_shape(n) == shape


@pytest.mark.parametrize("n", [1, 2, 7, 12, 17, 23, 32, 53])
def test_uniform_layout_has_exact_count(n):
    cfg = SimConfig()
    protos = baseline_uniform(n, cfg)
    assert len(protos) == n == sum(row_sizes(n))
    assert max(row_sizes(n)) - min(row_sizes(n)) <= 1
    pm = np.array([p.motion for p in protos])
    assert np.all(pm > cfg.motion_low) and np.all(pm < cfg.motion_high)


def test_uniform_layout_matches_lattice_when_it_factorises():
    cfg = SimConfig()
    assert baseline_uniform(12, cfg) == baseline_uniform_grid(3, 4, cfg)
    # 17 is prime: several angle rows instead of a single 1 x 17 line
    assert row_sizes(17) == [4, 4, 4, 5]


# -- persistence ------------------------------------------------------------

def test_prototype_file_round_trip(tmp_path):
    protos = [ActionPrototype(MotionCommand(0.5, 2.0), 0, "effect"),
              ActionPrototype(MotionCommand(1.0, 3.5), 1, "effect")]
    pf = PrototypeFile("effect", protos, {"seed": 0}, [{"k": 0, "xi": 1}], "abc")
    path = tmp_path / "p.json"
    pf.save(path)
    back = PrototypeFile.load(path)
    assert back.prototypes == protos and back.fingerprint == "abc"
    assert back.motions() == [MotionCommand(0.5, 2.0), MotionCommand(1.0, 3.5)]
