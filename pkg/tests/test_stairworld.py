import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import climbing_motion

from actionproto.errors import ConfigError, NonConvergedFlight
from actionproto.stairworld import (IDENTITY_QUAT, MotionCommand, SimConfig, StairGeometry,
                                    StairWorld, distance_to_obstacle, max_return, reward)

G = 9.81


def flat_world(**kw) -> StairWorld:
    # first riser 1 km away: open flat ground for every reachable jump
    return StairWorld(SimConfig(geometry=StairGeometry(ground_extent=1000.0), **kw))


def command_for_velocity(vy, vz, mass=1.0) -> MotionCommand:
    return MotionCommand(math.atan2(vz, vy), mass * math.hypot(vy, vz))


# -- geometry and config ----------------------------------------------------

def test_riser_positions_follow_tread_layout():
    g = StairGeometry(num_steps=4, step_height=0.3, step_depth=0.4, ground_extent=1.0)
    assert [g.riser(i) for i in range(1, 5)] == pytest.approx([1.0, 1.4, 1.8, 2.2])
    assert g.end == pytest.approx(2.6)
    assert g.top_height == pytest.approx(1.2)


@pytest.mark.parametrize("front,level", [(0.5, 0), (1.0, 0), (1.0 + 1e-6, 1), (1.39, 1),
                                         (1.41, 2), (2.59, 4), (50.0, 4)])
def test_level_under_front_face(front, level):
    assert StairGeometry().level_under(front) == level


@pytest.mark.parametrize("kw", [{"num_steps": 0}, {"step_height": 0.0}, {"step_depth": -1.0},
                                {"ground_extent": 0.0}])
def test_geometry_rejects_nonpositive(kw):
    with pytest.raises(ConfigError):
        StairGeometry(**kw)


@pytest.mark.parametrize("kw", [{"gravity": 0.0}, {"angle_min": 1.5, "angle_max": 1.0},
                                {"mag_min": 3.0, "mag_max": 2.0}, {"dt": 0.0},
                                {"angle_max": 2.0}, {"start_forward": 0.95}])
def test_simconfig_rejects_invalid(kw):
    with pytest.raises(ConfigError):
        SimConfig(**kw)


# -- reset ------------------------------------------------------------------

def test_reset_rests_on_ground_with_identity_orientation():
    s = StairWorld().reset()
    assert s.pos_up == 0.0
    assert s.orientation == IDENTITY_QUAT
    assert s.jumps == 0


def test_reset_is_bitwise_repeatable():
    w = StairWorld()
    assert w.reset().observation_vector() == w.reset().observation_vector()


def test_reset_obstacle_distance_by_construction():
    # 1.0 - 0.5 - 0.1
    cfg = SimConfig()
    s = StairWorld(cfg).reset()
    assert s.dist_obstacle == pytest.approx(0.4, abs=1e-12)
    g = cfg.geometry
    assert s.dist_obstacle == pytest.approx(g.ground_extent - cfg.start_forward
                                            - cfg.robot_half_size, abs=1e-12)


def test_observation_vector_has_eight_entries_in_order():
    s = StairWorld().reset()
    obs = s.observation_vector()
    assert len(obs) == 8
    assert obs == (0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 1.0, s.dist_obstacle)


# -- obstacle distance ------------------------------------------------------

def test_obstacle_distance_on_top_step_is_sentinel():
    cfg = SimConfig()
    assert distance_to_obstacle(2.4, cfg.geometry.top_height, cfg) == cfg.obstacle_sentinel


def test_obstacle_distance_on_step_one():
    cfg = SimConfig()
    f = 1.15
    # (ground_extent + step_depth) - f - half_size = 1.4 - 1.15 - 0.1
    assert distance_to_obstacle(f, 0.3, cfg) == pytest.approx(0.15, abs=1e-12)


def test_obstacle_distance_flush_against_riser_is_zero():
    cfg = SimConfig()
    assert distance_to_obstacle(0.9, 0.0, cfg) == 0.0


# -- reward -----------------------------------------------------------------

@pytest.mark.parametrize("dz,expected", [(0.3, 1.0), (0.9, 1.0), (1e-12, 1.0), (0.0, 0.0),
                                         (-0.3, -1.0), (-0.6, -2.0)])
def test_reward_values(dz, expected):
    assert reward(dz, 0.3) == pytest.approx(expected, abs=1e-12)


@given(st.floats(-5, 5, allow_nan=False), st.floats(0.01, 2.0))
def test_reward_sign_matches_height_change(dz, h):
    r = reward(dz, h)
    assert (r > 0) == (dz > 0)
    assert (r <= 0) == (dz <= 0)


def test_max_return_is_step_count():
    assert max_return(15) == 15.0


# -- flight -----------------------------------------------------------------

def test_closed_form_projectile_example():
    w = flat_world()
    s0 = w.reset()
    s1, traj, r, done = w.step(s0, command_for_velocity(3.0, 4.0), check_bounds=False)
    # apex 4^2 / (2 g), range 3 * 2 * 4 / g
    assert traj.apex - s0.pos_up == pytest.approx(16 / (2 * G), abs=1e-2)
    assert s1.pos_forward - s0.pos_forward == pytest.approx(24 / G, abs=1e-6)
    assert s1.pos_up == 0.0 and r == 0.0 and not done


def test_random_flat_jumps_match_projectile_formulas():
    rng = np.random.default_rng(1234)
    w = flat_world()
    s0 = w.reset()
    for _ in range(12):
        vy, vz = rng.uniform(0.5, 5.0), rng.uniform(0.5, 5.0)
        s1, traj, _, _ = w.step(s0, command_for_velocity(vy, vz), check_bounds=False)
        assert s1.pos_forward - s0.pos_forward == pytest.approx(2 * vy * vz / G, abs=1e-6)
        # the recorded points sample the parabola; the exact apex is bounded
        # by the closed form and approached within one step's drop
        apex = vz * vz / (2 * G)
        assert traj.apex <= apex + 1e-6
        assert traj.apex >= apex - 0.5 * G * w.config.dt ** 2 - 1e-9


def test_range_strictly_increases_with_magnitude_on_flat_ground():
    w = flat_world()
    s0 = w.reset()
    ranges = [w.step(s0, MotionCommand(0.8, m), record=False)[0].pos_forward
              for m in np.linspace(0.5, 7.0, 25)]
    assert np.all(np.diff(ranges) > 0)


def test_small_vertical_hop_stays_on_ground():
    cfg = SimConfig()
    m = MotionCommand(cfg.angle_max, cfg.mag_min)
    apex = (m.magnitude * math.sin(m.angle) / cfg.robot_mass) ** 2 / (2 * cfg.gravity)
    assert apex < cfg.geometry.step_height
    w = StairWorld(cfg)
    s1, _, r, _ = w.step(w.reset(), m)
    assert s1.pos_up == 0.0 and r == 0.0


def test_one_step_climb_rewards_one():
    cfg = SimConfig()
    w = StairWorld(cfg)
    s1, _, r, done = w.step(w.reset(), climbing_motion(cfg))
    assert s1.pos_up == pytest.approx(0.3, abs=1e-12)
    assert r == 1.0 and not done


def test_riser_hit_drops_flush_to_lower_tread():
    cfg = SimConfig()
    w = StairWorld(cfg)
    # nearly flat and fast: hits the first riser below its top
    s1, traj, r, _ = w.step(w.reset(), MotionCommand(0.3, 4.0))
    assert s1.pos_up == 0.0 and r == 0.0
    assert s1.pos_forward + cfg.robot_half_size == pytest.approx(1.0, abs=1e-12)
    assert s1.dist_obstacle == 0.0


def test_riser_hit_on_upper_tread_stays_on_that_tread():
    cfg = SimConfig()
    w = StairWorld(cfg)
    s = w._rest_state(1.85, 0.9, 0)  # on step 3, front 0.25 before the top riser
    s1, _, r, _ = w.step(s, MotionCommand(0.3, 4.0))
    assert s1.pos_up == pytest.approx(0.9, abs=1e-12)
    assert s1.pos_forward + cfg.robot_half_size == pytest.approx(2.2, abs=1e-12)
    assert r == 0.0


def test_done_on_top_and_on_jump_limit():
    cfg = SimConfig(episode_max_jumps=3)
    w = StairWorld(cfg)
    s, _, _, done = w.step(w.reset(), MotionCommand(0.3, 0.5))
    assert not done
    s, _, _, done = w.step(s, MotionCommand(0.3, 0.5))
    s, _, _, done = w.step(s, MotionCommand(0.3, 0.5))
    assert done and s.jumps == 3
    s, _, _, done = w.step(w._rest_state(2.35, 0.9, 0), MotionCommand(1.2, 3.0))
    assert s.pos_up == pytest.approx(1.2) and done


def test_trajectory_starts_at_pre_jump_pose_with_increasing_time():
    w = StairWorld()
    s0 = w.reset()
    _, traj, _, _ = w.step(s0, MotionCommand(1.0, 4.0))
    assert traj.points[0] == (0.0, s0.pos_forward, s0.pos_up)
    t = np.array([p[0] for p in traj.points])
    assert np.all(np.diff(t) > 0)
    assert traj.to_csv().splitlines()[0] == "t,y,z"


def test_out_of_bounds_motion_rejected():
    with pytest.raises(ValueError):
        StairWorld().step(StairWorld().reset(), MotionCommand(0.1, 3.0))


def test_zero_gravity_raises_nonconverged():
    w = StairWorld(SimConfig(gravity=1e-12, max_flight_time=1.0))
    with pytest.raises(NonConvergedFlight):
        w.step(w.reset(), MotionCommand(1.0, 3.0))


def test_support_invariant_over_many_random_jumps():
    cfg = SimConfig().with_steps(15)
    w = StairWorld(cfg)
    rng = np.random.default_rng(7)
    s = w.reset()
    h = cfg.geometry.step_height
    for a, m in rng.uniform(cfg.motion_low, cfg.motion_high, size=(10_000, 2)):
        s, _, _, done = w.step(s, MotionCommand(a, m), record=False)
        k = round(s.pos_up / h)
        assert k >= 0 and abs(s.pos_up - k * h) <= 1e-9
        assert s.dist_obstacle >= 0
        if done:
            s = w.reset()


@settings(max_examples=200, deadline=None)
@given(st.floats(0.3, 1.45), st.floats(0.5, 7.0))
def test_height_gain_bounded_by_energy(angle, mag):
    w = StairWorld()
    s0 = w.reset()
    _, traj, _, _ = w.step(s0, MotionCommand(angle, mag))
    vz = mag * math.sin(angle)
    assert traj.apex - s0.pos_up <= vz * vz / (2 * G) + 1e-6


@settings(max_examples=50, deadline=None)
@given(st.floats(0.3, 1.45), st.floats(0.5, 7.0))
def test_step_is_deterministic(angle, mag):
    w = StairWorld()
    m = MotionCommand(angle, mag)
    assert w.step(w.reset(), m) == w.step(w.reset(), m)


def test_climbing_motion_reaches_fifteen_steps():
    cfg = SimConfig().with_steps(15)
    w = StairWorld(cfg)
    s, total, done = w.reset(), 0.0, False
    while not done:
        s, _, r, done = w.step(s, climbing_motion(cfg))
        total += r
    assert total == 15.0 and s.jumps == 15
