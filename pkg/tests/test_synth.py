import math

import numpy as np
import pytest

from helpers import point_segment_distance
from lanegraph.errors import ConfigError
from lanegraph.scene import scene_to_dict, validate_scene
from lanegraph.synth import SynthConfig, gen_dataset, gen_scene
from lanegraph.topology import build_l2l


def test_straight_single_agent_constant_spacing():
    cfg = SynthConfig(
        network="straight", lanes_per_approach=1, agent_count=(1, 1), speed_range=(10.0, 10.0),
        lane_change_prob=0.0, kind_probs=(1.0, 0.0, 0.0),
    )
    scene, fut = gen_scene(cfg, 3)
    assert fut.shape == (1, 80, 2)
    steps = np.diff(np.vstack([scene.agents[0].states[-1:, :2], fut[0]]), axis=0)
    assert np.allclose(np.hypot(*steps.T), 1.0, atol=1e-9)
    # straight line: every step points the same way
    unit = steps / np.hypot(*steps.T)[:, None]
    assert np.allclose(unit, unit[0], atol=1e-9)


def min_dist_to_lanes(p, lanes):
    best = math.inf
    for lane in lanes:
        wp = lane.waypoints
        for k in range(len(wp) - 1):
            best = min(best, point_segment_distance(p, wp[k], wp[k + 1]))
    return best


def test_turning_agents_follow_centerlines():
    cfg = SynthConfig(network="four_way", lane_change_prob=0.0, turn_prob=1.0, agent_count=(4, 4))
    turned = 0
    for seed in range(6):
        scene, fut = gen_scene(cfg, seed)
        for a, f in zip(scene.agents, fut):
            d = f[-1] - f[-2]
            if abs(math.remainder(math.atan2(d[1], d[0]) - a.states[-1, 5], 2 * math.pi)) < 1.0:
                continue
            turned += 1
            for p in f[::4]:
                assert min_dist_to_lanes(p, scene.lanes) <= 0.1
    assert turned > 0


def test_deterministic_per_seed():
    cfg = SynthConfig()
    a, fa = gen_scene(cfg, 17)
    b, fb = gen_scene(cfg, 17)
    assert scene_to_dict(a) == scene_to_dict(b) and fa.tobytes() == fb.tobytes()
    c, _ = gen_scene(cfg, 18)
    assert scene_to_dict(a) != scene_to_dict(c)


@pytest.mark.parametrize("network", ["straight", "t_junction", "four_way"])
def test_generated_scenes_are_valid(network):
    cfg = SynthConfig(network=network)
    for scene in gen_dataset(cfg, 5, seed=1):
        validate_scene(scene)
        m_o, m_f = build_l2l(scene)
        assert m_f.nnz > 0 and m_f.issubset(m_o)
        # headway: no two agents closer than the minimum gap at any future step
        futs = np.stack([a.future for a in scene.agents])
        for i in range(len(futs)):
            for j in range(i + 1, len(futs)):
                assert np.min(np.hypot(*(futs[i] - futs[j]).T)) >= cfg.min_gap


@pytest.mark.parametrize(
    "kwargs",
    [
        {"network": "roundabout"},
        {"speed_range": (5.0, 400.0)},
        {"speed_range": (9.0, 3.0)},
        {"agent_count": (0, 2)},
        {"arm_length": 40.0, "segment_length": 30.0},
        {"kind_probs": (0.5, 0.1, 0.1)},
        {"lane_change_prob": 1.5},
    ],
)
def test_infeasible_config(kwargs):
    with pytest.raises(ConfigError):
        gen_scene(SynthConfig(**kwargs), 0)
