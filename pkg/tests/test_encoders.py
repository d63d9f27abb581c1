import math

import numpy as np
import pytest

from helpers import straight_track
from lanegraph import autodiff as ad
from lanegraph.autodiff import ParamRegistry, Tensor, grad_check
from lanegraph.encoders import (
    EncoderConfig,
    encode_agents,
    encode_edges,
    encode_lanes,
    gru_step,
    init_encoders,
    init_gru,
)
from lanegraph.errors import ConfigError, ShapeError
from lanegraph.scene import AgentTrack, LanePolyline, Scene, localize, resample_polyline, rotate, transform_scene


# fixed-seed regression value for a 22 m straight lane (seed 7, default config)
GOLDEN_STRAIGHT_LANE = [0.015537394282863562, -0.08878368083676691, 0.08100237140634767, 0.19147303580042957]


@pytest.fixture(scope="module")
def enc():
    cfg = EncoderConfig()
    params = ParamRegistry(seed=7)
    init_encoders(params, cfg)
    return params, cfg


def gru_params(seed=0, n_in=3, n_h=5):
    params = ParamRegistry(seed=seed)
    init_gru(params, "g", n_in, n_h)
    return params


# --------------------------------------------------------------------- GRU


def test_gru_zero_params_halves_state():
    params = gru_params()
    for _, p in params:
        p.data[...] = 0.0
    h = np.random.default_rng(0).normal(size=(4, 5))
    out = gru_step(params, "g", np.random.default_rng(1).normal(size=(4, 3)), Tensor(h))
    assert np.array_equal(out.data, h / 2)


def test_gru_closed_gate_carries_state():
    params = gru_params()
    params["g.bz"].data[...] = -60.0
    h = np.random.default_rng(0).normal(size=(2, 5))
    out = gru_step(params, "g", np.ones((2, 3)), Tensor(h))
    assert np.allclose(out.data, h, atol=1e-20)


def test_gru_matches_reference_recurrence():
    params = gru_params(seed=3)
    rng = np.random.default_rng(4)
    x, h = rng.normal(size=(3, 3)), rng.normal(size=(3, 5))
    P = {k.split(".")[1]: p.data for k, p in params}
    sig = lambda v: 1 / (1 + np.exp(-v))  # noqa: E731
    z = sig(x @ P["Wz"] + h @ P["Uz"] + P["bz"])
    r = sig(x @ P["Wr"] + h @ P["Ur"] + P["br"])
    cand = np.tanh(x @ P["Wh"] + (r * h) @ P["Uh"] + P["bh"])
    want = (1 - z) * h + z * cand
    assert np.allclose(gru_step(params, "g", x, Tensor(h)).data, want, atol=1e-14)


def test_gru_grad_check():
    params = gru_params(seed=5)
    rng = np.random.default_rng(6)
    x = rng.normal(size=(3, 3))
    w = rng.normal(size=(3, 5))
    h = Tensor(rng.normal(size=(3, 5)))
    assert grad_check(lambda t: ad.sum(gru_step(params, "g", x, t) * w), h) <= 1e-5
    for name in ("g.Wz", "g.Ur", "g.bh"):
        err = grad_check(lambda _: ad.sum(gru_step(params, "g", x, Tensor(h.data)) * w), params[name])
        assert err <= 1e-5, name


def test_gru_shape_mismatch():
    with pytest.raises(ShapeError):
        gru_step(gru_params(), "g", np.ones((2, 4)), Tensor(np.zeros((2, 5))))


def test_config_validation():
    with pytest.raises(ConfigError):
        EncoderConfig(hidden_dim=0)
    with pytest.raises(ConfigError):
        EncoderConfig(gru_layers=2)


# ------------------------------------------------------------------ agents


def agent_embed(params, cfg, tracks):
    loc = localize(Scene(tracks, [LanePolyline(0, [[0, 0], [1, 0]])]))
    return encode_agents(params, cfg, loc.agent_disp, loc.agent_size, loc.agent_kind).data


def test_agent_embedding_ignores_global_pose(enc):
    params, cfg = enc
    # dyadic coordinates keep the translation exact, so the local features match bit for bit
    def track(aid, x0, y0):
        states = np.zeros((11, 6))
        states[:, 0] = x0 + 0.5 * np.arange(11)
        states[:, 1] = y0 + 0.25 * np.arange(11)
        states[:, 3:5] = (5.0, 2.5)
        states[:, 5] = 0.375
        return AgentTrack(aid, "cyclist", states, np.ones(11, bool))

    a, b = track(0, 2.5, 1.25), track(1, 1026.5, -511.75)
    out = agent_embed(params, cfg, [a, b])
    assert np.array_equal(out[0], out[1])
    c = transform_scene(Scene([a], [LanePolyline(0, [[0, 0], [1, 0]])]), 2.1, -300.0, 40.0).agents[0]
    assert np.max(np.abs(agent_embed(params, cfg, [c])[0] - out[0])) <= 1e-9


def test_stationary_and_moving_differ(enc):
    params, cfg = enc
    out = agent_embed(params, cfg, [straight_track(0, 0, 0, 0), straight_track(1, 0, 0, 0, speed=8.0)])
    assert np.max(np.abs(out[0] - out[1])) > 0


def test_masked_history_finite(enc):
    params, cfg = enc
    tr = straight_track(0, 3, 4, 0.5, speed=2.0)
    tr.valid[:-1] = False
    assert np.all(np.isfinite(agent_embed(params, cfg, [tr])))


def test_agent_permutation_equivariance(enc):
    params, cfg = enc
    rng = np.random.default_rng(0)
    tracks = [straight_track(i, *rng.uniform(-50, 50, 2), rng.uniform(-3, 3), rng.uniform(0, 9)) for i in range(6)]
    perm = rng.permutation(6)
    base = agent_embed(params, cfg, tracks)
    permuted = agent_embed(params, cfg, [tracks[i] for i in perm])
    assert np.array_equal(permuted, base[perm])


# ------------------------------------------------------------------- lanes


def lane_embed(params, cfg, lanes):
    loc = localize(Scene([straight_track(0, 0, 0, 0)], lanes))
    return encode_lanes(params, cfg, loc.lane_points, loc.lane_kind, loc.lane_signal).data


def test_straight_lane_golden(enc):
    params, cfg = enc
    out = lane_embed(params, cfg, [LanePolyline(0, [[0, 0], [22, 0]])])[0]
    assert out.shape == (64,)
    assert np.allclose(out[:4], GOLDEN_STRAIGHT_LANE, rtol=1e-12, atol=1e-14)


def test_lane_signal_changes_embedding(enc):
    params, cfg = enc
    lanes = [LanePolyline(0, [[0, 0], [22, 0]], signal="go"), LanePolyline(1, [[0, 5], [22, 5]], signal="stop")]
    out = lane_embed(params, cfg, lanes)
    assert np.max(np.abs(out[0] - out[1])) > 0


def test_reversed_curved_lane_differs(enc):
    params, cfg = enc
    t = np.linspace(0, math.pi / 2, 15)
    arc = np.column_stack([20 * np.sin(t), 20 * (1 - np.cos(t))])
    out = lane_embed(params, cfg, [LanePolyline(0, arc), LanePolyline(1, arc[::-1])])
    assert np.max(np.abs(out[0] - out[1])) > 1e-6


# ------------------------------------------------------------------- edges


def test_edge_types_differ(enc):
    params, cfg = enc
    g = np.array([[3.0, -1.0, 0.6, 0.8]])
    outs = [encode_edges(params, cfg, g, et).data for et in ("A2L", "L2A", "L2L", "A2A")]
    for i in range(4):
        for j in range(i + 1, 4):
            assert np.max(np.abs(outs[i] - outs[j])) > 0


def test_edge_grad_check(enc):
    params, cfg = enc
    rng = np.random.default_rng(3)
    w = rng.normal(size=(5, cfg.hidden_dim))
    geom = rng.normal(size=(5, 4))
    err = grad_check(lambda _: ad.sum(encode_edges(params, cfg, geom, "A2A") * w), params["edge.mlp.0.w"], indices=range(0, 1280, 37))
    assert err <= 1e-5
    err = grad_check(lambda _: ad.sum(encode_edges(params, cfg, geom, "L2A") * w), params["edge.type_embed"])
    assert err <= 1e-5


def test_encoders_nan_free_on_random_inputs(enc):
    params, cfg = enc
    rng = np.random.default_rng(11)
    n = 1000
    disp = rng.normal(0, 20, (n, 10, 6))
    disp[:, :, 5] = rng.random((n, 10)) < 0.7
    disp[disp[:, :, 5] == 0] = 0.0
    size = rng.uniform(0.3, 20, (n, 3))
    kind = rng.integers(0, 3, n)
    assert np.all(np.isfinite(encode_agents(params, cfg, disp, size, kind).data))
    pts = np.cumsum(rng.normal(0, 30, (n, 12, 2)), axis=1)
    pts = np.stack([resample_polyline(p, 12) for p in pts])
    pts = np.stack([rotate(p - p[6], -math.atan2(*(p[7] - p[5])[::-1])) for p in pts])
    out = encode_lanes(params, cfg, pts, rng.integers(0, 4, n), rng.integers(0, 5, n))
    assert np.all(np.isfinite(out.data))
    geom = np.column_stack([rng.normal(0, 100, (n, 2)), np.cos(t := rng.uniform(-4, 4, n)), np.sin(t)])
    assert np.all(np.isfinite(encode_edges(params, cfg, geom, rng.integers(0, 4, n)).data))
