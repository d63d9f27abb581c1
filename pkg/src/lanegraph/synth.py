"""Synthetic road networks and lane-following traffic for desk-scale training."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lanegraph.errors import ConfigError
from lanegraph.relgeom import wrap
from lanegraph.scene import FUTURE_STEPS, HISTORY_FRAMES, AgentTrack, LanePolyline, Scene

NETWORKS = ("straight", "t_junction", "four_way")
DT = 0.1
LANE_WIDTH = 3.5

# kind -> (speed range m/s, size l, w, h)
KIND_PROFILES = {
    "vehicle": (None, (4.6, 1.9, 1.6)),
    "cyclist": ((3.0, 6.0), (1.8, 0.6, 1.7)),
    "pedestrian": ((1.0, 1.8), (0.6, 0.6, 1.8)),
}


@dataclass
class SynthConfig:
    network: str = "four_way"
    lanes_per_approach: int = 2
    agent_count: tuple = (3, 6)
    speed_range: tuple = (4.0, 12.0)
    lane_change_prob: float = 0.2
    turn_prob: float = 0.5
    arm_length: float = 120.0
    segment_length: float = 30.0
    min_gap: float = 3.0
    kind_probs: tuple = (0.8, 0.1, 0.1)  # vehicle, pedestrian, cyclist
    future_steps: int = FUTURE_STEPS
    max_tries: int = 200

    def validate(self):
        if self.network not in NETWORKS:
            raise ConfigError(f"unknown network {self.network!r}; expected one of {NETWORKS}")
        if self.lanes_per_approach < 1:
            raise ConfigError("lanes_per_approach must be >= 1")
        lo, hi = self.agent_count
        if lo < 1 or hi < lo:
            raise ConfigError(f"bad agent_count range {self.agent_count}")
        vlo, vhi = self.speed_range
        if vlo < 0 or vhi < vlo:
            raise ConfigError(f"bad speed_range {self.speed_range}")
        if vhi * DT > self.segment_length:
            raise ConfigError("speed x dt exceeds the lane segment length")
        n_seg = self.arm_length / self.segment_length
        if abs(n_seg - round(n_seg)) > 1e-9:
            raise ConfigError("arm_length must be a whole number of segments")
        # an agent may start anywhere on the first segment and must not run off the network
        travel = vhi * DT * (HISTORY_FRAMES - 1 + self.future_steps)
        if travel + self.segment_length > self.arm_length * 2:
            raise ConfigError(f"network too short for {vhi} m/s over the full horizon")
        if not (0 <= self.lane_change_prob <= 1 and 0 <= self.turn_prob <= 1):
            raise ConfigError("probabilities must lie in [0, 1]")
        if abs(sum(self.kind_probs) - 1.0) > 1e-9:
            raise ConfigError("kind_probs must sum to 1")


def _dense_line(a, b, spacing=1.0):
    a, b = np.asarray(a, float), np.asarray(b, float)
    n = max(2, int(math.ceil(np.linalg.norm(b - a) / spacing)) + 1)
    t = np.linspace(0.0, 1.0, n)[:, None]
    return a + t * (b - a)


def _bezier(p0, d0, p3, d3, spacing=0.5):
    p0, p3 = np.asarray(p0, float), np.asarray(p3, float)
    k = 0.45 * np.linalg.norm(p3 - p0)
    p1, p2 = p0 + k * np.asarray(d0), p3 - k * np.asarray(d3)
    n = max(3, int(math.ceil(1.3 * np.linalg.norm(p3 - p0) / spacing)) + 1)
    t = np.linspace(0.0, 1.0, n)[:, None]
    return (1 - t) ** 3 * p0 + 3 * (1 - t) ** 2 * t * p1 + 3 * (1 - t) * t**2 * p2 + t**3 * p3


class _Network:
    """Lane pieces plus the bookkeeping needed to route agents through them."""

    def __init__(self):
        self.lanes: list[LanePolyline] = []
        self.entry_lanes: list[int] = []  # lanes agents may start on

    def add(self, pts, kind="surface_street", signal="none"):
        lane = LanePolyline(len(self.lanes), pts, kind, signal)
        self.lanes.append(lane)
        return lane.id

    def link(self, a, b):
        if b not in self.lanes[a].successors:
            self.lanes[a].successors.append(b)
            self.lanes[b].predecessors.append(a)

    def neighbors(self, a, b):
        self.lanes[a].left_neighbors.append(b)
        self.lanes[b].right_neighbors.append(a)


def build_network(cfg: SynthConfig, rng) -> _Network:
    net = _Network()
    n = cfg.lanes_per_approach
    n_seg = int(round(cfg.arm_length / cfg.segment_length))
    kind = "freeway" if cfg.network == "straight" else "surface_street"
    if cfg.network == "straight":
        arms = [0.0, math.pi]
        r0 = 0.0
    else:
        arms = [0.0, math.pi / 2, math.pi, 3 * math.pi / 2]
        if cfg.network == "t_junction":
            arms = arms[:3]
        r0 = n * LANE_WIDTH + 2.0

    inbound, outbound = {}, {}  # arm -> list over lane index of piece-id lists
    for phi in arms:
        u = np.array([math.cos(phi), math.sin(phi)])
        nrm = np.array([-math.sin(phi), math.cos(phi)])
        out_lanes, in_lanes = [], []
        for i in range(n):
            off_out = -(i + 0.5) * LANE_WIDTH * nrm
            off_in = (i + 0.5) * LANE_WIDTH * nrm
            pieces = []
            for s in range(n_seg):
                a = r0 + s * cfg.segment_length
                pieces.append(net.add(_dense_line(a * u + off_out, (a + cfg.segment_length) * u + off_out), kind))
            for p, q in zip(pieces[:-1], pieces[1:]):
                net.link(p, q)
            out_lanes.append(pieces)
            pieces = []
            for s in range(n_seg):
                a = r0 + cfg.arm_length - s * cfg.segment_length
                pieces.append(net.add(_dense_line(a * u + off_in, (a - cfg.segment_length) * u + off_in), kind))
            for p, q in zip(pieces[:-1], pieces[1:]):
                net.link(p, q)
            in_lanes.append(pieces)
        # lateral neighbours between adjacent same-direction lanes; lane i - 1 is to the left
        for lanes in (out_lanes, in_lanes):
            for i in range(1, n):
                for s in range(n_seg):
                    net.neighbors(lanes[i][s], lanes[i - 1][s])
        inbound[phi], outbound[phi] = in_lanes, out_lanes
        for i in range(n):
            # any inbound piece, so some agents reach the junction within the horizon
            net.entry_lanes.extend(in_lanes[i])
            if cfg.network == "straight":
                net.entry_lanes.append(out_lanes[i][0])

    if cfg.network == "straight":
        # the two arms meet at x = 0 and simply continue
        for i in range(n):
            net.link(inbound[math.pi][i][-1], outbound[0.0][i][0])
            net.link(inbound[0.0][i][-1], outbound[math.pi][i][0])
        return net

    signals = ("go", "stop", "caution")
    for phi in arms:
        heading_in = np.array([math.cos(phi + math.pi), math.sin(phi + math.pi)])
        signal = signals[int(rng.integers(len(signals)))]
        for i in range(n):
            src = inbound[phi][i][-1]
            p0 = net.lanes[src].waypoints[-1]
            turns = [(wrap(phi + math.pi), i)]  # straight on
            if i == 0:
                turns.append((wrap(phi - math.pi / 2), 0))  # left
            if i == n - 1:
                turns.append((wrap(phi + math.pi / 2), n - 1))  # right
            for out_phi, j in turns:
                match = [a for a in arms if abs(wrap(a - out_phi)) < 1e-9]
                if not match:
                    continue
                dst = outbound[match[0]][j][0]
                p3 = net.lanes[dst].waypoints[0]
                d3 = np.array([math.cos(match[0]), math.sin(match[0])])
                conn = net.add(_bezier(p0, heading_in, p3, d3), "surface_street", signal)
                net.link(src, conn)
                net.link(conn, dst)
    return net


class _Route:
    """Arc-length parameterised path through a sequence of lanes."""

    def __init__(self, net: _Network, lane_ids):
        self.lane_ids = list(lane_ids)
        pts, owner = [], []
        for k, lid in enumerate(self.lane_ids):
            wp = net.lanes[lid].waypoints
            if pts:
                wp = wp[1:]
            pts.append(wp)
            owner.extend([k] * len(wp))
        self.points = np.concatenate(pts)
        self.cum = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(self.points, axis=0).T))])
        lane_lengths = [np.hypot(*np.diff(net.lanes[lid].waypoints, axis=0).T).sum() for lid in self.lane_ids]
        self.lane_start = np.concatenate([[0.0], np.cumsum(lane_lengths)])

    @property
    def length(self):
        return self.cum[-1]

    def at(self, s):
        s = np.asarray(s, dtype=np.float64)
        return np.stack([np.interp(s, self.cum, self.points[:, 0]), np.interp(s, self.cum, self.points[:, 1])], axis=-1)

    def lane_at(self, s):
        k = np.clip(np.searchsorted(self.lane_start, s, side="right") - 1, 0, len(self.lane_ids) - 1)
        return np.asarray(self.lane_ids)[k]


def _extend_route(net, lanes, needed, rng, turn_prob):
    total = 0.0
    for lid in lanes:
        total += np.hypot(*np.diff(net.lanes[lid].waypoints, axis=0).T).sum()
    lanes = list(lanes)
    while total < needed:
        succ = net.lanes[lanes[-1]].successors
        if not succ:
            return None
        if len(succ) == 1:
            nxt = succ[0]
        else:
            # successors[0] is the straight continuation; others are turns
            nxt = succ[0] if rng.random() >= turn_prob else succ[1 + int(rng.integers(len(succ) - 1))]
        lanes.append(nxt)
        total += np.hypot(*np.diff(net.lanes[nxt].waypoints, axis=0).T).sum()
    return lanes


def _sample_agent(net, cfg, rng, kind):
    n_frames = HISTORY_FRAMES + cfg.future_steps
    speed_range = KIND_PROFILES[kind][0] or cfg.speed_range
    v = float(rng.uniform(*speed_range))
    start = net.entry_lanes[int(rng.integers(len(net.entry_lanes)))]
    seg_len = np.hypot(*np.diff(net.lanes[start].waypoints, axis=0).T).sum()
    s0 = float(rng.uniform(0.0, seg_len * 0.9))
    needed = s0 + v * DT * (n_frames - 1) + 2.0
    lanes = _extend_route(net, [start], needed, rng, cfg.turn_prob)
    if lanes is None:
        return None
    route = _Route(net, lanes)
    s = s0 + v * DT * np.arange(n_frames)

    blend = None
    if kind == "vehicle" and rng.random() < cfg.lane_change_prob:
        side = "left_neighbors" if rng.random() < 0.5 else "right_neighbors"
        # the parallel chain exists only along the straight pieces of one arm
        parallel = []
        for lid in route.lane_ids:
            nb = getattr(net.lanes[lid], side)
            if not nb:
                break
            parallel.append(nb[0])
        if parallel:
            arm_end = route.lane_start[len(parallel)]
            change_len = 30.0
            lo, hi = s[HISTORY_FRAMES - 1] - 5.0, arm_end - change_len - 1.0
            if hi > lo:
                s1 = float(rng.uniform(max(lo, 0.0), hi))
                alt = _extend_route(net, parallel, needed, rng, cfg.turn_prob)
                if alt is not None:
                    blend = (_Route(net, alt), s1, s1 + change_len)

    def position(sv):
        p = route.at(sv)
        if blend is None:
            return p
        alt_route, s1, s2 = blend
        w = np.clip((sv - s1) / (s2 - s1), 0.0, 1.0)
        w = w * w * (3 - 2 * w)
        return (1 - w)[..., None] * p + w[..., None] * alt_route.at(sv)

    pos = position(s)
    eps = 0.05
    tangent = position(s + eps) - position(s - eps)
    heading = np.arctan2(tangent[:, 1], tangent[:, 0])
    if blend is None:
        lane_ids = route.lane_at(s)
    else:
        alt_route, s1, s2 = blend
        lane_ids = np.where(s < 0.5 * (s1 + s2), route.lane_at(s), alt_route.lane_at(s))
    return v, pos, heading, lane_ids


def gen_scene(cfg: SynthConfig, seed, scene_id=None):
    """Deterministic synthetic scene; returns ``(scene, futures [Na, T_f, 2])``."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    net = build_network(cfg, rng)
    kinds = ("vehicle", "pedestrian", "cyclist")
    target = int(rng.integers(cfg.agent_count[0], cfg.agent_count[1] + 1))
    accepted = []
    tries = 0
    while len(accepted) < target and tries < cfg.max_tries:
        tries += 1
        kind = kinds[int(rng.choice(3, p=cfg.kind_probs))]
        sample = _sample_agent(net, cfg, rng, kind)
        if sample is None:
            continue
        pos = sample[1]
        if any(np.min(np.hypot(*(pos - other[2]).T)) < cfg.min_gap for other in accepted):
            continue
        accepted.append((kind, sample[0], pos, sample[2]))
    if not accepted:
        raise ConfigError("could not place any agent; loosen the configuration")
    agents, futures = [], []
    h = HISTORY_FRAMES
    for aid, (kind, v, pos, heading) in enumerate(accepted):
        states = np.zeros((h, 6))
        states[:, 0:2] = pos[:h]
        states[:, 3] = v * np.cos(heading[:h])
        states[:, 4] = v * np.sin(heading[:h])
        states[:, 5] = heading[:h]
        fut = pos[h:]
        agents.append(
            AgentTrack(aid, kind, states, np.ones(h, dtype=bool), KIND_PROFILES[kind][1], fut, np.ones(len(fut), dtype=bool))
        )
        futures.append(fut)
    scene = Scene(agents, net.lanes, scene_id or f"{cfg.network}-{seed}")
    return scene, np.stack(futures)


def gen_dataset(cfg: SynthConfig, n, seed=0):
    return [gen_scene(cfg, seed * 100003 + i, f"{cfg.network}-{seed}-{i}")[0] for i in range(n)]
