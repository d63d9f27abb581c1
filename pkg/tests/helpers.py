"""Random scene factories and independent oracles shared by the test suite.

The oracles here deliberately avoid the package's matrix code: reachability
is computed by layered set traversal over the raw lane connectivity lists,
and distances with scalar ``math`` arithmetic.
"""
import math

import numpy as np

from lanegraph.scene import AgentTrack, LanePolyline, Scene


def random_polyline(rng, center, n_pts=None):
    n_pts = n_pts or int(rng.integers(2, 6))
    heading = rng.uniform(-math.pi, math.pi)
    pts = [np.asarray(center, dtype=float)]
    for _ in range(n_pts - 1):
        heading += rng.normal(0, 0.3)
        step = rng.uniform(2.0, 8.0)
        pts.append(pts[-1] + step * np.array([math.cos(heading), math.sin(heading)]))
    return np.array(pts)


def straight_track(aid, x, y, theta, speed=0.0, kind="vehicle"):
    """History of an agent moving at constant speed along ``theta``, ending at (x, y)."""
    t = np.arange(-10, 1) * 0.1
    states = np.zeros((11, 6))
    states[:, 0] = x + speed * t * math.cos(theta)
    states[:, 1] = y + speed * t * math.sin(theta)
    states[:, 3] = speed * math.cos(theta)
    states[:, 4] = speed * math.sin(theta)
    states[:, 5] = theta
    return AgentTrack(aid, kind, states, np.ones(11, dtype=bool))


def random_topology_scene(rng, max_lanes=50, max_agents=20, extent=120.0, p_succ=0.06, p_side=0.03):
    """Random lanes with random (consistent) connectivity and random agents."""
    n_l = int(rng.integers(1, max_lanes + 1))
    n_a = int(rng.integers(1, max_agents + 1))
    # ids deliberately not 0..n-1 so index/id mixups surface
    ids = [int(x) for x in rng.choice(10_000, size=n_l, replace=False)]
    lanes = [LanePolyline(ids[j], random_polyline(rng, rng.uniform(0, extent, 2))) for j in range(n_l)]
    for j in range(n_l):
        for i in range(n_l):
            if i == j:
                continue
            if rng.random() < p_succ:
                lanes[j].successors.append(ids[i])
                lanes[i].predecessors.append(ids[j])
            if i > j and rng.random() < p_side:
                lanes[j].left_neighbors.append(ids[i])
                lanes[i].right_neighbors.append(ids[j])
    kinds = ("vehicle", "pedestrian", "cyclist")
    agents = []
    for a in range(n_a):
        x, y = rng.uniform(0, extent, 2)
        tr = straight_track(
            a * 7 + 3, x, y, rng.uniform(-math.pi, math.pi), rng.uniform(0, 10), kinds[int(rng.integers(3))]
        )
        agents.append(tr)
    return Scene(agents, lanes, f"rand-{rng.integers(1 << 30)}")


def point_segment_distance(p, a, b):
    ax, ay = a
    bx, by = b
    px, py = p
    vx, vy = bx - ax, by - ay
    L2 = vx * vx + vy * vy
    t = max(0.0, min(1.0, ((px - ax) * vx + (py - ay) * vy) / L2))
    return math.hypot(px - (ax + t * vx), py - (ay + t * vy))


def aligned_oracle(scene, r):
    """agent index -> set of lane indices strictly within ``r`` (brute force)."""
    out = {}
    for i, a in enumerate(scene.agents):
        p = (float(a.states[-1, 0]), float(a.states[-1, 1]))
        out[i] = set()
        for j, lane in enumerate(scene.lanes):
            wp = lane.waypoints
            d = min(point_segment_distance(p, wp[k], wp[k + 1]) for k in range(len(wp) - 1))
            if d < r:
                out[i].add(j)
    return out


def relations_oracle(scene):
    """Forward and omnidirectional one-hop neighbour sets by lane index."""
    idx = {lane.id: j for j, lane in enumerate(scene.lanes)}
    fwd = {j: set() for j in range(len(scene.lanes))}
    omni = {j: set() for j in range(len(scene.lanes))}
    for j, lane in enumerate(scene.lanes):
        for s in lane.successors:
            fwd[j].add(idx[s])
        for p in lane.predecessors:
            fwd[idx[p]].add(j)
    for j in fwd:
        for i in fwd[j]:
            omni[j].add(i)
            omni[i].add(j)
    for j, lane in enumerate(scene.lanes):
        for other in lane.left_neighbors + lane.right_neighbors:
            omni[j].add(idx[other])
            omni[idx[other]].add(j)
    return fwd, omni


def layered_reach(start, plan, fwd, omni):
    """All lanes hit by walks whose k-th hop uses the plan's k-th relation, k = 0..K."""
    frontier = set(start)
    reached = set(frontier)
    for step in plan:
        rel = omni if step == "O" else fwd
        frontier = {n for x in frontier for n in rel[x]}
        reached |= frontier
    return reached


def l2a_oracle(scene, r, plan):
    aligned = aligned_oracle(scene, r)
    fwd, omni = relations_oracle(scene)
    edges = set()
    for j in range(len(scene.lanes)):
        reach = layered_reach({j}, plan, fwd, omni)
        for a, lanes in aligned.items():
            if lanes & reach:
                edges.add((j, a))
    return edges


def a2a_oracle(scene, r, plan):
    aligned = aligned_oracle(scene, r)
    fwd, omni = relations_oracle(scene)
    edges = set()
    for a, lanes in aligned.items():
        reach = layered_reach(lanes, plan, fwd, omni)
        for b, lanes_b in aligned.items():
            if a != b and lanes_b & reach:
                edges.add((a, b))
    return edges


def shared_lane_oracle(scene, r):
    aligned = aligned_oracle(scene, r)
    return {(a, b) for a in aligned for b in aligned if a != b and aligned[a] & aligned[b]}


def random_rigid(rng):
    return rng.uniform(-math.pi, math.pi), rng.uniform(-500, 500), rng.uniform(-500, 500)
