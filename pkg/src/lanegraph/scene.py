"""Scenes, agents, lanes, local frames and block-diagonal scene batching."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from lanegraph.errors import GraphIntegrityError, InvalidPolylineError, SceneParseError
from lanegraph.relgeom import wrap

HISTORY_FRAMES = 11  # t = -10 .. 0
HISTORY_STEPS = HISTORY_FRAMES - 1
LANE_POINTS = 12
FUTURE_STEPS = 80

AGENT_KINDS = ("vehicle", "pedestrian", "cyclist")
LANE_KINDS = ("undefined", "freeway", "surface_street", "bike_lane")
SIGNAL_STATES = ("none", "unknown", "stop", "caution", "go")

# columns of AgentTrack.states
X, Y, Z, VX, VY, THETA = range(6)


@dataclass
class AgentTrack:
    id: int
    kind: str
    states: np.ndarray  # [11, 6] x, y, z, vx, vy, theta
    valid: np.ndarray  # [11] bool
    size: tuple = (4.5, 2.0, 1.6)  # length, width, height
    future: np.ndarray | None = None  # [T_f, 2] global positions
    future_valid: np.ndarray | None = None  # [T_f] bool

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.float64).reshape(-1, 6).copy()
        self.valid = np.asarray(self.valid, dtype=bool).copy()
        self.states[:, THETA] = wrap(self.states[:, THETA])
        self.size = tuple(float(v) for v in self.size)
        if self.future is not None:
            self.future = np.asarray(self.future, dtype=np.float64).reshape(-1, 2)
            if self.future_valid is None:
                self.future_valid = np.ones(len(self.future), dtype=bool)
            self.future_valid = np.asarray(self.future_valid, dtype=bool)

    @property
    def current(self):
        return self.states[-1]


@dataclass
class LanePolyline:
    id: int
    waypoints: np.ndarray  # [n, 2]
    kind: str = "surface_street"
    signal: str = "none"
    successors: list = field(default_factory=list)
    predecessors: list = field(default_factory=list)
    left_neighbors: list = field(default_factory=list)
    right_neighbors: list = field(default_factory=list)

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=np.float64).reshape(-1, 2)


@dataclass
class Scene:
    agents: list
    lanes: list
    scene_id: str = "scene"
    # (agent_start, lane_start) per merged sub-scene; agents never align to other blocks' lanes
    blocks: list | None = None

    @property
    def num_agents(self):
        return len(self.agents)

    @property
    def num_lanes(self):
        return len(self.lanes)

    def lane_index(self):
        return {lane.id: i for i, lane in enumerate(self.lanes)}

    def agent_index(self):
        return {a.id: i for i, a in enumerate(self.agents)}


def validate_scene(scene: Scene):
    if not scene.agents or not scene.lanes:
        raise GraphIntegrityError(f"scene {scene.scene_id}: needs at least one agent and one lane")
    if len({a.id for a in scene.agents}) != len(scene.agents):
        raise GraphIntegrityError(f"scene {scene.scene_id}: duplicate agent ids")
    ids = {lane.id for lane in scene.lanes}
    if len(ids) != len(scene.lanes):
        raise GraphIntegrityError(f"scene {scene.scene_id}: duplicate lane ids")
    for a in scene.agents:
        if a.kind not in AGENT_KINDS:
            raise GraphIntegrityError(f"agent {a.id}: unknown kind {a.kind!r}")
        if a.states.shape != (HISTORY_FRAMES, 6) or a.valid.shape != (HISTORY_FRAMES,):
            raise GraphIntegrityError(
                f"agent {a.id}: expected {HISTORY_FRAMES} history frames, got {a.states.shape}"
            )
        if not a.valid[-1]:
            raise GraphIntegrityError(f"agent {a.id}: current (t = 0) state must be valid")
    for lane in scene.lanes:
        check_polyline(lane.waypoints)
        for rel in ("successors", "predecessors", "left_neighbors", "right_neighbors"):
            for other in getattr(lane, rel):
                if other == lane.id:
                    raise GraphIntegrityError(f"lane {lane.id}: {rel} references itself")
                if other not in ids:
                    raise GraphIntegrityError(f"lane {lane.id}: {rel} references unknown lane {other}")


def check_polyline(points):
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 2 or points.shape[1] != 2:
        raise InvalidPolylineError(f"polyline needs >= 2 2-D points, got shape {points.shape}")
    seg = np.hypot(*np.diff(points, axis=0).T)
    if np.any(seg <= 1e-9):
        raise InvalidPolylineError("polyline has coincident consecutive waypoints")


def resample_polyline(waypoints, n=LANE_POINTS):
    """Resample to ``n`` points at equal arc-length spacing, endpoints kept exactly."""
    pts = np.asarray(waypoints, dtype=np.float64)
    if pts.ndim != 2 or len(pts) < 2 or n < 2:
        raise InvalidPolylineError(f"cannot resample {pts.shape} polyline to {n} points")
    cum = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    if cum[-1] <= 0:
        raise InvalidPolylineError("polyline has zero length")
    targets = np.linspace(0.0, cum[-1], n)
    out = np.column_stack([np.interp(targets, cum, pts[:, 0]), np.interp(targets, cum, pts[:, 1])])
    out[0], out[-1] = pts[0], pts[-1]
    return out


def rotate(points, theta):
    """Rotate row vectors by ``theta`` (use ``-heading`` to go into a local frame)."""
    c, s = math.cos(theta), math.sin(theta)
    pts = np.asarray(points, dtype=np.float64)
    return np.stack([c * pts[..., 0] - s * pts[..., 1], s * pts[..., 0] + c * pts[..., 1]], axis=-1)


def to_displacements(states, valid, use_z=False):
    """Per-step deltas in the frame of the t = 0 pose.

    Returns ``(feats [T_h, 5 or 6], step_valid [T_h])``. Columns are
    ``dx, dy, vx, vy, dtheta`` (plus ``dz`` with ``use_z``); a step is valid
    only when both of its endpoint frames are, and invalid steps are zero.
    """
    states = np.asarray(states, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    theta0 = states[-1, THETA]
    dp = rotate(np.diff(states[:, :2], axis=0), -theta0)
    vel = rotate(states[1:, VX:VY + 1], -theta0)
    dth = wrap(np.diff(states[:, THETA]))
    cols = [dp, vel, np.atleast_1d(dth)[:, None]]
    if use_z:
        cols.append(np.diff(states[:, Z])[:, None])
    feats = np.concatenate(cols, axis=1)
    step_valid = valid[1:] & valid[:-1]
    feats[~step_valid] = 0.0
    return feats, step_valid


def lane_anchor(points):
    """Anchor pose (x, y, theta) at the middle resampled waypoint."""
    mid = len(points) // 2
    lo, hi = max(mid - 1, 0), min(mid + 1, len(points) - 1)
    d = points[hi] - points[lo]
    return np.array([points[mid, 0], points[mid, 1], wrap(math.atan2(d[1], d[0]))])


@dataclass
class LocalizedScene:
    scene: Scene
    agent_pose: np.ndarray  # [Na, 3] global anchor (x, y, theta)
    agent_disp: np.ndarray  # [Na, T_h, C] displacement features incl. validity channel
    agent_local: np.ndarray  # [Na, 11, 3] local x, y, theta per history frame
    agent_size: np.ndarray  # [Na, 3]
    agent_kind: np.ndarray  # [Na] index into AGENT_KINDS
    lane_pose: np.ndarray  # [Nl, 3]
    lane_points: np.ndarray  # [Nl, 12, 2] local resampled waypoints
    lane_kind: np.ndarray  # [Nl]
    lane_signal: np.ndarray  # [Nl]


def localize(scene: Scene, use_z=False) -> LocalizedScene:
    na, nl = scene.num_agents, scene.num_lanes
    agent_pose = np.zeros((na, 3))
    width = 7 if use_z else 6
    agent_disp = np.zeros((na, HISTORY_STEPS, width))
    agent_local = np.zeros((na, HISTORY_FRAMES, 3))
    for i, a in enumerate(scene.agents):
        cur = a.states[-1]
        agent_pose[i] = (cur[X], cur[Y], cur[THETA])
        feats, step_valid = to_displacements(a.states, a.valid, use_z=use_z)
        agent_disp[i, :, :5] = feats[:, :5]
        agent_disp[i, :, 5] = step_valid
        if use_z:
            agent_disp[i, :, 6] = feats[:, 5]
        local = rotate(a.states[:, :2] - cur[:2], -cur[THETA])
        local[-1] = 0.0
        agent_local[i, :, :2] = np.where(a.valid[:, None], local, 0.0)
        agent_local[i, :, 2] = np.where(a.valid, wrap(a.states[:, THETA] - cur[THETA]), 0.0)
    lane_pose = np.zeros((nl, 3))
    lane_points = np.zeros((nl, LANE_POINTS, 2))
    for j, lane in enumerate(scene.lanes):
        pts = resample_polyline(lane.waypoints, LANE_POINTS)
        anchor = lane_anchor(pts)
        lane_pose[j] = anchor
        lane_points[j] = rotate(pts - anchor[:2], -anchor[2])
    return LocalizedScene(
        scene=scene,
        agent_pose=agent_pose,
        agent_disp=agent_disp,
        agent_local=agent_local,
        agent_size=np.array([a.size for a in scene.agents], dtype=np.float64).reshape(na, 3),
        agent_kind=np.array([AGENT_KINDS.index(a.kind) for a in scene.agents], dtype=np.int64),
        lane_pose=lane_pose,
        lane_points=lane_points,
        lane_kind=np.array([LANE_KINDS.index(lane.kind) for lane in scene.lanes], dtype=np.int64),
        lane_signal=np.array(
            [SIGNAL_STATES.index(lane.signal) for lane in scene.lanes], dtype=np.int64
        ),
    )


def local_futures(scene: Scene):
    """Ground-truth futures in each agent's t = 0 frame -> ``(gts [Na,T,2], mask [Na,T])``."""
    gts, masks = [], []
    for a in scene.agents:
        if a.future is None:
            gts.append(np.zeros((FUTURE_STEPS, 2)))
            masks.append(np.zeros(FUTURE_STEPS, dtype=bool))
            continue
        cur = a.states[-1]
        gts.append(rotate(a.future - cur[:2], -cur[THETA]))
        masks.append(a.future_valid.copy())
    return np.stack(gts), np.stack(masks)


def to_global(local_points, pose):
    """Map local-frame points of one agent back to the world frame."""
    return rotate(local_points, pose[2]) + np.asarray(pose[:2])


def transform_scene(scene: Scene, angle, tx, ty) -> Scene:
    """Apply one rigid motion (rotate by ``angle`` about the origin, then shift)."""
    shift = np.array([tx, ty])
    agents = []
    for a in scene.agents:
        st = a.states.copy()
        st[:, :2] = rotate(st[:, :2], angle) + shift
        st[:, VX:VY + 1] = rotate(st[:, VX:VY + 1], angle)
        st[:, THETA] = st[:, THETA] + angle
        fut = None if a.future is None else rotate(a.future, angle) + shift
        agents.append(AgentTrack(a.id, a.kind, st, a.valid, a.size, fut, a.future_valid))
    lanes = [
        LanePolyline(
            lane.id,
            rotate(lane.waypoints, angle) + shift,
            lane.kind,
            lane.signal,
            list(lane.successors),
            list(lane.predecessors),
            list(lane.left_neighbors),
            list(lane.right_neighbors),
        )
        for lane in scene.lanes
    ]
    return Scene(agents, lanes, scene.scene_id, scene.blocks)


class SceneOffset(NamedTuple):
    agent_start: int
    lane_start: int
    scene_id: str
    agent_ids: tuple
    lane_ids: tuple


def batch_scenes(scenes) -> tuple[Scene, list[SceneOffset]]:
    """Merge scenes into one by offsetting node indices.

    Merged agent and lane ids are their positions in the merged lists, so
    connectivity never crosses scene boundaries. Offsets keep the original
    ids for ``split_batch``. A single scene is returned unchanged.
    """
    scenes = list(scenes)
    if not scenes:
        raise ValueError("batch_scenes needs at least one scene")
    offsets = []
    a0 = l0 = 0
    for sc in scenes:
        offsets.append(
            SceneOffset(a0, l0, sc.scene_id, tuple(a.id for a in sc.agents), tuple(l.id for l in sc.lanes))
        )
        a0 += sc.num_agents
        l0 += sc.num_lanes
    if len(scenes) == 1:
        return scenes[0], offsets
    agents, lanes = [], []
    for sc, off in zip(scenes, offsets):
        remap = {lane.id: off.lane_start + j for j, lane in enumerate(sc.lanes)}
        for i, a in enumerate(sc.agents):
            agents.append(
                AgentTrack(off.agent_start + i, a.kind, a.states, a.valid, a.size, a.future, a.future_valid)
            )
        for lane in sc.lanes:
            lanes.append(
                LanePolyline(
                    remap[lane.id],
                    lane.waypoints,
                    lane.kind,
                    lane.signal,
                    [remap[x] for x in lane.successors],
                    [remap[x] for x in lane.predecessors],
                    [remap[x] for x in lane.left_neighbors],
                    [remap[x] for x in lane.right_neighbors],
                )
            )
    merged_id = "+".join(sc.scene_id for sc in scenes)
    blocks = [(o.agent_start, o.lane_start) for o in offsets]
    return Scene(agents, lanes, merged_id, blocks), offsets


def split_batch(merged: Scene, offsets) -> list[Scene]:
    """Inverse of ``batch_scenes``: restores each scene with its original ids."""
    if len(offsets) == 1:
        return [merged]
    out = []
    ends = [(o.agent_start + len(o.agent_ids), o.lane_start + len(o.lane_ids)) for o in offsets]
    for off, (a_end, l_end) in zip(offsets, ends):
        back = {off.lane_start + j: lid for j, lid in enumerate(off.lane_ids)}
        agents = [
            AgentTrack(aid, a.kind, a.states, a.valid, a.size, a.future, a.future_valid)
            for aid, a in zip(off.agent_ids, merged.agents[off.agent_start:a_end])
        ]
        lanes = [
            LanePolyline(
                back[lane.id],
                lane.waypoints,
                lane.kind,
                lane.signal,
                [back[x] for x in lane.successors],
                [back[x] for x in lane.predecessors],
                [back[x] for x in lane.left_neighbors],
                [back[x] for x in lane.right_neighbors],
            )
            for lane in merged.lanes[off.lane_start:l_end]
        ]
        out.append(Scene(agents, lanes, off.scene_id))
    return out


# ---------------------------------------------------------------- JSON I/O


def scene_to_dict(scene: Scene) -> dict:
    agents = []
    for a in scene.agents:
        rec = {
            "id": int(a.id),
            "kind": a.kind,
            "states": [list(map(float, s)) + [bool(v)] for s, v in zip(a.states, a.valid)],
            "size": list(a.size),
        }
        if a.future is not None:
            rec["future"] = [[float(p[0]), float(p[1]), bool(v)] for p, v in zip(a.future, a.future_valid)]
        agents.append(rec)
    lanes = [
        {
            "id": int(lane.id),
            "kind": lane.kind,
            "signal": lane.signal,
            "waypoints": lane.waypoints.tolist(),
            "successors": [int(x) for x in lane.successors],
            "predecessors": [int(x) for x in lane.predecessors],
            "left": [int(x) for x in lane.left_neighbors],
            "right": [int(x) for x in lane.right_neighbors],
        }
        for lane in scene.lanes
    ]
    return {"scene_id": scene.scene_id, "agents": agents, "lanes": lanes}


def _field(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise SceneParseError(f"{where}: missing field {key!r}")
    return obj[key]


def scene_from_dict(d, where="scene") -> Scene:
    agents = []
    for i, rec in enumerate(_field(d, "agents", where)):
        loc = f"{where}: agents[{i}]"
        try:
            rows = np.asarray(_field(rec, "states", loc), dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise SceneParseError(f"{loc}.states: {exc}") from None
        if rows.shape != (HISTORY_FRAMES, 7):
            raise SceneParseError(f"{loc}.states: expected {HISTORY_FRAMES}x7 rows, got {rows.shape}")
        fut = fut_valid = None
        if "future" in rec:
            f = np.asarray(rec["future"], dtype=np.float64)
            if f.ndim != 2 or f.shape[1] != 3:
                raise SceneParseError(f"{loc}.future: expected [x, y, valid] rows, got {f.shape}")
            fut, fut_valid = f[:, :2], f[:, 2] > 0.5
        kind = _field(rec, "kind", loc)
        if kind not in AGENT_KINDS:
            raise SceneParseError(f"{loc}.kind: unknown agent kind {kind!r}")
        agents.append(
            AgentTrack(
                int(_field(rec, "id", loc)),
                kind,
                rows[:, :6],
                rows[:, 6] > 0.5,
                tuple(rec.get("size", (4.5, 2.0, 1.6))),
                fut,
                fut_valid,
            )
        )
    lanes = []
    for j, rec in enumerate(_field(d, "lanes", where)):
        loc = f"{where}: lanes[{j}]"
        kind = rec.get("kind", "surface_street")
        signal = rec.get("signal", "none")
        if kind not in LANE_KINDS:
            raise SceneParseError(f"{loc}.kind: unknown lane kind {kind!r}")
        if signal not in SIGNAL_STATES:
            raise SceneParseError(f"{loc}.signal: unknown signal state {signal!r}")
        try:
            wp = np.asarray(_field(rec, "waypoints", loc), dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise SceneParseError(f"{loc}.waypoints: {exc}") from None
        lanes.append(
            LanePolyline(
                int(_field(rec, "id", loc)),
                wp,
                kind,
                signal,
                [int(x) for x in rec.get("successors", [])],
                [int(x) for x in rec.get("predecessors", [])],
                [int(x) for x in rec.get("left", [])],
                [int(x) for x in rec.get("right", [])],
            )
        )
    scene = Scene(agents, lanes, str(d.get("scene_id", "scene")))
    try:
        validate_scene(scene)
    except (GraphIntegrityError, InvalidPolylineError) as exc:
        raise SceneParseError(f"{where}: {exc}") from None
    return scene


def read_scenes(path) -> list[Scene]:
    """Read one scene per ``.json`` file, a directory of them, or JSON-lines."""
    path = Path(path)
    if path.is_dir():
        out = []
        for p in sorted(path.iterdir()):
            if p.suffix in (".json", ".jsonl"):
                out.extend(read_scenes(p))
        return out
    text = path.read_text()
    if path.suffix == ".jsonl":
        scenes = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SceneParseError(f"{path}:{lineno}: {exc.msg}") from None
            scenes.append(scene_from_dict(d, f"{path}:{lineno}"))
        return scenes
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneParseError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if isinstance(d, list):
        return [scene_from_dict(x, f"{path}[{i}]") for i, x in enumerate(d)]
    return [scene_from_dict(d, str(path))]


def write_scenes(path, scenes):
    path = Path(path)
    with open(path, "w") as fh:
        if path.suffix == ".jsonl":
            for sc in scenes:
                fh.write(json.dumps(scene_to_dict(sc)) + "\n")
        else:
            scenes = list(scenes)
            payload = scene_to_dict(scenes[0]) if len(scenes) == 1 else [scene_to_dict(s) for s in scenes]
            json.dump(payload, fh)
