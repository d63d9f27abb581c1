"""Relative pose descriptors for directed edges.

Every edge ``source -> target`` is described in the target's own frame, so
the descriptor does not depend on where the world origin sits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EDGE_TYPES = ("A2L", "L2A", "L2L", "A2A")
EDGE_TYPE_INDEX = {name: i for i, name in enumerate(EDGE_TYPES)}


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(wrap(self.theta)))


@dataclass(frozen=True)
class EdgeGeom:
    dx: float
    dy: float
    cos_dt: float
    sin_dt: float
    etype: str = "A2A"

    def as_array(self):
        return np.array([self.dx, self.dy, self.cos_dt, self.sin_dt])


def wrap(angle):
    """Map angles to (-pi, pi]; both pi and -pi map to pi."""
    a = np.mod(np.asarray(angle, dtype=np.float64) + math.pi, 2 * math.pi) - math.pi
    a = np.where(a <= -math.pi, math.pi, a)
    return float(a) if a.ndim == 0 else a


def rel_pose(target: Pose, source: Pose, etype="A2A") -> EdgeGeom:
    c, s = math.cos(target.theta), math.sin(target.theta)
    ox, oy = source.x - target.x, source.y - target.y
    dt = wrap(source.theta - target.theta)
    return EdgeGeom(c * ox + s * oy, -s * ox + c * oy, math.cos(dt), math.sin(dt), etype)


def rel_pose_batch(target_poses, source_poses):
    """Vectorised ``rel_pose`` over ``[E, 3]`` (x, y, theta) arrays -> ``[E, 4]``."""
    t = np.asarray(target_poses, dtype=np.float64).reshape(-1, 3)
    s = np.asarray(source_poses, dtype=np.float64).reshape(-1, 3)
    c, sn = np.cos(t[:, 2]), np.sin(t[:, 2])
    ox, oy = s[:, 0] - t[:, 0], s[:, 1] - t[:, 1]
    dt = wrap(s[:, 2] - t[:, 2])
    return np.stack([c * ox + sn * oy, -sn * ox + c * oy, np.cos(dt), np.sin(dt)], axis=1)
