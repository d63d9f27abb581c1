"""Scene graph assembly: localized node features plus target-sorted edge lists."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lanegraph.relgeom import rel_pose_batch
from lanegraph.scene import LocalizedScene, Scene, batch_scenes, localize
from lanegraph.topology import DEFAULT_PLAN, DEFAULT_RADIUS, BoolAdjacency, EdgeSets, build_edge_sets


@dataclass
class EdgeList:
    """Directed edges sorted by (dst, src), with per-edge relative geometry."""

    src: np.ndarray
    dst: np.ndarray
    geom: np.ndarray  # [E, 4] dx, dy, cos, sin in the target frame

    def __len__(self):
        return len(self.src)

    @classmethod
    def from_adjacency(cls, adj: BoolAdjacency, src_pose, dst_pose):
        src, dst = adj.pairs()
        order = np.lexsort((src, dst))
        src, dst = src[order], dst[order]
        return cls(src, dst, rel_pose_batch(dst_pose[dst], src_pose[src]))

    def shifted(self, src_off, dst_off):
        return EdgeList(self.src + src_off, self.dst + dst_off, self.geom)


@dataclass
class SceneGraph:
    loc: LocalizedScene
    edges: EdgeSets
    til: EdgeList  # agent -> lane
    l2a: EdgeList  # lane -> agent
    a2a: EdgeList  # agent -> agent

    @property
    def num_agents(self):
        return len(self.loc.agent_pose)

    @property
    def num_lanes(self):
        return len(self.loc.lane_pose)

    def census(self):
        return self.edges.census()


def build_graph(scene: Scene, radius=DEFAULT_RADIUS, plan=DEFAULT_PLAN, use_z=False) -> SceneGraph:
    loc = localize(scene, use_z=use_z)
    edges = build_edge_sets(scene, radius, plan)
    ap, lp = loc.agent_pose, loc.lane_pose
    return SceneGraph(
        loc=loc,
        edges=edges,
        til=EdgeList.from_adjacency(edges.a2l, ap, lp),
        l2a=EdgeList.from_adjacency(edges.l2a, lp, ap),
        a2a=EdgeList.from_adjacency(edges.a2a, ap, ap),
    )


def _block_diag(mats):
    rows, cols = [], []
    r0 = c0 = 0
    for m in mats:
        r, c = m.pairs()
        rows.append(r + r0)
        cols.append(c + c0)
        r0 += m.n_rows
        c0 += m.n_cols
    return BoolAdjacency.from_pairs(r0, c0, np.concatenate(rows), np.concatenate(cols))


def batch_graphs(graphs) -> SceneGraph:
    """Block-diagonal merge of prebuilt graphs.

    Produces the same graph as ``build_graph(batch_scenes(scenes))`` without
    recomputing distances and expansions.
    """
    graphs = list(graphs)
    if len(graphs) == 1:
        return graphs[0]
    scene, _ = batch_scenes([g.loc.scene for g in graphs])
    cat = lambda attr: np.concatenate([getattr(g.loc, attr) for g in graphs])  # noqa: E731
    loc = LocalizedScene(
        scene=scene,
        agent_pose=cat("agent_pose"),
        agent_disp=cat("agent_disp"),
        agent_local=cat("agent_local"),
        agent_size=cat("agent_size"),
        agent_kind=cat("agent_kind"),
        lane_pose=cat("lane_pose"),
        lane_points=cat("lane_points"),
        lane_kind=cat("lane_kind"),
        lane_signal=cat("lane_signal"),
    )
    first = graphs[0].edges
    edges = EdgeSets(
        a2l=_block_diag([g.edges.a2l for g in graphs]),
        l2l_o=_block_diag([g.edges.l2l_o for g in graphs]),
        l2l_f=_block_diag([g.edges.l2l_f for g in graphs]),
        l2a=_block_diag([g.edges.l2a for g in graphs]),
        a2a=_block_diag([g.edges.a2a for g in graphs]),
        plan=first.plan,
        radius=first.radius,
    )
    til, l2a, a2a = [], [], []
    a0 = l0 = 0
    for g in graphs:
        til.append(g.til.shifted(a0, l0))
        l2a.append(g.l2a.shifted(l0, a0))
        a2a.append(g.a2a.shifted(a0, a0))
        a0 += g.num_agents
        l0 += g.num_lanes

    def join(parts):
        return EdgeList(
            np.concatenate([p.src for p in parts]),
            np.concatenate([p.dst for p in parts]),
            np.concatenate([p.geom for p in parts]),
        )

    return SceneGraph(loc, edges, join(til), join(l2a), join(a2a))
