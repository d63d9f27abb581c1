"""Typed sparse adjacency and topology-guided edge expansion.

Orientation convention: an entry ``(row, col)`` means a message flows from
node ``row`` to node ``col``. ``M_A2L`` has agent rows and lane columns,
``M_L2A`` is its transpose, and ``M_F`` holds ``j -> i`` when lane ``i``
succeeds lane ``j``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from lanegraph import kernels
from lanegraph.errors import ConfigError, GraphIntegrityError
from lanegraph.scene import Scene

DEFAULT_PLAN = "OFF"
DEFAULT_RADIUS = 30.0


class BoolAdjacency:
    """Immutable sparse boolean matrix in CSR form with sorted rows."""

    __slots__ = ("n_rows", "n_cols", "indptr", "indices")

    def __init__(self, n_rows, n_cols, indptr, indices):
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)

    @classmethod
    def from_pairs(cls, n_rows, n_cols, rows, cols):
        rows = np.asarray(rows, dtype=np.int64).reshape(-1)
        cols = np.asarray(cols, dtype=np.int64).reshape(-1)
        if len(rows) and (
            rows.min() < 0 or rows.max() >= n_rows or cols.min() < 0 or cols.max() >= n_cols
        ):
            raise GraphIntegrityError(f"edge index out of range for {n_rows}x{n_cols} adjacency")
        keys = np.unique(rows * max(n_cols, 1) + cols)
        r, c = keys // max(n_cols, 1), keys % max(n_cols, 1)
        indptr = np.zeros(n_rows + 1, dtype=np.int64)
        np.add.at(indptr, r + 1, 1)
        return cls(n_rows, n_cols, np.cumsum(indptr), c)

    @classmethod
    def from_dense(cls, dense):
        dense = np.asarray(dense, dtype=bool)
        r, c = np.nonzero(dense)
        return cls.from_pairs(dense.shape[0], dense.shape[1], r, c)

    @classmethod
    def identity(cls, n):
        return cls(n, n, np.arange(n + 1), np.arange(n))

    @classmethod
    def empty(cls, n_rows, n_cols):
        return cls(n_rows, n_cols, np.zeros(n_rows + 1, dtype=np.int64), np.zeros(0, dtype=np.int64))

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self):
        return len(self.indices)

    def rows(self):
        return np.repeat(np.arange(self.n_rows, dtype=np.int64), np.diff(self.indptr))

    def pairs(self):
        """Edges as ``(rows, cols)`` arrays in row-major order."""
        return self.rows(), self.indices.copy()

    def edge_set(self):
        return set(zip(self.rows().tolist(), self.indices.tolist()))

    def neighbors(self, row):
        return self.indices[self.indptr[row]:self.indptr[row + 1]]

    def to_dense(self):
        out = np.zeros(self.shape, dtype=bool)
        out[self.rows(), self.indices] = True
        return out

    def transpose(self):
        r, c = self.pairs()
        return BoolAdjacency.from_pairs(self.n_cols, self.n_rows, c, r)

    @property
    def T(self):
        return self.transpose()

    def __matmul__(self, other):
        if self.n_cols != other.n_rows:
            raise GraphIntegrityError(f"cannot multiply {self.shape} by {other.shape}")
        ptr, idx = kernels.bool_spgemm(self.indptr, self.indices, other.indptr, other.indices, other.n_cols)
        return BoolAdjacency(self.n_rows, other.n_cols, ptr, idx)

    def __or__(self, other):
        if self.shape != other.shape:
            raise GraphIntegrityError(f"cannot union {self.shape} with {other.shape}")
        r1, c1 = self.pairs()
        r2, c2 = other.pairs()
        return BoolAdjacency.from_pairs(
            self.n_rows, self.n_cols, np.concatenate([r1, r2]), np.concatenate([c1, c2])
        )

    def without_diagonal(self):
        r, c = self.pairs()
        keep = r != c
        return BoolAdjacency.from_pairs(self.n_rows, self.n_cols, r[keep], c[keep])

    def issubset(self, other):
        return self.shape == other.shape and self.edge_set() <= other.edge_set()

    def __eq__(self, other):
        return (
            isinstance(other, BoolAdjacency)
            and self.shape == other.shape
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    def __repr__(self):
        return f"BoolAdjacency({self.n_rows}x{self.n_cols}, nnz={self.nnz})"


def parse_plan(plan) -> str:
    plan = "" if plan in (None, "-", "none", "I") else str(plan).upper()
    bad = set(plan) - {"O", "F"}
    if bad:
        raise ConfigError(f"expansion plan {plan!r}: steps must be 'O' or 'F'")
    return plan


def build_l2l(scene: Scene):
    """Forward (successor) and omnidirectional lane-to-lane adjacency."""
    index = scene.lane_index()
    n = scene.num_lanes
    fr, fc, orows, ocols = [], [], [], []

    def lookup(lane, other, rel):
        try:
            return index[other]
        except KeyError:
            raise GraphIntegrityError(f"lane {lane.id}: {rel} references unknown lane {other}") from None

    for j, lane in enumerate(scene.lanes):
        for s in lane.successors:
            i = lookup(lane, s, "successors")
            fr.append(j)
            fc.append(i)
        for p in lane.predecessors:
            i = lookup(lane, p, "predecessors")
            # predecessor p -> j is a forward edge too
            fr.append(i)
            fc.append(j)
        for rel in ("left_neighbors", "right_neighbors"):
            for other in getattr(lane, rel):
                i = lookup(lane, other, rel)
                orows += [j, i]
                ocols += [i, j]
    m_f = BoolAdjacency.from_pairs(n, n, fr, fc)
    m_o = BoolAdjacency.from_pairs(n, n, fr + fc + orows, fc + fr + ocols)
    return m_o, m_f


def lane_vertex_arrays(scene: Scene):
    verts = np.concatenate([lane.waypoints for lane in scene.lanes], axis=0)
    ptr = np.concatenate([[0], np.cumsum([len(lane.waypoints) for lane in scene.lanes])])
    return verts, ptr


def agent_lane_distances(scene: Scene):
    """Distance from every agent's t = 0 position to every lane polyline."""
    pts = np.array([a.states[-1, :2] for a in scene.agents], dtype=np.float64).reshape(-1, 2)
    verts, ptr = lane_vertex_arrays(scene)
    dist = kernels.polyline_min_dist(pts, verts, ptr)
    if scene.blocks and len(scene.blocks) > 1:
        a_starts, l_starts = np.array(scene.blocks).T
        a_block = np.searchsorted(a_starts, np.arange(scene.num_agents), side="right")
        l_block = np.searchsorted(l_starts, np.arange(scene.num_lanes), side="right")
        dist[a_block[:, None] != l_block[None, :]] = np.inf
    return dist


def build_a2l(scene: Scene, r=DEFAULT_RADIUS, distances=None) -> BoolAdjacency:
    """Agent -> lane edges for lanes strictly closer than ``r`` metres."""
    if distances is None:
        distances = agent_lane_distances(scene)
    return BoolAdjacency.from_dense(distances < r)


def expand(plan, m_o: BoolAdjacency, m_f: BoolAdjacency):
    """Layered reachability matrices ``[M^(0) = I, ..., M^(K)]`` for a plan."""
    plan = parse_plan(plan)
    if m_o.shape != m_f.shape or m_o.n_rows != m_o.n_cols:
        raise GraphIntegrityError(f"expand needs equal square matrices, got {m_o.shape}, {m_f.shape}")
    out = [BoolAdjacency.identity(m_o.n_rows)]
    for step in plan:
        out.append(out[-1] @ (m_o if step == "O" else m_f))
    return out


def _union(mats):
    acc = mats[0]
    for m in mats[1:]:
        acc = acc | m
    return acc


def expand_l2a(m_a2l, m_o, m_f, plan) -> BoolAdjacency:
    """Lane -> agent edges: union over k of ``M^(k) . M_L2A``."""
    m_l2a = m_a2l.transpose()
    return _union([mk @ m_l2a for mk in expand(plan, m_o, m_f)])


def expand_a2a(m_a2l, m_o, m_f, plan) -> BoolAdjacency:
    """Agent -> agent edges: union over k of ``M_A2L . M^(k) . M_L2A`` minus self loops."""
    m_l2a = m_a2l.transpose()
    return _union([m_a2l @ mk @ m_l2a for mk in expand(plan, m_o, m_f)]).without_diagonal()


@dataclass
class EdgeSets:
    a2l: BoolAdjacency
    l2l_o: BoolAdjacency
    l2l_f: BoolAdjacency
    l2a: BoolAdjacency
    a2a: BoolAdjacency
    plan: str
    radius: float

    def census(self):
        # L2L counts the omnidirectional lane graph, which contains the forward one
        return {"a2l": self.a2l.nnz, "l2l": self.l2l_o.nnz, "l2a": self.l2a.nnz, "a2a": self.a2a.nnz}


def build_edge_sets(scene: Scene, r=DEFAULT_RADIUS, plan=DEFAULT_PLAN, distances=None) -> EdgeSets:
    plan = parse_plan(plan)
    m_o, m_f = build_l2l(scene)
    a2l = build_a2l(scene, r, distances)
    return EdgeSets(
        a2l=a2l,
        l2l_o=m_o,
        l2l_f=m_f,
        l2a=expand_l2a(a2l, m_o, m_f, plan),
        a2a=expand_a2a(a2l, m_o, m_f, plan),
        plan=plan,
        radius=float(r),
    )


def edge_census(scene: Scene, r=DEFAULT_RADIUS, plan=DEFAULT_PLAN):
    return build_edge_sets(scene, r, plan).census()


EDGE_CSV_COLUMNS = ("edge_type", "src_kind", "src_id", "dst_kind", "dst_id")


def edge_rows(scene: Scene, edges: EdgeSets):
    aid = [a.id for a in scene.agents]
    lid = [lane.id for lane in scene.lanes]
    spec = (
        ("A2L", edges.a2l, "agent", aid, "lane", lid),
        ("L2L_O", edges.l2l_o, "lane", lid, "lane", lid),
        ("L2L_F", edges.l2l_f, "lane", lid, "lane", lid),
        ("L2A", edges.l2a, "lane", lid, "agent", aid),
        ("A2A", edges.a2a, "agent", aid, "agent", aid),
    )
    for etype, adj, sk, sids, dk, dids in spec:
        for r, c in zip(*adj.pairs()):
            yield (etype, sk, sids[r], dk, dids[c])


def write_edge_csv(path, scene: Scene, edges: EdgeSets):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EDGE_CSV_COLUMNS)
        for row in edge_rows(scene, edges):
            w.writerow(row)
