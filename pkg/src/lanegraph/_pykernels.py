"""Pure numpy implementations of the hot kernels.

Used when the compiled extension is unavailable, or when forced with
``LANEGRAPH_PURE_PYTHON=1``. Signatures mirror ``_ckernels.pyx`` exactly.
"""
import numpy as np


def bool_spgemm(a_ptr, a_idx, b_ptr, b_idx, n_cols):
    """Boolean CSR product, returning (indptr, indices) with sorted rows."""
    a_ptr = np.asarray(a_ptr, dtype=np.int64)
    a_idx = np.asarray(a_idx, dtype=np.int64)
    b_ptr = np.asarray(b_ptr, dtype=np.int64)
    b_idx = np.asarray(b_idx, dtype=np.int64)
    n_rows = len(a_ptr) - 1
    if len(a_idx) == 0 or len(b_idx) == 0:
        return np.zeros(n_rows + 1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    a_rows = np.repeat(np.arange(n_rows, dtype=np.int64), np.diff(a_ptr))
    b_deg = np.diff(b_ptr)
    counts = b_deg[a_idx]
    total = int(counts.sum())
    if total == 0:
        return np.zeros(n_rows + 1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    rows = np.repeat(a_rows, counts)
    # position of each expanded entry within its B row
    starts = np.repeat(b_ptr[a_idx], counts)
    within = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(counts) - counts, counts)
    cols = b_idx[starts + within]
    keys = np.unique(rows * n_cols + cols)
    out_rows = keys // n_cols
    out_cols = keys % n_cols
    ptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.add.at(ptr, out_rows + 1, 1)
    return np.cumsum(ptr), out_cols.astype(np.int64)


def segment_sum(values, seg_ids, n_seg):
    values = np.ascontiguousarray(values, dtype=np.float64)
    out = np.zeros((n_seg, values.shape[1]))
    if len(seg_ids) == 0:
        return out
    seg_ids = np.asarray(seg_ids, dtype=np.int64)
    starts = np.flatnonzero(np.r_[True, seg_ids[1:] != seg_ids[:-1]])
    out[seg_ids[starts]] = np.add.reduceat(values, starts, axis=0)
    return out


def segment_max(values, seg_ids, n_seg):
    """Per-segment column max; empty segments get 0."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    out = np.zeros((n_seg, values.shape[1]))
    if len(seg_ids) == 0:
        return out
    seg_ids = np.asarray(seg_ids, dtype=np.int64)
    starts = np.flatnonzero(np.r_[True, seg_ids[1:] != seg_ids[:-1]])
    out[seg_ids[starts]] = np.maximum.reduceat(values, starts, axis=0)
    return out


def scatter_add_rows(values, idx, n_rows):
    values = np.ascontiguousarray(values, dtype=np.float64)
    out = np.zeros((n_rows, values.shape[1]))
    np.add.at(out, np.asarray(idx, dtype=np.int64), values)
    return out


def polyline_min_dist(points, verts, ptr):
    """Distance from every point to every polyline, as a [P, L] array.

    ``verts`` holds all polyline vertices back to back; polyline ``j`` owns
    ``verts[ptr[j]:ptr[j + 1]]`` and has at least two vertices.
    """
    points = np.asarray(points, dtype=np.float64)
    verts = np.asarray(verts, dtype=np.float64)
    ptr = np.asarray(ptr, dtype=np.int64)
    n_lines = len(ptr) - 1
    if len(points) == 0 or n_lines == 0:
        return np.zeros((len(points), n_lines))
    seg_start = np.ones(len(verts), dtype=bool)
    seg_start[ptr[1:] - 1] = False
    first = np.flatnonzero(seg_start)
    a = verts[first]
    b = verts[first + 1]
    ab = b - a
    denom = (ab * ab).sum(axis=1)
    ap = points[:, None, :] - a[None, :, :]
    t = np.clip((ap * ab[None]).sum(axis=2) / denom[None], 0.0, 1.0)
    cx = a[None, :, 0] + t * ab[None, :, 0]
    cy = a[None, :, 1] + t * ab[None, :, 1]
    dx = points[:, 0:1] - cx
    dy = points[:, 1:2] - cy
    d = np.sqrt(dx * dx + dy * dy)
    seg_owner_start = ptr[:-1] - np.arange(n_lines)
    return np.minimum.reduceat(d, seg_owner_start, axis=1)
