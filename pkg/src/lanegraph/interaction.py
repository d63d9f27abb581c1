"""Gated attention message passing (TiL, L2A, A2A stages) and the trajectory decoder."""
from __future__ import annotations

import numpy as np

from lanegraph import autodiff as ad
from lanegraph.autodiff import ParamRegistry, Tensor
from lanegraph.encoders import init_linear, linear
from lanegraph.errors import ContractError


def init_mp_layer(params: ParamRegistry, name, dim):
    init_linear(params, f"{name}.q", dim, dim)
    init_linear(params, f"{name}.k", 2 * dim, dim)
    init_linear(params, f"{name}.v", 2 * dim, dim)
    init_linear(params, f"{name}.out", dim, dim)
    params.ones(f"{name}.ln.gamma", (dim,))
    params.zeros(f"{name}.ln.beta", (dim,))
    init_linear(params, f"{name}.gate", 2 * dim, dim)


def mp_layer(params, name, targets, sources, edge_emb, src, dst, n_heads=4):
    """One round of attention message passing from ``sources`` into ``targets``.

    ``src``/``dst`` index sources and targets per edge and must be sorted by
    ``dst``; ``edge_emb`` rows align with them. Targets without incoming
    edges are returned untouched.
    """
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    n_edges = len(src)
    if len(dst) != n_edges or edge_emb.shape[0] != n_edges:
        raise ContractError(
            f"{name}: {len(src)} sources, {len(dst)} targets, {edge_emb.shape[0]} edge embeddings"
        )
    if n_edges == 0:
        return targets
    if np.any(np.diff(dst) < 0):
        raise ContractError(f"{name}: edges must be sorted by target index")
    dim = targets.shape[1]
    if dim % n_heads:
        raise ContractError(f"{name}: {n_heads} heads do not divide width {dim}")
    head_dim = dim // n_heads

    active, seg = np.unique(dst, return_inverse=True)
    n_active = len(active)
    x = ad.gather_rows(targets, active)
    q = ad.gather_rows(linear(params, f"{name}.q", x), seg)
    kv_in = ad.concat([ad.gather_rows(sources, src), edge_emb])
    k = linear(params, f"{name}.k", kv_in)
    v = linear(params, f"{name}.v", kv_in)

    scores = ad.sum(ad.reshape(q * k, (n_edges, n_heads, head_dim)), axis=-1)
    alpha = ad.segment_softmax(ad.mul(scores, 1.0 / np.sqrt(head_dim)), seg, n_active)
    weighted = ad.reshape(v, (n_edges, n_heads, head_dim)) * ad.reshape(alpha, (n_edges, n_heads, 1))
    agg = ad.segment_sum(ad.reshape(weighted, (n_edges, dim)), seg, n_active)

    msg = ad.layer_norm(
        linear(params, f"{name}.out", agg), params[f"{name}.ln.gamma"], params[f"{name}.ln.beta"]
    )
    gate = ad.sigmoid(linear(params, f"{name}.gate", ad.concat([x, msg])))
    return ad.scatter_rows(targets, active, x + gate * (msg - x))


def til(params, agent_feats, lane_feats, edges, edge_emb, n_heads=4, n_layers=1):
    """Agents write their motion into the lanes they are aligned with."""
    for i in range(n_layers):
        lane_feats = mp_layer(params, f"til.{i}", lane_feats, agent_feats, edge_emb, edges.src, edges.dst, n_heads)
    return lane_feats


def l2a(params, agent_feats, lane_feats, edges, edge_emb, n_heads=4, n_layers=2):
    """Lanes reachable through the expansion plan feed context back to agents."""
    for i in range(n_layers):
        agent_feats = mp_layer(params, f"l2a.{i}", agent_feats, lane_feats, edge_emb, edges.src, edges.dst, n_heads)
    return agent_feats


def a2a(params, agent_feats, edges, edge_emb, n_heads=4, n_layers=2):
    """Agent interaction over lane-guided agent-agent edges."""
    for i in range(n_layers):
        agent_feats = mp_layer(params, f"a2a.{i}", agent_feats, agent_feats, edge_emb, edges.src, edges.dst, n_heads)
    return agent_feats


def init_decoder(params: ParamRegistry, num_kinds, dim, num_modes, future_steps, hidden):
    for k in range(num_kinds):
        name = f"dec.{k}"
        params.uniform(f"{name}.modes", (num_modes, dim), dim)
        # first layer split into feature and mode parts; equivalent to one layer on the concat
        params.uniform(f"{name}.0.wf", (3 * dim, hidden), 4 * dim)
        params.uniform(f"{name}.0.wm", (dim, hidden), 4 * dim)
        params.uniform(f"{name}.0.b", (hidden,), 4 * dim)
        init_linear(params, f"{name}.1", hidden, hidden)
        init_linear(params, f"{name}.2", hidden, future_steps * 2)


def decode(params, dyn, lane_ctx, inter, kinds, num_kinds, future_steps, out_scale=1.0):
    """Per-kind MLP heads -> ``[Na, M, T_f, 2]`` local-frame positions."""
    kinds = np.asarray(kinds, dtype=np.int64)
    if len(kinds) and (kinds.min() < 0 or kinds.max() >= num_kinds):
        raise ContractError(f"decode: agent kind outside 0..{num_kinds - 1}")
    feats = ad.concat([dyn, lane_ctx, inter])
    parts, order = [], []
    for k in range(num_kinds):
        idx = np.flatnonzero(kinds == k)
        if len(idx) == 0:
            continue
        name = f"dec.{k}"
        modes = params[f"{name}.modes"]
        n_modes = modes.shape[0]
        f = ad.matmul(ad.gather_rows(feats, idx), params[f"{name}.0.wf"])
        m = ad.matmul(modes, params[f"{name}.0.wm"]) + params[f"{name}.0.b"]
        hidden = f.shape[1]
        h = ad.relu(ad.reshape(f, (len(idx), 1, hidden)) + ad.reshape(m, (1, n_modes, hidden)))
        h = ad.relu(linear(params, f"{name}.1", h))
        out = linear(params, f"{name}.2", h)
        parts.append(ad.reshape(out, (len(idx), n_modes, future_steps, 2)))
        order.append(idx)
    if not parts:
        raise ContractError("decode: no agents")
    order = np.concatenate(order)
    joined = parts[0] if len(parts) == 1 else ad.concat(parts, axis=0)
    inverse = np.empty_like(order)
    inverse[order] = np.arange(len(order))
    out = joined if np.array_equal(order, np.arange(len(order))) else ad.gather_rows(joined, inverse)
    return ad.mul(out, out_scale) if out_scale != 1.0 else out
