"""Agent, lane and edge encoders producing initial node and edge embeddings."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lanegraph import autodiff as ad
from lanegraph.autodiff import ParamRegistry, Tensor
from lanegraph.errors import ConfigError, ShapeError
from lanegraph.relgeom import EDGE_TYPES
from lanegraph.scene import AGENT_KINDS, LANE_KINDS, SIGNAL_STATES


@dataclass
class EncoderConfig:
    hidden_dim: int = 64
    type_embed_dim: int = 16
    num_agent_kinds: int = len(AGENT_KINDS)
    num_edge_types: int = len(EDGE_TYPES)
    gru_layers: int = 1
    use_z: bool = False
    pos_scale: float = 0.1  # metres -> edge-MLP input units

    def __post_init__(self):
        if min(self.hidden_dim, self.type_embed_dim, self.num_agent_kinds, self.num_edge_types) < 1:
            raise ConfigError("encoder dimensions must be >= 1")
        if self.gru_layers != 1:
            raise ConfigError("only single-layer GRU encoders are supported")

    @property
    def agent_channels(self):
        return 7 if self.use_z else 6


# ------------------------------------------------------------------ layers


def init_linear(params: ParamRegistry, name, fan_in, fan_out):
    params.uniform(f"{name}.w", (fan_in, fan_out), fan_in)
    params.uniform(f"{name}.b", (fan_out,), fan_in)


def linear(params, name, x):
    return ad.matmul(x, params[f"{name}.w"]) + params[f"{name}.b"]


def init_mlp(params, name, sizes):
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        init_linear(params, f"{name}.{i}", a, b)


def mlp(params, name, x, n_layers):
    """Linear layers with ReLU between them (none after the last)."""
    for i in range(n_layers):
        x = linear(params, f"{name}.{i}", x)
        if i < n_layers - 1:
            x = ad.relu(x)
    return x


def init_gru(params, name, n_in, n_hidden):
    for gate in "zrh":
        params.uniform(f"{name}.W{gate}", (n_in, n_hidden), n_hidden)
        params.uniform(f"{name}.U{gate}", (n_hidden, n_hidden), n_hidden)
        params.uniform(f"{name}.b{gate}", (n_hidden,), n_hidden)


def gru_step(params, name, x, h):
    """One GRU update; ``x`` may be a constant array or a Tensor."""
    p = lambda k: params[f"{name}.{k}"]  # noqa: E731
    if h.shape[-1] != p("Uz").shape[0] or x.shape[-1] != p("Wz").shape[0]:
        raise ShapeError(
            f"gru_step: input {x.shape} / hidden {h.shape} do not match "
            f"weights {p('Wz').shape} / {p('Uz').shape}"
        )
    z = ad.sigmoid(ad.matmul(x, p("Wz")) + ad.matmul(h, p("Uz")) + p("bz"))
    r = ad.sigmoid(ad.matmul(x, p("Wr")) + ad.matmul(h, p("Ur")) + p("br"))
    cand = ad.tanh(ad.matmul(x, p("Wh")) + ad.matmul(r * h, p("Uh")) + p("bh"))
    return h + z * (cand - h)


def gru_encode(params, name, seq, hidden_dim):
    """Run the GRU over ``seq [N, T, C]`` from a zero state; returns the last state."""
    seq = np.asarray(seq, dtype=np.float64)
    h = Tensor(np.zeros((seq.shape[0], hidden_dim)))
    for t in range(seq.shape[1]):
        h = gru_step(params, name, seq[:, t, :], h)
    return h


def one_hot(idx, n):
    out = np.zeros((len(idx), n))
    out[np.arange(len(idx)), np.asarray(idx, dtype=np.int64)] = 1.0
    return out


# ---------------------------------------------------------------- encoders


def init_encoders(params: ParamRegistry, cfg: EncoderConfig):
    d, e = cfg.hidden_dim, cfg.type_embed_dim
    init_gru(params, "agent.gru", cfg.agent_channels, d)
    init_mlp(params, "agent.attr", [3 + cfg.num_agent_kinds, e, e])
    init_mlp(params, "agent.fuse", [d + e, d, d])
    init_gru(params, "lane.gru", 2, d)
    init_mlp(params, "lane.attr", [len(LANE_KINDS) + len(SIGNAL_STATES), e, e])
    init_mlp(params, "lane.fuse", [d + e, d, d])
    params.uniform("edge.type_embed", (cfg.num_edge_types, e), e)
    init_mlp(params, "edge.mlp", [4 + e, d, d])


def encode_agents(params, cfg: EncoderConfig, disp, size, kind):
    """Dynamics embeddings ``[Na, D]`` from localized displacement histories."""
    motion = gru_encode(params, "agent.gru", disp, cfg.hidden_dim)
    attrs = np.concatenate([np.asarray(size, dtype=np.float64), one_hot(kind, cfg.num_agent_kinds)], axis=1)
    attr_emb = mlp(params, "agent.attr", attrs, 2)
    return mlp(params, "agent.fuse", ad.concat([motion, attr_emb]), 2)


def encode_lanes(params, cfg: EncoderConfig, points, kind, signal):
    """Lane embeddings ``[Nl, D]`` from localized resampled waypoints."""
    deltas = np.diff(np.asarray(points, dtype=np.float64), axis=1)
    shape = gru_encode(params, "lane.gru", deltas, cfg.hidden_dim)
    attrs = np.concatenate([one_hot(kind, len(LANE_KINDS)), one_hot(signal, len(SIGNAL_STATES))], axis=1)
    attr_emb = mlp(params, "lane.attr", attrs, 2)
    return mlp(params, "lane.fuse", ad.concat([shape, attr_emb]), 2)


def encode_edges(params, cfg: EncoderConfig, geom, etype):
    """Edge embeddings ``[E, D]`` from ``[E, 4]`` descriptors of one edge type."""
    geom = np.asarray(geom, dtype=np.float64).reshape(-1, 4)
    if isinstance(etype, str):
        etype = EDGE_TYPES.index(etype)
    ids = np.full(len(geom), etype, dtype=np.int64) if np.ndim(etype) == 0 else np.asarray(etype)
    scaled = geom.copy()
    scaled[:, :2] *= cfg.pos_scale
    type_emb = ad.gather_rows(params["edge.type_embed"], ids)
    return mlp(params, "edge.mlp", ad.concat([Tensor(scaled), type_emb]), 2)
