"""End-to-end scene graph network: encoders, three-stage scene encoding, decoder."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from lanegraph.autodiff import ParamRegistry, Tensor, load_checkpoint, no_grad, save_checkpoint
from lanegraph.encoders import EncoderConfig, encode_agents, encode_edges, encode_lanes, init_encoders
from lanegraph.errors import ConfigError
from lanegraph.graph import SceneGraph, build_graph
from lanegraph.interaction import a2a, decode, init_decoder, init_mp_layer, l2a, til
from lanegraph.scene import FUTURE_STEPS, Scene
from lanegraph.topology import DEFAULT_PLAN, DEFAULT_RADIUS, parse_plan


@dataclass
class ModelConfig:
    hidden_dim: int = 64
    type_embed_dim: int = 16
    num_heads: int = 4
    til_layers: int = 1
    l2a_layers: int = 2
    a2a_layers: int = 2
    num_modes: int = 6
    future_steps: int = FUTURE_STEPS
    decoder_hidden: int = 128
    pos_scale: float = 0.1
    out_scale: float = 10.0
    use_z: bool = False
    radius: float = DEFAULT_RADIUS
    plan: str = DEFAULT_PLAN
    seed: int = 0

    def __post_init__(self):
        self.plan = parse_plan(self.plan)
        if self.hidden_dim % self.num_heads:
            raise ConfigError(f"{self.num_heads} heads do not divide hidden width {self.hidden_dim}")

    def encoder_config(self):
        return EncoderConfig(
            hidden_dim=self.hidden_dim,
            type_embed_dim=self.type_embed_dim,
            use_z=self.use_z,
            pos_scale=self.pos_scale,
        )

    def to_records(self):
        """Numeric checkpoint records; the plan is stored as 0 (O) / 1 (F) codes."""
        out = {}
        for k, v in asdict(self).items():
            if k == "plan":
                out["config.plan"] = np.array([0.0 if s == "O" else 1.0 for s in v])
            else:
                out[f"config.{k}"] = np.array(float(v))
        return out

    @classmethod
    def from_records(cls, records):
        kwargs = {}
        for f in fields(cls):
            key = f"config.{f.name}"
            if key not in records:
                continue
            arr = records[key]
            if f.name == "plan":
                kwargs["plan"] = "".join("O" if c < 0.5 else "F" for c in np.atleast_1d(arr))
            elif f.type in ("int", int):
                kwargs[f.name] = int(arr)
            elif f.type in ("bool", bool):
                kwargs[f.name] = bool(arr)
            else:
                kwargs[f.name] = float(arr)
        return cls(**kwargs)


class SceneGraphModel:
    def __init__(self, cfg: ModelConfig | None = None):
        self.cfg = cfg or ModelConfig()
        self.enc_cfg = self.cfg.encoder_config()
        self.params = ParamRegistry(seed=self.cfg.seed)
        c = self.cfg
        init_encoders(self.params, self.enc_cfg)
        for stage, n in (("til", c.til_layers), ("l2a", c.l2a_layers), ("a2a", c.a2a_layers)):
            for i in range(n):
                init_mp_layer(self.params, f"{stage}.{i}", c.hidden_dim)
        init_decoder(
            self.params, self.enc_cfg.num_agent_kinds, c.hidden_dim, c.num_modes, c.future_steps, c.decoder_hidden
        )

    def build_graph(self, scene: Scene) -> SceneGraph:
        return build_graph(scene, self.cfg.radius, self.cfg.plan, self.cfg.use_z)

    def encode(self, graph: SceneGraph):
        """Return the (dynamic, lane-context, interaction) agent feature triple."""
        p, c, e = self.params, self.cfg, self.enc_cfg
        loc = graph.loc
        agents = encode_agents(p, e, loc.agent_disp, loc.agent_size, loc.agent_kind)
        lanes = encode_lanes(p, e, loc.lane_points, loc.lane_kind, loc.lane_signal)
        lanes = til(p, agents, lanes, graph.til, encode_edges(p, e, graph.til.geom, "A2L"), c.num_heads, c.til_layers)
        ctx = l2a(p, agents, lanes, graph.l2a, encode_edges(p, e, graph.l2a.geom, "L2A"), c.num_heads, c.l2a_layers)
        inter = a2a(p, ctx, graph.a2a, encode_edges(p, e, graph.a2a.geom, "A2A"), c.num_heads, c.a2a_layers)
        return agents, ctx, inter

    def forward(self, graph: SceneGraph) -> Tensor:
        dyn, ctx, inter = self.encode(graph)
        return decode(
            self.params,
            dyn,
            ctx,
            inter,
            graph.loc.agent_kind,
            self.enc_cfg.num_agent_kinds,
            self.cfg.future_steps,
            self.cfg.out_scale,
        )

    __call__ = forward

    def predict(self, scene_or_graph) -> np.ndarray:
        graph = scene_or_graph if isinstance(scene_or_graph, SceneGraph) else self.build_graph(scene_or_graph)
        with no_grad():
            return self.forward(graph).data

    def save(self, path, extra=None):
        records = self.cfg.to_records()
        records.update(extra or {})
        save_checkpoint(path, self.params, records)

    @classmethod
    def load(cls, path):
        from lanegraph.autodiff import read_checkpoint

        cfg = ModelConfig.from_records(read_checkpoint(path))
        model = cls(cfg)
        extra = load_checkpoint(path, model.params)
        model.extra = {k: v for k, v in extra.items() if not k.startswith("config.")}
        return model
