"""Command-line entry point: ``lanegraph <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np

from lanegraph.errors import (
    CheckpointVersionError,
    ConfigError,
    ContractError,
    GraphIntegrityError,
    InvalidPolylineError,
    NumericalError,
    SceneParseError,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("lanegraph")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for data errors here
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _plan(text):
    from lanegraph.topology import parse_plan

    try:
        return parse_plan(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _plans(text):
    return [_plan(p) for p in text.split(",")]


def _slug(text):
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text) or "scene"


def _out_dir(path):
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _load_model(args):
    from lanegraph.model import ModelConfig, SceneGraphModel

    if getattr(args, "checkpoint", None):
        if not Path(args.checkpoint).is_file():
            raise FileNotFoundError(f"checkpoint not found: {args.checkpoint}")
        return SceneGraphModel.load(args.checkpoint)
    return SceneGraphModel(ModelConfig(seed=args.seed))


# ----------------------------------------------------------------- commands


def cmd_build_graph(args):
    from lanegraph.scene import read_scenes
    from lanegraph.topology import build_edge_sets, write_edge_csv

    scenes = read_scenes(args.scenes)
    out = _out_dir(args.out)
    census = []
    for i, sc in enumerate(scenes):
        edges = build_edge_sets(sc, args.radius, args.plan)
        name = "edges.csv" if len(scenes) == 1 else f"edges_{i:04d}_{_slug(sc.scene_id)}.csv"
        write_edge_csv(out / name, sc, edges)
        census.append({"scene_id": sc.scene_id, "radius": args.radius, "plan": args.plan, **edges.census()})
    (out / "census.json").write_text(json.dumps(census, indent=2) + "\n")
    print(json.dumps(census if len(census) > 1 else census[0]))
    return EXIT_OK


SWEEP_COLUMNS = ("radius", "plan", "scenes", "a2l", "l2l", "l2a", "a2a", "minFDE")


def cmd_sweep(args):
    from lanegraph.scene import read_scenes
    from lanegraph.svg import line_chart
    from lanegraph.topology import build_edge_sets
    from lanegraph.training import evaluate, fmt

    scenes = read_scenes(args.scenes)
    model = _load_model(args) if args.checkpoint else None
    rows, per_scene = [], {}
    for plan in args.plans:
        for r in args.radii:
            sets = [build_edge_sets(sc, r, plan) for sc in scenes]
            per_scene[(r, plan)] = sets
            row = {"radius": r, "plan": plan, "scenes": len(scenes)}
            for key in ("a2l", "l2l", "l2a", "a2a"):
                row[key] = float(np.mean([s.census()[key] for s in sets]))
            row["minFDE"] = float("nan")
            if model is not None:
                model.cfg.radius, model.cfg.plan = r, plan
                ev = evaluate(model, [model.build_graph(sc) for sc in scenes], horizons=(model.cfg.future_steps,))
                row["minFDE"] = ev[model.cfg.future_steps]["minFDE"]
            rows.append(row)

    report = {"radius_monotone": True, "l2l_constant": True, "plan_containment": True, "violations": []}
    for plan in args.plans:
        radii = sorted(args.radii)
        for lo, hi in zip(radii, radii[1:]):
            for i, (a, b) in enumerate(zip(per_scene[(lo, plan)], per_scene[(hi, plan)])):
                for key in ("a2l", "l2a", "a2a"):
                    if not getattr(a, key).issubset(getattr(b, key)):
                        report["radius_monotone"] = False
                        report["violations"].append(f"{key} not monotone: scene {i}, plan {plan}, r {lo}->{hi}")
                if a.l2l_o != b.l2l_o:
                    report["l2l_constant"] = False
                    report["violations"].append(f"l2l changed: scene {i}, r {lo}->{hi}")
    if "OFF" in args.plans and "OOO" in args.plans:
        for r in args.radii:
            for i, (a, b) in enumerate(zip(per_scene[(r, "OFF")], per_scene[(r, "OOO")])):
                if not a.a2a.issubset(b.a2a):
                    report["plan_containment"] = False
                    report["violations"].append(f"a2a(OFF) not within a2a(OOO): scene {i}, r {r}")

    out = _out_dir(args.out)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for row in rows:
            w.writerow([fmt(row[c]) if c != "plan" else row[c] for c in SWEEP_COLUMNS])
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")

    metric = "minFDE" if model is not None else None
    for plan in args.plans:
        sub = [row for row in rows if row["plan"] == plan]
        line_chart(
            out / f"sweep_radius_{plan or 'none'}.svg",
            [row["radius"] for row in sub],
            {k: [row[k] for row in sub] for k in ("a2l", "l2l", "l2a", "a2a")},
            {metric: [row[metric] for row in sub]} if metric else None,
            title=f"Edges per scene against A2L radius (plan {plan or '-'})",
            xlabel="radius r (m)",
            ylabel="mean edges per scene",
            y2label="minFDE (m)",
        )
    for r in args.radii:
        sub = [row for row in rows if row["radius"] == r]
        line_chart(
            out / f"sweep_plan_r{fmt(r)}.svg",
            list(range(len(sub))),
            {k: [row[k] for row in sub] for k in ("l2a", "a2a")},
            {metric: [row[metric] for row in sub]} if metric else None,
            title=f"Edges per scene against topology plan (r = {fmt(r)} m)",
            xlabel="plan",
            ylabel="mean edges per scene",
            y2label="minFDE (m)",
            x_labels=[row["plan"] or "-" for row in sub],
        )
    print(json.dumps(report))
    return EXIT_OK


def cmd_gen_data(args):
    from lanegraph.scene import write_scenes
    from lanegraph.synth import SynthConfig, gen_dataset

    cfg = SynthConfig(network=args.network, lanes_per_approach=args.lanes, agent_count=tuple(args.agents))
    scenes = gen_dataset(cfg, args.count, args.seed)
    write_scenes(args.out, scenes)
    print(json.dumps({"scenes": len(scenes), "agents": sum(s.num_agents for s in scenes), "out": str(args.out)}))
    return EXIT_OK


def cmd_train(args):
    from lanegraph.model import ModelConfig, SceneGraphModel
    from lanegraph.scene import read_scenes
    from lanegraph.training import TrainConfig, evaluate, train_loop

    scenes = read_scenes(args.data)
    if args.resume:
        model = SceneGraphModel.load(args.resume)
    else:
        model = SceneGraphModel(ModelConfig(radius=args.radius, plan=args.plan, seed=args.seed))
    graphs = [model.build_graph(sc) for sc in scenes]
    cfg = TrainConfig(
        lr_init=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        total_steps=args.steps,
        grad_clip=args.grad_clip,
        warmup_steps=args.warmup,
        checkpoint_every=args.checkpoint_every,
    )
    res = train_loop(graphs, model, cfg, checkpoint=args.out, curve_csv=args.curve, resume=args.resume)
    ev = evaluate(model, graphs)
    summary = {"steps": res.final_step, "final_loss": res.history[-1]["train_loss"] if res.history else None}
    summary["train_metrics"] = {str(h): m for h, m in ev.items()}
    print(json.dumps(summary))
    return EXIT_OK


def cmd_predict(args):
    from lanegraph.scene import read_scenes, to_global

    model = _load_model(args)
    scenes = read_scenes(args.scenes)
    with open(args.out, "w") as fh:
        for sc in scenes:
            preds = model.predict(sc)
            for a, modes in zip(sc.agents, preds):
                if args.frame == "global":
                    modes = to_global(modes, a.states[-1][[0, 1, 5]])
                rec = {"scene_id": sc.scene_id, "agent_id": int(a.id), "modes": modes.tolist(), "frame": args.frame}
                fh.write(json.dumps(rec) + "\n")
    print(json.dumps({"scenes": len(scenes), "records": sum(s.num_agents for s in scenes), "out": str(args.out)}))
    return EXIT_OK


def cmd_bench(args):
    from lanegraph.bench import run_bench, write_bench_csv, write_bench_svg
    from lanegraph.scene import read_scenes

    model = _load_model(args)
    scene = read_scenes(args.scene)[0]
    rows = run_bench(scene, model, args.copies, args.repeats, args.warmup)
    out = _out_dir(args.out)
    write_bench_csv(out / "bench.csv", rows)
    write_bench_svg(out / "bench.svg", rows)
    for r in rows:
        flag = "" if r["per_agent_ok"] else "  [per-agent latency above 2x the k=1 value]"
        print(
            f"k={r['copies']:>3} agents={r['agents']:>5} lanes={r['lanes']:>6} "
            f"mean={r['mean_ms']:.2f}ms p95={r['p95_ms']:.2f}ms per-agent={r['per_agent_ms']:.3f}ms "
            f"peak={r['peak_mb']:.1f}MB counts={'ok' if r['counts_ok'] else 'MISMATCH'}{flag}"
        )
    return EXIT_OK if all(r["counts_ok"] for r in rows) else EXIT_NUMERICAL


def cmd_eval(args):
    from lanegraph.scene import read_scenes
    from lanegraph.training import evaluate

    model = _load_model(args)
    graphs = [model.build_graph(sc) for sc in read_scenes(args.data)]
    ev = evaluate(model, graphs, args.threshold, tuple(args.horizons))
    out = {str(h): m for h, m in ev.items()}
    out["mean"] = {k: float(np.mean([m[k] for m in ev.values()])) for k in ("minADE", "minFDE", "MR")}
    text = json.dumps(out, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


# ------------------------------------------------------------------- parser


def build_parser():
    from lanegraph.topology import DEFAULT_PLAN, DEFAULT_RADIUS

    p = _Parser(prog="lanegraph", description="Topology-guided sparse scene graphs for trajectory prediction.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("build-graph", help="export edge sets and counts for scenes")
    s.add_argument("scenes")
    s.add_argument("--radius", type=float, default=DEFAULT_RADIUS)
    s.add_argument("--plan", type=_plan, default=DEFAULT_PLAN)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_build_graph)

    s = sub.add_parser("sweep", help="edge counts (and optionally minFDE) across radii and plans")
    s.add_argument("scenes")
    s.add_argument("--radii", type=_floats, default=[5.0, 10.0, 30.0, 50.0])
    s.add_argument("--plans", type=_plans, default=["F", "O", "OF", "OFF", "OOO"])
    s.add_argument("--checkpoint")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("gen-data", help="write synthetic scenes with futures")
    s.add_argument("--network", default="four_way", choices=["straight", "t_junction", "four_way"])
    s.add_argument("--lanes", type=int, default=2)
    s.add_argument("--agents", type=_ints, default=[3, 6], help="min,max agents per scene")
    s.add_argument("--count", type=int, default=8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("train", help="train on scenes with futures")
    s.add_argument("data")
    s.add_argument("--epochs", type=int, default=10)
    s.add_argument("--steps", type=int, help="total optimizer steps (overrides epochs)")
    s.add_argument("--batch-size", type=int, default=4)
    s.add_argument("--lr", type=float, default=3e-4)
    s.add_argument("--grad-clip", type=float)
    s.add_argument("--warmup", type=int, default=0, help="linear warmup steps before the cosine decay")
    s.add_argument("--radius", type=float, default=DEFAULT_RADIUS)
    s.add_argument("--plan", type=_plan, default=DEFAULT_PLAN)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--resume")
    s.add_argument("--checkpoint-every", type=int, default=0)
    s.add_argument("--curve", help="loss-curve CSV path")
    s.add_argument("--out", required=True, help="checkpoint path")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="write per-agent multimodal predictions as JSON-lines")
    s.add_argument("scenes")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--frame", choices=["local", "global"], default="local")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict, seed=0)

    s = sub.add_parser("bench", help="latency and memory over batched scene copies")
    s.add_argument("scene")
    s.add_argument("--checkpoint")
    s.add_argument("--copies", type=_ints, default=[1, 2, 4, 8, 16])
    s.add_argument("--repeats", type=int, default=20)
    s.add_argument("--warmup", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("eval", help="minADE / minFDE / MR per horizon")
    s.add_argument("data")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--threshold", type=float, default=2.0)
    s.add_argument("--horizons", type=_ints, default=[30, 50, 80])
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval, seed=0)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (
        SceneParseError,
        GraphIntegrityError,
        InvalidPolylineError,
        ContractError,
        CheckpointVersionError,
        OSError,
    ) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
