"""Batched-copies inference benchmark: latency, allocation peak and graph totals."""
from __future__ import annotations

import csv
import time
import tracemalloc

import numpy as np

from lanegraph.graph import build_graph
from lanegraph.scene import batch_scenes
from lanegraph.svg import line_chart
from lanegraph.training import fmt

BENCH_COLUMNS = (
    "copies",
    "agents",
    "lanes",
    "a2l",
    "l2l",
    "l2a",
    "a2a",
    "mean_ms",
    "min_ms",
    "p95_ms",
    "per_agent_ms",
    "peak_mb",
    "counts_ok",
    "per_agent_ok",
)


def _totals(graph):
    c = graph.census()
    return {"agents": graph.num_agents, "lanes": graph.num_lanes, **c}


def time_forward(model, graph, repeats, warmup):
    """Wall-clock seconds of ``repeats`` timed no-grad forwards after ``warmup`` untimed ones."""
    for _ in range(warmup):
        model.predict(graph)
    out = np.empty(repeats)
    for i in range(repeats):
        t0 = time.perf_counter()
        model.predict(graph)
        out[i] = time.perf_counter() - t0
    return out


def forward_peak_bytes(model, graph):
    """Python-allocator high-water mark of one forward pass (an estimate, see README)."""
    tracemalloc.start()
    try:
        tracemalloc.reset_peak()
        model.predict(graph)
        return tracemalloc.get_traced_memory()[1]
    finally:
        tracemalloc.stop()


def run_bench(scene, model, copies=(1, 2, 4, 8, 16), repeats=20, warmup=3):
    """One row per copies value; counts are compared against k x the single scene."""
    base = _totals(build_graph(scene, model.cfg.radius, model.cfg.plan, model.cfg.use_z))
    rows = []
    for k in copies:
        merged, _ = batch_scenes([scene] * k)
        graph = build_graph(merged, model.cfg.radius, model.cfg.plan, model.cfg.use_z)
        tot = _totals(graph)
        secs = time_forward(model, graph, repeats, warmup)
        ms = secs * 1e3
        row = {
            "copies": k,
            **tot,
            "mean_ms": float(ms.mean()),
            "min_ms": float(ms.min()),
            "p95_ms": float(np.percentile(ms, 95)),
            "per_agent_ms": float(ms.mean() / tot["agents"]),
            "peak_mb": forward_peak_bytes(model, graph) / 2**20,
            "counts_ok": int(all(tot[key] == k * base[key] for key in base)),
        }
        rows.append(row)
    # per-agent latency should not grow with batching; noise allowance is a factor of 2
    first = rows[0]["per_agent_ms"]
    for row in rows:
        row["per_agent_ok"] = int(row["per_agent_ms"] <= 2.0 * first)
    return rows


def write_bench_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCH_COLUMNS)
        for r in rows:
            w.writerow([fmt(r[c]) for c in BENCH_COLUMNS])


def write_bench_svg(path, rows):
    ks = [r["copies"] for r in rows]
    line_chart(
        path,
        ks,
        {"mean ms / forward": [r["mean_ms"] for r in rows]},
        {"ms / agent": [r["per_agent_ms"] for r in rows]},
        title="Inference scaling with batched scene copies",
        xlabel="copies",
        ylabel="latency (ms)",
        y2label="per-agent latency (ms)",
        x_labels=ks,
    )
