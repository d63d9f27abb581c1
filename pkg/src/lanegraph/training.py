"""Best-of-M loss, AdamW with cosine decay, displacement metrics, training loop."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from lanegraph import autodiff as ad
from lanegraph.autodiff import ParamRegistry, Tensor
from lanegraph.errors import ContractError, NumericalError
from lanegraph.graph import batch_graphs
from lanegraph.scene import local_futures

log = logging.getLogger(__name__)

LOSS_CSV_COLUMNS = ("step", "lr", "train_loss", "minADE", "minFDE", "MR")


@dataclass
class TrainConfig:
    lr_init: float = 3e-4
    lr_min: float = 1e-6
    weight_decay: float = 1e-4
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    epochs: int = 10
    batch_size: int = 4
    seed: int = 0
    huber_delta: float = 1.0
    miss_threshold: float = 2.0
    total_steps: int | None = None  # defaults to epochs x batches per epoch
    grad_clip: float | None = None
    warmup_steps: int = 0
    checkpoint_every: int = 0
    horizons: tuple = field(default=(30, 50, 80))

    def __post_init__(self):
        if self.lr_init <= 0 or self.lr_min <= 0 or self.weight_decay < 0:
            raise ContractError("learning rates must be positive and weight decay non-negative")
        if self.warmup_steps < 0:
            raise ContractError("warmup_steps must be non-negative")


# ------------------------------------------------------------------ loss


def best_modes(preds, gts, mask, delta=1.0):
    """Per-agent Huber error of every mode ``[N, M]`` (numpy, no graph)."""
    preds = preds.data if isinstance(preds, Tensor) else np.asarray(preds)
    m = np.asarray(mask, dtype=np.float64)
    diff = preds - np.asarray(gts)[:, None]
    ad_ = np.abs(diff)
    h = np.where(ad_ < delta, 0.5 * diff * diff, delta * (ad_ - 0.5 * delta))
    per = (h * m[:, None, :, None]).sum(axis=(2, 3))
    return per / np.maximum(2.0 * m.sum(axis=1), 1.0)[:, None]


def mtp_loss(preds: Tensor, gts, mask, delta=1.0) -> Tensor:
    """Mean over supervised agents of the smallest per-mode Huber error.

    Per mode the Huber error is averaged over valid steps and both
    coordinates; ties go to the lowest mode index.
    """
    preds = ad.as_tensor(preds)
    gts = np.asarray(gts, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    n, n_modes = preds.shape[:2]
    if gts.shape != (n,) + preds.shape[2:] or mask.shape != gts.shape[:2]:
        raise ContractError(f"mtp_loss: preds {preds.shape}, gts {gts.shape}, mask {mask.shape} misaligned")
    n_valid = mask.sum(axis=1)
    sup = np.flatnonzero(n_valid > 0)
    if len(sup) == 0:
        raise ContractError("mtp_loss: no agent has a valid future step")
    best = np.argmin(best_modes(preds, gts, mask, delta)[sup], axis=1)
    picked = ad.gather_rows(ad.reshape(preds, (n * n_modes,) + preds.shape[2:]), sup * n_modes + best)
    weight = mask[sup].astype(np.float64)[:, :, None] / (2.0 * n_valid[sup])[:, None, None]
    err = ad.huber(picked - gts[sup], delta) * weight
    return ad.mul(ad.sum(err), 1.0 / len(sup))


# --------------------------------------------------------------- metrics


def metrics(preds, gts, mask, threshold=2.0, horizon=None):
    """minADE, minFDE and miss rate averaged over agents with a valid step."""
    preds = preds.data if isinstance(preds, Tensor) else np.asarray(preds, dtype=np.float64)
    gts = np.asarray(gts, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if horizon is not None:
        preds, gts, mask = preds[:, :, :horizon], gts[:, :horizon], mask[:, :horizon]
    keep = mask.any(axis=1)
    if not keep.any():
        return {"minADE": float("nan"), "minFDE": float("nan"), "MR": float("nan")}
    preds, gts, mask = preds[keep], gts[keep], mask[keep]
    dist = np.linalg.norm(preds - gts[:, None], axis=-1)  # [N, M, T]
    w = mask[:, None, :].astype(np.float64)
    ade = (dist * w).sum(axis=2) / w.sum(axis=2)
    last = mask.shape[1] - 1 - np.argmax(mask[:, ::-1], axis=1)
    fde = dist[np.arange(len(last)), :, last]  # [N, M]
    min_fde = fde.min(axis=1)
    return {
        "minADE": float(ade.min(axis=1).mean()),
        "minFDE": float(min_fde.mean()),
        "MR": float((min_fde > threshold).mean()),
    }


# -------------------------------------------------------------- optimizer


def cosine_lr(step, total_steps, lr_init, lr_min, warmup=0):
    """Learning rate for 1-based ``step``: ``lr_init`` at step 1, ``lr_min`` at the last.

    With ``warmup`` > 0 the rate ramps linearly up to ``lr_init`` over the first
    ``warmup`` steps and the cosine runs over the remaining ones.
    """
    if step <= warmup:
        return lr_init * step / warmup
    step, total_steps = step - warmup, total_steps - warmup
    if total_steps <= 1:
        return lr_init
    progress = min(max(step - 1, 0), total_steps - 1) / (total_steps - 1)
    return lr_min + 0.5 * (lr_init - lr_min) * (1.0 + math.cos(math.pi * progress))


def optimizer_step(params: ParamRegistry, grads, t, cfg: TrainConfig, total_steps=None):
    """One AdamW update at 1-based step ``t``; returns the learning rate used.

    ``grads`` maps names to arrays; ``None`` uses each parameter's ``.grad``.
    """
    total = total_steps or cfg.total_steps or t
    lr = cosine_lr(t, total, cfg.lr_init, cfg.lr_min, cfg.warmup_steps)
    b1, b2 = cfg.betas
    for name, p in params:
        g = p.grad if grads is None else grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        slot = params.state.setdefault(name, {"m": np.zeros_like(p.data), "v": np.zeros_like(p.data)})
        slot["m"] = b1 * slot["m"] + (1 - b1) * g
        slot["v"] = b2 * slot["v"] + (1 - b2) * g * g
        m_hat = slot["m"] / (1 - b1**t)
        v_hat = slot["v"] / (1 - b2**t)
        p.data = p.data - lr * (m_hat / (np.sqrt(v_hat) + cfg.eps) + cfg.weight_decay * p.data)
    return lr


def clip_gradients(params: ParamRegistry, max_norm):
    total = math.sqrt(sum(float((p.grad**2).sum()) for _, p in params if p.grad is not None))
    if total > max_norm:
        for _, p in params:
            if p.grad is not None:
                p.grad = p.grad * (max_norm / total)
    return total


# ----------------------------------------------------------------- training


def batch_targets(graph):
    return local_futures(graph.loc.scene)


def evaluate(model, graphs, threshold=2.0, horizons=(30, 50, 80)):
    """Metrics per horizon over a list of scene graphs (agents pooled)."""
    preds, gts, masks = [], [], []
    for g in graphs:
        preds.append(model.predict(g))
        gt, mk = batch_targets(g)
        gts.append(gt)
        masks.append(mk)
    preds, gts, masks = np.concatenate(preds), np.concatenate(gts), np.concatenate(masks)
    return {h: metrics(preds, gts, masks, threshold, h) for h in horizons}


@dataclass
class TrainResult:
    history: list
    epoch_losses: list
    final_step: int


def _epoch_order(seed, epoch, n):
    return np.random.default_rng([seed, epoch]).permutation(n)


def train_loop(graphs, model, cfg: TrainConfig, checkpoint=None, curve_csv=None, resume=None, max_steps=None):
    """Train ``model`` on prebuilt per-scene graphs with shuffled block-diagonal batches.

    Resuming from a checkpoint restores parameters, optimizer slots and the
    step counter, so the run continues exactly where it stopped.
    """
    n = len(graphs)
    per_epoch = math.ceil(n / cfg.batch_size)
    total = cfg.total_steps or cfg.epochs * per_epoch
    step = 0
    if resume is not None:
        from lanegraph.autodiff import load_checkpoint

        extra = load_checkpoint(resume, model.params)
        step = int(extra.get("train.step", 0))
    targets = [batch_targets(g) for g in graphs]
    history, epoch_losses = [], []
    stop = total if max_steps is None else min(total, step + max_steps)
    running = []
    while step < stop:
        epoch, pos = divmod(step, per_epoch)
        order = _epoch_order(cfg.seed, epoch, n)
        idx = order[pos * cfg.batch_size:(pos + 1) * cfg.batch_size]
        graph = batch_graphs([graphs[i] for i in idx])
        gts = np.concatenate([targets[i][0] for i in idx])
        mask = np.concatenate([targets[i][1] for i in idx])

        model.params.zero_grad()
        preds = model(graph)
        loss = mtp_loss(preds, gts, mask, cfg.huber_delta)
        lval = float(loss.data)
        if not np.isfinite(lval):
            bad = [name for name, p in model.params if not np.all(np.isfinite(p.data))]
            raise NumericalError(f"non-finite loss {lval} at step {step + 1}; non-finite params: {bad[:5]}")
        loss.backward()
        if cfg.grad_clip:
            clip_gradients(model.params, cfg.grad_clip)
        step += 1
        lr = optimizer_step(model.params, None, step, cfg, total)
        met = metrics(preds, gts, mask, cfg.miss_threshold)
        history.append({"step": step, "lr": lr, "train_loss": lval, **met})
        running.append(lval)
        if pos == per_epoch - 1:
            epoch_losses.append(float(np.mean(running)))
            log.info("epoch %d step %d loss %.5f lr %.3g", epoch, step, epoch_losses[-1], lr)
            running = []
        if checkpoint and cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
            model.save(checkpoint, {"train.step": np.array(float(step))})
    if checkpoint:
        model.save(checkpoint, {"train.step": np.array(float(step))})
    if curve_csv:
        write_loss_csv(curve_csv, history)
    return TrainResult(history, epoch_losses, step)


def fmt(value):
    """Stable CSV text for ints and floats (floats via shortest round-trip repr)."""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return repr(float(value))


def write_loss_csv(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOSS_CSV_COLUMNS)
        for rec in history:
            w.writerow([fmt(rec[c]) for c in LOSS_CSV_COLUMNS])
