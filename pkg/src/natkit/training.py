"""Optimization: Adam, the warmup schedule, the two-pass training step.

The training step is pure given (params, batch, step, seed): per-step RNG is
derived from the pair, batches touch sentences one at a time, and gradient
accumulation is plain summation, so reruns are bit-identical single threaded.

Glancing runs as two passes. The first pass decodes in eval mode without
gradients; its prediction picks how many target positions to reveal. The
second pass trains with the revealed embeddings substituted into the decoder
input. Alignment-mode models glance in alignment space and keep the full
marginal loss; length-mode models exclude revealed positions from the
position-wise loss.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from natkit.corpus import BOS_ID, EOS_ID, ParallelCorpus, TokenSeq
from natkit.ctc import log_softmax, min_alignment_len
from natkit.glancing import GlanceSchedule, glance_inputs_ctc, hamming, sample_glance
from natkit.model import (
    LayerStates,
    ModelConfig,
    Params,
    average_params,
    backward,
    forward,
    init_params,
    length_class_clamped,
    loss_ctc,
    loss_deep_supervision,
    loss_length,
    loss_nat,
    zero_grads,
)


class DivergedError(RuntimeError):
    """Training loss stopped being finite."""

    def __init__(self, step: int, value: float):
        super().__init__(f"training diverged at step {step} (loss = {value!r})")
        self.step = step
        self.value = value


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 400
    batch_size: int = 16
    lr: float = 5e-3
    warmup: int = 100
    beta1: float = 0.9
    beta2: float = 0.98
    adam_eps: float = 1e-8
    length_loss_weight: float = 0.1
    glat_start: float | None = None   # enables glancing when set
    glat_slope: float = 0.2
    eval_every: int = 50
    keep_best: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.steps < 1 or self.batch_size < 1 or self.warmup < 1:
            raise ValueError("steps, batch_size and warmup must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.adam_eps <= 0:
            raise ValueError("Adam epsilon must be positive")
        if self.keep_best < 1:
            raise ValueError("keep_best must be >= 1")


@dataclass
class AdamState:
    m: Params
    v: Params
    t: int = 0

    @classmethod
    def zeros(cls, params: Params) -> "AdamState":
        return cls(m=zero_grads(params), v=zero_grads(params), t=0)


def lr_at(step: int, base: float, warmup: int) -> float:
    """Inverse-sqrt decay with linear warmup; peak = base at step = warmup."""
    if step < 1:
        raise ValueError("schedule steps are 1-based")
    return base * min(step / warmup, math.sqrt(warmup / step))


def adam_update(
    params: Params,
    grads: Params,
    state: AdamState,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
) -> tuple[Params, AdamState]:
    t = state.t + 1
    new_params: Params = {}
    new_m: Params = {}
    new_v: Params = {}
    for k, p in params.items():
        g = grads[k]
        m = beta1 * state.m[k] + (1 - beta1) * g
        v = beta2 * state.v[k] + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        new_params[k] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[k] = m
        new_v[k] = v
    return new_params, AdamState(m=new_m, v=new_v, t=t)


# ---------------------------------------------------------------------------
# Per-sentence losses
# ---------------------------------------------------------------------------

def _sentence_pass(
    params: Params,
    config: ModelConfig,
    src: TokenSeq,
    tgt: TokenSeq,
    hyper: TrainConfig,
    lam: float | None,
    rng: np.random.Generator,
    train: bool,
):
    """Loss and parameter gradients for one pair; None when skipped."""
    J, I = len(src), len(tgt)
    components: dict[str, float] = {}

    if config.mode == "at":
        prev = (BOS_ID,) + tgt.ids
        labels = np.asarray(tgt.ids + (EOS_ID,), dtype=np.int64)
        states = forward(params, config, src.ids, len(prev), prev_ids=prev,
                         train=train, rng=rng)
        if config.deep_supervision:
            val, dlogits = loss_deep_supervision(states, labels, base="nat")
        else:
            val, dl = loss_nat(states, labels)
            dlogits = _only_last(states, dl)
        components["token"] = val
        grads = backward(params, states, dlogits) if train else None
        return val, grads, components

    if config.mode == "ctc":
        T = J * int(config.upsample)
        if min_alignment_len(tgt.ids) > T or T > config.max_len:
            return None
        glance = None
        if lam is not None and lam > 0.0:
            first = forward(params, config, src.ids, T, train=False)
            # poisoned logits cannot be aligned; let the training pass go
            # through unglanced so its non-finite loss reports the divergence
            if np.all(np.isfinite(first.logits[-1])):
                table = log_softmax(first.logits[-1])
                glance, _ = glance_inputs_ctc(tgt.ids, table, lam, rng)
        states = forward(params, config, src.ids, T, glance=glance, train=train, rng=rng)
        if config.deep_supervision:
            val, dlogits = loss_deep_supervision(states, tgt.ids, base="ctc")
        else:
            val, dl = loss_ctc(states, tgt.ids)
            dlogits = _only_last(states, dl)
        components["token"] = val
        grads = backward(params, states, dlogits) if train else None
        return val, grads, components

    # length mode: parallel decoding across the true target length
    if I > config.max_len or I < 1:
        return None
    glance = None
    if lam is not None and lam > 0.0:
        first = forward(params, config, src.ids, I, train=False)
        pred = tuple(int(v) for v in np.argmax(first.logits[-1], axis=1))
        d = hamming(tgt.ids, pred)
        s = min(int(math.floor(lam * d)), I)
        glance = sample_glance(tgt.ids, s, rng)
    states = forward(params, config, src.ids, I, glance=glance, train=train, rng=rng)
    if config.deep_supervision:
        token_val, dlogits = loss_deep_supervision(states, tgt.ids, base="nat", mask=glance)
    else:
        token_val, dl = loss_nat(states, tgt.ids, mask=glance)
        dlogits = _only_last(states, dl)
    len_val, dlen = loss_length(states, config, J, I)
    components["token"] = token_val
    components["length"] = len_val
    components["length_clamped"] = 1.0 if length_class_clamped(config, J, I) else 0.0
    val = token_val + hyper.length_loss_weight * len_val
    grads = None
    if train:
        grads = backward(params, states, dlogits, dlength=hyper.length_loss_weight * dlen)
    return val, grads, components


def _only_last(states: LayerStates, dl: np.ndarray) -> list[np.ndarray | None]:
    out: list[np.ndarray | None] = [None] * len(states.logits)
    out[-1] = dl
    return out


# ---------------------------------------------------------------------------
# Steps and loops
# ---------------------------------------------------------------------------

def train_step(
    params: Params,
    config: ModelConfig,
    batch: Sequence[tuple[TokenSeq, TokenSeq]],
    hyper: TrainConfig,
    opt_state: AdamState,
    step: int,
    sched: GlanceSchedule | None = None,
) -> tuple[Params, AdamState, dict]:
    """One optimization step over a batch; pure given (inputs, step, seed)."""
    rng = np.random.default_rng([hyper.seed, step])
    lam = sched.at(step).value() if sched is not None else None
    total = zero_grads(params)
    loss_sum = 0.0
    comp_sum: dict[str, float] = {}
    n_eff, n_skip = 0, 0
    # a diverging step overflows before it is detected; the DivergedError
    # below is the diagnostic, not the fp warnings along the way
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for src, tgt in batch:
            out = _sentence_pass(params, config, src, tgt, hyper, lam, rng, train=True)
            if out is None:
                n_skip += 1
                continue
            val, grads, components = out
            loss_sum += val
            for k, v in components.items():
                comp_sum[k] = comp_sum.get(k, 0.0) + v
            for k in total:
                total[k] += grads[k]
            n_eff += 1

    record = {
        "step": step,
        "loss": loss_sum / n_eff if n_eff else 0.0,
        "components": {k: v / n_eff for k, v in comp_sum.items()} if n_eff else {},
        "lambda": lam,
        "skipped": n_skip,
    }
    if not math.isfinite(record["loss"]):
        raise DivergedError(step, record["loss"])
    if n_eff == 0:
        return params, opt_state, record
    for k in total:
        total[k] /= n_eff
    lr = lr_at(step, hyper.lr, hyper.warmup)
    params, opt_state = adam_update(params, total, opt_state, lr, hyper.beta1, hyper.beta2, hyper.adam_eps)
    record["lr"] = lr
    return params, opt_state, record


def validation_loss(
    params: Params,
    config: ModelConfig,
    pairs: Sequence[tuple[TokenSeq, TokenSeq]],
    hyper: TrainConfig,
) -> float:
    """Mean eval-mode loss without glancing; skipped pairs are ignored."""
    rng = np.random.default_rng(0)  # unused in eval mode, keeps the API uniform
    vals = []
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for src, tgt in pairs:
            out = _sentence_pass(params, config, src, tgt, hyper, lam=None, rng=rng, train=False)
            if out is not None:
                vals.append(out[0])
    return float(np.mean(vals)) if vals else float("nan")


@dataclass
class TrainResult:
    params: Params                    # averaged best checkpoints
    final_params: Params              # raw parameters after the last step
    log: list[dict] = field(default_factory=list)
    val_history: list[tuple[int, float]] = field(default_factory=list)
    n_averaged: int = 1


def train_model(
    corpus: ParallelCorpus,
    config: ModelConfig,
    hyper: TrainConfig,
    heldout: Sequence[tuple[TokenSeq, TokenSeq]] | None = None,
    log_path: str | Path | None = None,
) -> TrainResult:
    """Full training run: batches, schedule, validation, checkpoint averaging.

    Keeps the ``keep_best`` lowest-loss snapshots (ties to the earlier step)
    and returns their parameter average; snapshots are ranked by heldout loss
    when a heldout set is given, by the training-batch loss otherwise.
    """
    params = init_params(config, hyper.seed)
    opt_state = AdamState.zeros(params)
    sched = None
    if hyper.glat_start is not None:
        sched = GlanceSchedule(hyper.glat_start, hyper.glat_slope, 0, hyper.steps)
    batch_rng = np.random.default_rng([hyper.seed, 0xBA7C4])
    n = len(corpus.pairs)
    if n == 0:
        raise ValueError("empty training corpus")

    log: list[dict] = []
    snapshots: list[tuple[float, int, Params]] = []
    val_history: list[tuple[int, float]] = []

    for step in range(1, hyper.steps + 1):
        idx = batch_rng.integers(0, n, size=hyper.batch_size)
        batch = [corpus.pairs[int(i)] for i in idx]
        params, opt_state, record = train_step(params, config, batch, hyper, opt_state, step, sched)
        log.append(record)
        if step % hyper.eval_every == 0 or step == hyper.steps:
            if heldout is not None:
                val = validation_loss(params, config, heldout, hyper)
                if not math.isfinite(val):
                    raise DivergedError(step, val)
            else:
                val = record["loss"]
            val_history.append((step, val))
            snapshots.append((val, step, {k: v.copy() for k, v in params.items()}))
            snapshots.sort(key=lambda s: (s[0], s[1]))
            del snapshots[hyper.keep_best:]

    averaged = average_params([s[2] for s in snapshots]) if snapshots else params
    if log_path is not None:
        with open(log_path, "w", encoding="utf-8") as fh:
            for rec in log:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return TrainResult(
        params=averaged,
        final_params=params,
        log=log,
        val_history=val_history,
        n_averaged=len(snapshots) if snapshots else 1,
    )
