"""Adam training loop, gradient accumulation, and checkpoint selection.

A "batch" is a gradient accumulation group: pairs have ragged frame
counts, so each pair is evaluated unpadded and the per-pair gradients
are averaged (in visit order, for determinism) before one optimizer
step. Checkpoints are selected by system-level performance on the
validation set, ties broken toward the earlier epoch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, FormatError, ZeroVarianceError
from .model import (
    Gradients,
    ModelConfig,
    ModelParams,
    init_params,
    loss_and_grad,
)
from .repr_store import Dataset

SELECTION_METRICS = ("system_lcc", "system_srcc", "system_mse")


@dataclass
class AdamState:
    """Optimizer state: step count plus per-parameter moment estimates."""

    step: int
    m: dict
    v: dict
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params: ModelParams, lr: float = 1e-4, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    zeros = {name: np.zeros_like(arr) for name, arr in params.items()}
    return AdamState(
        step=0,
        m=zeros,
        v={name: arr.copy() for name, arr in zeros.items()},
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_step(params: ModelParams, grads: Gradients, state: AdamState):
    """One bias-corrected Adam update. Returns fresh (params, state)."""
    t = state.step + 1
    new_m, new_v, new_params = {}, {}, {}
    param_items = dict(params.items())
    grad_items = dict(grads.items())
    if param_items.keys() != grad_items.keys():
        raise DimensionError("gradient fields do not match parameter fields")
    for name, p in param_items.items():
        g = grad_items[name]
        if g.shape != p.shape:
            raise DimensionError(
                f"{name}: gradient shape {g.shape} != parameter shape {p.shape}"
            )
        if not np.isfinite(g).all():
            raise FormatError(f"{name}: non-finite gradient")
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        new_m[name] = m
        new_v[name] = v
        new_params[name] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    updated = _rebuild_params(params, new_params)
    new_state = AdamState(
        step=t, m=new_m, v=new_v,
        lr=state.lr, beta1=state.beta1, beta2=state.beta2, eps=state.eps,
    )
    return updated, new_state


def _rebuild_params(template: ModelParams, arrays: dict) -> ModelParams:
    from .model import PARAM_FIELDS

    return ModelParams(
        **{
            name: arrays.get(name)
            if getattr(template, name) is not None
            else None
            for name in PARAM_FIELDS
        }
    )


def _accumulate(total: Gradients, part: Gradients) -> None:
    for name, arr in part.items():
        getattr(total, name).__iadd__(arr)


def _scale(grads: Gradients, factor: float) -> None:
    for _, arr in grads.items():
        arr *= factor


def train_epoch(
    ds: Dataset,
    params: ModelParams,
    state: AdamState,
    batch_size: int,
    rng: np.random.Generator,
    cfg: ModelConfig,
):
    """One pass over `ds` in a seeded shuffle.

    Gradients are averaged over each accumulation group (a short final
    group is allowed) before a single optimizer step. Returns
    (params, state, mean loss over all pairs).
    """
    if len(ds) == 0:
        raise DimensionError("cannot train on an empty dataset")
    if batch_size < 1:
        raise DimensionError("batch_size must be >= 1")
    order = rng.permutation(len(ds))
    loss_sum = 0.0
    for start in range(0, len(order), batch_size):
        group = order[start : start + batch_size]
        total = Gradients.zeros_like(params)
        for idx in group:
            pair = ds.pairs[int(idx)]
            loss, grads = loss_and_grad(
                ds.test_repr(pair), ds.ref_repr(pair), pair.score, params, cfg
            )
            loss_sum += loss
            _accumulate(total, grads)
        _scale(total, 1.0 / len(group))
        params, state = adam_step(params, total, state)
    return params, state, loss_sum / len(ds)


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 5
    lr: float = 1e-4
    seed: int = 0
    selection_metric: str = "system_lcc"

    def validate(self) -> None:
        if self.epochs < 1:
            raise DimensionError("epochs must be >= 1")
        if self.batch_size < 1:
            raise DimensionError("batch_size must be >= 1")
        if self.selection_metric not in SELECTION_METRICS:
            raise DimensionError(
                f"selection_metric must be one of {SELECTION_METRICS}, "
                f"got '{self.selection_metric}'"
            )


def select_best(values, selection_metric: str) -> int | None:
    """Index of the best epoch in a metric sequence.

    Correlations are maximized, MSE minimized; strict comparison breaks
    ties toward the earlier epoch. `None` entries (metric unavailable
    that epoch) are never selected. Returns None if nothing qualifies.
    """
    if selection_metric not in SELECTION_METRICS:
        raise DimensionError(f"unknown selection metric '{selection_metric}'")
    minimize = selection_metric == "system_mse"
    best_idx, best_val = None, None
    for idx, val in enumerate(values):
        if val is None:
            continue
        if best_val is None or (val < best_val if minimize else val > best_val):
            best_idx, best_val = idx, val
    return best_idx


@dataclass
class TrainResult:
    best_params: ModelParams
    best_epoch: int
    final_params: ModelParams
    history: list = field(default_factory=list)


def train(
    train_ds: Dataset,
    valid_ds: Dataset,
    cfg: ModelConfig,
    tcfg: TrainConfig,
    on_epoch=None,
) -> TrainResult:
    """Full training run with per-epoch validation and checkpoint selection.

    Deterministic for a fixed (seed, data, config): the seed drives both
    parameter initialization and the per-epoch shuffles. The history is a
    list of JSON-ready records, one per epoch; exactly one carries
    selected=True. An epoch whose selection metric is unavailable (e.g.
    constant predictions make a correlation undefined) records null for
    it and cannot be selected.
    """
    from .metrics import evaluate

    tcfg.validate()
    seq = np.random.SeedSequence(tcfg.seed)
    init_rng, shuffle_rng = (np.random.default_rng(s) for s in seq.spawn(2))
    params = init_params(cfg, init_rng)
    state = init_adam(params, lr=tcfg.lr)

    history: list[dict] = []
    metric_values: list[float | None] = []
    best_params: ModelParams | None = None
    best_so_far: int | None = None
    for epoch in range(1, tcfg.epochs + 1):
        params, state, mean_loss = train_epoch(
            train_ds, params, state, tcfg.batch_size, shuffle_rng, cfg
        )
        report = evaluate(params, cfg, valid_ds, strict=False)
        block = report.system
        value = {
            "system_lcc": block.lcc,
            "system_srcc": block.srcc,
            "system_mse": block.mse,
        }[tcfg.selection_metric]
        metric_values.append(value)
        record = {
            "epoch": epoch,
            "train_loss": mean_loss,
            "valid": report.to_dict(include_per_system=False),
            "selected": False,
        }
        history.append(record)
        best_now = select_best(metric_values, tcfg.selection_metric)
        if best_now is not None and best_now != best_so_far:
            # A change of best can only name the epoch just finished.
            best_so_far = best_now
            best_params = params.copy()
        if on_epoch is not None:
            on_epoch(record)

    if best_so_far is None:
        raise ZeroVarianceError(
            f"'{tcfg.selection_metric}' was unavailable in every epoch; "
            "no checkpoint can be selected"
        )
    history[best_so_far]["selected"] = True
    return TrainResult(
        best_params=best_params,
        best_epoch=best_so_far + 1,
        final_params=params,
        history=history,
    )


def write_history(path, history) -> None:
    """History as newline-delimited JSON, one epoch record per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in history:
            fh.write(json.dumps(record, sort_keys=False))
            fh.write("\n")


def grad_check(cfg: ModelConfig, seed: int, step: float = 1e-5) -> float:
    """Compare analytic gradients against central finite differences on a
    random tiny instance; returns the max relative error over all
    parameters.

    Instances whose head pre-activations or pooled-distance inputs sit
    within 1e-3 of a ReLU or |.| kink are resampled, since the loss is
    not differentiable there.
    """
    from .model import _forward_cached
    from .repr_store import LayerwiseRepr

    rng = np.random.default_rng(seed)
    for _ in range(100):
        frames_t, frames_r = rng.integers(2, 5, size=2)
        repr_t = LayerwiseRepr(
            "t", rng.normal(0.0, 1.0, (cfg.num_layers, frames_t, cfg.repr_dim))
        )
        repr_r = LayerwiseRepr(
            "r", rng.normal(0.0, 1.0, (cfg.num_layers, frames_r, cfg.repr_dim))
        )
        params = init_params(cfg, rng)
        for _, arr in params.items():
            arr += rng.uniform(-0.3, 0.3, size=arr.shape)
        if cfg.mode == "classification":
            label = float(rng.integers(1, 5))
        else:
            label = float(rng.uniform(1.0, 4.0))
        _, cache = _forward_cached(repr_t, repr_r, params, cfg)
        kink_margin = min(
            np.abs(cache["pre1_t"]).min(),
            np.abs(cache["pre1_r"]).min(),
            np.abs(cache["diff_t"]).min(),
            np.abs(cache["diff_r"]).min(),
        )
        if kink_margin < 1e-3:
            continue
        break
    else:
        raise RuntimeError("could not sample an instance away from kinks")

    _, analytic = loss_and_grad(repr_t, repr_r, label, params, cfg)
    max_rel = 0.0
    for name, arr in params.items():
        g_analytic = getattr(analytic, name)
        flat = arr.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            loss_plus, _ = loss_and_grad(repr_t, repr_r, label, params, cfg)
            flat[i] = original - step
            loss_minus, _ = loss_and_grad(repr_t, repr_r, label, params, cfg)
            flat[i] = original
            fd = (loss_plus - loss_minus) / (2.0 * step)
            a = g_analytic.reshape(-1)[i]
            rel = abs(a - fd) / max(abs(a), abs(fd), 1e-6)
            max_rel = max(max_rel, rel)
    return max_rel
