"""Correlation/error metrics at the utterance and system levels.

Utterance-level metrics compare per-pair predictions with per-pair human
scores. System-level metrics first average predictions and scores within
each system and then compare the per-system means; they are the basis
for checkpoint selection, so constant inputs raise an explicit
zero-variance error rather than silently producing NaN.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ZeroVarianceError
from .model import MODE_CLASSIFICATION, ModelConfig, ModelParams, forward
from .repr_store import Dataset


def _as_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def pearson(x, y) -> float:
    """Pearson product-moment correlation coefficient (LCC)."""
    x, y = _as_vector(x, "x"), _as_vector(y, "y")
    if x.shape != y.shape:
        raise DimensionError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < 2:
        raise DimensionError("correlation requires at least 2 points")
    xc = x - x.mean()
    yc = y - y.mean()
    sx2 = (xc * xc).sum()
    sy2 = (yc * yc).sum()
    if sx2 == 0.0 or sy2 == 0.0:
        raise ZeroVarianceError("correlation is undefined for a constant input")
    return float((xc * yc).sum() / np.sqrt(sx2 * sy2))


def average_ranks(x) -> np.ndarray:
    """Fractional ranks (1-based); tied values share their average rank."""
    x = _as_vector(x, "x")
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Spearman rank correlation (SRCC): Pearson on average ranks."""
    return pearson(average_ranks(x), average_ranks(y))


def mse(x, y) -> float:
    """Mean squared error between two equal-length vectors."""
    x, y = _as_vector(x, "x"), _as_vector(y, "y")
    if x.shape != y.shape:
        raise DimensionError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < 1:
        raise DimensionError("mse requires at least 1 point")
    diff = x - y
    return float((diff * diff).mean())


@dataclass
class SystemRow:
    mean_pred: float
    mean_label: float
    count: int


def system_aggregate(preds, labels, system_ids) -> dict:
    """Per-system means, keyed by system id in first-appearance order."""
    preds = _as_vector(preds, "preds")
    labels = _as_vector(labels, "labels")
    if not (len(preds) == len(labels) == len(system_ids)):
        raise DimensionError("preds, labels, system_ids must have equal lengths")
    sums: dict[str, list] = {}
    for pred, label, system_id in zip(preds, labels, system_ids):
        if not system_id:
            raise DimensionError("system ids must be non-empty")
        entry = sums.setdefault(system_id, [0.0, 0.0, 0])
        entry[0] += pred
        entry[1] += label
        entry[2] += 1
    return {
        sid: SystemRow(mean_pred=float(s / n), mean_label=float(t / n), count=n)
        for sid, (s, t, n) in sums.items()
    }


@dataclass
class MetricBlock:
    lcc: float | None
    srcc: float | None
    mse: float

    def to_dict(self) -> dict:
        return {"lcc": self.lcc, "srcc": self.srcc, "mse": self.mse}


@dataclass
class MetricsReport:
    """LCC/SRCC/MSE at both levels plus the per-system aggregates.

    The expected-score blocks hold the same metrics computed on the
    probability-weighted classification score; they are informational
    only and absent in regression mode.
    """

    utterance: MetricBlock
    system: MetricBlock
    per_system: dict
    utterance_expected: MetricBlock | None = None
    system_expected: MetricBlock | None = None

    def to_dict(self, include_per_system: bool = True) -> dict:
        out = {"utterance": self.utterance.to_dict(), "system": self.system.to_dict()}
        if include_per_system:
            out["per_system"] = {
                sid: {
                    "mean_pred": row.mean_pred,
                    "mean_label": row.mean_label,
                    "count": row.count,
                }
                for sid, row in self.per_system.items()
            }
        if self.utterance_expected is not None:
            out["utterance_expected"] = self.utterance_expected.to_dict()
        if self.system_expected is not None:
            out["system_expected"] = self.system_expected.to_dict()
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), indent=2, **kwargs)

    def write_per_system_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["system_id", "mean_pred", "mean_label", "count"])
            for sid, row in self.per_system.items():
                writer.writerow([sid, repr(row.mean_pred), repr(row.mean_label), row.count])


def _metric_block(preds, labels, strict: bool) -> MetricBlock:
    error = mse(preds, labels)
    if strict:
        return MetricBlock(lcc=pearson(preds, labels), srcc=spearman(preds, labels), mse=error)
    try:
        lcc = pearson(preds, labels)
    except (ZeroVarianceError, DimensionError):
        lcc = None
    try:
        srcc = spearman(preds, labels)
    except (ZeroVarianceError, DimensionError):
        srcc = None
    return MetricBlock(lcc=lcc, srcc=srcc, mse=error)


def compute_report(
    preds, labels, system_ids, strict: bool = True, expected_preds=None
) -> MetricsReport:
    """Assemble a full report from raw prediction/label/system vectors."""
    preds = _as_vector(preds, "preds")
    labels = _as_vector(labels, "labels")
    per_system = system_aggregate(preds, labels, system_ids)
    if strict and len(per_system) < 2:
        raise DimensionError(
            f"system-level correlations need at least 2 systems, got {len(per_system)}"
        )
    mean_preds = [row.mean_pred for row in per_system.values()]
    mean_labels = [row.mean_label for row in per_system.values()]
    report = MetricsReport(
        utterance=_metric_block(preds, labels, strict),
        system=_metric_block(mean_preds, mean_labels, strict),
        per_system=per_system,
    )
    if expected_preds is not None:
        expected_preds = _as_vector(expected_preds, "expected_preds")
        expected_system = system_aggregate(expected_preds, labels, system_ids)
        report.utterance_expected = _metric_block(expected_preds, labels, strict)
        report.system_expected = _metric_block(
            [row.mean_pred for row in expected_system.values()],
            [row.mean_label for row in expected_system.values()],
            strict,
        )
    return report


def evaluate(
    params: ModelParams, cfg: ModelConfig, ds: Dataset, strict: bool = True
) -> MetricsReport:
    """Score every pair in `ds` and assemble both metric levels.

    Classification predictions enter the metrics through the mapped
    (argmax + 1) score; the probability-weighted expected score is
    reported alongside for reference.
    """
    if ds.num_layers is not None and (ds.num_layers, ds.dim) != (
        cfg.num_layers,
        cfg.repr_dim,
    ):
        raise DimensionError(
            f"model expects (L, D) = ({cfg.num_layers}, {cfg.repr_dim}), "
            f"dataset has ({ds.num_layers}, {ds.dim})"
        )
    if not ds.pairs:
        raise DimensionError("cannot evaluate an empty dataset")
    preds, labels, system_ids = [], [], []
    expected = [] if cfg.mode == MODE_CLASSIFICATION else None
    for pair in ds.pairs:
        output = forward(ds.test_repr(pair), ds.ref_repr(pair), params, cfg)
        preds.append(output.score)
        labels.append(pair.score)
        system_ids.append(pair.system_id)
        if expected is not None:
            expected.append(output.expected_score())
    return compute_report(preds, labels, system_ids, strict=strict, expected_preds=expected)
