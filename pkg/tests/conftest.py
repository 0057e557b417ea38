"""Shared fixtures and builders for the test suite."""

import json

import numpy as np
import pytest

from voicesim import (
    LayerwiseRepr,
    ModelConfig,
    forward,
    init_params,
    write_lrp,
)

# Every architecture variant: mode x representation source x adapter.
QUADRANTS = [
    (mode, source, adapter)
    for mode in ("regression", "classification")
    for source in ("weighted_sum", "last_layer")
    for adapter in (True, False)
]


def tiny_cfg(
    mode="regression",
    repr_source="weighted_sum",
    use_adapter=True,
    num_layers=3,
    repr_dim=5,
    adapter_dim=4,
    head_hidden=6,
):
    return ModelConfig(
        mode=mode,
        repr_source=repr_source,
        use_adapter=use_adapter,
        num_layers=num_layers,
        repr_dim=repr_dim,
        adapter_dim=adapter_dim,
        head_hidden=head_hidden,
    )


def random_repr(rng, num_layers=3, num_frames=None, dim=5, uid="u", std=1.0):
    if num_frames is None:
        num_frames = int(rng.integers(2, 6))
    return LayerwiseRepr(uid, rng.normal(0.0, std, (num_layers, num_frames, dim)))


def write_manifest(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def make_disk_dataset(
    root, rng, n_pairs=8, num_layers=3, dim=5, n_systems=3, std=1.0
):
    """Write LRP files plus a manifest under `root`; returns
    (manifest_path, repr_dir)."""
    repr_dir = root / "reprs"
    repr_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(n_pairs):
        for role in ("t", "r"):
            rep = random_repr(
                rng, num_layers=num_layers, dim=dim, uid=f"{role}{i}", std=std
            )
            write_lrp(repr_dir / f"{role}{i}.lrp", rep)
        rows.append(
            {
                "pair_id": f"p{i}",
                "test_path": f"t{i}.lrp",
                "ref_path": f"r{i}.lrp",
                "score": float(rng.uniform(1.0, 4.0)),
                "system_id": f"sys{i % n_systems}",
            }
        )
    manifest = root / "pairs.ndjson"
    write_manifest(manifest, rows)
    return manifest, repr_dir


def make_teacher_dataset(root, train_seed=123, teacher_seed=7, n_pairs=20):
    """Teacher-labeled overfit dataset written to disk.

    The teacher is a frozen random network of the student's architecture:
    the parameter draw the training seed produces, with its output layer
    randomly perturbed (a bias offset plus small weight noise) so the
    labels land inside the valid 1..4 band. Candidate pairs whose
    initial-network score is far from zero are rejected so the offset
    can stay small; the labels remain exactly realizable by the student
    architecture. Returns (cfg, manifest_path, repr_dir).
    """
    num_layers, dim, hidden = 3, 8, 512
    cfg = ModelConfig(
        mode="regression",
        repr_source="weighted_sum",
        use_adapter=True,
        num_layers=num_layers,
        repr_dim=dim,
        adapter_dim=dim,
        head_hidden=hidden,
    )
    init_rng, _ = (
        np.random.default_rng(s) for s in np.random.SeedSequence(train_seed).spawn(2)
    )
    student_init = init_params(cfg, init_rng)
    teacher = student_init.copy()
    prng = np.random.default_rng(teacher_seed)
    teacher.head_b2 += 1.15
    teacher.head_w2 += prng.uniform(-0.01, 0.01, size=teacher.head_w2.shape)

    repr_dir = root / "reprs"
    repr_dir.mkdir(exist_ok=True)
    rows = []
    kept = 0
    while kept < n_pairs:
        rep_t = random_repr(
            prng,
            num_layers=num_layers,
            num_frames=int(prng.integers(3, 8)),
            dim=dim,
            uid=f"t{kept}",
            std=5.0,
        )
        rep_r = random_repr(
            prng,
            num_layers=num_layers,
            num_frames=int(prng.integers(3, 8)),
            dim=dim,
            uid=f"r{kept}",
            std=5.0,
        )
        if abs(forward(rep_t, rep_r, student_init, cfg).s_final) > 0.1:
            continue
        label = forward(rep_t, rep_r, teacher, cfg).s_final
        assert 1.0 <= label <= 4.0
        write_lrp(repr_dir / f"t{kept}.lrp", rep_t)
        write_lrp(repr_dir / f"r{kept}.lrp", rep_r)
        rows.append(
            {
                "pair_id": f"p{kept}",
                "test_path": f"t{kept}.lrp",
                "ref_path": f"r{kept}.lrp",
                "score": label,
                "system_id": f"sys{kept % 5}",
            }
        )
        kept += 1
    manifest = root / "pairs.ndjson"
    write_manifest(manifest, rows)
    return cfg, manifest, repr_dir


@pytest.fixture
def rng():
    return np.random.default_rng(42)
