"""Manifest generation from a rated-pair listing.

Input is a CSV with header columns pair_id, test_wav, ref_wav, score,
system_id. Output is the newline-delimited JSON manifest the scoring
engine loads, with test_path/ref_path pointing at the extracted LRP1
files (by wav stem) relative to the representation directory.

Scores pass through as real numbers without range policing; the consumer
validates its own score domain at load time.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import ManifestError

REQUIRED_COLUMNS = ("pair_id", "test_wav", "ref_wav", "score", "system_id")


def build_manifest(pairs_csv, repr_dir, manifest_name: str = "manifest.ndjson") -> Path:
    """Write `repr_dir/manifest_name` from the pair listing in `pairs_csv`.

    Every referenced extraction output must already exist in `repr_dir`;
    duplicate pair ids and malformed rows are refused.
    """
    pairs_csv = Path(pairs_csv)
    repr_dir = Path(repr_dir)
    with open(pairs_csv, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        columns = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in columns]
        if missing:
            raise ManifestError(f"{pairs_csv}: missing columns: {', '.join(missing)}")
        rows = list(reader)
    if not rows:
        raise ManifestError(f"{pairs_csv}: no pair rows")

    seen = set()
    records = []
    for lineno, row in enumerate(rows, start=2):
        pair_id = row["pair_id"]
        if pair_id in seen:
            raise ManifestError(f"{pairs_csv}: duplicate pair_id {pair_id!r}")
        seen.add(pair_id)
        try:
            score = float(row["score"])
        except ValueError as exc:
            raise ManifestError(
                f"{pairs_csv} line {lineno}: score {row['score']!r} is not a number"
            ) from exc
        paths = {}
        for side in ("test", "ref"):
            lrp_name = Path(row[f"{side}_wav"]).stem + ".lrp"
            if not (repr_dir / lrp_name).is_file():
                raise ManifestError(
                    f"pair {pair_id!r}: missing extraction output {lrp_name} in {repr_dir}"
                )
            paths[side] = lrp_name
        records.append(
            {
                "pair_id": pair_id,
                "test_path": paths["test"],
                "ref_path": paths["ref"],
                "score": score,
                "system_id": row["system_id"],
            }
        )

    manifest_path = repr_dir / manifest_name
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    return manifest_path
