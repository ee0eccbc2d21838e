# SPDX-License-Identifier: Apache-2.0
"""Shared helpers for the per-dataset ingestion scripts.

Every script turns one upstream distribution into the canonical CSV
``doc_id,split,label,text`` (UTF-8, RFC-4180 quoting) with labels spelled
as in ``data/manifests/<name>.json``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from collections import Counter
from pathlib import Path
from typing import Iterable, NamedTuple

MANIFEST_DIR = Path(__file__).resolve().parents[2] / "data" / "manifests"
SPLITS = ("train", "test", "unsplit")


class Record(NamedTuple):
    doc_id: str
    split: str
    label: str
    text: str


def read_text(path: Path) -> str:
    """Reads a source file as UTF-8, replacing undecodable bytes."""
    return path.read_bytes().decode("utf-8", errors="replace")


def load_manifest(name: str) -> dict:
    with open(MANIFEST_DIR / f"{name}.json", encoding="utf-8") as f:
        return json.load(f)


def write_canonical(records: Iterable[Record], out: Path, manifest: dict) -> Counter:
    """Writes records, checking labels, splits and doc_id uniqueness.

    Records whose text is blank are skipped (the corpus loader rejects them).
    Returns per-split counts of the rows written.
    """
    classes = set(manifest["class_names"])
    seen: set[str] = set()
    counts: Counter = Counter()
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["doc_id", "split", "label", "text"])
        for r in records:
            if r.label not in classes:
                raise ValueError(f"{r.doc_id}: label {r.label!r} is not in the {manifest['name']} manifest")
            if r.split not in SPLITS:
                raise ValueError(f"{r.doc_id}: bad split {r.split!r}")
            if r.doc_id in seen:
                raise ValueError(f"duplicate doc_id {r.doc_id}")
            if not r.text.strip():
                print(f"warning: {r.doc_id} has no text; skipped", file=sys.stderr)
                continue
            seen.add(r.doc_id)
            writer.writerow([r.doc_id, r.split, r.label, r.text])
            counts[r.split] += 1
    return counts


def report(name: str, counts: Counter, manifest: dict) -> None:
    parts = ", ".join(f"{k} {counts[k]}" for k in SPLITS if counts[k])
    print(f"{name}: {parts}", file=sys.stderr)
    if manifest.get("canonical_split"):
        for split in ("train", "test"):
            expected = manifest.get(f"{split}_count")
            if expected is not None and counts[split] != expected:
                print(f"warning: {counts[split]} {split} records, manifest expects {expected}", file=sys.stderr)


def directory_per_class(root: Path, split: str, prefix: str,
                        label_map: dict[str, str] | None = None) -> Iterable[Record]:
    """Yields one record per file under root/<class>/; files sorted by name."""
    for class_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        label = label_map.get(class_dir.name, class_dir.name) if label_map else class_dir.name
        for path in sorted(p for p in class_dir.iterdir() if p.is_file()):
            yield Record(f"{prefix}{class_dir.name}/{path.name}", split, label, read_text(path))


def main_for(name: str, describe: str, records_fn) -> None:
    """Standard CLI: <script> SOURCE OUT.csv."""
    parser = argparse.ArgumentParser(description=describe)
    parser.add_argument("source", type=Path, help="unpacked upstream distribution")
    parser.add_argument("out", type=Path, help="canonical CSV to write")
    args = parser.parse_args()
    manifest = load_manifest(name)
    counts = write_canonical(records_fn(args.source), args.out, manifest)
    report(name, counts, manifest)
