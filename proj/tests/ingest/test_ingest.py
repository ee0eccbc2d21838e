# SPDX-License-Identifier: Apache-2.0
"""Runs each ingestion script on a miniature source tree and loads the
result with the C++ corpus loader through `hierdoc stats`."""

import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[2]
SCRIPTS = ROOT / "scripts" / "ingest"
CLI = os.environ.get("HIERDOC_CLI")


def run_script(name: str, source: Path, out: Path) -> list[dict]:
    subprocess.run([sys.executable, str(SCRIPTS / name), str(source), str(out)], check=True,
                   capture_output=True, text=True)
    with open(out, encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    assert rows and list(rows[0].keys()) == ["doc_id", "split", "label", "text"]
    return rows


def load_with_cli(manifest_name: str, csv_path: Path, tmp: Path) -> dict:
    """Loads the CSV with the library, using the manifest minus its counts."""
    if not CLI:
        pytest.skip("HIERDOC_CLI not set")
    manifest = json.loads((ROOT / "data" / "manifests" / f"{manifest_name}.json").read_text())
    manifest.pop("train_count", None)
    manifest.pop("test_count", None)
    m = tmp / "manifest.json"
    m.write_text(json.dumps(manifest))
    out = subprocess.run([CLI, "stats", "--in", str(csv_path), "--manifest", str(m)], check=True,
                         capture_output=True, text=True)
    return json.loads(out.stdout)


def write(path: Path, text, binary=False):
    path.parent.mkdir(parents=True, exist_ok=True)
    if binary:
        path.write_bytes(text)
    else:
        path.write_text(text, encoding="utf-8")


def test_twenty_newsgroups(tmp_path):
    src = tmp_path / "src"
    write(src / "20news-bydate-train" / "sci.space" / "1001", "From: a@b\n\nOrbit talk")
    write(src / "20news-bydate-train" / "rec.autos" / "7", "Cars, \"fast\" ones")
    write(src / "20news-bydate-test" / "sci.space" / "1001", b"caf\xe9 latin-1 byte", binary=True)
    rows = run_script("twenty_newsgroups.py", src, tmp_path / "out.csv")
    assert [(r["doc_id"], r["split"], r["label"]) for r in rows] == [
        ("train/rec.autos/7", "train", "rec.autos"),
        ("train/sci.space/1001", "train", "sci.space"),
        ("test/sci.space/1001", "test", "sci.space"),
    ]
    assert rows[0]["text"] == "Cars, \"fast\" ones"
    assert "�" in rows[2]["text"]
    stats = load_with_cli("20ng", tmp_path / "out.csv", tmp_path)
    assert (stats["train"], stats["test"]) == (2, 1)


@pytest.mark.parametrize("script,manifest,classes", [
    ("bbc_news.py", "bbc_news", ["business", "tech"]),
    ("bbc_sports.py", "bbc_sports", ["cricket", "tennis"]),
])
def test_bbc(tmp_path, script, manifest, classes):
    src = tmp_path / "src"
    for c in classes:
        for i in range(3):
            write(src / c / f"{i:03d}.txt", f"Headline {c} {i}\n\nBody of the article.")
    rows = run_script(script, src, tmp_path / "out.csv")
    assert len(rows) == 6
    assert {r["split"] for r in rows} == {"unsplit"}
    assert rows[0]["doc_id"] == f"{classes[0]}/000.txt"
    stats = load_with_cli(manifest, tmp_path / "out.csv", tmp_path)
    assert stats["unsplit"] == 6


def test_ag_news(tmp_path):
    src = tmp_path / "src"
    write(src / "train.csv", '"3","Wall St. Bears","Short-sellers \\$10 see green.""Ok"""\n"2","Win","Team wins"\n')
    write(src / "test.csv", '"4","Chip","New chip, faster"\n')
    rows = run_script("ag_news.py", src, tmp_path / "out.csv")
    assert [(r["doc_id"], r["label"]) for r in rows] == [("train/0", "business"), ("train/1", "sports"),
                                                        ("test/0", "sci_tech")]
    assert rows[0]["text"] == 'Wall St. Bears Short-sellers $10 see green."Ok"'
    stats = load_with_cli("ag_news", tmp_path / "out.csv", tmp_path)
    assert stats["class_histogram"]["business"] == 1


def test_imdb(tmp_path):
    src = tmp_path / "src"
    write(src / "train" / "pos" / "1_9.txt", "Great film.<br /><br />Loved it.")
    write(src / "train" / "neg" / "2_1.txt", "Awful.")
    write(src / "train" / "unsup" / "3_0.txt", "ignored")
    write(src / "test" / "pos" / "4_8.txt", "Fine.")
    rows = run_script("imdb.py", src, tmp_path / "out.csv")
    assert [(r["doc_id"], r["label"]) for r in rows] == [("train/neg/2_1", "negative"), ("train/pos/1_9", "positive"),
                                                        ("test/pos/4_8", "positive")]
    stats = load_with_cli("imdb", tmp_path / "out.csv", tmp_path)
    assert (stats["train"], stats["test"]) == (2, 1)


def test_r8(tmp_path):
    src = tmp_path / "src"
    write(src / "r8-train-all-terms.txt", "earn\tprofit rose\nacq\tcompany buys firm\n\n")
    write(src / "r8-test-all-terms.txt", "money-fx\tdollar falls\n")
    rows = run_script("r8.py", src, tmp_path / "out.csv")
    assert [(r["split"], r["label"], r["text"]) for r in rows] == [
        ("train", "earn", "profit rose"), ("train", "acq", "company buys firm"), ("test", "money-fx", "dollar falls")]
    load_with_cli("r8", tmp_path / "out.csv", tmp_path)


def test_unknown_label_fails(tmp_path):
    src = tmp_path / "src"
    write(src / "r8-train-all-terms.txt", "wheat\tnot an R8 class\n")
    write(src / "r8-test-all-terms.txt", "")
    with pytest.raises(subprocess.CalledProcessError) as e:
        run_script("r8.py", src, tmp_path / "out.csv")
    assert "wheat" in e.value.stderr
