# SPDX-License-Identifier: Apache-2.0
"""IMDB large movie review dataset (25000 train / 25000 test, 2 classes).

Source layout (aclImdb_v1.tar.gz, unpacked):
    SOURCE/{train,test}/{pos,neg}/<id>_<rating>.txt
The unlabeled train/unsup directory is ignored. Reviews contain "<br />"
tags, which preprocessing strips.
"""

from pathlib import Path

from common import Record, main_for, read_text

LABELS = {"neg": "negative", "pos": "positive"}


def records(source: Path):
    for split in ("train", "test"):
        for folder, label in LABELS.items():
            for path in sorted((source / split / folder).glob("*.txt")):
                yield Record(f"{split}/{folder}/{path.stem}", split, label, read_text(path))


if __name__ == "__main__":
    main_for("imdb", __doc__.splitlines()[0], records)
