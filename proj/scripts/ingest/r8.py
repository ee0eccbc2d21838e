# SPDX-License-Identifier: Apache-2.0
"""R8 subset of Reuters-21578 (5485 train / 2189 test, 8 classes).

Source layout (the "all-terms" single-label Reuters distribution):
    SOURCE/r8-train-all-terms.txt, SOURCE/r8-test-all-terms.txt
One document per line: "<label>\\t<text>".
"""

from pathlib import Path

from common import Record, main_for, read_text


def records(source: Path):
    for split in ("train", "test"):
        lines = read_text(source / f"r8-{split}-all-terms.txt").splitlines()
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            label, _, text = line.partition("\t")
            yield Record(f"{split}/{i}", split, label.strip(), text)


if __name__ == "__main__":
    main_for("r8", __doc__.splitlines()[0], records)
