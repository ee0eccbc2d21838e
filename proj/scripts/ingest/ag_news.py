# SPDX-License-Identifier: Apache-2.0
"""AG News topic classification (120000 train / 7600 test, 4 classes).

Source layout (the ag_news_csv archive, unpacked):
    SOURCE/train.csv, SOURCE/test.csv
Rows are "class index","title","description" with class index 1-4 =
World, Sports, Business, Sci/Tech. Text is title and description joined by
a space; the upstream backslash escapes ("\\$", "\\n") are undone.
"""

import csv
from pathlib import Path

from common import Record, main_for

LABELS = {"1": "world", "2": "sports", "3": "business", "4": "sci_tech"}


def unescape(text: str) -> str:
    return text.replace("\\n", " ").replace("\\", "")


def records(source: Path):
    for split in ("train", "test"):
        with open(source / f"{split}.csv", encoding="utf-8", errors="replace", newline="") as f:
            for i, row in enumerate(csv.reader(f)):
                label, title, description = row[0], row[1], row[2]
                yield Record(f"{split}/{i}", split, LABELS[label], unescape(f"{title} {description}"))


if __name__ == "__main__":
    main_for("ag_news", __doc__.splitlines()[0], records)
