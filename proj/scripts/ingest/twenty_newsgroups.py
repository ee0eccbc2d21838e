# SPDX-License-Identifier: Apache-2.0
"""20 Newsgroups, "bydate" version.

Source layout (the 20news-bydate.tar.gz archive, unpacked):
    SOURCE/20news-bydate-train/<newsgroup>/<article number>
    SOURCE/20news-bydate-test/<newsgroup>/<article number>
Expected: 11314 train, 7532 test, 20 classes. Articles are Latin-1 in
places; undecodable bytes become U+FFFD. Headers are kept as text.
"""

from pathlib import Path

from common import directory_per_class, main_for


def records(source: Path):
    for split in ("train", "test"):
        yield from directory_per_class(source / f"20news-bydate-{split}", split, f"{split}/")


if __name__ == "__main__":
    main_for("20ng", __doc__.splitlines()[0], records)
