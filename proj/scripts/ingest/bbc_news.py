# SPDX-License-Identifier: Apache-2.0
"""BBC News (2225 articles, 5 topics), no canonical split.

Source layout (bbc-fulltext.zip, unpacked):
    SOURCE/<business|entertainment|politics|sport|tech>/<nnn>.txt
All records are written as "unsplit"; the stratified 80:20 split (seed 42)
is applied by `hierdoc split` or at experiment time.
"""

from pathlib import Path

from common import directory_per_class, main_for


def records(source: Path):
    yield from directory_per_class(source, "unsplit", "")


if __name__ == "__main__":
    main_for("bbc_news", __doc__.splitlines()[0], records)
