# SPDX-License-Identifier: Apache-2.0
"""BBC Sport (737 articles, 5 sports), no canonical split.

Source layout (bbcsport-fulltext.zip, unpacked):
    SOURCE/<athletics|cricket|football|rugby|tennis>/<nnn>.txt
All records are written as "unsplit" (80:20 stratified split, seed 42,
gives 590/147).
"""

from pathlib import Path

from common import directory_per_class, main_for


def records(source: Path):
    yield from directory_per_class(source, "unsplit", "")


if __name__ == "__main__":
    main_for("bbc_sports", __doc__.splitlines()[0], records)
