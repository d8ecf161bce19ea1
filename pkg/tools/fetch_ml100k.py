"""Rebuild MovieLens-100K ``u.data`` / ``u.item`` from a PyPI-hosted copy.

grouplens.org is not always reachable from build machines, but the RecBole
wheel on PyPI ships the full ML-100K interaction log and item table as
"atomic" files.  This script downloads that wheel (or uses one already on
disk) and writes the two files in the original GroupLens layouts:

    u.data   user<TAB>item<TAB>rating<TAB>timestamp
    u.item   id|title|release date|video release date|url|19 genre flags
    u.genre  genre|index

Only the release *year* survives the RecBole conversion, so the release date
column is written as ``01-Jan-YYYY``.  That is all the loader uses.

Usage::

    python tools/fetch_ml100k.py [--wheel PATH] [--out data/ml-100k]
"""

import argparse
import io
import json
import sys
import urllib.parse
import urllib.request
import zipfile
from pathlib import Path

GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]
PACKAGE = "recbole"
VERSION = "1.2.1"
PREFIX = "recbole/dataset_example/ml-100k/"


def _wheel_url():
    meta_url = f"https://pypi.org/pypi/{PACKAGE}/{VERSION}/json"
    with urllib.request.urlopen(meta_url, timeout=60) as fh:
        meta = json.load(fh)
    for entry in meta["urls"]:
        if entry["filename"].endswith(".whl"):
            # some mirrors hand back relative urls
            return urllib.parse.urljoin(meta_url, entry["url"])
    raise RuntimeError(f"no wheel published for {PACKAGE}=={VERSION}")


def _read_wheel(path):
    if path is not None:
        return Path(path).read_bytes()
    url = _wheel_url()
    print(f"downloading {url}", file=sys.stderr)
    with urllib.request.urlopen(url, timeout=600) as fh:
        return fh.read()


def convert(blob, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(io.BytesIO(blob)) as zf:
        inter = zf.read(PREFIX + "ml-100k.inter").decode("utf-8").splitlines()
        items = zf.read(PREFIX + "ml-100k.item").decode("latin-1").splitlines()

    with open(out / "u.data", "w", newline="\n") as fh:
        for line in inter[1:]:
            user, item, rating, ts = line.split("\t")
            fh.write(f"{user}\t{item}\t{int(float(rating))}\t{int(float(ts))}\n")

    rows = []
    for line in items[1:]:
        item, title, year, classes = line.split("\t")
        flags = ["1" if g in classes.split() else "0" for g in GENRES]
        date = f"01-Jan-{year}" if year.isdigit() else ""
        rows.append((int(item), "|".join([item, title, date, "", ""] + flags)))
    rows.sort()
    with open(out / "u.item", "w", encoding="latin-1", newline="\n") as fh:
        fh.writelines(row + "\n" for _, row in rows)

    with open(out / "u.genre", "w", newline="\n") as fh:
        fh.writelines(f"{g}|{k}\n" for k, g in enumerate(GENRES))
    return len(inter) - 1, len(rows)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--wheel", help="use a local recbole wheel instead of downloading")
    parser.add_argument("--out", default="data/ml-100k")
    args = parser.parse_args(argv)
    n_ratings, n_items = convert(_read_wheel(args.wheel), args.out)
    print(f"wrote {n_ratings} ratings and {n_items} items to {args.out}")


if __name__ == "__main__":
    main()
