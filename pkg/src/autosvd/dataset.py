"""Rating and item-content loaders, id re-indexing and train/test splits."""

from __future__ import annotations

import logging
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import store

_logger = logging.getLogger(__name__)

RATING_FORMATS = ("ml100k_tab", "ml1m_coloncolon", "movietweetings_coloncolon")
CONTENT_FORMATS = ("ml100k_item", "ml1m_movies", "movietweetings_movies")

ML100K_GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]

_YEAR_IN_TITLE = re.compile(r"\((\d{4})\)\s*$")
_YEAR_IN_DATE = re.compile(r"(\d{4})\s*$")


class DataError(ValueError):
    """Raised for unreadable or malformed dataset files."""


class DataWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class RatingsDataset:
    """Explicit ratings with dense ids.

    ``users``, ``items``, ``ratings`` and ``timestamps`` are parallel arrays,
    one entry per (user, item) pair, in load order.  ``user_ids`` and
    ``item_ids`` map dense index -> original id string.  Per-user rated-item
    sets are kept in CSR form (``indptr`` / ``indices``, items sorted).
    """

    n_users: int
    n_items: int
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    timestamps: np.ndarray
    user_ids: tuple
    item_ids: tuple
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    global_mean: float

    @classmethod
    def from_arrays(cls, users, items, ratings, timestamps=None, *, n_users, n_items,
                    user_ids=None, item_ids=None):
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        ratings = np.asarray(ratings, dtype=np.float64)
        if timestamps is None:
            timestamps = np.zeros(len(users), dtype=np.int64)
        timestamps = np.asarray(timestamps, dtype=np.int64)
        if not (len(users) == len(items) == len(ratings) == len(timestamps)):
            raise ValueError("triple columns differ in length")
        if len(users) and (users.min() < 0 or users.max() >= n_users):
            raise ValueError("user id out of range")
        if len(items) and (items.min() < 0 or items.max() >= n_items):
            raise ValueError("item id out of range")
        if user_ids is None:
            user_ids = tuple(str(u) for u in range(n_users))
        if item_ids is None:
            item_ids = tuple(str(i) for i in range(n_items))

        order = np.lexsort((items, users))
        key = users[order] * n_items + items[order]
        if len(key) > 1 and np.any(key[1:] == key[:-1]):
            raise ValueError("duplicate (user, item) pairs")
        indptr = np.zeros(n_users + 1, dtype=np.int64)
        np.cumsum(np.bincount(users, minlength=n_users), out=indptr[1:])
        indices = items[order]
        mean = float(ratings.mean()) if len(ratings) else 0.0

        for a in (users, items, ratings, timestamps, indptr, indices):
            a.setflags(write=False)
        return cls(n_users, n_items, users, items, ratings, timestamps,
                   tuple(user_ids), tuple(item_ids), indptr, indices, mean)

    def __len__(self):
        return len(self.ratings)

    def user_items(self, u):
        """Sorted item ids rated by user ``u`` (the implicit set N(u))."""
        return self.indices[self.indptr[u] : self.indptr[u + 1]]

    @property
    def user_counts(self):
        return np.diff(self.indptr)

    @property
    def item_counts(self):
        return np.bincount(self.items, minlength=self.n_items)

    @property
    def rating_scale(self):
        return float(self.ratings.min()), float(self.ratings.max())

    @property
    def density(self):
        return len(self) / (self.n_users * self.n_items)

    @property
    def user_index(self):
        return {uid: k for k, uid in enumerate(self.user_ids)}

    @property
    def item_index(self):
        return {iid: k for k, iid in enumerate(self.item_ids)}

    def subset(self, mask_or_index):
        """Dataset restricted to the given triples; id maps and sizes are kept."""
        sel = np.asarray(mask_or_index)
        return RatingsDataset.from_arrays(
            self.users[sel], self.items[sel], self.ratings[sel], self.timestamps[sel],
            n_users=self.n_users, n_items=self.n_items,
            user_ids=self.user_ids, item_ids=self.item_ids,
        )

    def stats(self):
        """Counts in the layout of the usual dataset-statistics table."""
        n_active_users = int(np.count_nonzero(self.user_counts))
        n_active_items = int(np.count_nonzero(self.item_counts))
        return {
            "items": n_active_items,
            "users": n_active_users,
            "ratings": len(self),
            "density_pct": 100.0 * len(self) / (n_active_users * n_active_items),
        }


@dataclass(frozen=True, eq=False)
class ItemContentMatrix:
    """Per-item content vectors (one row per dense item id)."""

    rows: np.ndarray
    feature_names: tuple
    missing_years: int = 0
    missing_items: int = 0

    @property
    def dim(self):
        return self.rows.shape[1]

    def __len__(self):
        return self.rows.shape[0]


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.9
    seed: int = 0
    strategy: str = "global_random"

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if self.strategy != "global_random":
            raise ValueError(f"unknown split strategy {self.strategy!r}")


def _sorted_ids(ids):
    unique = set(ids)
    if all(s.isdigit() for s in unique):
        return sorted(unique, key=int)
    return sorted(unique)


def _parse_ratings(lines, sep, path):
    raw_users, raw_items, ratings, stamps = [], [], [], []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(sep)
        if len(parts) not in (3, 4):
            raise DataError(f"{path}:{lineno}: expected 3 or 4 fields, got {len(parts)}")
        try:
            rating = float(parts[2])
            stamp = int(parts[3]) if len(parts) == 4 else 0
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        raw_users.append(parts[0].strip())
        raw_items.append(parts[1].strip())
        ratings.append(rating)
        stamps.append(stamp)
    return raw_users, raw_items, ratings, stamps


def load_ratings(path, format="ml100k_tab"):
    """Read a ratings file and re-index users and items densely.

    ``ml100k_tab`` expects ``user<TAB>item<TAB>rating<TAB>timestamp``; the
    ``*_coloncolon`` formats use ``::`` as separator.  Original ids are sorted
    (numerically when they are all integers) before being numbered.  When a
    (user, item) pair occurs twice the last line wins.
    """
    if format not in RATING_FORMATS:
        raise ValueError(f"unknown ratings format {format!r}; expected one of {RATING_FORMATS}")
    sep = "\t" if format == "ml100k_tab" else "::"
    path = Path(path)
    try:
        with open(path, encoding="latin-1") as fh:
            raw_users, raw_items, ratings, stamps = _parse_ratings(fh, sep, path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not ratings:
        raise DataError(f"{path}: no ratings")

    user_ids = _sorted_ids(raw_users)
    item_ids = _sorted_ids(raw_items)
    uidx = {u: k for k, u in enumerate(user_ids)}
    iidx = {i: k for k, i in enumerate(item_ids)}
    users = np.fromiter((uidx[u] for u in raw_users), dtype=np.int64, count=len(raw_users))
    items = np.fromiter((iidx[i] for i in raw_items), dtype=np.int64, count=len(raw_items))
    ratings = np.asarray(ratings, dtype=np.float64)
    stamps = np.asarray(stamps, dtype=np.int64)

    # keep the last occurrence of each (user, item)
    key = users * len(item_ids) + items
    _, first_rev = np.unique(key[::-1], return_index=True)
    keep = np.sort(len(key) - 1 - first_rev)
    if len(keep) < len(key):
        warnings.warn(f"{path}: {len(key) - len(keep)} duplicate ratings, keeping the last",
                      DataWarning, stacklevel=2)
        users, items, ratings, stamps = users[keep], items[keep], ratings[keep], stamps[keep]

    ds = RatingsDataset.from_arrays(users, items, ratings, stamps,
                                    n_users=len(user_ids), n_items=len(item_ids),
                                    user_ids=user_ids, item_ids=item_ids)
    _logger.info("loaded %d ratings (%d users, %d items) from %s",
                 len(ds), ds.n_users, ds.n_items, path)
    return ds


def _parse_year(text):
    text = text.strip()
    m = _YEAR_IN_TITLE.search(text) or _YEAR_IN_DATE.search(text)
    return int(m.group(1)) if m else None


def _read_ml100k_items(path):
    genres = ML100K_GENRES
    genre_file = Path(path).with_name("u.genre")
    if genre_file.exists():
        listed = [ln.split("|")[0] for ln in genre_file.read_text("latin-1").splitlines() if ln.strip()]
        if listed:
            genres = listed
    records = {}
    with open(path, encoding="latin-1") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("|")
            if len(parts) < 5 + len(genres):
                raise DataError(f"{path}:{lineno}: expected {5 + len(genres)} fields")
            flags = parts[-len(genres):]
            try:
                hot = [g for g, f in zip(genres, flags) if int(f)]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-binary genre flag") from None
            year = _parse_year(parts[2]) or _parse_year(parts[1])
            records[parts[0].strip()] = (hot, year)
    return list(genres), records


def _read_coloncolon_movies(path):
    records = {}
    vocab = set()
    with open(path, encoding="latin-1") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("::")
            if len(parts) < 2:
                raise DataError(f"{path}:{lineno}: expected id::title (year)::genres")
            hot = [g for g in parts[2].split("|") if g] if len(parts) > 2 else []
            vocab.update(hot)
            records[parts[0].strip()] = (hot, _parse_year(parts[1]))
    return sorted(vocab), records


def load_item_content(path, format, item_ids):
    """Build the item content matrix: genre one-hot block plus a min-max scaled year.

    ``item_ids`` is the dense-index -> original-id sequence of the ratings
    dataset (``RatingsDataset.item_ids``).  Items without a content record get
    an all-zeros row; an unparseable year contributes 0 and is counted in
    ``missing_years``.
    """
    if format not in CONTENT_FORMATS:
        raise ValueError(f"unknown content format {format!r}; expected one of {CONTENT_FORMATS}")
    try:
        if format == "ml100k_item":
            genres, records = _read_ml100k_items(path)
        else:
            genres, records = _read_coloncolon_movies(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    col = {g: k for k, g in enumerate(genres)}
    rows = np.zeros((len(item_ids), len(genres) + 1))
    years = np.full(len(item_ids), np.nan)
    missing_items = missing_years = 0
    for k, iid in enumerate(item_ids):
        rec = records.get(iid)
        if rec is None:
            missing_items += 1
            continue
        hot, year = rec
        rows[k, [col[g] for g in hot]] = 1.0
        if year is None:
            missing_years += 1
        else:
            years[k] = year

    known = ~np.isnan(years)
    if known.any():
        lo, hi = np.nanmin(years), np.nanmax(years)
        if hi > lo:
            rows[known, -1] = (years[known] - lo) / (hi - lo)
    if missing_years:
        warnings.warn(f"{path}: {missing_years} items with unparseable year, year feature set to 0",
                      DataWarning, stacklevel=2)
    return ItemContentMatrix(rows, tuple(genres) + ("year",), missing_years, missing_items)


def split(ds, spec):
    """Seeded uniform random partition of the triples into (train, test).

    The train part holds ``round(train_fraction * len(ds))`` triples.  Both
    halves keep load order and the id maps of ``ds``.
    """
    n = len(ds)
    n_train = int(np.floor(spec.train_fraction * n + 0.5))
    perm = np.random.default_rng(spec.seed).permutation(n)
    in_train = np.zeros(n, dtype=bool)
    in_train[perm[:n_train]] = True
    return ds.subset(in_train), ds.subset(~in_train)


# canonical on-disk form written by ``autosvd prepare``

def save_canonical(ds, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "ratings.tsv", "w", newline="\n") as fh:
        fh.write("user\titem\trating\ttimestamp\n")
        for u, i, r, t in zip(ds.users.tolist(), ds.items.tolist(),
                              ds.ratings.tolist(), ds.timestamps.tolist()):
            fh.write(f"{u}\t{i}\t{r!r}\t{t}\n")
    for name, ids in (("users.tsv", ds.user_ids), ("items.tsv", ds.item_ids)):
        with open(directory / name, "w", newline="\n") as fh:
            fh.write("index\toriginal_id\n")
            fh.writelines(f"{k}\t{v}\n" for k, v in enumerate(ids))


def load_canonical(directory):
    directory = Path(directory)

    def ids(name):
        with open(directory / name) as fh:
            next(fh)
            return [line.rstrip("\n").split("\t", 1)[1] for line in fh]

    user_ids, item_ids = ids("users.tsv"), ids("items.tsv")
    table = np.loadtxt(directory / "ratings.tsv", skiprows=1, ndmin=2)
    return RatingsDataset.from_arrays(
        table[:, 0].astype(np.int64), table[:, 1].astype(np.int64), table[:, 2],
        table[:, 3].astype(np.int64), n_users=len(user_ids), n_items=len(item_ids),
        user_ids=user_ids, item_ids=item_ids,
    )


def save_content(content, path):
    return store.write_container(path, "item_content",
                                 {"feature_names": list(content.feature_names),
                                  "missing_years": content.missing_years,
                                  "missing_items": content.missing_items},
                                 {"rows": content.rows})


def load_content(path):
    meta, arrays = store.read_container(path, kind="item_content")
    return ItemContentMatrix(arrays["rows"], tuple(meta["feature_names"]),
                             meta["missing_years"], meta["missing_items"])
