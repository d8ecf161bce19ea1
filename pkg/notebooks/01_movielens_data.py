"""
Loading MovieLens-100K
======================

Parse the raw ratings and item metadata, print the dataset statistics and
cut a seeded 90/10 train/test split.  Run ``python tools/fetch_ml100k.py``
first if ``data/ml-100k`` is empty.
"""

import warnings

import numpy as np

from autosvd import dataset
from _paths import ML100K

ds = dataset.load_ratings(ML100K / "u.data", "ml100k_tab")
print(ds.stats())  # 1682 items, 943 users, 100000 ratings, 6.305% dense
print("global mean", round(ds.global_mean, 4), "scale", ds.rating_scale)

# one row per item: 19 genre flags then the min-max scaled release year
with warnings.catch_warnings(record=True) as caught:
    content = dataset.load_item_content(ML100K / "u.item", "ml100k_item", ds.item_ids)
print(content.rows.shape, content.feature_names[:4], "...", content.feature_names[-1])
for w in caught:
    print("warning:", w.message)

train, test = dataset.split(ds, dataset.SplitSpec(0.9, seed=0))
print(len(train), len(test))

# the implicit set N(u) only ever comes from the training half
u = 0
print("user", ds.user_ids[u], "rated", ds.user_counts[u], "items,", train.user_counts[u], "in train")

# held-out pairs whose user or item never appears in training
cold = (train.user_counts[test.users] == 0) | (train.item_counts[test.items] == 0)
print("cold-start test pairs:", int(cold.sum()))

# the histogram of ratings
print(np.bincount(ds.ratings.astype(int))[1:])
