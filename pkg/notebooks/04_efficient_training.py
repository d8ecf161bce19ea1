"""
Per-user batched SGD for the ++ models
======================================

The naive trainer touches every y_j in N(u) on every rating.  The
efficient one accumulates the y update per user and applies it once.
"""

import numpy as np

from autosvd import dataset, evaluation, factor
from _paths import ML100K

ds = dataset.load_ratings(ML100K / "u.data")
train, test = dataset.split(ds, dataset.SplitSpec(0.9, 0))
feats = np.random.default_rng(0).uniform(0, 1, (ds.n_items, 10))  # timing ignores the values

rows = evaluation.benchmark_epoch(
    [("biased_svd", "naive"), ("autosvd", "naive"), ("svdpp", "naive"), ("svdpp", "efficient"),
     ("autosvdpp", "naive"), ("autosvdpp", "efficient")], train, feats, repeats=3)
for r in rows:
    print(f"{r.method:22s} {r.seconds:.4f} s  x{r.ratio:.2f}")
print("mean ratings per user in train:", round(len(train) / np.count_nonzero(train.user_counts), 1))

# both trainers end up in the same place accuracy-wise
for trainer in factor.TRAINERS:
    cfg = factor.TrainConfig.paper_defaults("autosvdpp")
    m, _ = factor.train("autosvdpp", train, cfg, feats, trainer)
    pred, actual = evaluation.heldout_predictions(m, train, test)
    print(trainer, round(evaluation.rmse(pred, actual), 4))
