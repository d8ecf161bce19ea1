"""
Four latent factor models
=========================

Biased SVD, SVD++, AutoSVD and AutoSVD++ trained on the same split with the
published hyperparameters, then scored by held-out RMSE.
"""

import warnings

import numpy as np

from autosvd import cae, dataset, evaluation, factor
from _paths import ML100K

ds = dataset.load_ratings(ML100K / "u.data")
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    X = dataset.load_item_content(ML100K / "u.item", "ml100k_item", ds.item_ids).rows
train, test = dataset.split(ds, dataset.SplitSpec(0.9, 0))

feats = cae.extract_features(cae.train_cae(X, cae.CaeTrainConfig(), 10), X)

for variant in factor.VARIANTS:
    cfg = factor.TrainConfig.paper_defaults(variant)
    model, trace = factor.train(variant, train, cfg, feats)
    pred, actual = evaluation.heldout_predictions(model, train, test)
    print(f"{variant:11s} epochs={cfg.epochs:2d} train={trace[-1].train_rmse:.4f} "
          f"test={evaluation.rmse(pred, actual):.4f}")

# a single prediction, unclipped
model, _ = factor.train("autosvdpp", train, factor.TrainConfig.paper_defaults("autosvdpp"), feats,
                        trainer="efficient")
u, i = ds.user_index["196"], ds.item_index["242"]
print("user 196 / item 242:", round(factor.predict(model, train, u, i, clip=False), 3))

# the item vector is beta * cae(C_i) + eps_i
print(np.round(model.content_term[i] + model.item_base[i], 3))
