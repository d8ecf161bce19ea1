"""
Item features from a contractive auto-encoder
=============================================

Train the tied-weight sigmoid auto-encoder on the item content matrix and
look at what the Jacobian penalty does to the learned encoder.
"""

import warnings

import numpy as np

from autosvd import cae, dataset
from _paths import ML100K

ds = dataset.load_ratings(ML100K / "u.data")
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    X = dataset.load_item_content(ML100K / "u.item", "ml100k_item", ds.item_ids).rows

trace = cae.CaeTrace()
model = cae.train_cae(X, cae.CaeTrainConfig(epochs=20), hidden_dim=10, trace=trace)
print("loss per epoch:", np.round(trace.epoch_loss[::4], 3))

# a model trained without the penalty for comparison
plain = cae.train_cae(X, cae.CaeTrainConfig(epochs=20, jacobian_weight=0.0), hidden_dim=10)
print("mean ||J||_F^2  contractive %.4f  plain %.4f"
      % (cae.jacobian_penalty(model, X).mean(), cae.jacobian_penalty(plain, X).mean()))

features = cae.extract_features(model, X)
print(features.shape, features.min().round(3), features.max().round(3))

# items with no metadata all map to the same code sigmoid(b_h)
empty = np.flatnonzero(X.sum(axis=1) == 0)
print("items without content:", len(empty))

# reconstruction of the first item
print(np.round(X[0], 2))
print(np.round(cae.reconstruct(model, X[0]), 2))
