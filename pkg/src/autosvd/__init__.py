"""Hybrid collaborative filtering with contractive auto-encoder item features.

Modules:

- :mod:`autosvd.dataset` rating / content loaders and splits
- :mod:`autosvd.cae` contractive auto-encoder
- :mod:`autosvd.factor` biased SVD, SVD++, AutoSVD, AutoSVD++ and their SGD trainers
- :mod:`autosvd.evaluation` RMSE experiments, epoch timing, reports
- :mod:`autosvd.cli` the ``autosvd`` command
"""

from .cae import CaeModel, CaeTrainConfig, DivergenceError
from .dataset import ItemContentMatrix, RatingsDataset, SplitSpec, load_item_content, load_ratings, split
from .factor import FactorModel, TrainConfig, predict, train

__version__ = "0.1.0"

__all__ = [
    "CaeModel", "CaeTrainConfig", "DivergenceError", "FactorModel", "ItemContentMatrix",
    "RatingsDataset", "SplitSpec", "TrainConfig", "load_item_content", "load_ratings",
    "predict", "split", "train",
]
