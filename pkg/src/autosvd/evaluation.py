"""RMSE, repeated train/test experiments, epoch timing and report files."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import cae, dataset, factor
from .cae import CaeTrainConfig, DivergenceError
from .dataset import SplitSpec
from .factor import TrainConfig

_logger = logging.getLogger(__name__)

RESULTS_COLUMNS = ["dataset", "train_fraction", "variant", "trainer", "repetitions",
                   "mean_rmse", "std_rmse", "epoch_seconds", "epochs_run", "rmse_per_repetition"]
ACCURACY_COLUMNS = ["method", "dataset", "train_fraction", "mean_rmse", "std_rmse"]
TIMING_COLUMNS = ["method", "seconds_per_epoch", "ratio_to_biased_svd"]


def rmse(predicted, actual):
    """Root mean squared error of two equal-length sequences."""
    predicted = np.asarray(predicted, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if predicted.shape != actual.shape:
        raise ValueError("predicted and actual differ in length")
    if predicted.size == 0:
        raise ValueError("rmse of an empty prediction list")
    return float(np.sqrt(np.mean((predicted - actual) ** 2)))


def method_name(variant, trainer):
    return variant if trainer == "naive" else f"{variant}[{trainer}]"


@dataclass(frozen=True)
class ExperimentSpec:
    data_path: str | None = None
    data_format: str = "ml100k_tab"
    content_path: str | None = None
    content_format: str = "ml100k_item"
    split: SplitSpec = field(default_factory=SplitSpec)
    variant: str = "autosvd"
    trainer: str = "naive"
    cfg: TrainConfig | None = None
    cae_cfg: CaeTrainConfig = field(default_factory=CaeTrainConfig)
    repetitions: int = 5
    clip: bool = True
    filter_cold_start: bool = False
    label: str | None = None

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        factor.epoch_function(self.variant, self.trainer)  # validates the pair

    def train_config(self):
        return self.cfg if self.cfg is not None else TrainConfig.paper_defaults(self.variant)

    @property
    def needs_content(self):
        return self.variant in factor.CONTENT


@dataclass
class ExperimentResult:
    dataset: str
    train_fraction: float
    variant: str
    trainer: str
    rmses: list = field(default_factory=list)
    epoch_seconds: list = field(default_factory=list)
    epochs_run: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def mean_rmse(self):
        return float(np.mean(self.rmses)) if self.rmses else float("nan")

    @property
    def std_rmse(self):
        return float(np.std(self.rmses)) if self.rmses else float("nan")

    @property
    def mean_epoch_seconds(self):
        flat = [s for rep in self.epoch_seconds for s in rep]
        return float(np.mean(flat)) if flat else float("nan")


class ExperimentError(RuntimeError):
    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


def heldout_predictions(model, train, test, clip=True, filter_cold_start=False):
    users, items, actual = test.users, test.items, test.ratings
    if filter_cold_start:
        keep = (train.user_counts[users] > 0) & (train.item_counts[items] > 0)
        users, items, actual = users[keep], items[keep], actual[keep]
    return factor.predict_many(model, train, users, items, clip=clip), actual


def run_experiment(spec, ratings=None, content=None):
    """Repeat split -> (CAE) -> factor training -> test RMSE.

    Repetition ``r`` uses split seed ``spec.split.seed + r`` and adds ``r`` to
    the factor and CAE seeds as well.  ``ratings`` / ``content`` may be passed
    preloaded instead of reading ``spec.data_path`` / ``spec.content_path``.
    """
    if ratings is None:
        ratings = dataset.load_ratings(spec.data_path, spec.data_format)
    if spec.needs_content and content is None:
        if spec.content_path is None:
            raise ValueError(f"variant {spec.variant!r} needs item content")
        content = dataset.load_item_content(spec.content_path, spec.content_format,
                                            ratings.item_ids)
    cfg = spec.train_config()
    result = ExperimentResult(
        dataset=spec.label or (Path(spec.data_path).parent.name if spec.data_path else "data"),
        train_fraction=spec.split.train_fraction, variant=spec.variant, trainer=spec.trainer,
        config={"train": asdict(cfg), "cae": asdict(spec.cae_cfg) if spec.needs_content else None,
                "split": asdict(spec.split), "clip": spec.clip,
                "filter_cold_start": spec.filter_cold_start},
    )
    for r in range(spec.repetitions):
        split_spec = SplitSpec(spec.split.train_fraction, spec.split.seed + r, spec.split.strategy)
        rep_cfg = TrainConfig(**{**asdict(cfg), "seed": cfg.seed + r})
        train, test = dataset.split(ratings, split_spec)
        try:
            features = None
            if spec.needs_content:
                cae_cfg = CaeTrainConfig(**{**asdict(spec.cae_cfg),
                                            "batch_order_seed": spec.cae_cfg.batch_order_seed + r})
                model = cae.train_cae(content, cae_cfg, rep_cfg.k)
                features = cae.extract_features(model, content)
            fm, trace = factor.train(spec.variant, train, rep_cfg, features, spec.trainer)
        except DivergenceError as exc:
            raise ExperimentError(f"repetition {r} diverged: {exc}", result) from exc
        pred, actual = heldout_predictions(fm, train, test, spec.clip, spec.filter_cold_start)
        result.rmses.append(rmse(pred, actual))
        result.epoch_seconds.append([rec.seconds for rec in trace])
        result.epochs_run.append(len(trace))
        result.seeds.append(split_spec.seed)
        _logger.info("%s rep %d: test rmse %.4f", spec.variant, r, result.rmses[-1])
    return result


@dataclass
class BenchmarkRow:
    method: str
    variant: str
    trainer: str
    seconds: float
    ratio: float = float("nan")


def benchmark_epoch(entries, train, features=None, cfgs=None, repeats=1, seed=0):
    """Wall-clock seconds of one training epoch per ``(variant, trainer)`` entry.

    Every entry starts from a model initialised with the same seed and runs
    one untimed warm-up epoch first.  With ``repeats > 1`` the fastest timed
    epoch is reported.  Ratios are relative to the ``biased_svd`` entry, or
    the first entry if there is none.
    """
    cfgs = cfgs or {}
    rows = []
    for variant, trainer in entries:
        cfg = cfgs.get(variant) or TrainConfig.paper_defaults(variant, seed=seed)
        step = factor.epoch_function(variant, trainer)
        rng = np.random.default_rng(cfg.seed)
        m = factor.init_model(variant, train.n_users, train.n_items, train.global_mean, cfg,
                              features if variant in factor.CONTENT else None, rng)
        step(m, train, cfg, 0)
        times = []
        for rep in range(repeats):
            t0 = time.perf_counter()
            step(m, train, cfg, rep + 1)
            times.append(time.perf_counter() - t0)
        rows.append(BenchmarkRow(method_name(variant, trainer), variant, trainer, min(times)))
    ref = next((r for r in rows if r.variant == "biased_svd" and r.trainer == "naive"),
               rows[0] if rows else None)
    for r in rows:
        r.ratio = r.seconds / ref.seconds
    return rows


def _write_tsv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)
    return path


def emit_report(results, out_dir, benchmark=None):
    """Write ``results.tsv``, ``accuracy.tsv`` and ``timing.tsv`` into ``out_dir``.

    Timing rows come from ``benchmark`` rows when given, otherwise from the
    mean epoch time of each experiment.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    res_rows, acc_rows = [], []
    for r in results:
        res_rows.append([r.dataset, r.train_fraction, r.variant, r.trainer, len(r.rmses),
                         f"{r.mean_rmse:.6f}", f"{r.std_rmse:.6f}", f"{r.mean_epoch_seconds:.6f}",
                         ",".join(str(n) for n in r.epochs_run),
                         ",".join(f"{x:.6f}" for x in r.rmses)])
        acc_rows.append([method_name(r.variant, r.trainer), r.dataset, r.train_fraction,
                         f"{r.mean_rmse:.6f}", f"{r.std_rmse:.6f}"])
    if benchmark is not None:
        timing_rows = [[b.method, f"{b.seconds:.6f}", f"{b.ratio:.4f}"] for b in benchmark]
    else:
        ref = next((r.mean_epoch_seconds for r in results if r.variant == "biased_svd"), None)
        timing_rows = [[method_name(r.variant, r.trainer), f"{r.mean_epoch_seconds:.6f}",
                        f"{r.mean_epoch_seconds / ref:.4f}" if ref else ""] for r in results]
    return {
        "results": _write_tsv(out_dir / "results.tsv", RESULTS_COLUMNS, res_rows),
        "accuracy": _write_tsv(out_dir / "accuracy.tsv", ACCURACY_COLUMNS, acc_rows),
        "timing": _write_tsv(out_dir / "timing.tsv", TIMING_COLUMNS, timing_rows),
    }


def read_tsv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh, delimiter="\t"))
