"""``autosvd`` command line: prepare, train-cae, train, evaluate, benchmark.

Settings come from built-in defaults, then an optional flat ``key = value``
config file (``--config``), then ``--key value`` flags, later layers winning.
Training hyperparameters left unset fall back to the published values for the
chosen variant.

Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import cae, dataset, evaluation, factor
from .cae import CaeTrainConfig, DivergenceError
from .dataset import DataError, SplitSpec
from .factor import TrainConfig

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3

DEFAULT_BENCHMARK = ("biased_svd:naive,autosvd:naive,svdpp:naive,svdpp:efficient,"
                     "autosvdpp:naive,autosvdpp:efficient")


def _bool(text):
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt(conv):
    def parse(text):
        if text is None or str(text).strip().lower() in ("", "none", "auto"):
            return None
        return conv(text)
    parse.__name__ = conv.__name__
    return parse


# key -> (parser, default, help)
OPTIONS = {
    "data_path": (_opt(str), None, "raw ratings file"),
    "data_format": (str, "ml100k_tab", "|".join(dataset.RATING_FORMATS)),
    "content_path": (_opt(str), None, "raw item content file"),
    "content_format": (str, "ml100k_item", "|".join(dataset.CONTENT_FORMATS)),
    "features_path": (_opt(str), None, "CAE feature matrix (default: <out_dir>/cae/features.bin)"),
    "train_fraction": (float, 0.9, "training share of the ratings"),
    "split_seed": (int, 0, "seed of the train/test split"),
    "variant": (str, "autosvd", "|".join(factor.VARIANTS)),
    "trainer": (str, "naive", "|".join(factor.TRAINERS)),
    "gamma1": (_opt(float), None, "bias learning rate (default: published value)"),
    "gamma2": (_opt(float), None, "factor learning rate (default: published value)"),
    "lambda1": (_opt(float), None, "bias regularisation (default: published value)"),
    "lambda2": (_opt(float), None, "factor regularisation (default: published value)"),
    "beta": (_opt(float), None, "content feature scale (default: 0.1)"),
    "epochs": (_opt(int), None, "training epochs (default: 50, or 20 for ++ variants)"),
    "k": (int, 10, "latent dimension"),
    "seed": (int, 0, "factor initialisation / order seed"),
    "init_scale": (float, 0.05, "factor init range"),
    "min_improvement": (float, 0.0, "stop when train RMSE improves by less"),
    "clip": (_bool, True, "clip predictions to the rating scale"),
    "filter_cold_start": (_bool, False, "drop test pairs with unseen users/items"),
    "hidden_dim": (_opt(int), None, "CAE hidden size (default: k)"),
    "cae_learning_rate": (float, 0.01, "CAE SGD step"),
    "cae_epochs": (int, 50, "CAE epochs"),
    "cae_seed": (int, 0, "CAE init / shuffle seed"),
    "cae_jacobian_weight": (float, 0.1, "weight of the Jacobian penalty"),
    "cae_init_scale": (_opt(float), None, "CAE init range (default: 1/sqrt(d_x))"),
    "repetitions": (int, 5, "experiment repetitions"),
    "benchmark": (str, DEFAULT_BENCHMARK, "comma list of variant:trainer"),
    "benchmark_repeats": (int, 1, "timed epochs per entry (fastest kept)"),
    "out_dir": (str, "artifacts", "artifact directory"),
}


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def read_config_file(path):
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in OPTIONS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value
    return values


def resolve(flags, config_path=None):
    """Merge defaults < config file < flags and convert every value."""
    raw = {k: spec[1] for k, spec in OPTIONS.items()}
    if config_path:
        raw.update(read_config_file(config_path))
    raw.update(flags)
    out = {}
    for key, value in raw.items():
        conv = OPTIONS[key][0]
        try:
            out[key] = value if value is None or not isinstance(value, str) else conv(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    return out


def build_parser():
    parser = _Parser(prog="autosvd", description="AutoSVD / AutoSVD++ recommender toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "prepare": "parse a raw dataset into canonical artifacts and print its statistics",
        "train-cae": "train the contractive auto-encoder and extract item features",
        "train": "train one factor model on a train/test split",
        "evaluate": "repeated-split RMSE experiment",
        "benchmark": "time one epoch per variant/trainer",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", help="flat key = value config file")
        for key, (_, default, help_) in OPTIONS.items():
            flags = [f"--{key}"]
            if "_" in key:
                flags.append(f"--{key.replace('_', '-')}")
            p.add_argument(*flags, dest=key, default=argparse.SUPPRESS,
                           help=f"{help_} [default: {default}]")
    return parser


def train_config(opts):
    overrides = {k: opts[k] for k in ("gamma1", "gamma2", "lambda1", "lambda2", "beta", "epochs")
                 if opts[k] is not None}
    return TrainConfig.paper_defaults(opts["variant"], k=opts["k"], seed=opts["seed"],
                                      init_scale=opts["init_scale"],
                                      min_improvement=opts["min_improvement"], **overrides)


def cae_config(opts):
    return CaeTrainConfig(learning_rate=opts["cae_learning_rate"], epochs=opts["cae_epochs"],
                          batch_order_seed=opts["cae_seed"],
                          jacobian_weight=opts["cae_jacobian_weight"],
                          init_scale=opts["cae_init_scale"])


def _hidden_dim(opts):
    d = opts["hidden_dim"] if opts["hidden_dim"] is not None else opts["k"]
    if d < 1:
        raise ConfigError("hidden_dim must be >= 1")
    return d


def _check_choice(opts, key, choices):
    if opts[key] not in choices:
        raise ConfigError(f"unknown {key} {opts[key]!r}; valid: {', '.join(choices)}")


def _echo_config(directory, opts, command):
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "config.txt", "w") as fh:
        fh.write(f"# autosvd {command}\n")
        for key in OPTIONS:
            value = opts[key]
            fh.write(f"{key} = {'none' if value is None else value}\n")


def _data_dir(opts):
    return Path(opts["out_dir"]) / "data"


def _load_prepared(opts):
    d = _data_dir(opts)
    if not (d / "ratings.tsv").exists():
        raise DataError(f"no prepared dataset in {d}; run `autosvd prepare` first")
    return dataset.load_canonical(d)


def _load_prepared_content(opts):
    path = _data_dir(opts) / "content.bin"
    if not path.exists():
        raise DataError(f"no prepared content matrix at {path}; run `autosvd prepare` "
                        "with --content_path")
    return dataset.load_content(path)


def cmd_prepare(opts, out):
    if opts["data_path"] is None:
        raise ConfigError("prepare needs --data_path")
    _check_choice(opts, "data_format", dataset.RATING_FORMATS)
    ds = dataset.load_ratings(opts["data_path"], opts["data_format"])
    d = _data_dir(opts)
    dataset.save_canonical(ds, d)
    if opts["content_path"] is not None:
        _check_choice(opts, "content_format", dataset.CONTENT_FORMATS)
        content = dataset.load_item_content(opts["content_path"], opts["content_format"],
                                            ds.item_ids)
        dataset.save_content(content, d / "content.bin")
        print(f"content: {content.dim} features, {content.missing_items} items without "
              f"metadata, {content.missing_years} without a year", file=out)
    st = ds.stats()
    with open(d / "stats.tsv", "w") as fh:
        fh.write("items\tusers\tratings\tdensity_pct\n")
        fh.write(f"{st['items']}\t{st['users']}\t{st['ratings']}\t{st['density_pct']:.4f}\n")
    _echo_config(d, opts, "prepare")
    print("#items\t#users\t#ratings\tdensity(%)", file=out)
    print(f"{st['items']}\t{st['users']}\t{st['ratings']}\t{st['density_pct']:.3f}", file=out)


def cmd_train_cae(opts, out):
    hidden = _hidden_dim(opts)
    cfg = cae_config(opts)
    content = _load_prepared_content(opts)
    trace = cae.CaeTrace()
    model = cae.train_cae(content, cfg, hidden, trace)
    feats = cae.extract_features(model, content)
    d = Path(opts["out_dir"]) / "cae"
    d.mkdir(parents=True, exist_ok=True)
    cae.save_model(model, d / "model.bin")
    cae.save_features(feats, d / "features.bin")
    _echo_config(d, opts, "train-cae")
    print(f"features: {feats.shape[0]} x {feats.shape[1]}", file=out)
    print(f"final mean loss: {trace.epoch_loss[-1]:.6f}", file=out)


def cmd_train(opts, out):
    _check_choice(opts, "variant", factor.VARIANTS)
    _check_choice(opts, "trainer", factor.TRAINERS)
    try:
        factor.epoch_function(opts["variant"], opts["trainer"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cfg = train_config(opts)
    ds = _load_prepared(opts)
    features = None
    explicit = opts["features_path"] is not None
    fpath = Path(opts["features_path"]) if explicit else Path(opts["out_dir"]) / "cae" / "features.bin"
    if opts["variant"] in factor.CONTENT:
        if not fpath.exists():
            raise ConfigError(f"variant {opts['variant']} needs the CAE feature matrix "
                              f"artifact {fpath}; run `autosvd train-cae` first")
        features = cae.load_features(fpath)
    elif explicit:
        warnings.warn(f"variant {opts['variant']} does not use content; ignoring {fpath}")
    train, test = dataset.split(ds, SplitSpec(opts["train_fraction"], opts["split_seed"]))
    d = Path(opts["out_dir"]) / f"{opts['variant']}-{opts['trainer']}"
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "trace.jsonl", "w") as fh:
        def emit(rec):
            line = json.dumps(rec.to_dict(), sort_keys=True)
            fh.write(line + "\n")
            print(f"epoch {rec.epoch:3d}  train rmse {rec.train_rmse:.5f}  "
                  f"({rec.seconds:.3f}s)", file=out)
        model, _ = factor.train(opts["variant"], train, cfg, features, opts["trainer"],
                                on_epoch=emit)
    factor.save_model(model, d / "model.bin")
    _echo_config(d, opts, "train")
    pred, actual = evaluation.heldout_predictions(model, train, test, opts["clip"],
                                                  opts["filter_cold_start"])
    print(f"test rmse: {evaluation.rmse(pred, actual):.5f}", file=out)


def cmd_evaluate(opts, out):
    _check_choice(opts, "variant", factor.VARIANTS)
    _check_choice(opts, "trainer", factor.TRAINERS)
    try:
        spec = evaluation.ExperimentSpec(
            data_path=opts["data_path"], data_format=opts["data_format"],
            content_path=opts["content_path"], content_format=opts["content_format"],
            split=SplitSpec(opts["train_fraction"], opts["split_seed"]),
            variant=opts["variant"], trainer=opts["trainer"], cfg=train_config(opts),
            cae_cfg=cae_config(opts), repetitions=opts["repetitions"], clip=opts["clip"],
            filter_cold_start=opts["filter_cold_start"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    ratings = content = None
    if opts["data_path"] is None:
        ratings = _load_prepared(opts)
        if spec.needs_content and opts["content_path"] is None:
            content = _load_prepared_content(opts)
    _hidden_dim(opts)
    result = evaluation.run_experiment(spec, ratings, content)
    d = Path(opts["out_dir"]) / "evaluate"
    evaluation.emit_report([result], d)
    _echo_config(d, opts, "evaluate")
    reps = " ".join(f"{x:.4f}" for x in result.rmses)
    print(f"{evaluation.method_name(spec.variant, spec.trainer)}: mean rmse "
          f"{result.mean_rmse:.4f} (std {result.std_rmse:.4f}; runs {reps})", file=out)


def parse_entries(text):
    entries = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        variant, _, trainer = item.partition(":")
        trainer = trainer or "naive"
        if variant not in factor.VARIANTS:
            raise ConfigError(f"unknown variant {variant!r}; valid: {', '.join(factor.VARIANTS)}")
        try:
            factor.epoch_function(variant, trainer)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        entries.append((variant, trainer))
    if not entries:
        raise ConfigError("empty benchmark list")
    return entries


def cmd_benchmark(opts, out):
    entries = parse_entries(opts["benchmark"])
    if opts["data_path"] is not None:
        ds = dataset.load_ratings(opts["data_path"], opts["data_format"])
    else:
        ds = _load_prepared(opts)
    train, _ = dataset.split(ds, SplitSpec(opts["train_fraction"], opts["split_seed"]))
    features = None
    if any(v in factor.CONTENT for v, _ in entries):
        # timing does not depend on the feature values
        rng = np.random.default_rng(opts["seed"])
        features = rng.uniform(0.0, 1.0, size=(ds.n_items, opts["k"]))
    cfgs = {v: TrainConfig.paper_defaults(v, k=opts["k"], seed=opts["seed"],
                                          init_scale=opts["init_scale"]) for v, _ in entries}
    rows = evaluation.benchmark_epoch(entries, train, features, cfgs,
                                      repeats=opts["benchmark_repeats"])
    d = Path(opts["out_dir"]) / "benchmark"
    evaluation.emit_report([], d, benchmark=rows)
    _echo_config(d, opts, "benchmark")
    for r in rows:
        print(f"{r.method:24s} {r.seconds:10.4f} s/epoch   x{r.ratio:.2f}", file=out)
    by_method = {r.method: r for r in rows}
    for v in ("svdpp", "autosvdpp"):
        if v in by_method and f"{v}[efficient]" in by_method:
            ratio = by_method[v].seconds / by_method[f"{v}[efficient]"].seconds
            print(f"{v}: naive / efficient = {ratio:.1f}", file=out)


COMMANDS = {
    "prepare": cmd_prepare,
    "train-cae": cmd_train_cae,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "benchmark": cmd_benchmark,
}


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    flags = {k: v for k, v in vars(args).items() if k in OPTIONS}
    try:
        opts = resolve(flags, args.config)
        COMMANDS[args.command](opts, out)
    except (ConfigError, OSError) as exc:
        if isinstance(exc, FileNotFoundError) and exc.filename == args.config:
            print(f"autosvd: error: config file not found: {args.config}", file=sys.stderr)
            return EXIT_CONFIG
        if isinstance(exc, OSError):
            print(f"autosvd: error: {exc}", file=sys.stderr)
            return EXIT_DATA
        print(f"autosvd: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"autosvd: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DivergenceError, evaluation.ExperimentError) as exc:
        print(f"autosvd: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ValueError as exc:
        print(f"autosvd: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
