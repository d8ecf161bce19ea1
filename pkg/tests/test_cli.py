import io
import time

import numpy as np
import pytest

from autosvd import cae, cli, dataset, evaluation, factor
from conftest import ML100K, require


def run(*argv):
    out = io.StringIO()
    code = cli.main([str(a) for a in argv], out)
    return code, out.getvalue()


@pytest.fixture
def fixture_data(tmp_path):
    """A 30 user x 40 item ml100k-style dataset with genre metadata."""
    rng = np.random.default_rng(0)
    cells = rng.choice(30 * 40, 400, replace=False)
    lines = [f"{c // 40 + 1}\t{c % 40 + 1}\t{rng.integers(1, 6)}\t{880000000 + k}"
             for k, c in enumerate(cells)]
    (tmp_path / "u.data").write_text("\n".join(lines) + "\n")
    items = []
    for i in range(1, 41):
        flags = ["0"] * 19
        flags[int(rng.integers(19))] = "1"
        year = 1950 + int(rng.integers(50))
        items.append("|".join([str(i), f"Film {i} ({year})", f"01-Jan-{year}", "", "http://x"]
                              + flags))
    (tmp_path / "u.item").write_text("\n".join(items) + "\n", encoding="latin-1")
    return tmp_path


def _prepare(d, *extra):
    return run("prepare", "--data_path", d / "u.data", "--content_path", d / "u.item",
               "--out_dir", d / "out", *extra)


def test_prepare_fixture(fixture_data):
    code, text = _prepare(fixture_data)
    assert code == 0
    lines = text.strip().splitlines()
    assert lines[-2] == "#items\t#users\t#ratings\tdensity(%)"
    items, users, ratings, density = lines[-1].split("\t")
    assert int(ratings) == 400
    assert float(density) == pytest.approx(400 / (int(items) * int(users)) * 100, abs=1e-3)
    d = fixture_data / "out" / "data"
    for name in ("ratings.tsv", "users.tsv", "items.tsv", "content.bin", "stats.tsv",
                 "config.txt"):
        assert (d / name).exists()


def test_prepare_idempotent(fixture_data):
    _prepare(fixture_data)
    d = fixture_data / "out" / "data"
    first = {p.name: p.read_bytes() for p in d.iterdir()}
    _prepare(fixture_data)
    assert {p.name: p.read_bytes() for p in d.iterdir()} == first


def test_prepare_missing_file(tmp_path, capsys):
    code, _ = run("prepare", "--data_path", tmp_path / "gone.data", "--out_dir", tmp_path)
    assert code != 0
    assert "gone.data" in capsys.readouterr().err


def test_prepare_ml100k_stats(tmp_path):
    require(ML100K / "u.data")
    code, text = run("prepare", "--data_path", ML100K / "u.data", "--out_dir", tmp_path)
    assert code == 0
    items, users, ratings, density = text.strip().splitlines()[-1].split("\t")
    assert (int(items), int(users), int(ratings)) == (1682, 943, 100000)
    assert density == "6.305"
    assert float(density) == pytest.approx(6.30, abs=0.01)


def test_train_cae_deterministic(fixture_data):
    _prepare(fixture_data)
    out = fixture_data / "out"
    code, text = run("train-cae", "--out_dir", out, "--cae_epochs", 3, "--k", 4)
    assert code == 0 and "40 x 4" in text
    first = (out / "cae" / "features.bin").read_bytes()
    run("train-cae", "--out_dir", out, "--cae_epochs", 3, "--k", 4)
    assert (out / "cae" / "features.bin").read_bytes() == first
    assert cae.load_features(out / "cae" / "features.bin").shape == (40, 4)


def test_train_cae_bad_hidden_dim(fixture_data, capsys):
    _prepare(fixture_data)
    code, _ = run("train-cae", "--out_dir", fixture_data / "out", "--hidden_dim", 0)
    assert code == 1
    assert "hidden_dim" in capsys.readouterr().err


def test_train_cae_ml100k_shape(tmp_path):
    require(ML100K / "u.data", ML100K / "u.item")
    with pytest.warns(dataset.DataWarning):
        run("prepare", "--data_path", ML100K / "u.data", "--content_path", ML100K / "u.item",
            "--out_dir", tmp_path)
    code, text = run("train-cae", "--out_dir", tmp_path, "--cae_epochs", 1)
    assert code == 0
    assert cae.load_features(tmp_path / "cae" / "features.bin").shape == (1682, 10)


def test_train_without_features_names_artifact(fixture_data, capsys):
    _prepare(fixture_data)
    code, _ = run("train", "--out_dir", fixture_data / "out", "--variant", "autosvd")
    assert code == 1
    assert "features.bin" in capsys.readouterr().err


def test_train_fixture_run(fixture_data):
    _prepare(fixture_data)
    out = fixture_data / "out"
    run("train-cae", "--out_dir", out, "--cae_epochs", 2)
    code, text = run("train", "--out_dir", out, "--variant", "autosvdpp", "--trainer",
                     "efficient", "--epochs", 5)
    assert code == 0
    assert "test rmse:" in text
    d = out / "autosvdpp-efficient"
    assert len((d / "trace.jsonl").read_text().splitlines()) == 5
    assert factor.load_model(d / "model.bin").variant == "autosvdpp"


def test_train_fixture_is_fast(fixture_data):
    _prepare(fixture_data)
    out = fixture_data / "out"
    run("train", "--out_dir", out, "--variant", "biased_svd", "--epochs", 1)  # jit warm-up
    t0 = time.perf_counter()
    code, _ = run("train", "--out_dir", out, "--variant", "biased_svd", "--epochs", 10)
    assert code == 0 and time.perf_counter() - t0 < 1.0


def test_train_ignores_features_for_plain_variant(fixture_data):
    _prepare(fixture_data)
    out = fixture_data / "out"
    run("train-cae", "--out_dir", out, "--cae_epochs", 1)
    with pytest.warns(UserWarning, match="does not use content"):
        code, _ = run("train", "--out_dir", out, "--variant", "biased_svd", "--epochs", 2,
                      "--features_path", out / "cae" / "features.bin")
    assert code == 0


def test_train_efficient_rejected_for_plain(fixture_data, capsys):
    _prepare(fixture_data)
    code, _ = run("train", "--out_dir", fixture_data / "out", "--variant", "biased_svd",
                  "--trainer", "efficient")
    assert code == 1


def test_evaluate_unknown_variant(fixture_data, capsys):
    code, _ = run("evaluate", "--data_path", fixture_data / "u.data", "--variant", "svd3",
                  "--out_dir", fixture_data / "out")
    assert code == 1
    err = capsys.readouterr().err
    assert all(v in err for v in factor.VARIANTS)


def test_evaluate_fixture(fixture_data):
    out = fixture_data / "out"
    code, text = run("evaluate", "--data_path", fixture_data / "u.data", "--content_path",
                     fixture_data / "u.item", "--variant", "autosvd", "--repetitions", 2,
                     "--epochs", 3, "--cae_epochs", 2, "--out_dir", out)
    assert code == 0 and "autosvd: mean rmse" in text
    rows = evaluation.read_tsv(out / "evaluate" / "results.tsv")
    assert len(rows) == 1 and rows[0]["repetitions"] == "2"


def test_benchmark_two_entries(fixture_data):
    code, text = run("benchmark", "--data_path", fixture_data / "u.data", "--benchmark",
                     "autosvdpp:naive,autosvdpp:efficient", "--out_dir", fixture_data / "out")
    assert code == 0
    assert "autosvdpp: naive / efficient =" in text
    rows = evaluation.read_tsv(fixture_data / "out" / "benchmark" / "timing.tsv")
    assert [r["method"] for r in rows] == ["autosvdpp", "autosvdpp[efficient]"]


def test_benchmark_bad_entry(fixture_data):
    code, _ = run("benchmark", "--data_path", fixture_data / "u.data", "--benchmark",
                  "autosvd:efficient", "--out_dir", fixture_data / "out")
    assert code == 1


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nk = 7\nepochs = 12\nvariant = svdpp\n")
    opts = cli.resolve({}, None)
    assert opts["k"] == 10 and opts["epochs"] is None
    opts = cli.resolve({}, cfg)
    assert (opts["k"], opts["epochs"], opts["variant"]) == (7, 12, "svdpp")
    opts = cli.resolve({"k": "3"}, cfg)
    assert (opts["k"], opts["epochs"]) == (3, 12)
    assert cli.train_config(opts).epochs == 12
    assert cli.train_config(cli.resolve({"variant": "svdpp"})).epochs == 20


def test_config_file_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("learning_speed = 3\n")
    assert run("train", "--config", bad, "--out_dir", tmp_path)[0] == 1
    assert "learning_speed" in capsys.readouterr().err
    assert run("train", "--config", tmp_path / "none.cfg")[0] == 1
    assert run("train", "--k", "ten", "--out_dir", tmp_path)[0] == 1


def test_hyphen_flag_alias(tmp_path):
    args = cli.build_parser().parse_args(["train", "--train-fraction", "0.5"])
    assert args.train_fraction == "0.5"


def test_no_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 1
