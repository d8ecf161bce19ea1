"""
Repeated-split experiments and report files
===========================================

Five seeded 90/10 splits per model, averaged, written as TSV tables.
This takes a couple of minutes.
"""

from pathlib import Path

from autosvd import evaluation, factor
from autosvd.dataset import SplitSpec
from _paths import ML100K

results = []
for variant in factor.VARIANTS:
    spec = evaluation.ExperimentSpec(
        data_path=str(ML100K / "u.data"), content_path=str(ML100K / "u.item"),
        split=SplitSpec(0.9, 0), variant=variant, repetitions=5, label="ml-100k")
    res = evaluation.run_experiment(spec)
    print(f"{variant:11s} {res.mean_rmse:.4f} +- {res.std_rmse:.4f}")
    results.append(res)

out = Path(__file__).resolve().parents[1] / "artifacts" / "notebook-report"
paths = evaluation.emit_report(results, out)
print(paths["accuracy"].read_text())
