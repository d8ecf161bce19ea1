import os
from pathlib import Path

DATA_DIR = Path(os.environ.get("AUTOSVD_DATA", Path(__file__).resolve().parents[1] / "data"))
ML100K = DATA_DIR / "ml-100k"
