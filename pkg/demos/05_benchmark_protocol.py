"""
The repeated-split benchmark
============================

Duplicates are collapsed first, then every iteration draws a fresh
seeded split. Results land in CSV and JSON files.
"""

import json
from pathlib import Path

from tensorprop import cli
from tensorprop.synthetic import formula_records, write_formula_csv

# %%
# A synthetic band-gap-like dataset of binary compounds.
out = Path("benchmark_demo")
out.mkdir(exist_ok=True)
write_formula_csv(out / "data.csv", formula_records(n_elements=14, max_count=6, noise=0.05, seed=0))

config = {
    "dataset": "data.csv",
    "train_count": 1000,
    "iterations": 3,
    "samples_k": 4,
    "tensorize": {"max_count": 6},
    "models": {"cpd": {"rank": 4}, "cpd_s": {"rank": 4}, "neat": {"epochs": 100}, "mlp": {"epochs": 100}},
}
(out / "run.json").write_text(json.dumps(config, indent=2))

# %%
# Same call as ``tensorprop benchmark benchmark_demo/run.json``.
cli.main(["benchmark", str(out / "run.json"), "--output-dir", str(out)])
print((out / "results.csv").read_text())
print((out / "samples.csv").read_text())

# %%
# MAE against training-set size.
cli.main(["sweep", str(out / "run.json"), "--sizes", "250,500,1000", "--output-dir", str(out)])
print((out / "sweep.csv").read_text())
