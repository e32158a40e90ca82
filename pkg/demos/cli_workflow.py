"""End-to-end CLI walkthrough: run, sweep, compare.

Writes a config, runs it, sweeps the batch count, and compares two runs,
all through the same entry points the ``fedsim`` console script exposes.
Artifacts land in ./demo-runs.
"""

import json
import pathlib

from fedsim.cli import main

OUT = pathlib.Path("demo-runs")

CONFIG = {
    "dataset": {
        "source": "synthetic",
        "seed": 9,
        "n_train": 1000,
        "n_test": 300,
        "input_dim": 10,
        "num_classes": 5,
    },
    "model": {"hidden": [16]},
    "partition": {"kind": "iid"},
    "train": {
        "mode": "fedmmb",
        "K": 5,
        "B": 10,
        "C": 1,
        "eta": 0.05,
        "I_max": 200,
        "eval_every": 2,
        "seeds": {"init": 1, "shuffle": 2, "partition": 3},
    },
    "output": {"dir": str(OUT), "name": "smb"},
}


def run() -> None:
    OUT.mkdir(exist_ok=True)
    config_path = OUT / "smb.json.in"
    config_path.write_text(json.dumps(CONFIG, indent=2))

    print("== fedsim run ==")
    assert main(["run", str(config_path)]) == 0

    print()
    print("== fedsim sweep --set train.C=1,2,5 ==")
    assert main(["sweep", str(config_path), "--set", "train.C=1,2,5", "--target-acc", "0.7"]) == 0

    print()
    print("== fedsim compare (batch count 1 vs 5) ==")
    assert main([
        "compare",
        str(OUT / "smb-C1.csv"),
        str(OUT / "smb-C5.csv"),
        "--epsilon", "0.01",
        "--target-acc", "0.7",
    ]) == 0


if __name__ == "__main__":
    run()
