"""
Batch runs from a config file
=============================

Every experiment can be driven by one JSON file; command-line flags
override it. Reruns with the same config and seed write identical files.
"""

import json
import tempfile
from pathlib import Path

from gameopt.cli import main

config = {
    "command": "price",
    "market": {"z": 110.0, "r": 0.04, "kappa": 0.2, "T": 1.0},
    "payoff": {"kind": "put", "strike": 100.0},
    "penalty": {"kind": "const", "value": 5.0},
    "n": 64,
}

with tempfile.TemporaryDirectory() as tmp:
    cfg = Path(tmp) / "run.json"
    cfg.write_text(json.dumps(config))
    main(["--config", str(cfg), "--out", f"{tmp}/price"])
    main(["--config", str(cfg), "--command", "hedge", "--n", "16", "--paths", "200",
          "--out", f"{tmp}/hedge"])
    print(sorted(p.name for p in Path(tmp, "hedge").iterdir()))

    # a missing strike is reported by field name with exit code 2
    config["payoff"] = {"kind": "put"}
    cfg.write_text(json.dumps(config))
    print("exit code:", main(["--config", str(cfg), "--out", f"{tmp}/bad"]))
