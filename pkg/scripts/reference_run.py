"""Record the learnability reference run checked by the acceptance suite.

Usage: python scripts/reference_run.py [output.json]
"""

import json
import sys
import time

from ordinal_bst.data import synthesize
from ordinal_bst.metrics import cross_validate
from ordinal_bst.training import TrainConfig

FIXTURE = {"n_samples": 2000, "d_features": 5, "k_states": 8, "noise_std": 0.0, "seed": 0}
CV_SEED = 0


def main(out="tests/reference/learnability_run.json"):
    ds = synthesize(**FIXTURE)
    start = time.perf_counter()
    report = cross_validate(ds, TrainConfig(), k_folds=10, seed=CV_SEED)
    elapsed = time.perf_counter() - start
    doc = {"fixture": FIXTURE, "cv_seed": CV_SEED, "seconds": round(elapsed, 1),
           "report": report.to_dict()}
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(report.table())
    print(f"{elapsed:.1f}s -> {out}")


if __name__ == "__main__":
    main(*sys.argv[1:])
