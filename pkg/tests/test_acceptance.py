"""Exit criteria for the package, one test per criterion.

Each test records a PASS/FAIL line that is printed in the pytest terminal
summary under "acceptance criteria".
"""

import json
import math
import os
import time
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from ordinal_bst.cli import main
from ordinal_bst.data import load_csv, synthesize
from ordinal_bst.encoding import decode_bits, encode_state, tree_depth
from ordinal_bst.metrics import PredictionSet, cross_validate, quadratic_kappa
from ordinal_bst.model import (
    PARAM_NAMES,
    leaf_distribution,
    predict_distribution,
    project,
    teacher_forcing_loss,
)
from ordinal_bst.training import TrainConfig, gradient_check
from tests.conftest import random_model
from tests.test_metrics import kappa_oracle
from tests.test_model import brute_force_leaves

RESULTS = {}
REFERENCE = Path(__file__).parent / "reference" / "learnability_run.json"


def record(number, ok, detail):
    RESULTS[number] = ("PASS" if ok else "FAIL", detail)
    assert ok, f"criterion {number}: {detail}"


def test_1_gradient_correctness():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst, where = 0.0, None
    configs = 0
    for _ in range(25):
        d, h = (int(v) for v in rng.integers(1, 5, size=2))
        n = int(rng.integers(1, 5))
        k = int(rng.integers(2 ** (n - 1) + 1, 2 ** n + 1))
        model = random_model(rng, d, k, h)
        rep = gradient_check(model, rng.normal(size=d), int(rng.integers(k)),
                             tolerance=1e-5, step=1e-6)
        configs += 1
        if rep.max_rel_error > worst:
            worst, where = rep.max_rel_error, rep.worst_param
    elapsed = time.perf_counter() - start
    record(1, configs >= 20 and worst < 1e-5 and elapsed < 10,
           f"{configs} configs, max rel. error {worst:.2e} ({where}) < 1e-5, {elapsed:.1f}s < 10s")


def test_2_distribution_normalization():
    rng = np.random.default_rng(2)
    worst_leaf = worst_trunc = 0.0
    padding_ok = True
    for _ in range(100):
        n = int(rng.integers(1, 7))
        k = int(rng.integers(2 ** (n - 1) + 1, 2 ** n + 1)) if n > 1 else 2
        d = int(rng.integers(1, 6))
        model = random_model(rng, d, k, int(rng.integers(1, 5)))
        x = rng.normal(size=d)
        worst_leaf = max(worst_leaf, abs(leaf_distribution(model, x).sum() - 1))
        dist = predict_distribution(model, x)
        worst_trunc = max(worst_trunc, abs(dist.sum() - 1))
        # the output covers exactly the k valid states; no mass is left on padding leaves
        padding_ok &= dist.shape == (k,) and bool(np.all(dist >= 0))
    record(2, worst_leaf < 1e-9 and worst_trunc < 1e-9 and padding_ok,
           f"pre-truncation |sum-1| max {worst_leaf:.1e}, post-truncation {worst_trunc:.1e}, "
           f"padding mass zero: {padding_ok}")


def test_3_oracle_equivalence():
    rng = np.random.default_rng(3)
    worst_tree = worst_tf = 0.0
    for n in range(1, 7):
        for _ in range(4):
            k = int(rng.integers(2 ** (n - 1) + 1, 2 ** n + 1)) if n > 1 else 2
            model = random_model(rng, 3, k, int(rng.integers(1, 5)))
            x = rng.normal(size=3)
            brute = brute_force_leaves(model, x)
            tree = leaf_distribution(model, x)
            worst_tree = max(worst_tree, float(np.max(np.abs(tree - brute) / brute)))
            for y in range(k):
                loss, _ = teacher_forcing_loss(model, x, y)
                worst_tf = max(worst_tf, abs(math.exp(-loss) - tree[y]) / tree[y])
    record(3, worst_tree < 1e-9 and worst_tf < 1e-9,
           f"tree vs brute force rel. error {worst_tree:.1e}, "
           f"exp(-loss) vs leaf rel. error {worst_tf:.1e} (< 1e-9)")


def test_4_encoding_suite():
    ok = tree_depth(8) == 3 and tree_depth(6) == 3
    for k in range(2, 65):
        n = tree_depth(k)
        ok &= 2 ** (n - 1) < k <= 2 ** n
        codes = [encode_state(y, n) for y in range(2 ** n)]
        ok &= len(set(codes)) == 2 ** n
        ok &= all(decode_bits(c) == y for y, c in enumerate(codes))
    record(4, ok, "bijection for K in [2, 64]; depth(8) = 3, depth(6) = 3")


def test_5_learnability():
    fixture = synthesize(2000, 5, 8, 0.0, seed=0)
    start = time.perf_counter()
    report = cross_validate(fixture, TrainConfig(), k_folds=10, seed=0)
    elapsed = time.perf_counter() - start
    m = {k: v["point"] for k, v in report.metrics.items()}
    reference = json.loads(REFERENCE.read_text())["report"]["metrics"]
    ok = (m["accuracy"] >= 0.90 and m["quadratic_kappa"] >= 0.95 and m["mse"] <= 0.15
          and elapsed < 120)
    record(5, ok,
           f"accuracy {m['accuracy']:.4f} >= 0.90, kappa {m['quadratic_kappa']:.4f} >= 0.95, "
           f"mse {m['mse']:.4f} <= 0.15, {elapsed:.0f}s < 120s "
           f"(recorded reference: {reference['accuracy']['point']:.4f}/"
           f"{reference['quadratic_kappa']['point']:.4f}/{reference['mse']['point']:.4f})")


def test_6_metric_oracles():
    rng = np.random.default_rng(6)
    worst = 0.0
    checked = 0
    while checked < 50:
        k = int(rng.integers(2, 9))
        size = int(rng.integers(2, 80))
        y, p = rng.integers(0, k, size), rng.integers(0, k, size)
        if len(set(y)) == 1 and len(set(p)) == 1 and y[0] == p[0]:
            continue
        worst = max(worst, abs(quadratic_kappa(PredictionSet(y, p, k)) - kappa_oracle(y, p, k)))
        checked += 1
    y = rng.integers(0, 7, 500)
    perfect = quadratic_kappa(PredictionSet(y, y, 7))
    ind = np.random.default_rng(60)
    independent = quadratic_kappa(PredictionSet(ind.integers(0, 6, 10000),
                                                ind.integers(0, 6, 10000), 6))
    record(6, worst < 1e-12 and perfect == 1.0 and abs(independent) < 0.05,
           f"50 sets max |kappa - oracle| {worst:.1e} < 1e-12, perfect = {perfect}, "
           f"independent |kappa| = {abs(independent):.4f} < 0.05")


WINE_ENV = "ORDINAL_BST_WINEQUALITY_RED"


def test_7_winequality_diagnostic(tmp_path):
    """Non-gating: runs only when the benchmark CSV is supplied."""
    path = os.environ.get(WINE_ENV)
    if not path or not Path(path).exists():
        RESULTS[7] = ("SKIP", f"non-gating; set {WINE_ENV} to the winequality_red CSV to run")
        pytest.skip(f"{WINE_ENV} not set")
    ds = load_csv(path, os.environ.get(WINE_ENV + "_TARGET", "quality"))
    report = cross_validate(ds, TrainConfig(), k_folds=10, seed=0)
    m = {k: v["point"] for k, v in report.metrics.items()}
    ok = (abs(100 * m["accuracy"] - 57.9) <= 8 and abs(100 * m["quadratic_kappa"] - 50.4) <= 10
          and abs(m["mse"] - 0.56) <= 0.2)
    RESULTS[7] = ("PASS" if ok else "FAIL", f"(non-gating) accuracy {100 * m['accuracy']:.1f} vs 57.9 +-8, "
                      f"kappa {100 * m['quadratic_kappa']:.1f} vs 50.4 +-10, "
                      f"mse {m['mse']:.2f} vs 0.56 +-0.2; shape {ds.features.shape}, K={ds.k_states}")


def test_8_determinism(tmp_path):
    data = tmp_path / "fixture.csv"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 20}))
    assert main(["synth", "--n", "400", "--d", "5", "--k", "8", "--noise", "0.2",
                 "--seed", "8", "--out", str(data)]) == 0
    outs = []
    for i in range(2):
        out = tmp_path / f"report{i}.json"
        assert main(["evaluate", "--data", str(data), "--target", "target", "--config", str(cfg),
                     "--seed", "8", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    record(8, outs[0] == outs[1], f"two evaluate runs, {len(outs[0])} bytes, identical: "
                                  f"{outs[0] == outs[1]}")


def test_9_projection(tmp_path):
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(3, 8))
        model = random_model(rng, d, 6, 2)
        x1, x2, a = rng.normal(size=d), rng.normal(size=d), rng.uniform()
        lhs = project(model, (a * x1 + (1 - a) * x2)[None, :])
        rhs = a * project(model, x1[None, :]) + (1 - a) * project(model, x2[None, :])
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    data = tmp_path / "fixture.csv"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 10}))
    main(["synth", "--n", "250", "--d", "5", "--k", "6", "--seed", "9", "--out", str(data)])
    code = main(["project", "--data", str(data), "--target", "target", "--hidden", "2",
                 "--config", str(cfg), "--out", str(tmp_path / "emb")])
    root = ET.parse(tmp_path / "emb.svg").getroot()
    circles = root.findall(".//{http://www.w3.org/2000/svg}circle")
    record(9, worst < 1e-12 and code == 0 and len(circles) == 250,
           f"midpoint affinity max error {worst:.1e} < 1e-12 on 100 triples; "
           f"SVG well-formed with {len(circles)} points for 250 samples")
