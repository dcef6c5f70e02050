import csv
import json
import xml.etree.ElementTree as ET

import jsonschema
import numpy as np
import pytest

from ordinal_bst.cli import main
from ordinal_bst.data import load_csv
from ordinal_bst.metrics import REPORT_SCHEMA
from ordinal_bst.model import OrdinalModel
from tests.test_model import MODEL_SCHEMA

SVG_NS = "{http://www.w3.org/2000/svg}"


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def small_csv(workdir):
    path = workdir / "small.csv"
    assert main(["synth", "--n", "150", "--d", "4", "--k", "5", "--noise", "0.1",
                 "--seed", "3", "--out", str(path)]) == 0
    return path


@pytest.fixture(scope="module")
def quick_config(workdir):
    path = workdir / "quick.json"
    path.write_text(json.dumps({"epochs": 15, "batch_size": 16}))
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestEvaluate:
    def test_report(self, workdir, small_csv, quick_config, capsys):
        out = workdir / "report.json"
        code = main(["evaluate", "--data", str(small_csv), "--target", "target",
                     "--config", str(quick_config), "--seed", "1", "--resamples", "100",
                     "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        jsonschema.validate(doc, REPORT_SCHEMA)
        assert doc["k_folds"] == 10 and doc["seed"] == 1
        table = capsys.readouterr().out
        assert "quadratic_kappa" in table and "mse" in table

    def test_byte_identical(self, workdir, small_csv, quick_config):
        paths = [workdir / f"rep{i}.json" for i in range(2)]
        for p in paths:
            assert main(["evaluate", "--data", str(small_csv), "--target", "target",
                         "--config", str(quick_config), "--seed", "5", "--folds", "3",
                         "--resamples", "200", "--out", str(p)]) == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_missing_target(self, workdir, small_csv, capsys):
        code = main(["evaluate", "--data", str(small_csv), "--target", "quality",
                     "--out", str(workdir / "x.json")])
        assert code == 2
        err = capsys.readouterr().err.strip()
        assert "quality" in err and "load" in err and "\n" not in err

    def test_bad_config(self, workdir, small_csv, capsys):
        cfg = workdir / "bad.json"
        cfg.write_text(json.dumps({"epochs": 3, "momentum": 0.9}))
        code = main(["evaluate", "--data", str(small_csv), "--target", "target",
                     "--config", str(cfg), "--out", str(workdir / "x.json")])
        assert code == 2
        assert "momentum" in capsys.readouterr().err

    def test_training_failure_exit_code(self, workdir, small_csv, capsys):
        cfg = workdir / "diverge.json"
        cfg.write_text(json.dumps({"epochs": 2, "learning_rate": 1e306, "optimizer": "sgd"}))
        with np.errstate(all="ignore"):
            code = main(["evaluate", "--data", str(small_csv), "--target", "target",
                         "--config", str(cfg), "--folds", "2", "--out", str(workdir / "x.json")])
        assert code == 1
        assert "fold 0" in capsys.readouterr().err


class TestTrainPredict:
    def test_train_then_predict_noise_free(self, workdir):
        data = workdir / "fixture.csv"
        assert main(["synth", "--n", "2000", "--d", "5", "--k", "8", "--noise", "0",
                     "--seed", "0", "--out", str(data)]) == 0
        model_path = workdir / "model.json"
        assert main(["train", "--data", str(data), "--target", "target", "--seed", "0",
                     "--out", str(model_path)]) == 0
        jsonschema.validate(json.loads(model_path.read_text()), MODEL_SCHEMA)
        preds = workdir / "preds.csv"
        assert main(["predict", "--model", str(model_path), "--data", str(data),
                     "--target", "target", "--out", str(preds)]) == 0
        rows = read_rows(preds)
        truth = load_csv(data, "target").labels
        assert len(rows) == len(truth)
        predicted = np.array([int(r["predicted_rank"]) for r in rows])
        assert np.mean(predicted == truth) >= 0.95
        probs = np.array([[float(r[f"p_{k}"]) for k in range(8)] for r in rows])
        assert np.all(np.abs(probs.sum(axis=1) - 1) < 1e-9)
        assert all(r["predicted_label"] == r["predicted_rank"] for r in rows)

    def test_saved_model_reproduces_predictions(self, workdir, small_csv, quick_config):
        model_path = workdir / "m.json"
        assert main(["train", "--data", str(small_csv), "--target", "target",
                     "--config", str(quick_config), "--out", str(model_path)]) == 0
        a, b = workdir / "pa.csv", workdir / "pb.csv"
        main(["predict", "--model", str(model_path), "--data", str(small_csv),
              "--target", "target", "--out", str(a)])
        OrdinalModel.load(model_path).save(workdir / "m2.json")
        main(["predict", "--model", str(workdir / "m2.json"), "--data", str(small_csv),
              "--target", "target", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_original_labels_in_output(self, workdir, quick_config):
        data = workdir / "words.csv"
        rows = ["x1,x2,grade"] + [f"{i % 7},{(i * 3) % 5},{['low', 'mid', 'high'][i % 3]}"
                                   for i in range(30)]
        data.write_text("\n".join(rows) + "\n")
        model_path = workdir / "w.json"
        assert main(["train", "--data", str(data), "--target", "grade", "--order",
                     "low,mid,high", "--config", str(quick_config), "--out", str(model_path)]) == 0
        preds = workdir / "w.csv"
        assert main(["predict", "--model", str(model_path), "--data", str(data),
                     "--target", "grade", "--out", str(preds)]) == 0
        out = read_rows(preds)
        assert {r["predicted_label"] for r in out} <= {"low", "mid", "high"}
        assert list(out[0]) == ["row", "predicted_rank", "predicted_label", "p_0", "p_1", "p_2"]

    def test_feature_count_mismatch(self, workdir, small_csv, quick_config, capsys):
        model_path = workdir / "m3.json"
        main(["train", "--data", str(small_csv), "--target", "target",
              "--config", str(quick_config), "--out", str(model_path)])
        other = workdir / "other.csv"
        other.write_text("a,b,target\n1,2,0\n")
        code = main(["predict", "--model", str(model_path), "--data", str(other),
                     "--target", "target", "--out", str(workdir / "p.csv")])
        assert code == 2
        err = capsys.readouterr().err
        assert "expects 4" in err and "found 2" in err


class TestProject:
    def test_svg_and_csv(self, workdir, small_csv, quick_config):
        prefix = workdir / "proj"
        assert main(["project", "--data", str(small_csv), "--target", "target",
                     "--config", str(quick_config), "--hidden", "2", "--seed", "2",
                     "--out", str(prefix)]) == 0
        root = ET.parse(str(prefix) + ".svg").getroot()
        assert root.tag == SVG_NS + "svg"
        circles = root.findall(f".//{SVG_NS}circle")
        assert len(circles) == 150
        w, h = float(root.get("width")), float(root.get("height"))
        for c in circles:
            assert 0 <= float(c.get("cx")) <= w and 0 <= float(c.get("cy")) <= h
        legend = root.find(f".//{SVG_NS}g[@id='legend']")
        assert len(legend.findall(f"{SVG_NS}rect")) == 5
        rows = read_rows(str(prefix) + ".csv")
        assert len(rows) == 150 and list(rows[0]) == ["row", "rank", "label", "e0", "e1"]

    def test_deterministic_csv(self, workdir, small_csv, quick_config):
        outs = []
        for i in range(2):
            prefix = workdir / f"det{i}"
            main(["project", "--data", str(small_csv), "--target", "target", "--config",
                  str(quick_config), "--hidden", "2", "--seed", "8", "--out", str(prefix)])
            outs.append((str(prefix) + ".csv", str(prefix) + ".svg"))
        for a, b in zip(*outs):
            assert open(a, "rb").read() == open(b, "rb").read()

    def test_svg_needs_two_dimensions(self, workdir, small_csv, quick_config, capsys):
        code = main(["project", "--data", str(small_csv), "--target", "target", "--config",
                     str(quick_config), "--hidden", "3", "--svg", "--out", str(workdir / "p3")])
        assert code == 2
        assert "--no-svg" in capsys.readouterr().err

    def test_csv_for_any_hidden_size(self, workdir, small_csv, quick_config):
        prefix = workdir / "p3csv"
        assert main(["project", "--data", str(small_csv), "--target", "target", "--config",
                     str(quick_config), "--hidden", "3", "--out", str(prefix)]) == 0
        assert len(read_rows(str(prefix) + ".csv")) == 150
        assert not (workdir / "p3csv.svg").exists()

    def test_from_saved_model(self, workdir, small_csv, quick_config):
        model_path = workdir / "h2.json"
        main(["train", "--data", str(small_csv), "--target", "target", "--hidden", "2",
              "--config", str(quick_config), "--out", str(model_path)])
        prefix = workdir / "frommodel"
        assert main(["project", "--model", str(model_path), "--data", str(small_csv),
                     "--target", "target", "--out", str(prefix)]) == 0
        assert (workdir / "frommodel.svg").exists()


class TestGradcheck:
    def test_random_model(self, capsys):
        assert main(["gradcheck", "--d", "3", "--k", "6", "--seed", "1", "--samples", "2"]) == 0
        assert capsys.readouterr().out.startswith("PASS")

    def test_saved_model(self, workdir, small_csv, quick_config, capsys):
        model_path = workdir / "gc.json"
        main(["train", "--data", str(small_csv), "--target", "target",
              "--config", str(quick_config), "--out", str(model_path)])
        assert main(["gradcheck", "--model", str(model_path), "--samples", "1"]) == 0
