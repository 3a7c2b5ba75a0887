import json
import math
import pathlib

import pytest

import spe

ROOT = pathlib.Path(__file__).resolve().parents[2]


def test_metrics_match_hand_values():
    assert spe.spearman([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-15)
    assert spe.pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-15)
    assert spe.fractional_ranks([7, 3, 7, 1]) == [3.5, 2, 3.5, 1]
    assert spe.mae([1, 2], [2, 0]) == 1.5


def test_errors_map_to_python_exceptions():
    with pytest.raises(spe.UndefinedCorrelation):
        spe.pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(spe.ValidationError):
        spe.mae([1], [1, 2])
    with pytest.raises(spe.SpeError):
        spe.load_project(str(ROOT / "missing.csv"))
    assert issubclass(spe.SpeError, ValueError)


def test_hashing_and_tokens():
    assert spe.fnv1a64("") == 0xCBF29CE484222325
    assert spe.fnv1a64("foobar") == 0x85944171F73967E8
    assert spe.tokenize("Fix the Login-page, v2!") == ["fix", "the", "login", "page", "v2"]


def test_fixture_summary():
    d = spe.load_project(str(ROOT / "data" / "projects" / "usergrid.csv"))
    s = d.summary()
    assert (s["size"], s["min_sp"], s["max_sp"]) == (482, 1, 8)
    assert len(d) == 482
    assert set(d.items()[0]) == {"id", "title", "description", "story_point", "split"}


def test_tfidf_rows_are_unit_norm():
    model = spe.HashedTfidf.fit(["a b", "b c", "c d d"], 16)
    v = model.embed("b d")
    assert len(v) == 16
    assert math.sqrt(sum(x * x for x in v)) == pytest.approx(1.0)


def test_synthetic_training_ranks_test_items():
    syn = spe.make_synthetic(n=200, dim=8)
    d = syn["dataset"]
    pairs = spe.simulate_pairs(d, 1, 3)
    assert len(pairs["pairs"]) + pairs["shortfall"] == d.summary()["train"]
    model = spe.train_comparative(pairs["pairs"], syn["embeddings"], config=json.dumps({"max_epochs": 50}))
    assert model["b"] == 0.0
    assert len(model["train_loss"]) == 50
    test = [it for it in d.items() if it["split"] == "test"]
    pred = [spe.score(model["w"], model["b"], syn["embeddings"][it["id"]]) for it in test]
    assert spe.spearman(pred, [it["story_point"] for it in test]) > 0.7


def test_default_configs():
    cfg = json.loads(spe.default_train_config("comparative-val"))
    assert cfg["max_epochs"] == 300
    assert cfg["lr_start"] == 0.001
    assert json.loads(spe.default_train_config("regression"))["max_epochs"] == 600


def test_experiment_round_trip(tmp_path):
    syn = spe.make_synthetic(n=100, dim=6)
    syn["dataset"].save(str(tmp_path / "toy.csv"))
    with open(tmp_path / "toy.embeddings.jsonl", "w") as f:
        for key, vec in syn["embeddings"].items():
            f.write(json.dumps({"id": key, "vector": vec}) + "\n")
    config = {
        "projects": [str(tmp_path / "toy.csv")],
        "feature_source": "embedding-files",
        "models": ["comparative-noval"],
        "k_values": [1],
        "repeats_comparative": 2,
        "train_overrides": {"all": {"max_epochs": 10}},
    }
    report = spe.run_experiment(config)
    assert report["errors"] == []
    assert report["entries"][0]["model"] == "comparative-noval"
    assert len(report["entries"][0]["repeats"]) == 2
    assert "toy" in spe.render_report(report)
