import json
import math
from pathlib import Path

import pytest

import ccgen

ROOT = Path(__file__).resolve().parents[2]
CONFIGS = ROOT / "configs"


def test_tokenize():
    assert ccgen.tokenize("  Chest PAIN\tx2 ") == ["chest", "pain", "x2"]


def test_overlap_identical_and_disjoint():
    same = ccgen.ngram_overlap("chest pain", "chest pain")
    assert same == {"ppv": 1.0, "sens": 1.0, "f1": 1.0}
    none = ccgen.ngram_overlap("chest pain", "fall")
    assert none["f1"] == 0.0


def test_overlap_counts_ngrams():
    # n is capped at the shorter length (2): ref has a, b, c, a b, b c (5),
    # cand has a, b, a b (3), all shared
    r = ccgen.ngram_overlap("a b c", "a b")
    assert r["ppv"] == pytest.approx(1.0)
    assert r["sens"] == pytest.approx(0.6)


def test_cider_finite():
    scores = ccgen.cider(["fall", "chest pain"], ["fall", "back pain"])
    assert len(scores) == 2
    assert all(math.isfinite(s) for s in scores)
    with pytest.raises(ccgen.ValidationError):
        ccgen.cider(["a"], [])


def test_weighted_metrics_perfect():
    r = ccgen.weighted_metrics([0, 1, 1, 2], [0, 1, 1, 2])
    assert r["f1"] == pytest.approx(1.0)


def test_ratio():
    r = ccgen.ratio_from_counts(10, 100, 5, 100)
    assert r["risk_ratio"] == pytest.approx(2.0)


def test_schema_round_trip():
    schema = ccgen.RecordSchema.load(str(CONFIGS / "schema_table1.json"))
    values = [[0] if i == 0 else [] for i in range(len(schema.names))]
    bits = schema.encode(values)
    assert schema.decode(bits) == values


def test_synth_deterministic():
    a = ccgen.synth_corpus(str(CONFIGS / "toy_corpus.json"), 3, 50)
    b = ccgen.synth_corpus(str(CONFIGS / "toy_corpus.json"), 3, 50)
    assert len(a) == 50
    assert a == b


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"seed": 1, "schema": str(CONFIGS / "schema_table1.json"), "typo": 1}))
    with pytest.raises(ccgen.ValidationError):
        ccgen.RunConfig.load(str(bad))


def test_small_pipeline(tmp_path):
    overrides = {
        "paths": {
            "data": str(tmp_path / "pairs.csv"),
            "prepared": str(tmp_path / "prepared"),
            "checkpoints": str(tmp_path / "checkpoints"),
            "outputs": str(tmp_path / "outputs"),
        },
        "synth": {"size": 2000},
        "preprocess": {"min_freq": 5, "test_size": 100},
        "model": {"hidden": 12},
        "pretrain": {"enabled": False},
        "train": {"max_epochs": 1, "batch": 256},
    }
    cfg = ccgen.RunConfig.load(str(CONFIGS / "run_toy.json"), overrides)
    ccgen.synth_data(cfg)
    ccgen.preprocess(cfg)
    ccgen.train(cfg)
    out = ccgen.generate(cfg, scheme="greedy", limit=10)
    rows = [json.loads(line) for line in Path(out).read_text().splitlines()]
    assert len(rows) == 10

    model = ccgen.Model(str(tmp_path / "checkpoints" / "seq2seq.ccf"), str(tmp_path / "prepared" / "vocab.tsv"))
    bits = json.loads((tmp_path / "prepared" / "test.jsonl").read_text().splitlines()[0])["record_bits"]
    g = model.greedy(bits)
    beams = model.beam(bits, k=1)
    assert beams[0]["tokens"] == g["tokens"]
    assert model.log_prob(bits, g["text"]) == pytest.approx(g["log_prob"], abs=1e-4)
    s1 = model.sample(bits, t=1.0, seed=4)
    s2 = model.sample(bits, t=1.0, seed=4)
    assert s1 == s2
