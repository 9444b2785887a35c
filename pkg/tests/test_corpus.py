import json

import numpy as np
import pytest

from selzip.corpus import TINY_MAX, CorpusSpec, ItemClass, generate_corpus, preset, random_payload, text_payload
from selzip.training import read_manifest


def ratio(codec, data):
    return len(data) / len(codec.compress(data))


def test_text_item_ratio(codec):
    data = text_payload(1 << 20, np.random.default_rng(0))
    assert len(data) == 1 << 20
    assert 3.0 <= ratio(codec, data) <= 6.0


def test_random_item_ratio(codec):
    data = random_payload(256 * 1024, np.random.default_rng(0))
    assert 0.99 <= ratio(codec, data) <= 1.01


def test_presets_and_tiny_bound(tmp_path):
    manifest = generate_corpus(preset("mixed", 40, seed=3), tmp_path)
    recs = read_manifest(manifest)
    assert len(recs) == 40
    labels = [r["label"] for r in recs]
    assert labels.count("text") == 20 and labels.count("image") == 12 and labels.count("sensor") == 8
    for r in recs:
        n = r["resolved"].stat().st_size
        if r["profile"] == "tiny":
            assert n <= TINY_MAX
        else:
            assert n >= 8 * 1024
    assert json.loads((tmp_path / "corpus.json").read_text())["seed"] == 3


def test_same_seed_identical(tmp_path):
    a = generate_corpus(preset("mixed", 25, seed=9), tmp_path / "a")
    b = generate_corpus(preset("mixed", 25, seed=9), tmp_path / "b")
    assert a.read_text() == b.read_text()
    for ra, rb in zip(read_manifest(a), read_manifest(b)):
        assert ra["resolved"].read_bytes() == rb["resolved"].read_bytes()
    c = generate_corpus(preset("mixed", 25, seed=10), tmp_path / "c")
    assert any(ra["resolved"].read_bytes() != rc["resolved"].read_bytes()
               for ra, rc in zip(read_manifest(a), read_manifest(c)))


def test_spec_roundtrip_and_validation():
    spec = preset("mixed", 10, 1)
    assert CorpusSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ValueError):
        ItemClass("x", "video", 1)
    with pytest.raises(ValueError):
        preset("nope", 1)


def test_groups(tmp_path):
    spec = CorpusSpec((ItemClass("text", "text", 25, 1000, 2000),), seed=0, group_size=10)
    recs = read_manifest(generate_corpus(spec, tmp_path))
    assert [r["group"] for r in recs].count("g0000") == 10
    assert recs[-1]["group"] == "g0002"
