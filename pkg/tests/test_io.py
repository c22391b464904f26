import json

import numpy as np
import pytest

from painmil.exceptions import ParseError
from painmil.io import (
    config_hash,
    header_line,
    load_model,
    provenance,
    read_bags,
    read_predictions,
    read_segments,
    save_model,
    write_bags,
    write_features,
    write_predictions,
    write_segments,
)
from painmil.mcil import MCILBoostClassifier
from painmil.milboost import MILBoostClassifier
from painmil.segmentation import Segment


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    prov = provenance({"a": 1}, 7)
    assert header_line(prov).startswith("painmil ") and "seed=7" in header_line(prov)


@pytest.mark.parametrize("learner", ["mil", "mcil"])
def test_model_round_trip_is_bit_exact(tmp_path, clustered_bags, learner):
    X = [b.instances for b in clustered_bags]
    y = [b.label for b in clustered_bags]
    est = MCILBoostClassifier(n_rounds=6) if learner == "mcil" else MILBoostClassifier(n_rounds=6)
    est.fit(X, y)
    path = tmp_path / "model.json"
    save_model(est, path, "clustered", provenance({"x": 1}, 3))
    model, encoding = load_model(path)
    assert encoding == "clustered"
    assert type(model) is type(est)
    assert model.get_params() == est.get_params()
    np.testing.assert_array_equal(model.decision_function(X), est.decision_function(X))
    np.testing.assert_array_equal(np.asarray(model.localize(X)), np.asarray(est.localize(X)))
    doc = json.loads(path.read_text())
    assert doc["provenance"]["seed"] == 3
    if learner == "mcil":
        assert {row["cluster"] for row in doc["stumps"]} <= set(range(6))
    save_model(model, tmp_path / "again.json", "clustered", provenance({"x": 1}, 3))
    assert (tmp_path / "again.json").read_bytes() == path.read_bytes()


@pytest.mark.parametrize(
    "text", ["not json", '{"format": "other"}', '{"format": "painmil-model", "version": 99}',
             '{"format": "painmil-model", "version": 1, "params": {}}']
)
def test_bad_model_files(tmp_path, text):
    p = tmp_path / "m.json"
    p.write_text(text)
    with pytest.raises(ParseError):
        load_model(p)


@pytest.mark.parametrize("encoding", ["compact", "clustered"])
def test_bag_round_trip(tmp_path, small_sequences, encoding):
    from painmil.bow import make_bags

    bags = make_bags(small_sequences[:5], encoding, "scwind")
    path = tmp_path / "bags.csv"
    write_bags(bags, path, provenance({}, 0))
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# painmil")
    assert lines[1].startswith("sequence_id,label,segment_start,segment_end,f0,f1")
    back = read_bags(path)
    assert [b.sequence_id for b in back] == [b.sequence_id for b in bags]
    for a, b in zip(bags, back):
        assert b.encoding == encoding and b.label == a.label
        np.testing.assert_array_equal(a.instances, b.instances)
        assert [(s.start, s.end) for s in a.segments] == [(s.start, s.end) for s in b.segments]


def test_bag_header_checked(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("sequence_id,label,segment_start,segment_end,f0\n")
    with pytest.raises(ParseError):
        read_bags(p)


def test_segments_round_trip(tmp_path):
    segs = {"a": [Segment(0, 29, "a", "scwind"), Segment(15, 44, "a", "scwind")], "b": [Segment(0, 9, "b", "ncut")]}
    write_segments(segs, tmp_path / "s.csv", provenance())
    back = read_segments(tmp_path / "s.csv")
    assert back == segs


def test_feature_dump(tmp_path, small_sequences):
    write_features(small_sequences[:2], "compact", tmp_path / "f.csv", provenance())
    rows = (tmp_path / "f.csv").read_text().splitlines()
    assert rows[1].split(",")[:3] == ["sequence_id", "frame_index", "P(6)"]
    assert len(rows) == 2 + sum(len(s) for s in small_sequences[:2])


def test_predictions_round_trip(tmp_path):
    records = [
        {"sequence_id": "a", "score": 0.7, "label": 1, "argmax_cluster": 3, "segment": Segment(10, 40)},
        {"sequence_id": "b", "score": 0.2, "label": -1, "argmax_cluster": None, "segment": Segment(0, 20)},
    ]
    write_predictions(records, tmp_path / "p.csv", provenance())
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[1] == "sequence_id,score,label,argmax_cluster,argmax_segment_start,argmax_segment_end"
    assert lines[2] == "a,0.7,1,3,10,40"
    assert read_predictions(tmp_path / "p.csv") == {"a": 1, "b": -1}
