import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from simfilter.errors import DataError
from simfilter.metrics import (PredictionRow, accuracy, auc_binary, auc_ovr_macro, confusion,
                               evaluate, f1_macro, per_class_recall, read_predictions,
                               recall_macro, write_predictions)


def _row(i, true, scores):
    pred = min(scores, key=lambda c: (-scores[c], c))
    return PredictionRow(f"x{i}", true, pred, scores)


def test_confusion_orientation():
    rows = [PredictionRow("1", "a", "b"), PredictionRow("2", "a", "a"), PredictionRow("3", "b", "b")]
    cm = confusion(rows)
    assert cm.labels == ("a", "b")
    assert cm.counts.tolist() == [[1, 1], [0, 1]]
    assert per_class_recall(cm) == {"a": 0.5, "b": 1.0}


def test_zero_support_class():
    rows = [PredictionRow("1", "a", "a"), PredictionRow("2", "a", "c")]
    cm = confusion(rows)
    with pytest.raises(DataError):
        recall_macro(cm)
    assert recall_macro(cm, allow_zero_support=True) == 0.5
    assert f1_macro(cm, allow_zero_support=True) == pytest.approx(2 / 3)


def test_unknown_label():
    with pytest.raises(DataError):
        confusion([PredictionRow("1", "a", "z")], labels=["a", "b"])


def test_auc_all_tied_is_half():
    rows = [_row(i, t, {"p": 0.5, "n": 0.5}) for i, t in enumerate("ppnn")]
    assert auc_binary(rows, "p") == 0.5


def test_auc_needs_both_classes():
    rows = [_row(0, "p", {"p": 0.9, "n": 0.1})]
    with pytest.raises(DataError):
        auc_binary(rows, "p")


score_rows = st.lists(
    st.tuples(st.sampled_from(["a", "b", "c"]),
              st.lists(st.integers(0, 10), min_size=3, max_size=3)),
    min_size=4, max_size=40)


@settings(max_examples=150, deadline=None)
@given(score_rows)
def test_auc_matches_pair_oracle(raw):
    rows = [_row(i, t, {c: v / 10 for c, v in zip("abc", s)}) for i, (t, s) in enumerate(raw)]
    truth = {r.true_class for r in rows}
    for c in "abc":
        pos = [r.scores[c] for r in rows if r.true_class == c]
        neg = [r.scores[c] for r in rows if r.true_class != c]
        if pos and neg:
            assert abs(auc_binary(rows, c) - oracles.pair_auc(pos, neg)) <= 1e-12
    if truth == set("abc"):
        want = oracles.ovr_auc([{"true": r.true_class, "scores": r.scores} for r in rows], "abc")
        assert abs(auc_ovr_macro(rows) - want) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(score_rows, st.sampled_from([0.25, 0.5, 2.0, 8.0]), st.integers(-3, 3))
def test_auc_invariant_to_monotone_rescaling(raw, scale, offset):
    # power-of-two scales and small integer offsets keep every tie and every order
    rows = [_row(i, t, {c: v / 10 for c, v in zip("abc", s)}) for i, (t, s) in enumerate(raw)]
    if {r.true_class for r in rows} != set("abc"):
        return
    moved = [PredictionRow(r.image_id, r.true_class, r.predicted_class,
                           {c: v * scale + offset for c, v in r.scores.items()}) for r in rows]
    assert abs(auc_ovr_macro(rows) - auc_ovr_macro(moved)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("xyz"), st.sampled_from("xyz")), min_size=1, max_size=50))
def test_label_metric_bounds(pairs):
    rows = [PredictionRow(str(i), t, p) for i, (t, p) in enumerate(pairs)]
    cm = confusion(rows)
    assert 0.0 <= accuracy(cm) <= 1.0
    assert cm.total == len(rows)
    macro = recall_macro(cm, allow_zero_support=True)
    assert 0.0 <= macro <= 1.0
    if all(t == p for t, p in pairs):
        assert accuracy(cm) == macro == 1.0


def test_prediction_file_round_trip(tmp_path):
    rows = [_row(0, "a", {"a": 0.7, "b": 0.3}), _row(1, "b", {"a": 0.1, "b": 0.9}),
            _row(2, "b", {"a": 0.6, "b": 0.4})]
    write_predictions(rows, tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == \
        "image_id,true_class,predicted_class,score:a,score:b"
    back = read_predictions(tmp_path / "p.csv")
    assert back == rows
    report = evaluate(back)
    assert report.accuracy == pytest.approx(2 / 3)
    assert report.per_class_auc == {"a": 1.0, "b": 1.0}
    assert "macro F1" in report.to_text()


def test_prediction_file_checks(tmp_path):
    (tmp_path / "bad.csv").write_text("image_id,true_class\nx,a\n")
    with pytest.raises(DataError):
        read_predictions(tmp_path / "bad.csv")
    (tmp_path / "argmax.csv").write_text("image_id,true_class,predicted_class,score:a,score:b\nx,a,b,0.9,0.1\n")
    with pytest.raises(DataError):
        read_predictions(tmp_path / "argmax.csv")
    assert read_predictions(tmp_path / "argmax.csv", check_argmax=False)[0].predicted_class == "b"
    (tmp_path / "empty.csv").write_text("image_id,true_class,predicted_class\n")
    with pytest.raises(DataError):
        read_predictions(tmp_path / "empty.csv")
