import itertools
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.metrics import accuracy_score, matthews_corrcoef, precision_recall_fscore_support
from sklearn.tree import DecisionTreeClassifier

from valprobe.classifier import (
    ALL_VECTORS,
    FEATURES,
    NON_VALIDATOR,
    PATTERN_COUNTS_V4,
    VALIDATOR,
    FeatureVector,
    LengthMismatch,
    MalformedTree,
    SchemaMismatch,
    SingleClassDataset,
    best_split,
    deserialize,
    extract_features,
    fit_tree,
    gini,
    load_model,
    metrics,
    read_dataset_csv,
    render_tree,
    save_model,
    serialize,
    stratified_split,
    pattern_count_dataset,
    train,
    write_dataset_csv,
)
from valprobe.observatory import QueryLogEntry, Transport, ZoneLevel
from valprobe.wire import RType

PARENT = "dnssec-test.example."

rows_strategy = st.lists(
    st.tuples(st.sampled_from(ALL_VECTORS), st.sampled_from([VALIDATOR, NON_VALIDATOR])), min_size=1, max_size=60
)


def as_arrays(rows):
    X = np.array([[getattr(fv, f) for f in FEATURES] for fv, _ in rows], dtype=float)
    y = np.array([c for _, c in rows])
    return X, y


def brute_impurity(rows, f):
    parts = [[r for r in rows if getattr(r[0], f) == side] for side in (False, True)]
    if not all(parts):
        return None
    n = len(rows)
    total = Fraction(0)
    for p in parts:
        v = sum(c == VALIDATOR for _, c in p)
        total += Fraction(len(p), n) * (1 - Fraction(v, len(p)) ** 2 - Fraction(len(p) - v, len(p)) ** 2)
    return total


# --- features --------------------------------------------------------------


def entry(qname, qtype, zone):
    return QueryLogEntry(0, "192.0.2.1", qname, int(qtype), True, zone, Transport.SIM)


def test_extract_features_examples():
    child = "valid." + PARENT
    full = [
        entry(child, RType.DS, ZoneLevel.PARENT),
        entry(PARENT, RType.DNSKEY, ZoneLevel.PARENT),
        entry(child, RType.DNSKEY, ZoneLevel.CHILD),
    ]
    assert extract_features(full, PARENT).pattern == "111"
    assert extract_features(full[1:], PARENT).pattern == "011"
    assert extract_features([], PARENT).pattern == "000"
    # a DS query answered by the child side is not a parent DS fetch
    assert extract_features([entry(child, RType.DS, ZoneLevel.CHILD)], PARENT).pattern == "000"
    # queries for another child zone do not count
    assert extract_features([entry("bad-ds." + PARENT, RType.DNSKEY, ZoneLevel.CHILD)], PARENT).pattern == "000"


def test_pattern_round_trip_and_description():
    assert [fv.pattern for fv in ALL_VECTORS] == [f"{i:03b}" for i in range(8)]
    assert all(FeatureVector.from_pattern(fv.pattern) == fv for fv in ALL_VECTORS)
    assert FeatureVector.from_pattern("011").describe() == "DNSKEY-p, DNSKEY-c"
    with pytest.raises(ValueError):
        FeatureVector.from_pattern("12")


# --- impurity and splits ---------------------------------------------------


def test_gini_values():
    assert gini([5, 5]) == Fraction(1, 2)
    assert gini([10, 0]) == 0
    assert gini([0, 0]) == 0
    assert gini([1, 3]) == Fraction(3, 8)


@given(rows_strategy)
def test_best_split_is_optimal(rows):
    feature, imp = best_split(rows)
    options = {f: brute_impurity(rows, f) for f in FEATURES}
    valid = {f: v for f, v in options.items() if v is not None}
    if not valid:
        assert feature is None
        return
    assert imp == min(valid.values())
    # ties resolve by feature order
    assert feature == next(f for f in FEATURES if valid.get(f) == imp)


def test_root_impurity_decrease_matches_sklearn():
    rows = pattern_count_dataset()
    X, y = as_arrays(rows)
    sk = DecisionTreeClassifier(criterion="gini", random_state=0).fit(X, y)
    t = sk.tree_
    n = t.weighted_n_node_samples
    l, r = t.children_left[0], t.children_right[0]
    sk_child = (n[l] * t.impurity[l] + n[r] * t.impurity[r]) / n[0]
    tree = fit_tree(rows)
    _, imp = best_split(rows)
    assert FEATURES[t.feature[0]] == tree.root.feature
    assert float(imp) == pytest.approx(sk_child, abs=1e-12)
    assert tree.root.gini == pytest.approx(t.impurity[0], abs=1e-12)


@given(rows_strategy)
def test_predictions_match_sklearn_on_seen_patterns(rows):
    if len({c for _, c in rows}) < 2:
        return
    tree = fit_tree(rows)
    X, y = as_arrays(rows)
    # zero-gain splits are not taken; give the oracle the same stopping rule
    sk = DecisionTreeClassifier(criterion="gini", min_impurity_decrease=1e-9, random_state=0).fit(X, y)
    for fv in {fv for fv, _ in rows}:
        counts = [sum(1 for g, c in rows if g == fv and c == k) for k in (NON_VALIDATOR, VALIDATOR)]
        if counts[0] == counts[1]:
            continue  # leaf tie; both sides pick a class by convention
        x = np.array([[getattr(fv, f) for f in FEATURES]], dtype=float)
        assert tree.predict(fv) == sk.predict(x)[0]


def test_monotone_fingerprint():
    tree = fit_tree(pattern_count_dataset())
    table = tree.truth_table()
    assert table["111"] == table["011"] == VALIDATOR
    assert table["000"] == NON_VALIDATOR
    assert table == {fv.pattern: tree.predict(fv) for fv in ALL_VECTORS}


def test_single_class_and_empty():
    with pytest.raises(SingleClassDataset):
        fit_tree([])
    with pytest.raises(SingleClassDataset):
        train([(FeatureVector(), NON_VALIDATOR)] * 20)
    assert fit_tree([(FeatureVector(), NON_VALIDATOR)] * 3).root.is_leaf


def test_stratified_split_preserves_ratio():
    rows = pattern_count_dataset()
    tr, te = stratified_split(rows, 0.7, seed=3)
    assert len(tr) + len(te) == len(rows)
    v = sum(c == VALIDATOR for _, c in rows)
    assert sum(c == VALIDATOR for _, c in tr) == round(v * 0.7)
    assert (tr, te) == stratified_split(rows, 0.7, seed=3)


# --- metrics ---------------------------------------------------------------


def test_metrics_hand_confusion():
    preds = [VALIDATOR] * 50 + [NON_VALIDATOR] * 40 + [VALIDATOR] * 5 + [NON_VALIDATOR] * 5
    labels = [VALIDATOR] * 50 + [NON_VALIDATOR] * 40 + [NON_VALIDATOR] * 5 + [VALIDATOR] * 5
    m = metrics(preds, labels)
    assert m.confusion == (50, 40, 5, 5)
    assert m.accuracy == pytest.approx(0.9)
    mcc = (50 * 40 - 25) / ((55 * 55 * 45 * 45) ** 0.5)
    assert m.mcc == pytest.approx(mcc)


def test_metrics_extremes():
    labels = [VALIDATOR, NON_VALIDATOR] * 10
    perfect = metrics(labels, labels)
    assert perfect.accuracy == perfect.mcc == perfect.f1 == 1.0
    flipped = [NON_VALIDATOR if c == VALIDATOR else VALIDATOR for c in labels]
    inverted = metrics(flipped, labels)
    assert inverted.accuracy == 0.0 and inverted.mcc == -1.0
    with pytest.raises(LengthMismatch):
        metrics(labels[:-1], labels)


@pytest.mark.filterwarnings("ignore::UserWarning")
@pytest.mark.filterwarnings("ignore::RuntimeWarning")
@given(st.lists(st.tuples(st.sampled_from([VALIDATOR, NON_VALIDATOR]), st.sampled_from([VALIDATOR, NON_VALIDATOR])), min_size=1, max_size=80))
def test_metrics_match_sklearn(pairs):
    preds, labels = zip(*pairs)
    m = metrics(preds, labels)
    assert m.accuracy == pytest.approx(accuracy_score(labels, preds))
    assert m.mcc == pytest.approx(matthews_corrcoef(labels, preds), abs=1e-12)
    p, r, f, _ = precision_recall_fscore_support(labels, preds, average="weighted", zero_division=0)
    assert (m.precision, m.recall, m.f1) == pytest.approx((p, r, f), abs=1e-12)


def test_train_is_seeded():
    rows = pattern_count_dataset()
    a, b = train(rows, seed=11), train(rows, seed=11)
    assert a.metrics == b.metrics and serialize(a.tree) == serialize(b.tree)
    assert a.train_size + a.test_size == sum(v + nv for v, nv in PATTERN_COUNTS_V4.values())


# --- persistence -----------------------------------------------------------


def test_serialize_round_trip(tmp_path):
    tree = fit_tree(pattern_count_dataset(include_ipv6=True))
    assert deserialize(json.loads(json.dumps(serialize(tree)))) == tree
    path = save_model(tree, tmp_path / "model.json", extra={"seed": 0})
    assert load_model(path) == tree
    assert "DNSKEY-p?" in render_tree(tree).splitlines()[0]


def test_deserialize_rejects_bad_documents():
    doc = serialize(fit_tree(pattern_count_dataset()))
    with pytest.raises(SchemaMismatch):
        deserialize({**doc, "version": 99})
    with pytest.raises(SchemaMismatch):
        deserialize({**doc, "nodes": [{"id": 0}]})
    bad = json.loads(json.dumps(doc))
    bad["nodes"][0]["left"] = None
    bad["nodes"][0]["right"] = None
    with pytest.raises(MalformedTree):
        deserialize(bad)
    cyc = json.loads(json.dumps(doc))
    cyc["nodes"][0]["left"] = 0
    with pytest.raises(MalformedTree):
        deserialize(cyc).predict(FeatureVector())


def test_dataset_csv_round_trip(tmp_path):
    rows = [(f"192.0.2.{i}", fv, c) for i, (fv, c) in enumerate(itertools.product(ALL_VECTORS, [VALIDATOR, None]))]
    path = write_dataset_csv(rows, tmp_path / "d.csv")
    assert read_dataset_csv(path) == rows
