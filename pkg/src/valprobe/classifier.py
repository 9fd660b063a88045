"""Features from the query log, a Gini decision tree over them, and metrics.

Three boolean features describe what a resolver asked the observatory for
while resolving a valid-variant name: a DS query at the parent (``ds_p``),
a DNSKEY query at the parent apex (``dnskey_p``) and a DNSKEY query at the
child apex (``dnskey_c``).  With eight possible inputs the tree is grown
fully; there is no depth limit or pruning.
"""

from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .observatory import QueryLogEntry, ZoneLevel
from .wire import RType, normalize_name

VALIDATOR = "Validator"
NON_VALIDATOR = "NonValidator"
CLASSES = (NON_VALIDATOR, VALIDATOR)

# Split candidates in tie-break order.
FEATURES = ("dnskey_c", "dnskey_p", "ds_p")

SCHEMA = "valprobe.decision-tree"
SCHEMA_VERSION = 1


class SingleClassDataset(ValueError):
    pass


class MalformedTree(ValueError):
    pass


class SchemaMismatch(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    ds_p: bool = False
    dnskey_p: bool = False
    dnskey_c: bool = False

    @property
    def pattern(self) -> str:
        return f"{int(self.ds_p)}{int(self.dnskey_p)}{int(self.dnskey_c)}"

    @classmethod
    def from_pattern(cls, pattern: str) -> "FeatureVector":
        if len(pattern) != 3 or set(pattern) - {"0", "1"}:
            raise ValueError(f"bad pattern {pattern!r}")
        return cls(*(c == "1" for c in pattern))

    def describe(self) -> str:
        names = [n for n, on in (("DS-p", self.ds_p), ("DNSKEY-p", self.dnskey_p), ("DNSKEY-c", self.dnskey_c)) if on]
        return ", ".join(names) or "None"


ALL_VECTORS = tuple(FeatureVector.from_pattern(f"{i:03b}") for i in range(8))


def extract_features(entries: Iterable[QueryLogEntry], parent_apex: str, child_label: str = "valid") -> FeatureVector:
    p_apex = normalize_name(parent_apex)
    c_apex = normalize_name(f"{child_label}.{p_apex}")
    ds_p = dnskey_p = dnskey_c = False
    for e in entries:
        if e.qtype == RType.DS and e.qname == c_apex and e.zone is ZoneLevel.PARENT:
            ds_p = True
        elif e.qtype == RType.DNSKEY and e.qname == p_apex:
            dnskey_p = True
        elif e.qtype == RType.DNSKEY and e.qname == c_apex and e.zone is ZoneLevel.CHILD:
            dnskey_c = True
    return FeatureVector(ds_p, dnskey_p, dnskey_c)


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

Row = tuple[FeatureVector, str]

# Per-pattern resolver counts (validators, non-validators) for open resolvers.
PATTERN_COUNTS_V4 = {
    "000": (19, 24253),
    "111": (5641, 321),
    "011": (1234, 120),
    "101": (0, 13),
    "010": (1, 3),
    "001": (2, 12),
}
PATTERN_COUNTS_V6 = {
    "000": (0, 384),
    "111": (164, 11),
    "011": (100, 4),
    "010": (1, 0),
    "001": (1, 0),
}


def pattern_count_dataset(include_ipv6: bool = False) -> list[Row]:
    rows: list[Row] = []
    tables = [PATTERN_COUNTS_V4, PATTERN_COUNTS_V6] if include_ipv6 else [PATTERN_COUNTS_V4]
    for table in tables:
        for pattern, (v, nv) in table.items():
            fv = FeatureVector.from_pattern(pattern)
            rows += [(fv, VALIDATOR)] * v + [(fv, NON_VALIDATOR)] * nv
    return rows


def stratified_split(rows: Sequence[Row], train_fraction: float = 0.7, seed: int = 0) -> tuple[list[Row], list[Row]]:
    rng = random.Random(seed)
    train, test = [], []
    for cls in CLASSES:
        members = [r for r in rows if r[1] == cls]
        rng.shuffle(members)
        k = round(len(members) * train_fraction)
        train += members[:k]
        test += members[k:]
    rng.shuffle(train)
    rng.shuffle(test)
    return train, test


def write_dataset_csv(rows: Iterable[tuple[str, FeatureVector, str | None]], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "ds_p", "dnskey_p", "dnskey_c", "label"])
        for src, fv, label in rows:
            w.writerow([src, int(fv.ds_p), int(fv.dnskey_p), int(fv.dnskey_c), label or ""])
    return path


def read_dataset_csv(path: str | Path) -> list[tuple[str, FeatureVector, str | None]]:
    out = []
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            fv = FeatureVector(rec["ds_p"] == "1", rec["dnskey_p"] == "1", rec["dnskey_c"] == "1")
            out.append((rec["src"], fv, rec.get("label") or None))
    return out


# ---------------------------------------------------------------------------
# Tree
# ---------------------------------------------------------------------------


def gini(counts: Sequence[int]) -> Fraction:
    total = sum(counts)
    if total == 0:
        return Fraction(0)
    return 1 - sum(Fraction(c, total) ** 2 for c in counts)


@dataclass(frozen=True)
class TreeNode:
    id: int
    feature: str | None
    gini: float
    samples: float
    value: tuple[float, float]
    cls: str
    n: int
    left: int | None = None
    right: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass(frozen=True)
class DecisionTree:
    nodes: tuple[TreeNode, ...]

    @property
    def root(self) -> TreeNode:
        if not self.nodes:
            raise MalformedTree("empty tree")
        return self.nodes[0]

    def node(self, node_id: int) -> TreeNode:
        if not 0 <= node_id < len(self.nodes) or self.nodes[node_id].id != node_id:
            raise MalformedTree(f"no node {node_id}")
        return self.nodes[node_id]

    def leaf_for(self, fv: FeatureVector) -> TreeNode:
        node = self.root
        for _ in range(len(self.nodes)):
            if node.is_leaf:
                return node
            if node.feature not in FEATURES:
                raise MalformedTree(f"node {node.id} splits on unknown feature {node.feature!r}")
            child = node.right if getattr(fv, node.feature) else node.left
            if child is None:
                raise MalformedTree(f"node {node.id} is missing a child")
            node = self.node(child)
        raise MalformedTree("cycle in tree")

    def predict(self, fv: FeatureVector) -> str:
        return self.leaf_for(fv).cls

    def truth_table(self) -> dict[str, str]:
        return {fv.pattern: self.predict(fv) for fv in ALL_VECTORS}


def _counts(rows: Sequence[Row]) -> tuple[int, int]:
    v = sum(1 for _, c in rows if c == VALIDATOR)
    return len(rows) - v, v


def best_split(rows: Sequence[Row], features: Sequence[str] = FEATURES) -> tuple[str | None, Fraction]:
    """Feature with the lowest weighted child impurity; ties go to the earlier feature."""
    best, best_imp = None, None
    n = len(rows)
    for f in features:
        left = [r for r in rows if not getattr(r[0], f)]
        right = [r for r in rows if getattr(r[0], f)]
        if not left or not right:
            continue
        imp = Fraction(len(left), n) * gini(_counts(left)) + Fraction(len(right), n) * gini(_counts(right))
        if best_imp is None or imp < best_imp:
            best, best_imp = f, imp
    return best, best_imp if best_imp is not None else gini(_counts(rows))


def fit_tree(rows: Sequence[Row]) -> DecisionTree:
    total = len(rows)
    if total == 0:
        raise SingleClassDataset("empty training set")
    nodes: list[dict] = []

    def grow(sample: list[Row]) -> int:
        counts = _counts(sample)
        g = gini(counts)
        node_id = len(nodes)
        nv, v = counts
        node = {
            "id": node_id,
            "feature": None,
            "gini": float(g),
            "samples": len(sample) / total,
            "value": (nv / len(sample), v / len(sample)),
            "cls": VALIDATOR if v > nv else NON_VALIDATOR,
            "n": len(sample),
            "left": None,
            "right": None,
        }
        nodes.append(node)
        if g == 0:
            return node_id
        feature, imp = best_split(sample)
        if feature is None or imp >= g:
            return node_id
        node["feature"] = feature
        node["left"] = grow([r for r in sample if not getattr(r[0], feature)])
        node["right"] = grow([r for r in sample if getattr(r[0], feature)])
        return node_id

    grow(list(rows))
    return DecisionTree(tuple(TreeNode(**n) for n in nodes))


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    mcc: float
    support: int
    confusion: tuple[int, int, int, int]  # tp, tn, fp, fn with Validator as positive

    def to_json(self) -> dict:
        return asdict(self)


def _div(a: float, b: float) -> float:
    return a / b if b else 0.0


def metrics(predictions: Sequence[str], labels: Sequence[str]) -> MetricsReport:
    if len(predictions) != len(labels):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(labels)} labels")
    tp = sum(1 for p, y in zip(predictions, labels) if p == VALIDATOR and y == VALIDATOR)
    tn = sum(1 for p, y in zip(predictions, labels) if p != VALIDATOR and y != VALIDATOR)
    fp = sum(1 for p, y in zip(predictions, labels) if p == VALIDATOR and y != VALIDATOR)
    fn = sum(1 for p, y in zip(predictions, labels) if p != VALIDATOR and y == VALIDATOR)
    n = tp + tn + fp + fn
    per_class = {
        VALIDATOR: (tp, fp, fn, tp + fn),
        NON_VALIDATOR: (tn, fn, fp, tn + fp),
    }
    precision = recall = f1 = 0.0
    for hit, false_pos, miss, support in per_class.values():
        p = _div(hit, hit + false_pos)
        r = _div(hit, hit + miss)
        f = _div(2 * p * r, p + r)
        precision += support * p
        recall += support * r
        f1 += support * f
    denom = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    mcc = _div(tp * tn - fp * fn, denom)
    return MetricsReport(
        accuracy=_div(tp + tn, n),
        precision=_div(precision, n),
        recall=_div(recall, n),
        f1=_div(f1, n),
        mcc=mcc,
        support=n,
        confusion=(tp, tn, fp, fn),
    )


@dataclass(frozen=True)
class TrainResult:
    tree: DecisionTree
    metrics: MetricsReport
    train_size: int
    test_size: int


def train(rows: Sequence[Row], seed: int = 0, train_fraction: float = 0.7) -> TrainResult:
    train_rows, test_rows = stratified_split(rows, train_fraction, seed)
    if len({c for _, c in train_rows}) < 2:
        raise SingleClassDataset("training split holds a single class")
    tree = fit_tree(train_rows)
    preds = [tree.predict(fv) for fv, _ in test_rows]
    return TrainResult(tree, metrics(preds, [c for _, c in test_rows]), len(train_rows), len(test_rows))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def serialize(tree: DecisionTree) -> dict:
    return {
        "schema": SCHEMA,
        "version": SCHEMA_VERSION,
        "features": list(FEATURES),
        "classes": list(CLASSES),
        "nodes": [
            {
                "id": n.id,
                "feature": n.feature,
                "gini": n.gini,
                "samples": n.samples,
                "value": list(n.value),
                "class": n.cls,
                "n": n.n,
                "left": n.left,
                "right": n.right,
            }
            for n in tree.nodes
        ],
    }


def deserialize(doc: Mapping) -> DecisionTree:
    if doc.get("schema") != SCHEMA or doc.get("version") != SCHEMA_VERSION:
        raise SchemaMismatch(f"expected {SCHEMA} v{SCHEMA_VERSION}, got {doc.get('schema')} v{doc.get('version')}")
    try:
        nodes = tuple(
            TreeNode(
                id=int(d["id"]),
                feature=d["feature"],
                gini=float(d["gini"]),
                samples=float(d["samples"]),
                value=(float(d["value"][0]), float(d["value"][1])),
                cls=d["class"],
                n=int(d["n"]),
                left=d["left"],
                right=d["right"],
            )
            for d in doc["nodes"]
        )
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise SchemaMismatch(f"bad node record: {exc}") from exc
    tree = DecisionTree(nodes)
    for i, node in enumerate(nodes):
        if node.id != i:
            raise MalformedTree("node ids must be 0..n-1 in order")
        if node.cls not in CLASSES:
            raise MalformedTree(f"node {i} has unknown class {node.cls!r}")
        if (node.feature is None) != (node.left is None and node.right is None):
            raise MalformedTree(f"node {i}: split feature and children disagree")
    return tree


def save_model(tree: DecisionTree, path: str | Path, extra: Mapping | None = None) -> Path:
    doc = serialize(tree)
    if extra:
        doc["training"] = dict(extra)
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def load_model(path: str | Path) -> DecisionTree:
    return deserialize(json.loads(Path(path).read_text()))


def render_tree(tree: DecisionTree) -> str:
    """Indented text view; left branches are 'absent', right are 'present'."""
    names = {"ds_p": "DS-p", "dnskey_p": "DNSKEY-p", "dnskey_c": "DNSKEY-c"}
    lines: list[str] = []

    def walk(node_id: int, depth: int, edge: str) -> None:
        n = tree.node(node_id)
        head = f"#{n.id} " + (f"{names[n.feature]}? " if n.feature else "")
        lines.append(
            "  " * depth + f"{edge}{head}gini={n.gini:.3f} samples={n.samples:.1%} "
            f"value=[{n.value[0]:.3f}, {n.value[1]:.3f}] class={n.cls}"
        )
        if n.feature:
            walk(n.left, depth + 1, "absent: ")
            walk(n.right, depth + 1, "present: ")

    walk(0, 0, "")
    return "\n".join(lines)
