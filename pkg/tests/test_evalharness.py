import itertools
import random

import pytest

from xem.evalharness import Metrics, UniverseMismatch, pairwise_metrics
from xem.linker import Entity, Partition


def _partition(clusters):
    entities = []
    for members in clusters:
        members = frozenset(members)
        entities.append(Entity(min(members), members, min(members)))
    return Partition(tuple(entities))


def test_identity_partition_perfect():
    p = _partition([{"a", "b"}, {"c"}])
    gold = {"a": "g1", "b": "g1", "c": "g2"}
    counts, m = pairwise_metrics(p, gold)
    assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)


def test_hand_arithmetic():
    # tp=3, fp=1, fn=2: P=0.75, R=0.6, F1=2*.75*.6/1.35
    p = _partition([{"a", "b", "c"}, {"d", "e"}, {"f"}, {"g"}])
    gold = {"a": "g1", "b": "g1", "c": "g1", "d": "g2", "e": "g3",
            "f": "g2", "g": "g3"}
    counts, m = pairwise_metrics(p, gold)
    assert (counts.tp, counts.fp, counts.fn) == (3, 1, 2)
    assert m.precision == pytest.approx(0.75)
    assert m.recall == pytest.approx(0.6)
    assert m.f1 == pytest.approx(2 * 0.75 * 0.6 / 1.35)


def test_all_singletons_convention():
    p = _partition([{"a"}, {"b"}, {"c"}])
    gold = {"a": "g", "b": "g", "c": "g"}
    counts, m = pairwise_metrics(p, gold)
    assert counts.tp == 0
    assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)


def test_universe_mismatch():
    p = _partition([{"a"}])
    with pytest.raises(UniverseMismatch):
        pairwise_metrics(p, {"a": "g", "b": "g"})


def _brute_force(p: Partition, gold):
    ids = sorted(gold)
    tp = fp = fn = 0
    for a, b in itertools.combinations(ids, 2):
        pred = p.index[a] == p.index[b]
        true = gold[a] == gold[b]
        tp += pred and true
        fp += pred and not true
        fn += true and not pred
    return tp, fp, fn


def test_combinatorics_equal_brute_force():
    rng = random.Random(13)
    for _ in range(30):
        n = rng.randrange(2, 31)
        ids = [f"r{i}" for i in range(n)]
        gold = {i: f"g{rng.randrange(1, 6)}" for i in ids}
        pred_label = {i: rng.randrange(1, 6) for i in ids}
        clusters = {}
        for i, lab in pred_label.items():
            clusters.setdefault(lab, set()).add(i)
        p = _partition(clusters.values())
        counts, m = pairwise_metrics(p, gold)
        assert (counts.tp, counts.fp, counts.fn) == _brute_force(p, gold)
        assert 0.0 <= m.precision <= 1.0 and 0.0 <= m.recall <= 1.0 and 0.0 <= m.f1 <= 1.0
