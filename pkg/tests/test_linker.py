import random

from xem.linker import (
    Partition,
    UnlinkRule,
    entity_size_histogram,
    link,
    non_separating_rules,
    read_unlink_log,
    select_representative,
    write_unlink_log,
)
from xem.matcher import MatchClass, PairScore
from xem.records import AnonymousValueList, Record, RecordSet, parse_schema

SCHEMA = parse_schema({"attributes": [
    {"name": "name", "kind": "Name"},
    {"name": "phone", "kind": "Phone"},
    {"name": "tax", "kind": "Identifier"},
]})
ANON = AnonymousValueList.default()


def _match(a, b):
    pair = (a, b) if a < b else (b, a)
    return PairScore(pair, 10.0, {}, MatchClass.MATCH)


def _nonmatch(a, b):
    pair = (a, b) if a < b else (b, a)
    return PairScore(pair, -5.0, {}, MatchClass.NON_MATCH)


def test_transitive_chain():
    p = link([_match("A", "B"), _match("B", "C")], [], {"A", "B", "C"})
    assert len(p.entities) == 1
    assert p.entities[0].members == frozenset("ABC")


def test_unlink_removes_edge():
    p = link([_match("A", "B"), _match("B", "C")],
             [UnlinkRule(("A", "B"))], {"A", "B", "C"})
    assert {frozenset({"A"}), frozenset({"B", "C"})} == {e.members for e in p.entities}


def test_nonmatch_pairs_do_not_link():
    p = link([_nonmatch("A", "B")], [], {"A", "B"})
    assert len(p.entities) == 2


def test_untouched_records_are_singletons():
    p = link([_match("A", "B")], [], {"A", "B", "C"})
    assert p.index["C"] == "C"


def test_entity_id_is_smallest_member():
    p = link([_match("B", "C")], [], {"B", "C"})
    assert p.entities[0].entity_id == "B"


def _brute_force_components(ids, edges):
    """Floyd-Warshall style reachability closure."""
    reach = {i: {i} for i in ids}
    changed = True
    while changed:
        changed = False
        for a, b in edges:
            union = reach[a] | reach[b]
            for n in union:
                if union - reach[n]:
                    reach[n] = reach[n] | union
                    changed = True
    seen, comps = set(), []
    for i in sorted(ids):
        if i not in seen:
            comps.append(frozenset(reach[i]))
            seen |= reach[i]
    return set(comps)


def test_matches_brute_force_closure_and_order_independent():
    rng = random.Random(42)
    for _ in range(200):
        n = rng.randrange(2, 13)
        ids = {f"r{i}" for i in range(n)}
        all_pairs = [(a, b) for a in sorted(ids) for b in sorted(ids) if a < b]
        edges = [p for p in all_pairs if rng.random() < 0.25]
        pairs = [_match(*e) for e in edges]
        p = link(pairs, [], ids)
        expected = _brute_force_components(ids, edges)
        assert {e.members for e in p.entities} == expected
        for _ in range(20):
            rng.shuffle(pairs)
            assert link(pairs, [], ids) == p


def _record(rid, **attrs):
    return Record(rid, "s", attrs).normalized()


def test_representative_most_complete():
    rs = RecordSet(SCHEMA, (
        _record("r1", name="a", phone="5551", tax="1"),
        _record("r2", name="b"),
    ))
    assert select_representative({"r1", "r2"}, rs, ANON) == "r1"


def test_representative_anonymous_not_counted():
    rs = RecordSet(SCHEMA, (
        _record("r1", name="a", phone="9999999999"),
        _record("r2", name="b", phone="5550001"),
    ))
    assert select_representative({"r1", "r2"}, rs, ANON) == "r2"


def test_representative_tie_break_lexicographic():
    rs = RecordSet(SCHEMA, (
        _record("r2", name="a", phone="5551"),
        _record("r10", name="b", phone="5552"),
    ))
    # "r10" < "r2" lexicographically
    assert select_representative({"r2", "r10"}, rs, ANON) == "r10"


def test_representative_singleton():
    rs = RecordSet(SCHEMA, (_record("r7", name="x"),))
    assert select_representative({"r7"}, rs, ANON) == "r7"


def test_entity_star_edges():
    p = link([_match("A", "B"), _match("A", "C")], [], {"A", "B", "C"})
    e = p.entities[0]
    assert len(e.edges) == len(e.members) - 1
    assert all(rep == e.representative for _, rep in e.edges)


def test_size_histogram():
    p = link([_match("A", "B"), _match("B", "C")], [], {"A", "B", "C", "D"})
    assert entity_size_histogram(p) == {3: 1, 1: 1}
    assert entity_size_histogram(Partition(())) == {}


def test_histogram_mass_conservation():
    rng = random.Random(1)
    ids = {f"r{i}" for i in range(50)}
    edges = [(f"r{rng.randrange(50)}", f"r{rng.randrange(50)}") for _ in range(30)]
    pairs = [_match(a, b) for a, b in edges if a != b]
    p = link(pairs, [], ids)
    hist = entity_size_histogram(p)
    assert sum(size * count for size, count in hist.items()) == 50


def test_non_separating_unlink_reported():
    triangle = [_match("A", "B"), _match("B", "C"), _match("A", "C")]
    rules = [UnlinkRule(("A", "B"))]
    p = link(triangle, rules, {"A", "B", "C"})
    assert len(p.entities) == 1  # alternate path keeps them together
    assert non_separating_rules(triangle, rules, {"A", "B", "C"}) == rules
    # chain case: rule actually separates
    chain = [_match("A", "B"), _match("B", "C")]
    assert non_separating_rules(chain, rules, {"A", "B", "C"}) == []


def test_unlink_log_round_trip():
    rules = [UnlinkRule(("a", "b"), "alice", "2026-01-01T00:00:00Z"),
             UnlinkRule(("c", "d"), "bob", "2026-01-02T00:00:00Z")]
    assert read_unlink_log(write_unlink_log(rules)) == rules


def test_partition_json_round_trip():
    p = link([_match("A", "B")], [], {"A", "B", "C"})
    assert Partition.from_json(p.to_json()) == p
