"""Release acceptance gate.

Each test covers one shipping criterion and prints a single PASS/FAIL line
with the measured values, so the suite output doubles as the release
checklist. Everything runs against the fixed-seed acceptance corpus
(4,200 base entities, seed 42) or self-contained constructed instances.
"""

import itertools
import json
import random
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from xem import evalharness, explainers, gnn, linker, matcher, proxygraph, synthgen
from xem.explainers import MaskConfig
from xem.matcher import MatchClass, PairScore
from xem.records import AnonymousValueList, Record, schema_to_json, serialize_records
from xem.service import create_app


def verdict(capsys, label, ok, detail):
    with capsys.disabled():
        print(f"\n[{label}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"{label}: {detail}"


class FullRun:
    """The acceptance corpus pushed through the whole pipeline, timed."""

    def __init__(self):
        t0 = time.perf_counter()
        self.gen_cfg = synthgen.GenConfig()  # 4200 base entities, seed 42
        self.records, self.gold = synthgen.generate(self.gen_cfg)
        self.anon = AnonymousValueList.default()
        self.weights = matcher.default_weight_table(self.records.schema)
        self.scores = matcher.run_matching(
            self.records, evalharness.DEFAULT_BLOCKING, self.weights,
            evalharness.DEFAULT_THRESHOLDS, self.anon)
        self.partition = linker.link(self.scores, [], set(self.records.index),
                                     self.records, self.anon)
        _, self.metrics = evalharness.pairwise_metrics(self.partition, self.gold)
        self.pipeline_seconds = time.perf_counter() - t0

        self.codec = proxygraph.FeatureCodec(self.records.schema)
        self.graph = proxygraph.build_graph(self.partition, self.records, self.codec)
        pairs = proxygraph.make_training_set(self.scores, list(self.records.index),
                                             seed=7)
        random.Random(11).shuffle(pairs)
        cut = int(0.8 * len(pairs))
        self.train_pairs, self.heldout_pairs = pairs[:cut], pairs[cut:]
        t0 = time.perf_counter()
        self.params = gnn.train(self.graph, self.train_pairs, gnn.TrainConfig(seed=3))
        self.train_seconds = time.perf_counter() - t0
        self.agreement = gnn.agreement(self.params, self.graph, self.heldout_pairs)

        ps = matcher.PairScorer(self.records, self.weights,
                                evalharness.DEFAULT_THRESHOLDS, self.anon)
        self.pair_scorer = ps
        self.scorer = lambda a, b: ps.score(a, b).total
        self.match_pairs = [s.pair for s in self.scores
                            if s.match_class is MatchClass.MATCH]


@pytest.fixture(scope="module")
def full():
    return FullRun()


@pytest.fixture(scope="module")
def mask_suite(full):
    pairs = random.Random(21).sample(full.match_pairs, 100)
    return explainers.mask_fidelity_suite(full.params, full.graph, pairs,
                                          MaskConfig(seed=0))


def test_criterion_1_end_to_end_quality(full, capsys):
    f1 = full.metrics.f1
    ok = f1 >= 0.90 and full.pipeline_seconds <= 120.0
    verdict(capsys, "criterion 1: end-to-end matching quality", ok,
            f"pairwise f1={f1:.4f} (need >=0.90), "
            f"pipeline={full.pipeline_seconds:.1f}s (need <=120s), "
            f"records={len(full.records)}")


def _brute_force_components(ids, match_pairs):
    comps = [{i} for i in ids]
    changed = True
    while changed:
        changed = False
        for a, b in match_pairs:
            ca = next(c for c in comps if a in c)
            cb = next(c for c in comps if b in c)
            if ca is not cb:
                ca |= cb
                comps.remove(cb)
                changed = True
    return {frozenset(c) for c in comps}


def test_criterion_2_linker_oracle(capsys):
    rng = random.Random(6)
    failures = 0
    for _ in range(200):
        n = rng.randrange(2, 13)
        ids = [f"r{i}" for i in range(n)]
        scores = []
        for a, b in itertools.combinations(ids, 2):
            if rng.random() < 0.25:
                is_match = rng.random() < 0.5
                scores.append(PairScore(
                    (a, b), 10.0 if is_match else -5.0, {},
                    MatchClass.MATCH if is_match else MatchClass.NON_MATCH))
        expected = _brute_force_components(
            ids, [s.pair for s in scores if s.match_class is MatchClass.MATCH])
        got = {e.members for e in linker.link(scores, [], set(ids)).entities}
        if got != expected:
            failures += 1
            continue
        for _ in range(20):
            shuffled = scores[:]
            rng.shuffle(shuffled)
            permuted = {e.members
                        for e in linker.link(shuffled, [], set(ids)).entities}
            if permuted != expected:
                failures += 1
                break
    verdict(capsys, "criterion 2: linker oracle equivalence", failures == 0,
            f"200 instances x (closure oracle + 20 permutations), "
            f"failures={failures}")


def test_criterion_3_gradient_check(capsys):
    rng = np.random.default_rng(1)
    x = rng.random((6, 8))
    g = proxygraph.EntityGraph(
        tuple(f"n{i}" for i in range(6)), x, (),
        proxygraph.normalized_adjacency(6, [(0, 1), (1, 2), (3, 4)]), None)
    params = gnn.GcnParams(rng.normal(0, 0.5, (8, 4)), rng.normal(0, 0.5, (4, 4)),
                           rng.normal(0, 0.5, 4), 0.3)
    batch = [proxygraph.TrainingPair("n0", "n2", 1, "t"),
             proxygraph.TrainingPair("n1", "n4", 0, "t"),
             proxygraph.TrainingPair("n3", "n5", 1, "t")]
    _, grads = gnn.loss_and_gradients(g, params, batch, l2=1e-3)
    eps = 1e-5
    worst = 0.0

    def loss_at():
        return gnn.loss_and_gradients(g, params, batch, l2=1e-3)[0]

    for name in ("w1", "w2", "w_link"):
        arr, ga = getattr(params, name), grads.blocks()[name]
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + eps
            lp = loss_at()
            arr[idx] = orig - eps
            lm = loss_at()
            arr[idx] = orig
            num = (lp - lm) / (2 * eps)
            worst = max(worst, abs(num - ga[idx]) / max(1e-8, abs(num), abs(ga[idx])))
    orig = params.b_link
    params.b_link = orig + eps
    lp = loss_at()
    params.b_link = orig - eps
    lm = loss_at()
    params.b_link = orig
    num = (lp - lm) / (2 * eps)
    worst = max(worst, abs(num - grads.b_link) / max(1e-8, abs(num), abs(grads.b_link)))
    verdict(capsys, "criterion 3: gradient check", worst <= 1e-4,
            f"worst relative error={worst:.2e} over all parameter blocks "
            f"(need <=1e-4, central differences, step {eps})")


def test_criterion_4_proxy_fidelity(full, capsys):
    ok = full.agreement >= 0.90 and full.train_seconds <= 60.0
    verdict(capsys, "criterion 4: proxy fidelity", ok,
            f"held-out agreement={full.agreement:.4f} (need >=0.90), "
            f"training={full.train_seconds:.1f}s (need <=60s), "
            f"train/heldout={len(full.train_pairs)}/{len(full.heldout_pairs)}")


def test_criterion_5_mask_identity_and_fidelity(full, mask_suite, capsys):
    u, v = full.match_pairs[0]
    sub, u, v = explainers._two_hop_subgraph(full.graph, u, v)
    p0 = gnn.predict_link(gnn.forward(sub, full.params), sub, u, v,
                          full.params).probability
    ones = np.ones(sub.features.shape[1])
    p1 = gnn.predict_link(
        gnn.forward(sub, full.params, features=sub.features * ones),
        sub, u, v, full.params).probability
    identity_exact = p1 == p0
    hit = sum(1 for f in mask_suite.fidelities if f <= 0.1)
    ok = identity_exact and hit >= 80
    verdict(capsys, "criterion 5: mask identity + fidelity", ok,
            f"all-ones fidelity={abs(p1 - p0):.1e} (need exactly 0), "
            f"learned |dp|<=0.1 on {hit}/100 pairs (need >=80)")


def test_criterion_6_comparative_faithfulness(full, mask_suite, capsys):
    ok = mask_suite.mean_top_delta > mask_suite.mean_random_delta
    verdict(capsys, "criterion 6: comparative faithfulness", ok,
            f"mean |dp| top-3 deletion={mask_suite.mean_top_delta:.4f} > "
            f"3 random={mask_suite.mean_random_delta:.4f} over 100 Match pairs")


def test_criterion_7_attribution_exactness(full, capsys):
    rng = random.Random(13)
    ids = sorted(full.records.index)
    worst_err, worst_r2 = 0.0, 1.0
    for _ in range(100):
        a, b = rng.sample(ids, 2)
        score = full.pair_scorer.score(full.records[a], full.records[b])
        att = explainers.attribute_contributions(
            full.scorer, full.records[a], full.records[b],
            full.records.attribute_names, n_samples=256, seed=3)
        worst_r2 = min(worst_r2, att.surrogate_r2)
        for name in full.records.attribute_names:
            err = abs(att.contributions[name] - score.contributions.get(name, 0.0))
            worst_err = max(worst_err, err)
    ok = worst_err <= 1e-6 and worst_r2 >= 0.999
    verdict(capsys, "criterion 7: attribution exactness", ok,
            f"worst |coef - engine contribution|={worst_err:.2e} (need <=1e-6), "
            f"worst surrogate r2={worst_r2:.6f} (need >=0.999), 100 random pairs")


def test_criterion_8_anonymous_suppression(full, capsys):
    a = Record("qa", "s", {"name": "meridian supply co",
                           "phone": "9999999999"}).normalized()
    b = Record("qb", "s", {"name": "kestrel holdings plc",
                           "phone": "9999999999"}).normalized()
    score = full.pair_scorer.score(a, b)
    att = explainers.attribute_contributions(full.scorer, a, b,
                                             full.records.attribute_names, seed=1)
    ok = (score.match_class is MatchClass.NON_MATCH
          and abs(att.contributions["phone"]) <= 1e-12)
    verdict(capsys, "criterion 8: anonymous suppression", ok,
            f"pair agreeing only on anonymous phone classifies "
            f"{score.match_class.value} (need NonMatch), "
            f"phone attribution={att.contributions['phone']:.1e} (need 0)")


def test_criterion_9_service_consistency(tmp_path, capsys):
    data_dir = tmp_path / "svc"
    data_dir.mkdir()
    records, _ = synthgen.generate(synthgen.GenConfig(n_base_entities=200, seed=9))
    (data_dir / "schema.json").write_text(json.dumps(schema_to_json(records.schema)))
    (data_dir / "records.jsonl").write_bytes(serialize_records(records, "jsonl"))
    client = TestClient(create_app(data_dir))
    job = client.post("/jobs/match").json()
    for _ in range(600):
        if client.get(f"/jobs/{job['job_id']}").json()["status"] == "done":
            break
        time.sleep(0.05)
    store = client.app.state.store

    match_edges = [s.pair for s in store.scores
                   if s.match_class is MatchClass.MATCH]
    targets = random.Random(17).sample(match_edges, 50)
    for a, b in targets:
        assert client.post("/unlink", json={"a": a, "b": b,
                                            "author": "gate"}).status_code == 200

    recomputed = linker.link(store.scores, store.rules, set(store.records.index),
                             store.records, store.anon)
    served = json.dumps(store.partition.to_json(), sort_keys=True)
    scratch = json.dumps(recomputed.to_json(), sort_keys=True)

    reborn = TestClient(create_app(data_dir))
    replayed = json.dumps(reborn.app.state.store.partition.to_json(), sort_keys=True)

    ok = served == scratch and replayed == served
    verdict(capsys, "criterion 9: service consistency", ok,
            f"50 scripted unlinks: served==recomputed {served == scratch}, "
            f"restart replay bit-identical {replayed == served}")
