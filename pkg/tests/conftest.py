import random

import pytest

from xem import evalharness, gnn, linker, matcher, proxygraph, synthgen
from xem.records import AnonymousValueList


class SmallRun:
    """A small end-to-end pipeline shared across test modules."""

    def __init__(self, n_base=200, seed=42, epochs=200):
        self.gen_cfg = synthgen.GenConfig(n_base_entities=n_base, seed=seed)
        self.records, self.gold = synthgen.generate(self.gen_cfg)
        self.anon = AnonymousValueList.default()
        self.weights = matcher.default_weight_table(self.records.schema)
        self.thresholds = evalharness.DEFAULT_THRESHOLDS
        self.blocking = evalharness.DEFAULT_BLOCKING
        self.scores = matcher.run_matching(
            self.records, self.blocking, self.weights, self.thresholds, self.anon)
        self.partition = linker.link(self.scores, [], set(self.records.index),
                                     self.records, self.anon)
        self.codec = proxygraph.FeatureCodec(self.records.schema)
        self.graph = proxygraph.build_graph(self.partition, self.records, self.codec)
        pairs = proxygraph.make_training_set(self.scores, list(self.records.index), seed=7)
        rng = random.Random(11)
        rng.shuffle(pairs)
        cut = int(0.8 * len(pairs))
        self.train_pairs, self.heldout_pairs = pairs[:cut], pairs[cut:]
        self.params = gnn.train(self.graph, self.train_pairs,
                                gnn.TrainConfig(seed=3, epochs=epochs))
        scorer = matcher.PairScorer(self.records, self.weights, self.thresholds, self.anon)
        self.scorer = lambda a, b: scorer.score(a, b).total
        self.match_pairs = [s.pair for s in self.scores
                            if s.match_class is matcher.MatchClass.MATCH]


@pytest.fixture(scope="session")
def small_run():
    return SmallRun()
