"""Explanation generators over the proxy model and the matching engine.

Two complementary views: a feature mask optimized so the masked proxy
reproduces its own prediction (which input dimensions matter to the GCN),
and a perturbation-fitted linear surrogate over the engine's pair scorer
(signed per-attribute contribution bars). Both roll up to attribute level
for the steward-facing tabular report.
"""

from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field

import numpy as np

from . import gnn
from .linker import Entity, Partition
from .matcher import MatchClass, PairScore
from .proxygraph import EntityGraph, TrainingPair
from .records import Record, RecordSet


@dataclass(frozen=True)
class MaskConfig:
    iterations: int = 300
    lr: float = 0.1
    sparsity: float = 0.05   # lambda1, pushes activations toward 0
    entropy: float = 0.1     # lambda2, pushes activations away from 0.5
    init_logit: float = 0.0
    seed: int = 0


@dataclass
class FeatureMask:
    pair: tuple[str, str]
    logits: np.ndarray
    fidelity: float
    p_orig: float
    p_masked: float
    rollup: dict[str, float]

    @property
    def activation(self) -> np.ndarray:
        return _sigmoid(self.logits)

    def top_attributes(self, k: int = 3) -> list[tuple[str, float]]:
        return sorted(self.rollup.items(), key=lambda kv: (-kv[1], kv[0]))[:k]

    def to_json(self) -> dict:
        return {
            "a": self.pair[0], "b": self.pair[1],
            "fidelity": self.fidelity,
            "p_orig": self.p_orig, "p_masked": self.p_masked,
            "rollup": self.rollup,
            "activation": self.activation.tolist(),
        }


def _sigmoid(z):
    z = np.clip(z, -500, 500)
    return 1.0 / (1.0 + np.exp(-z))


def _two_hop_subgraph(g: EntityGraph, u: str, v: str) -> tuple[EntityGraph, str, str]:
    """Restrict to the 2-hop neighborhood of {u, v}.

    The 2-layer GCN's prediction for (u, v) depends only on these nodes;
    keeping the original normalized-adjacency entries (no renormalization)
    makes the restriction exact.
    """
    adj = g.adj_norm
    seed_idx = {g.node_index(u), g.node_index(v)}
    frontier = set(seed_idx)
    for _ in range(2):
        nxt = set()
        for i in frontier:
            nxt.update(adj.indices[adj.indptr[i]:adj.indptr[i + 1]].tolist())
        frontier = nxt | frontier
    keep = np.array(sorted(frontier))
    sub = EntityGraph(
        node_ids=tuple(g.node_ids[i] for i in keep),
        features=g.features[keep],
        edges=(),
        adj_norm=adj[keep][:, keep].tocsr(),
        codec=g.codec,
    )
    return sub, u, v


def explain_pair_mask(params: gnn.GcnParams, g: EntityGraph, u: str, v: str,
                      cfg: MaskConfig = MaskConfig()) -> FeatureMask:
    """Optimize a shared feature-mask logit vector so the proxy, run on
    X * sigmoid(m), preserves its rounded original prediction for (u, v).

    Objective: BCE(p_masked, round(p_orig)) + sparsity * sum(sigmoid(m)) / A
    + entropy * sum(H(sigmoid(m))) / A, where A is the number of schema
    attributes. Edge structure is untouched.
    """
    sub, u, v = _two_hop_subgraph(g, u, v)
    x = sub.features
    d = x.shape[1]
    p_orig = gnn.predict_link(gnn.forward(sub, params), sub, u, v, params).probability
    target = 1 if p_orig >= 0.5 else 0
    batch = [TrainingPair(u, v, target, "mask_target")]

    m = np.full(d, cfg.init_logit, dtype=float)
    vel = np.zeros(d)
    for it in range(cfg.iterations):
        s = _sigmoid(m)
        ds = s * (1.0 - s)
        loss, _, dx = gnn.loss_and_gradients(
            sub, params, batch, l2=0.0, features=x * s, want_feature_grad=True)
        if not np.isfinite(loss):
            raise gnn.DivergenceError(f"mask objective non-finite at iteration {it}")
        # regularizers are normalized per attribute, not per dimension, so
        # their pressure neither vanishes as hashed blocks widen (1/D would
        # be numerically inert at D ~ 250) nor overwhelms the fidelity term
        n_attr = len(sub.codec.schema)
        grad = (x * dx).sum(axis=0) * ds
        grad += cfg.sparsity * ds / n_attr
        grad += cfg.entropy * (-m) * ds / n_attr
        vel = 0.9 * vel - cfg.lr * grad
        m = m + vel

    s = _sigmoid(m)
    p_masked = gnn.predict_link(
        gnn.forward(sub, params, features=x * s), sub, u, v, params).probability
    rollup = {}
    for name, _ in g.codec.schema:
        dims = g.codec.dims_of(name)
        rollup[name] = float(np.mean(s[dims]))
    pair = (u, v) if u < v else (v, u)
    return FeatureMask(pair, m, abs(p_masked - p_orig), p_orig, p_masked, rollup)


def _pair_probability(params: gnn.GcnParams, g: EntityGraph, u: str, v: str,
                      features: np.ndarray | None = None) -> float:
    return gnn.predict_link(gnn.forward(g, params, features), g, u, v, params).probability


def _zero_attributes(x: np.ndarray, g: EntityGraph, attributes: list[str]) -> np.ndarray:
    out = x.copy()
    for a in attributes:
        out[:, g.codec.dims_of(a)] = 0.0
    return out


@dataclass
class MaskSuiteStats:
    fidelities: list[float]
    sparsities: list[float]
    mean_top_delta: float
    mean_random_delta: float

    def to_json(self) -> dict:
        return {
            "mean_fidelity": float(np.mean(self.fidelities)),
            "mean_sparsity": float(np.mean(self.sparsities)),
            "mean_top_delta": self.mean_top_delta,
            "mean_random_delta": self.mean_random_delta,
        }


def mask_fidelity_suite(params: gnn.GcnParams, g: EntityGraph,
                        pairs: list[tuple[str, str]],
                        cfg: MaskConfig = MaskConfig()) -> MaskSuiteStats:
    """Fidelity/sparsity distribution plus the comparative-deletion check:
    zeroing the top-3 rolled-up attributes should move the prediction more
    than zeroing 3 random attributes."""
    rng = random.Random(cfg.seed)
    attr_names = [name for name, _ in g.codec.schema]
    fidelities, sparsities, top_deltas, rand_deltas = [], [], [], []
    for u, v in pairs:
        mask = explain_pair_mask(params, g, u, v, cfg)
        fidelities.append(mask.fidelity)
        sparsities.append(float(np.mean(mask.activation > 0.5)))
        sub, u, v = _two_hop_subgraph(g, u, v)
        p0 = _pair_probability(params, sub, u, v)
        top = [a for a, _ in mask.top_attributes(3)]
        p_top = _pair_probability(params, sub, u, v,
                                  _zero_attributes(sub.features, sub, top))
        rand_attrs = rng.sample(attr_names, 3)
        p_rand = _pair_probability(params, sub, u, v,
                                   _zero_attributes(sub.features, sub, rand_attrs))
        top_deltas.append(abs(p_top - p0))
        rand_deltas.append(abs(p_rand - p0))
    return MaskSuiteStats(fidelities, sparsities,
                          float(np.mean(top_deltas)), float(np.mean(rand_deltas)))


# ---------------------------------------------------------------------------
# Perturbation attribution over the engine scorer


class SamplingError(RuntimeError):
    pass


@dataclass
class Attribution:
    pair: tuple[str, str]
    contributions: dict[str, float]
    intercept: float
    surrogate_r2: float

    def to_json(self) -> dict:
        return {"a": self.pair[0], "b": self.pair[1],
                "contributions": self.contributions,
                "intercept": self.intercept, "r2": self.surrogate_r2}


def attribute_contributions(scorer, a: Record, b: Record, attributes: list[str],
                            n_samples: int = 256, seed: int = 0) -> Attribution:
    """Fit a linear surrogate over random attribute subsets.

    For each sample, attributes outside the subset are neutralized (set
    missing on both records) and the perturbed pair rescored; least squares
    on the subset-indicator design yields signed per-attribute contributions.
    Positive pushes toward Match.
    """
    rng = random.Random(seed)
    k = len(attributes)
    designs, totals = [], []
    for _ in range(n_samples):
        subset = [rng.random() < 0.5 for _ in range(k)]
        keep = {attr for attr, inc in zip(attributes, subset) if inc}
        pa = Record(a.record_id, a.source_id,
                    {n: v for n, v in a.attributes.items() if n in keep})
        pb = Record(b.record_id, b.source_id,
                    {n: v for n, v in b.attributes.items() if n in keep})
        designs.append([1.0] + [float(inc) for inc in subset])
        totals.append(scorer(pa, pb))
    x = np.array(designs)
    y = np.array(totals)
    if np.linalg.matrix_rank(x) < k + 1:
        raise SamplingError("degenerate perturbation design matrix; increase n_samples")
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    pred = x @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)
    pair = (a.record_id, b.record_id) if a.record_id < b.record_id else (b.record_id, a.record_id)
    return Attribution(pair, dict(zip(attributes, coef[1:].tolist())), float(coef[0]), r2)


# ---------------------------------------------------------------------------
# Entity explanation report


@dataclass
class ReportRow:
    member: str
    partner: str
    proxy_probability: float
    top_attributes: list[tuple[str, float]]
    attribution: Attribution
    weak_link: bool
    glue_record: bool
    anonymous_match_suspect: bool

    def to_json(self) -> dict:
        return {
            "member": self.member, "partner": self.partner,
            "proxy_probability": self.proxy_probability,
            "top_attributes": [{"attribute": a, "score": s} for a, s in self.top_attributes],
            "attribution": self.attribution.to_json(),
            "flags": {"weak_link": self.weak_link, "glue_record": self.glue_record,
                      "anonymous_match_suspect": self.anonymous_match_suspect},
        }


@dataclass
class ExplanationReport:
    entity_id: str
    rows: list[ReportRow]

    def to_json(self) -> dict:
        return {"entity_id": self.entity_id, "rows": [r.to_json() for r in self.rows]}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["member", "partner", "proxy_probability", "top_attributes",
                         "weak_link", "glue_record", "anonymous_match_suspect"])
        for r in self.rows:
            writer.writerow([
                r.member, r.partner, f"{r.proxy_probability:.4f}",
                "; ".join(f"{a}={s:.3f}" for a, s in r.top_attributes),
                r.weak_link, r.glue_record, r.anonymous_match_suspect,
            ])
        return buf.getvalue()


class StalenessError(RuntimeError):
    pass


def _articulation_points(nodes: set[str], edges: list[tuple[str, str]]) -> set[str]:
    """Iterative Tarjan articulation points on an undirected graph."""
    adj: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    disc: dict[str, int] = {}
    low: dict[str, int] = {}
    points: set[str] = set()
    counter = 0
    for root in nodes:
        if root in disc:
            continue
        stack = [(root, None, iter(adj[root]))]
        disc[root] = low[root] = counter
        counter += 1
        root_children = 0
        while stack:
            node, parent, it = stack[-1]
            advanced = False
            for nbr in it:
                if nbr == parent:
                    continue
                if nbr in disc:
                    low[node] = min(low[node], disc[nbr])
                    continue
                disc[nbr] = low[nbr] = counter
                counter += 1
                if node == root:
                    root_children += 1
                stack.append((nbr, node, iter(adj[nbr])))
                advanced = True
                break
            if not advanced:
                stack.pop()
                if stack:
                    pnode = stack[-1][0]
                    low[pnode] = min(low[pnode], low[node])
                    if pnode != root and low[node] >= disc[pnode]:
                        points.add(pnode)
        if root_children > 1:
            points.add(root)
    return points


def anonymous_agreement(a: Record, b: Record, rs: RecordSet, anon) -> bool:
    """True when the pair agrees on some anonymous placeholder value."""
    for name, kind in rs.schema:
        va, vb = a.get(name), b.get(name)
        if va is not None and va == vb and anon.is_anonymous(va, kind):
            return True
    return False


def build_explanation_report(
    entity: Entity,
    partition: Partition,
    records: RecordSet,
    pair_scores: list[PairScore],
    params: gnn.GcnParams,
    g: EntityGraph,
    scorer,
    anon,
    mask_cfg: MaskConfig = MaskConfig(),
    weak_threshold: float = 0.6,
    top_k: int = 3,
    attribution_samples: int = 256,
) -> ExplanationReport:
    """One row per non-representative member: proxy probability against the
    representative, top-k masked attributes, attribution bars, and flags."""
    for m in entity.members:
        if m not in g.index:
            raise StalenessError(
                f"record {m!r} missing from the proxy graph; re-run train-proxy")
    member_edges = [p.pair for p in pair_scores
                    if p.match_class is MatchClass.MATCH
                    and p.pair[0] in entity.members and p.pair[1] in entity.members]
    glue = _articulation_points(set(entity.members), member_edges)
    h = gnn.forward(g, params)
    rep = entity.representative
    attributes = records.attribute_names
    rows = []
    for member in sorted(entity.members):
        if member == rep:
            continue
        prob = gnn.predict_link(h, g, member, rep, params).probability
        mask = explain_pair_mask(params, g, member, rep, mask_cfg)
        attribution = attribute_contributions(
            scorer, records[member], records[rep], attributes,
            n_samples=attribution_samples, seed=mask_cfg.seed)
        rows.append(ReportRow(
            member=member,
            partner=rep,
            proxy_probability=prob,
            top_attributes=mask.top_attributes(top_k),
            attribution=attribution,
            weak_link=prob < weak_threshold,
            glue_record=member in glue,
            anonymous_match_suspect=anonymous_agreement(
                records[member], records[rep], records, anon),
        ))
    return ExplanationReport(entity.entity_id, rows)
