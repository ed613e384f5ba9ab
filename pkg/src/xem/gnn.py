"""Two-layer GCN proxy with manual gradients and a link-prediction head.

Propagation: H1 = relu(A_hat X W1), H = relu(A_hat H1 W2). A pair (u, v) is
scored by sigmoid(w . (H_u * H_v) + b), which is symmetric by construction.
Training is full-batch momentum SGD, deterministic for a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .proxygraph import EntityGraph, TrainingPair


class ShapeError(ValueError):
    pass


class DivergenceError(RuntimeError):
    pass


@dataclass
class GcnParams:
    w1: np.ndarray      # D x h
    w2: np.ndarray      # h x h
    w_link: np.ndarray  # h
    b_link: float

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    def blocks(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "w2": self.w2, "w_link": self.w_link,
                "b_link": np.array([self.b_link])}

    def copy(self) -> "GcnParams":
        return GcnParams(self.w1.copy(), self.w2.copy(), self.w_link.copy(), self.b_link)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 200
    seed: int = 0
    l2: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    hidden: int = 32

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass(frozen=True)
class Prediction:
    pair: tuple[str, str]
    probability: float


def init_params(dim: int, hidden: int, seed: int) -> GcnParams:
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(dim)
    return GcnParams(
        w1=rng.uniform(-scale, scale, size=(dim, hidden)),
        w2=rng.uniform(-scale, scale, size=(hidden, hidden)),
        w_link=rng.uniform(-scale, scale, size=hidden),
        b_link=0.0,
    )


def _forward_cache(g: EntityGraph, params: GcnParams, features: np.ndarray | None = None):
    x = g.features if features is None else features
    if x.shape[1] != params.w1.shape[0]:
        raise ShapeError(f"feature dim {x.shape} incompatible with W1 {params.w1.shape}")
    ax = g.adj_norm @ x
    z1 = ax @ params.w1
    h1 = np.maximum(z1, 0.0)
    ah1 = g.adj_norm @ h1
    z2 = ah1 @ params.w2
    h = np.maximum(z2, 0.0)
    return x, ax, z1, h1, ah1, z2, h


def forward(g: EntityGraph, params: GcnParams, features: np.ndarray | None = None) -> np.ndarray:
    """Node embedding matrix H (N x h)."""
    return _forward_cache(g, params, features)[-1]


def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500))),
                    np.exp(np.clip(z, -500, 500)) / (1.0 + np.exp(np.clip(z, -500, 500))))


def pair_logits(h: np.ndarray, iu: np.ndarray, iv: np.ndarray, params: GcnParams) -> np.ndarray:
    return (h[iu] * h[iv]) @ params.w_link + params.b_link


def predict_link(h: np.ndarray, g: EntityGraph, u: str, v: str, params: GcnParams) -> Prediction:
    iu, iv = g.node_index(u), g.node_index(v)
    logit = float(h[iu] * h[iv] @ params.w_link + params.b_link)
    return Prediction((u, v) if u < v else (v, u), float(_sigmoid(np.array(logit))))


def loss_and_gradients(
    g: EntityGraph,
    params: GcnParams,
    batch: list[TrainingPair],
    l2: float = 1e-4,
    features: np.ndarray | None = None,
    want_feature_grad: bool = False,
):
    """Mean BCE over the batch plus l2 * ||params||^2 / 2, with exact
    gradients for every parameter block (and optionally for the feature
    matrix, used by the mask explainer)."""
    if not batch:
        raise ValueError("batch must be nonempty")
    x, ax, z1, h1, ah1, z2, h = _forward_cache(g, params, features)
    iu = np.array([g.node_index(p.u) for p in batch])
    iv = np.array([g.node_index(p.v) for p in batch])
    y = np.array([float(p.label) for p in batch])
    logits = pair_logits(h, iu, iv, params)
    p = _sigmoid(logits)
    eps = 1e-12
    bce = -np.mean(y * np.log(p + eps) + (1.0 - y) * np.log(1.0 - p + eps))
    reg = 0.5 * l2 * (np.sum(params.w1 ** 2) + np.sum(params.w2 ** 2)
                      + np.sum(params.w_link ** 2) + params.b_link ** 2)
    loss = bce + reg

    dlogit = (p - y) / len(batch)
    e = h[iu] * h[iv]
    dw_link = e.T @ dlogit + l2 * params.w_link
    db_link = float(np.sum(dlogit)) + l2 * params.b_link
    dh = np.zeros_like(h)
    np.add.at(dh, iu, dlogit[:, None] * params.w_link * h[iv])
    np.add.at(dh, iv, dlogit[:, None] * params.w_link * h[iu])

    dz2 = dh * (z2 > 0)
    dw2 = ah1.T @ dz2 + l2 * params.w2
    dh1 = g.adj_norm.T @ (dz2 @ params.w2.T)
    dz1 = dh1 * (z1 > 0)
    dw1 = ax.T @ dz1 + l2 * params.w1

    grads = GcnParams(dw1, dw2, dw_link, db_link)
    if want_feature_grad:
        dx = g.adj_norm.T @ (dz1 @ params.w1.T)
        return loss, grads, dx
    return loss, grads


def train(g: EntityGraph, pairs: list[TrainingPair], cfg: TrainConfig) -> GcnParams:
    """Full-batch Adam; deterministic given cfg.seed.

    Plain momentum SGD stalls on this architecture (the product head makes
    the loss surface flat near init), so the trainer uses Adam with the
    same full-batch, fixed-seed reproducibility contract.
    """
    params = init_params(g.features.shape[1], cfg.hidden, cfg.seed)
    m = {k: np.zeros_like(v) for k, v in params.blocks().items()}
    v = {k: np.zeros_like(val) for k, val in params.blocks().items()}
    eps = 1e-8
    for epoch in range(cfg.epochs):
        loss, grads = loss_and_gradients(g, params, pairs, cfg.l2)
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite loss at epoch {epoch}")
        t = epoch + 1
        gblocks = grads.blocks()
        for k in gblocks:
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gblocks[k]
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gblocks[k] ** 2
            m_hat = m[k] / (1.0 - cfg.beta1 ** t)
            v_hat = v[k] / (1.0 - cfg.beta2 ** t)
            step = cfg.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
            if k == "b_link":
                params.b_link -= float(step[0])
            elif k == "w1":
                params.w1 -= step
            elif k == "w2":
                params.w2 -= step
            else:
                params.w_link -= step
    return params


def agreement(params: GcnParams, g: EntityGraph, heldout: list[TrainingPair]) -> float:
    """Fraction of held-out pairs where round(p) matches the engine's label."""
    if not heldout:
        raise ValueError("heldout set is empty")
    h = forward(g, params)
    iu = np.array([g.node_index(p.u) for p in heldout])
    iv = np.array([g.node_index(p.v) for p in heldout])
    y = np.array([p.label for p in heldout])
    p = _sigmoid(pair_logits(h, iu, iv, params))
    return float(np.mean((p >= 0.5).astype(int) == y))


def save_model(params: GcnParams, codec_fingerprint: str) -> bytes:
    doc = {
        "codec_fingerprint": codec_fingerprint,
        "hidden": params.hidden,
        "w1": {"shape": list(params.w1.shape), "data": params.w1.ravel().tolist()},
        "w2": {"shape": list(params.w2.shape), "data": params.w2.ravel().tolist()},
        "w_link": params.w_link.tolist(),
        "b_link": params.b_link,
    }
    return json.dumps(doc).encode("utf-8")


def load_model(data: bytes, codec_fingerprint: str) -> GcnParams:
    doc = json.loads(data.decode("utf-8"))
    if doc["codec_fingerprint"] != codec_fingerprint:
        raise ShapeError(
            f"model was trained against codec {doc['codec_fingerprint']}, "
            f"current codec is {codec_fingerprint}")
    return GcnParams(
        w1=np.array(doc["w1"]["data"]).reshape(doc["w1"]["shape"]),
        w2=np.array(doc["w2"]["data"]).reshape(doc["w2"]["shape"]),
        w_link=np.array(doc["w_link"]),
        b_link=doc["b_link"],
    )
