"""Contrastive training of a projection head over frozen base embeddings.

The objective is the in-batch InfoNCE cross-entropy with temperature tau:
each anchor must pick out its own positive among every positive in the
batch plus every attached hard negative. Projected outputs are re-normalized
before similarity, so the normalization Jacobian is part of the analytic
gradient. The optimizer is plain fixed-step gradient descent, which keeps
the whole trajectory a pure function of (data, config).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .embstore import EmbeddingMatrix
from .errors import MissingIdError, VectorFormatError

HEAD_MAGIC = b"IEBH"
HEAD_FORMAT_VERSION = 1

ACTIVATIONS = ("identity", "tanh")


@dataclass
class ProjectionHead:
    weight: np.ndarray  # (dim_out, dim_in)
    bias: np.ndarray | None = None  # (dim_out,)
    activation: str = "identity"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if self.weight.ndim != 2:
            raise ValueError("weight must be 2-D")
        if not np.all(np.isfinite(self.weight)):
            raise ValueError("weight has non-finite entries")
        if self.bias is not None:
            self.bias = np.asarray(self.bias, dtype=np.float64)
            if self.bias.shape != (self.weight.shape[0],):
                raise ValueError("bias shape does not match weight rows")
            if not np.all(np.isfinite(self.bias)):
                raise ValueError("bias has non-finite entries")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def dim_in(self) -> int:
        return int(self.weight.shape[1])

    @property
    def dim_out(self) -> int:
        return int(self.weight.shape[0])

    def copy(self) -> "ProjectionHead":
        return ProjectionHead(
            self.weight.copy(),
            None if self.bias is None else self.bias.copy(),
            self.activation,
        )

    @classmethod
    def identity(cls, dim: int) -> "ProjectionHead":
        return cls(np.eye(dim))

    @classmethod
    def random_init(
        cls,
        dim_in: int,
        dim_out: int,
        seed: int = 0,
        bias: bool = False,
        activation: str = "identity",
    ) -> "ProjectionHead":
        rng = np.random.default_rng([seed, 0xBEAD])
        w = rng.standard_normal((dim_out, dim_in)) / np.sqrt(dim_in)
        b = np.zeros(dim_out) if bias else None
        return cls(w, b, activation)


@dataclass
class TrainConfig:
    learning_rate: float
    temperature: float = 0.05
    batch_size: int = 16
    epochs: int = 1
    seed: int = 0
    use_hard_negatives: bool = True
    head_dim: int | None = None  # None: square identity-initialized head
    bias: bool = False
    activation: str = "identity"

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 2 and not self.use_hard_negatives:
            raise ValueError(
                "batch_size must be >= 2 without hard negatives "
                "(a lone positive gives zero gradient)"
            )
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class PairBatch:
    """Base-embedding rows for one mini-batch; hard negatives are shared by
    every instance in the batch."""

    anchors: np.ndarray  # (N, dim_in)
    positives: np.ndarray  # (N, dim_in)
    hard_negatives: np.ndarray | None = None  # (H, dim_in)


@dataclass
class HeadGradients:
    weight: np.ndarray
    bias: np.ndarray | None = None


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values in {name}")


def infonce_loss(anchors, positives, hard_negatives=None, tau: float = 0.05):
    """InfoNCE loss over projected, unit-norm embeddings.

    Returns (mean loss, per-instance losses). The denominator for every
    instance covers all batch positives plus all attached hard negatives.
    """
    a = np.asarray(anchors, dtype=np.float64)
    p = np.asarray(positives, dtype=np.float64)
    if a.ndim != 2 or p.shape != a.shape:
        raise ValueError("anchors and positives must be matching 2-D arrays")
    if a.shape[0] == 0:
        raise ValueError("empty batch")
    if tau <= 0:
        raise ValueError("tau must be positive")
    _check_finite("anchors", a)
    _check_finite("positives", p)
    for name, rows in (("anchors", a), ("positives", p)):
        norms = np.linalg.norm(rows, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-4):
            raise ValueError(f"{name} must be unit-normalized")
    logits = (a @ p.T) / tau
    if hard_negatives is not None and len(hard_negatives) > 0:
        g = np.asarray(hard_negatives, dtype=np.float64)
        _check_finite("hard_negatives", g)
        logits = np.hstack([logits, (a @ g.T) / tau])
    peak = logits.max(axis=1, keepdims=True)
    lse = peak[:, 0] + np.log(np.exp(logits - peak).sum(axis=1))
    per_instance = lse - np.diagonal(logits[:, : a.shape[0]])
    return float(per_instance.mean()), per_instance


def _project(head: ProjectionHead, x: np.ndarray):
    """Forward pass returning (pre-activation, activated, unit rows, norms)."""
    u = x @ head.weight.T
    if head.bias is not None:
        u = u + head.bias
    z = np.tanh(u) if head.activation == "tanh" else u
    norms = np.linalg.norm(z, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("projection produced a zero row; cannot normalize")
    return u, z, z / norms[:, None], norms


def apply_head(head: ProjectionHead, m: EmbeddingMatrix) -> EmbeddingMatrix:
    """Project, activate, and re-normalize every row; ids preserved."""
    if m.dim != head.dim_in:
        raise ValueError(f"head expects dim {head.dim_in}, matrix has {m.dim}")
    if len(m) == 0:
        return EmbeddingMatrix(list(m.ids), np.zeros((0, head.dim_out), np.float32))
    _, _, h, _ = _project(head, np.asarray(m.rows, dtype=np.float64))
    return EmbeddingMatrix.from_rows(list(m.ids), h, normalize=False)


def _loss_and_gradient(batch: PairBatch, head: ProjectionHead, tau: float):
    a_in = np.asarray(batch.anchors, dtype=np.float64)
    p_in = np.asarray(batch.positives, dtype=np.float64)
    n = a_in.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    g_in = batch.hard_negatives
    n_hard = 0 if g_in is None else len(g_in)
    stack = [a_in, p_in]
    if n_hard:
        stack.append(np.asarray(g_in, dtype=np.float64))
    x = np.vstack(stack)
    _check_finite("batch", x)

    u, z, h, norms = _project(head, x)
    ha, hp = h[:n], h[n : 2 * n]
    hg = h[2 * n :]

    loss, _ = infonce_loss(ha, hp, hg if n_hard else None, tau)

    logits = (ha @ hp.T) / tau
    if n_hard:
        logits = np.hstack([logits, (ha @ hg.T) / tau])
    peak = logits.max(axis=1, keepdims=True)
    expx = np.exp(logits - peak)
    probs = expx / expx.sum(axis=1, keepdims=True)

    d_pos = probs[:, :n] - np.eye(n)  # d loss_i / d s_im, scaled below
    d_hard = probs[:, n:]
    scale = 1.0 / (n * tau)
    dha = scale * (d_pos @ hp + (d_hard @ hg if n_hard else 0.0))
    dhp = scale * (d_pos.T @ ha)
    dh = [dha, dhp]
    if n_hard:
        dh.append(scale * (d_hard.T @ ha))
    dh = np.vstack(dh)

    # back through L2 normalization: (I - h h^T)/|z| applied row-wise
    dz = (dh - np.sum(dh * h, axis=1, keepdims=True) * h) / norms[:, None]
    du = dz * (1.0 - z * z) if head.activation == "tanh" else dz
    grads = HeadGradients(
        weight=du.T @ x,
        bias=du.sum(axis=0) if head.bias is not None else None,
    )
    return loss, grads


def loss_gradient(batch: PairBatch, head: ProjectionHead, tau: float) -> HeadGradients:
    """Exact analytic gradient of the batch loss w.r.t. head parameters."""
    return _loss_and_gradient(batch, head, tau)[1]


def train_head(
    corpus,
    base_embeddings: EmbeddingMatrix,
    pairs,
    cfg: TrainConfig,
    initial_head: ProjectionHead | None = None,
):
    """Gradient-descent training over seeded shuffled mini-batches.

    Returns (head, trace) where trace is a list of (step, loss). With
    cfg.epochs == 0 the returned head equals the initialization.
    """
    for pair in pairs:
        for id_ in (pair.anchor_id, pair.positive_id, pair.hard_negative_id):
            if id_ is not None and id_ not in base_embeddings:
                raise MissingIdError(f"pair references unknown id {id_!r}")

    if initial_head is not None:
        head = initial_head.copy()
    elif cfg.head_dim is None:
        head = ProjectionHead.identity(base_embeddings.dim)
    else:
        head = ProjectionHead.random_init(
            base_embeddings.dim,
            cfg.head_dim,
            seed=cfg.seed,
            bias=cfg.bias,
            activation=cfg.activation,
        )
    if head.dim_in != base_embeddings.dim:
        raise ValueError("initial head dim does not match embeddings")

    rows = np.asarray(base_embeddings.rows, dtype=np.float64)
    idx = base_embeddings.index_of
    rng = np.random.default_rng([cfg.seed, 0x5EED])
    order = np.arange(len(pairs))
    trace = []
    step = 0
    for _epoch in range(cfg.epochs):
        rng.shuffle(order)
        for lo in range(0, len(order), cfg.batch_size):
            chunk = [pairs[i] for i in order[lo : lo + cfg.batch_size]]
            anchors = rows[[idx(p.anchor_id) for p in chunk]]
            positives = rows[[idx(p.positive_id) for p in chunk]]
            hard = None
            if cfg.use_hard_negatives:
                hard_ids = [
                    p.hard_negative_id for p in chunk if p.hard_negative_id is not None
                ]
                if hard_ids:
                    hard = rows[[idx(i) for i in hard_ids]]
            batch = PairBatch(anchors, positives, hard)
            loss, grads = _loss_and_gradient(batch, head, cfg.temperature)
            head.weight -= cfg.learning_rate * grads.weight
            if head.bias is not None:
                head.bias -= cfg.learning_rate * grads.bias
            trace.append((step, loss))
            step += 1
    return head, trace


# ---------------------------------------------------------------------------
# head checkpoint persistence (same container family as embeddings)


def save_head(head: ProjectionHead, path) -> None:
    act = ACTIVATIONS.index(head.activation)
    has_bias = 0 if head.bias is None else 1
    parts = [
        HEAD_MAGIC,
        struct.pack(
            "<IIIII", HEAD_FORMAT_VERSION, head.dim_out, head.dim_in, act, has_bias
        ),
        np.ascontiguousarray(head.weight, dtype="<f4").tobytes(),
    ]
    if head.bias is not None:
        parts.append(np.ascontiguousarray(head.bias, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_head(path) -> ProjectionHead:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 24:
        raise VectorFormatError(path, len(data), "truncated header (need 24 bytes)")
    if data[:4] != HEAD_MAGIC:
        raise VectorFormatError(path, 0, f"bad magic {data[:4]!r}, expected {HEAD_MAGIC!r}")
    version, dim_out, dim_in, act, has_bias = struct.unpack_from("<IIIII", data, 4)
    if version != HEAD_FORMAT_VERSION:
        raise VectorFormatError(path, 4, f"unsupported version {version}")
    if act >= len(ACTIVATIONS) or has_bias not in (0, 1):
        raise VectorFormatError(path, 16, "bad activation or bias flag")
    off = 24
    need = dim_out * dim_in * 4 + (dim_out * 4 if has_bias else 0)
    if len(data) - off != need:
        raise VectorFormatError(
            path, min(len(data), off + need), f"payload must be exactly {need} bytes"
        )
    weight = (
        np.frombuffer(data, dtype="<f4", count=dim_out * dim_in, offset=off)
        .reshape(dim_out, dim_in)
        .astype(np.float64)
    )
    bias = None
    if has_bias:
        bias = np.frombuffer(
            data, dtype="<f4", count=dim_out, offset=off + dim_out * dim_in * 4
        ).astype(np.float64)
    return ProjectionHead(weight, bias, ACTIVATIONS[act])


def save_trace(trace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,loss\n")
        for step, loss in trace:
            fh.write(f"{step},{loss!r}\n")
