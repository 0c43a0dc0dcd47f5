"""Clustering-based evaluation of instruction embeddings.

k-means with k-means++ seeding and restarts, the four clustering metrics
(adjusted Rand index, clustering purity, homogeneity, silhouette), Spearman
rank correlation for the intention-similarity test, and a 2-D PCA
projection for report plots.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .embstore import EmbeddingMatrix

KMEANS_TOL = 1e-6
KMEANS_MAX_ITER = 300


@dataclass
class ClusterAssignment:
    ids: list[str]
    labels: np.ndarray
    centers: np.ndarray
    inertia: float

    @property
    def k(self) -> int:
        return int(self.centers.shape[0])

    @property
    def cluster_of(self) -> dict:
        return {id_: int(c) for id_, c in zip(self.ids, self.labels)}


@dataclass
class MetricsReport:
    ari: float
    cp: float
    homo: float
    silh: float
    iis_spearman: float | None = None
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "ari": self.ari,
            "cp": self.cp,
            "homo": self.homo,
            "silh": self.silh,
            "iis_spearman": self.iis_spearman,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# k-means


def _plusplus_init(x: np.ndarray, k: int, rng) -> np.ndarray:
    # greedy k-means++: several D^2-weighted candidates per step, keeping
    # the one that shrinks the potential most (ties to the first drawn)
    n = x.shape[0]
    n_candidates = 2 + int(np.log(k))
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    centers[0] = x[int(rng.integers(n))]
    dist2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(dist2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))  # all mass on chosen points (duplicates)
            centers[j] = x[idx]
            dist2 = np.minimum(dist2, np.sum((x - centers[j]) ** 2, axis=1))
            continue
        candidates = rng.choice(n, p=dist2 / total, size=n_candidates)
        best_idx, best_dist2, best_total = None, None, np.inf
        for idx in candidates:
            cand_dist2 = np.minimum(dist2, np.sum((x - x[int(idx)]) ** 2, axis=1))
            cand_total = float(cand_dist2.sum())
            if cand_total < best_total:
                best_idx, best_dist2, best_total = int(idx), cand_dist2, cand_total
        centers[j] = x[best_idx]
        dist2 = best_dist2
    return centers


def _assign(x: np.ndarray, centers: np.ndarray):
    # squared Euclidean via the expansion; ties resolve to the lowest index
    d2 = (
        np.sum(x * x, axis=1)[:, None]
        - 2.0 * (x @ centers.T)
        + np.sum(centers * centers, axis=1)[None, :]
    )
    labels = np.argmin(d2, axis=1)
    return labels, np.maximum(d2[np.arange(x.shape[0]), labels], 0.0)


def _lloyd(x: np.ndarray, centers: np.ndarray, inertia_trace=None):
    k = centers.shape[0]
    labels = None
    for _ in range(KMEANS_MAX_ITER):
        labels, dist2 = _assign(x, centers)
        if inertia_trace is not None:
            inertia_trace.append(float(dist2.sum()))
        # empty clusters steal the globally farthest point
        counts = np.bincount(labels, minlength=k)
        for empty in np.flatnonzero(counts == 0):
            far = int(np.argmax(dist2))
            labels[far] = empty
            counts = np.bincount(labels, minlength=k)
            dist2[far] = -np.inf
        new_centers = np.empty_like(centers)
        for j in range(k):
            new_centers[j] = x[labels == j].mean(axis=0)
        shift = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        if shift < KMEANS_TOL:
            break
    labels, dist2 = _assign(x, centers)
    return labels, centers, float(dist2.sum())


def kmeans(
    m: EmbeddingMatrix, k: int, seed: int = 0, restarts: int = 10
) -> ClusterAssignment:
    """Best-of-restarts Lloyd k-means with k-means++ seeding.

    Deterministic under (m, k, seed, restarts); the best restart is chosen
    by (inertia, restart index).
    """
    x = np.asarray(m.rows, dtype=np.float64)
    n = x.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k={k} must be in [1, {n}]")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best = None
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        centers = _plusplus_init(x, k, rng)
        labels, centers, inertia = _lloyd(x, centers)
        if best is None or inertia < best[0]:
            best = (inertia, labels, centers)
    inertia, labels, centers = best
    return ClusterAssignment(list(m.ids), labels, centers, inertia)


# ---------------------------------------------------------------------------
# external clustering metrics


def _check_labelings(pred, truth):
    pred = list(pred)
    truth = list(truth)
    if len(pred) != len(truth):
        raise ValueError(f"length mismatch: {len(pred)} vs {len(truth)}")
    if len(pred) < 2:
        raise ValueError("need at least 2 points")
    return pred, truth


def _contingency(pred, truth):
    table = {}
    for p, t in zip(pred, truth):
        table[(p, t)] = table.get((p, t), 0) + 1
    return table


def adjusted_rand_index(pred, truth) -> float:
    """Contingency-table ARI; 1 for identical partitions up to renaming."""
    pred, truth = _check_labelings(pred, truth)
    n = len(pred)
    table = _contingency(pred, truth)
    rows, cols = {}, {}
    for (p, t), c in table.items():
        rows[p] = rows.get(p, 0) + c
        cols[t] = cols.get(t, 0) + c
    comb2 = lambda v: v * (v - 1) // 2
    index = sum(comb2(c) for c in table.values())
    a = sum(comb2(c) for c in rows.values())
    b = sum(comb2(c) for c in cols.values())
    expected = a * b / comb2(n)
    maximum = (a + b) / 2.0
    if maximum == expected:  # both partitions trivial and identical
        return 1.0
    return (index - expected) / (maximum - expected)


def clustering_purity(pred, truth) -> float:
    """Mean over clusters of the dominant true-class share."""
    pred, truth = _check_labelings(pred, truth)
    table = _contingency(pred, truth)
    best = {}
    for (p, _t), c in table.items():
        best[p] = max(best.get(p, 0), c)
    return sum(best.values()) / len(pred)


def homogeneity(pred, truth) -> float:
    """1 - H(truth|pred)/H(truth), natural log; 1.0 when H(truth) = 0."""
    pred, truth = _check_labelings(pred, truth)
    n = len(pred)
    table = _contingency(pred, truth)
    rows, cols = {}, {}
    for (p, t), c in table.items():
        rows[p] = rows.get(p, 0) + c
        cols[t] = cols.get(t, 0) + c
    h_truth = -sum((c / n) * math.log(c / n) for c in cols.values())
    if h_truth == 0.0:
        return 1.0
    h_cond = -sum(
        (c / n) * math.log(c / rows[p]) for (p, _), c in table.items()
    )
    return 1.0 - h_cond / h_truth


def silhouette(m: EmbeddingMatrix, pred) -> float:
    """Mean silhouette under cosine distance (1 - dot on unit rows).

    Singleton clusters score 0; so do points where both a and b vanish.
    """
    labels = np.asarray(list(pred))
    x = np.asarray(m.rows, dtype=np.float64)
    x = x / np.linalg.norm(x, axis=1, keepdims=True)  # exact cosine in float64
    n = x.shape[0]
    if labels.shape[0] != n:
        raise ValueError(f"length mismatch: {labels.shape[0]} labels for {n} rows")
    uniq, inv = np.unique(labels, return_inverse=True)
    k = len(uniq)
    if k < 2:
        raise ValueError("silhouette requires at least 2 clusters")
    counts = np.bincount(inv, minlength=k)

    # per-point sum of distances to each cluster, chunked to bound memory
    sums = np.empty((n, k), dtype=np.float64)
    onehot = np.zeros((n, k), dtype=np.float64)
    onehot[np.arange(n), inv] = 1.0
    chunk = 1024
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        d = 1.0 - x[lo:hi] @ x.T
        np.maximum(d, 0.0, out=d)
        d[np.arange(hi - lo), np.arange(lo, hi)] = 0.0
        sums[lo:hi] = d @ onehot

    own = counts[inv]
    scores = np.zeros(n, dtype=np.float64)
    multi = own > 1
    a = np.zeros(n)
    a[multi] = sums[np.arange(n), inv][multi] / (own[multi] - 1)
    other = sums / counts[None, :]
    other[np.arange(n), inv] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    ok = multi & (denom > 0)
    scores[ok] = (b[ok] - a[ok]) / denom[ok]
    return float(scores.mean())


def spearman(x, y) -> float:
    """Pearson correlation of average ranks (ties share their mean rank)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < 2:
        raise ValueError("need at least 2 observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValueError("spearman undefined for a constant vector")
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    return float(np.dot(rx, ry) / math.sqrt(np.dot(rx, rx) * np.dot(ry, ry)))


def _average_ranks(v: np.ndarray) -> np.ndarray:
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v), dtype=np.float64)
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


# ---------------------------------------------------------------------------
# task-level runners


def run_ict(
    m: EmbeddingMatrix,
    corpus,
    k: int | None = None,
    seed: int = 0,
    restarts: int = 10,
) -> MetricsReport:
    """Instruction clustering task: k-means then all four metrics against
    the true category labels. k defaults to the category count."""
    truth = []
    for id_ in m.ids:
        label = corpus.get(id_).label
        if label is None:
            raise ValueError(f"instruction {id_!r} is unlabeled")
        truth.append(label.key)
    if k is None:
        k = len(set(truth))
    assignment = kmeans(m, k, seed=seed, restarts=restarts)
    pred = assignment.labels.tolist()
    return MetricsReport(
        ari=adjusted_rand_index(pred, truth),
        cp=clustering_purity(pred, truth),
        homo=homogeneity(pred, truth),
        silh=silhouette(m, pred),
        metadata={"k": k, "seed": seed, "restarts": restarts},
    )


def run_iis(m: EmbeddingMatrix, pairs) -> float:
    """Spearman correlation between pair cosine similarities and labels."""
    sims, labels = [], []
    for p in pairs:
        sims.append(float(np.dot(m.row(p.left_id), m.row(p.right_id))))
        labels.append(p.label)
    return spearman(sims, labels)


# ---------------------------------------------------------------------------
# PCA projection


def pca2d(m: EmbeddingMatrix, max_iter: int = 1000, tol: float = 1e-12) -> np.ndarray:
    """Top-2 principal components of the mean-centered rows via orthogonal
    iteration; per-component sign fixed so the largest-magnitude coordinate
    is positive."""
    x = np.asarray(m.rows, dtype=np.float64)
    n, d = x.shape
    if n < 1:
        return np.zeros((0, 2))
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc
    rng = np.random.default_rng(12345)  # fixed: pca2d takes no seed
    q = np.linalg.qr(rng.standard_normal((d, 2)))[0]
    prev = np.zeros_like(q)
    for _ in range(max_iter):
        z = cov @ q
        q, _ = np.linalg.qr(z)
        if np.linalg.norm(q @ q.T - prev @ prev.T) < tol:
            break
        prev = q
    # order by explained variance, descending
    var = np.einsum("ij,ij->j", xc @ q, xc @ q)
    if var[1] > var[0]:
        q = q[:, ::-1]
    coords = xc @ q
    for j in range(2):
        col = coords[:, j]
        if len(col) and col[int(np.argmax(np.abs(col)))] < 0:
            coords[:, j] = -col
    return coords
