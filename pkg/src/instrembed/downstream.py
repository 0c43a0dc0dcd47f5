"""Embedding applications: cluster-center data selection, demonstration
retrieval with ICL prompt assembly, tiny-benchmark construction, and
cross-dataset task correlation.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .embstore import EmbeddingMatrix
from .errors import ParseError
from .evaluation import kmeans

ICL_HEADER = "Below is an instruction that describes a task."


@dataclass
class SelectionResult:
    chosen_ids: list[str]
    cluster_of: dict
    k: int


@dataclass
class CorrelationMatrix:
    datasets: list[str]
    matrix: np.ndarray

    def to_json(self) -> str:
        return (
            json.dumps(
                {"datasets": self.datasets, "matrix": self.matrix.tolist()},
                sort_keys=True,
            )
            + "\n"
        )

    def to_csv(self) -> str:
        lines = ["dataset," + ",".join(self.datasets)]
        for name, row in zip(self.datasets, self.matrix):
            lines.append(name + "," + ",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"


def _representatives(m: EmbeddingMatrix, assignment) -> list[str]:
    """Per cluster, the member nearest to the center (ties: lowest id)."""
    x = np.asarray(m.rows, dtype=np.float64)
    chosen = []
    for j in range(assignment.k):
        members = np.flatnonzero(assignment.labels == j)
        d2 = np.sum((x[members] - assignment.centers[j]) ** 2, axis=1)
        best = d2.min()
        tied = members[np.flatnonzero(d2 <= best)]
        chosen.append(min(m.ids[i] for i in tied))
    return chosen


def select_for_tuning(
    m: EmbeddingMatrix, k: int = 600, seed: int = 0, restarts: int = 10
) -> SelectionResult:
    """k-means the split, keep each cluster's nearest-to-center sample."""
    assignment = kmeans(m, k, seed=seed, restarts=restarts)
    return SelectionResult(
        chosen_ids=_representatives(m, assignment),
        cluster_of=assignment.cluster_of,
        k=k,
    )


def retrieve_demonstrations(
    query_m: EmbeddingMatrix, pool_m: EmbeddingMatrix, topk: int = 2
) -> dict:
    """Exact top-k cosine retrieval per query, descending, ties by lowest id.

    A query id present in the pool never retrieves itself.
    """
    if query_m.dim != pool_m.dim:
        raise ValueError(f"dim mismatch: {query_m.dim} vs {pool_m.dim}")
    if len(pool_m) == 0:
        raise ValueError("pool is empty")
    if topk > len(pool_m):
        raise ValueError(f"topk={topk} exceeds pool size {len(pool_m)}")
    sims = np.asarray(query_m.rows, np.float64) @ np.asarray(pool_m.rows, np.float64).T
    pool_ids = list(pool_m.ids)
    out = {}
    for qi, qid in enumerate(query_m.ids):
        ranked = sorted(
            (j for j in range(len(pool_ids)) if pool_ids[j] != qid),
            key=lambda j: (-sims[qi, j], pool_ids[j]),
        )
        out[qid] = [pool_ids[j] for j in ranked[:topk]]
    return out


def assemble_icl_prompt(query, demos) -> str:
    """Render the fixed ICL prompt: header, demonstration blocks in order,
    then the query block with an empty response slot. Byte-exact for
    identical inputs."""
    query_text = query if isinstance(query, str) else query.text
    parts = [ICL_HEADER, "\n\n"]
    for instruction, response in demos:
        text = instruction if isinstance(instruction, str) else instruction.text
        parts.append(f"### Instruction:\n{text}\n\n### Response:\n{response}\n\n")
    parts.append(f"### Instruction:\n{query_text}\n\n### Response:\n")
    return "".join(parts)


def tiny_benchmark(
    m: EmbeddingMatrix, sizes=(10, 50, 100), seed: int = 0, restarts: int = 10
) -> dict:
    """Per requested size s, the k=s cluster-center representative ids."""
    out = {}
    for size in sizes:
        selection = select_for_tuning(m, k=size, seed=seed, restarts=restarts)
        out[int(size)] = selection.chosen_ids
    return out


def estimation_error(scores: dict, subset_ids) -> float:
    """|mean(subset) - mean(all)| in percentage points."""
    subset_ids = list(subset_ids)
    if not scores:
        raise ValueError("empty score vector")
    if not subset_ids:
        raise ValueError("empty subset")
    missing = [i for i in subset_ids if i not in scores]
    if missing:
        raise ValueError(f"subset ids missing from scores: {missing[:3]}")
    values = np.array(list(scores.values()), dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("scores must be finite")
    sub = np.array([scores[i] for i in subset_ids], dtype=np.float64)
    return float(abs(sub.mean() - values.mean()) * 100.0)


def tiny_benchmark_study(
    m: EmbeddingMatrix,
    scores: dict,
    sizes=(10, 50, 100),
    runs: int = 100,
    seed: int = 0,
    strategies=("embedding", "random"),
    restarts: int = 1,
) -> dict:
    """Mean estimation error per strategy and size over re-seeded runs."""
    out = {s: {int(size): 0.0 for size in sizes} for s in strategies}
    ids = list(m.ids)
    for r in range(runs):
        for strategy in strategies:
            if strategy == "embedding":
                per_size = tiny_benchmark(m, sizes, seed=seed + r, restarts=restarts)
            elif strategy == "random":
                rng = np.random.default_rng([seed + r, 0xA11])
                per_size = {
                    int(size): [ids[i] for i in rng.choice(len(ids), size, replace=False)]
                    for size in sizes
                }
            else:
                raise ValueError(f"unknown strategy {strategy!r}")
            for size, chosen in per_size.items():
                out[strategy][size] += estimation_error(scores, chosen)
    for strategy in out:
        for size in out[strategy]:
            out[strategy][size] /= runs
    return out


def dataset_correlation(
    d1: EmbeddingMatrix, d2: EmbeddingMatrix, exclude_self_match: bool = False
) -> float:
    """Mean over d1 rows of the max cosine into d2 (optionally skipping the
    identically-named row)."""
    if d1.dim != d2.dim:
        raise ValueError(f"dim mismatch: {d1.dim} vs {d2.dim}")
    if len(d2) == 0:
        raise ValueError("d2 is empty")
    if len(d1) == 0:
        raise ValueError("d1 is empty")
    a = np.asarray(d1.rows, np.float64)
    b = np.asarray(d2.rows, np.float64)
    # renormalize in float64 so an identical row scores exactly 1
    a = a / np.linalg.norm(a, axis=1, keepdims=True)
    b = b / np.linalg.norm(b, axis=1, keepdims=True)
    sims = a @ b.T
    if exclude_self_match:
        for i, id_ in enumerate(d1.ids):
            if id_ in d2:
                sims[i, d2.index_of(id_)] = -np.inf
        if np.any(np.all(np.isneginf(sims), axis=1)):
            raise ValueError("a query has no candidates once self-matches are excluded")
    return float(sims.max(axis=1).mean())


def correlation_matrix(named_matrices, exclude_self_match="auto") -> CorrelationMatrix:
    """Pairwise dataset_correlation over (name, matrix) pairs.

    With the default "auto", self-matches are excluded only on diagonal
    entries (same dataset on both sides); True/False force the flag
    everywhere.
    """
    named = list(named_matrices)
    names = [n for n, _ in named]
    k = len(named)
    out = np.zeros((k, k), dtype=np.float64)
    for i, (_, mi) in enumerate(named):
        for j, (_, mj) in enumerate(named):
            if exclude_self_match == "auto":
                flag = i == j
            else:
                flag = bool(exclude_self_match)
            out[i, j] = dataset_correlation(mi, mj, exclude_self_match=flag)
    return CorrelationMatrix(names, out)


# ---------------------------------------------------------------------------
# score-vector file (CSV: id,score)


def load_scores(path) -> dict:
    scores = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["id", "score"]:
            raise ParseError(path, 1, 'expected header "id,score"')
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise ParseError(path, lineno, "expected id,score")
            try:
                scores[row[0]] = float(row[1])
            except ValueError as exc:
                raise ParseError(path, lineno, f"bad score: {exc}") from exc
    return scores


def save_scores(scores: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("id,score\n")
        for id_, value in scores.items():
            fh.write(f"{id_},{float(value)!r}\n")
