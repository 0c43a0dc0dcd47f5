"""The four embedding applications on one synthetic dataset.

Data selection picks cluster-center representatives, retrieval feeds an
in-context-learning prompt, tiny benchmarks estimate full-benchmark scores
from a handful of samples, and the correlation matrix compares datasets by
how well each covers the other's tasks.
"""

import numpy as np

from instrembed import (
    EmbeddingMatrix,
    assemble_icl_prompt,
    correlation_matrix,
    estimation_error,
    retrieve_demonstrations,
    select_for_tuning,
    tiny_benchmark,
    tiny_benchmark_study,
)

rng = np.random.default_rng(7)


def blobs(n_blobs, per_blob, dim, sigma, prefix):
    centers = rng.standard_normal((n_blobs, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    rows, labels = [], []
    for b in range(n_blobs):
        rows.append(centers[b] + sigma * rng.standard_normal((per_blob, dim)))
        labels += [b] * per_blob
    ids = [f"{prefix}{i}" for i in range(n_blobs * per_blob)]
    return EmbeddingMatrix.from_rows(ids, np.vstack(rows)), labels


pool, pool_labels = blobs(10, 30, 32, 0.05, "train")

# 1. data selection: one representative per cluster
selection = select_for_tuning(pool, k=10, seed=0)
blob_of = {id_: pool_labels[i] for i, id_ in enumerate(pool.ids)}
print("selected representatives cover blobs:",
      sorted({blob_of[i] for i in selection.chosen_ids}))

# 2. demonstration retrieval + prompt assembly
queries = pool.subset(pool.ids[:2])
hits = retrieve_demonstrations(queries, pool, topk=2)
demo_texts = {i: f"instruction text for {i}" for i in pool.ids}
qid = queries.ids[0]
prompt = assemble_icl_prompt(
    demo_texts[qid],
    [(demo_texts[d], f"response for {d}") for d in hits[qid]],
)
print(f"\nICL prompt for {qid} (demos {hits[qid]}):")
print("-" * 40)
print(prompt, end="")
print("-" * 40)

# 3. tiny benchmark: per-blob score bias makes stratified selection shine
bias = rng.normal(0.5, 0.25, size=10)
scores = {
    id_: float(bias[pool_labels[i]] + rng.normal(0, 0.02))
    for i, id_ in enumerate(pool.ids)
}
per_size = tiny_benchmark(pool, sizes=[10, 50], seed=0)
for size, chosen in per_size.items():
    err = estimation_error(scores, chosen)
    print(f"\ntiny benchmark size {size}: estimation error {err:.2f} points")

study = tiny_benchmark_study(pool, scores, sizes=[10, 50], runs=50, seed=1)
print("mean error over 50 runs:")
for strategy, by_size in study.items():
    rendered = ", ".join(f"{s}: {e:.2f}" for s, e in sorted(by_size.items()))
    print(f"  {strategy:10s} {rendered}")

# 4. dataset correlation: the subset is fully covered by the superset
subset = pool.subset(pool.ids[:120])
other, _ = blobs(10, 12, 32, 0.05, "other")
corr = correlation_matrix([("pool", pool), ("subset", subset), ("other", other)])
print("\ncorrelation degree (rows: queries, cols: references):")
header = "".join(f"{n:>9}" for n in corr.datasets)
print(f"{'':9}{header}")
for name, row in zip(corr.datasets, corr.matrix):
    print(f"{name:>9}" + "".join(f"{v:9.3f}" for v in row))
