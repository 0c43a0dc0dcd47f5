"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion lines.
"""

import hashlib
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from conftest import make_blobs, make_vn_corpus

from instrembed import (
    PairBatch,
    ProjectionHead,
    TrainConfig,
    adjusted_rand_index,
    apply_head,
    clustering_purity,
    fallback_embed,
    homogeneity,
    infonce_loss,
    label_instruction,
    loss_gradient,
    make_splits,
    run_ict,
    silhouette,
    spearman,
    save_corpus,
    train_head,
    tiny_benchmark_study,
)
from instrembed.cli import main as cli_main
from instrembed.embstore import EmbeddingMatrix, write_embeddings
from instrembed.labeler import default_lexicon
from instrembed.pairgen import attach_hard_negatives, sample_positive_pairs


def _report(name, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'}: {name}"
    if detail:
        line += f"  [{detail}]"
    print(line)
    assert ok, line


# --- metric oracles ----------------------------------------------------------


def test_metric_oracles_match_brute_force():
    t0 = time.time()
    rng = np.random.default_rng(2024)
    checked = 0
    worst = 0.0
    for _ in range(220):
        n = int(rng.integers(2, 13))
        k = int(rng.integers(1, 5))
        pred = rng.integers(0, k, size=n).tolist()
        truth = rng.integers(0, k, size=n).tolist()
        worst = max(worst, abs(adjusted_rand_index(pred, truth)
                               - oracles.ari_pair_counting(pred, truth)))
        worst = max(worst, abs(clustering_purity(pred, truth)
                               - oracles.purity_loops(pred, truth)))
        worst = max(worst, abs(homogeneity(pred, truth)
                               - oracles.homogeneity_entropy(pred, truth)))
        if len(set(pred)) >= 2:
            rows = rng.standard_normal((n, 5))
            rows /= np.linalg.norm(rows, axis=1, keepdims=True)
            m = EmbeddingMatrix.from_rows([str(i) for i in range(n)], rows,
                                          normalize=False)
            stored = np.asarray(m.rows, dtype=np.float64)
            worst = max(worst, abs(silhouette(m, pred)
                                   - oracles.silhouette_loops(stored.tolist(), pred)))
        x = rng.integers(0, 5, size=n).astype(float)
        y = rng.integers(0, 5, size=n).astype(float)
        if not (np.all(x == x[0]) or np.all(y == y[0])):
            worst = max(worst, abs(spearman(x, y) - oracles.spearman_naive(x, y)))
        checked += 1
    elapsed = time.time() - t0
    _report(
        "metric oracles (ARI/CP/Homo/Silh/Spearman vs brute force)",
        checked >= 200 and worst <= 1e-9 and elapsed < 10.0,
        f"{checked} instances, worst |delta|={worst:.2e}, {elapsed:.1f}s",
    )


def test_ari_hand_case():
    got = adjusted_rand_index([0, 1, 0, 1], [0, 0, 1, 1])
    _report("ARI hand case truth [0,0,1,1] vs pred [0,1,0,1] = -0.5",
            abs(got - (-0.5)) <= 1e-12, f"got {got!r}")


# --- synthetic separability through the CLI ----------------------------------


def test_synthetic_separability_pipeline(tmp_path):
    t0 = time.time()
    m, labels = make_blobs(20, 30, dim=32, sigma=0.05, seed=7)
    from instrembed import Corpus, Instruction, TaskLabel

    verbs = ["write", "compose", "give", "make", "name", "draft", "design",
             "plan", "list", "rank", "sort", "edit", "fix", "translate",
             "classify", "summarize", "describe", "explain", "choose", "select"]
    corpus = Corpus([
        Instruction(id_, f"blob point {id_}",
                    TaskLabel("verb_noun", verb=verbs[labels[i]], noun="item"))
        for i, id_ in enumerate(m.ids)
    ])
    corpus_path = tmp_path / "blobs.jsonl"
    emb_path = tmp_path / "blobs.iebv"
    report_path = tmp_path / "ict.json"
    save_corpus(corpus, corpus_path)
    write_embeddings(m, emb_path)
    rc = cli_main(["eval-ict", "--embeddings", str(emb_path), "--corpus",
                   str(corpus_path), "--out-report", str(report_path),
                   "--seed", "0"])
    data = json.loads(report_path.read_text())
    elapsed = time.time() - t0

    shuffled = np.random.default_rng(3).permutation(labels).tolist()
    from instrembed import kmeans

    assignment = kmeans(m, 20, seed=0)
    control = adjusted_rand_index(assignment.labels.tolist(), shuffled)

    ok = (rc == 0 and data["ari"] >= 0.99 and data["cp"] >= 0.99
          and abs(control) <= 0.05 and elapsed < 5.0)
    _report(
        "synthetic separability (embed->eval-ict ARI/CP >= 0.99; shuffled control)",
        ok,
        f"ari={data['ari']:.4f} cp={data['cp']:.4f} control={control:+.4f} "
        f"{elapsed:.1f}s",
    )


# --- gradient fidelity --------------------------------------------------------


def test_gradient_fidelity_50_configs():
    from test_trainer import _fd_gradient, _random_config

    rng = np.random.default_rng(321)
    worst = 0.0
    for _ in range(50):
        batch, head = _random_config(rng)
        tau = float(rng.uniform(0.05, 1.0))
        grads = loss_gradient(batch, head, tau)
        fd_w, fd_b = _fd_gradient(batch, head, tau, step=1e-4)
        scale = max(np.abs(fd_w).max(), 1e-8)
        worst = max(worst, np.abs(grads.weight - fd_w).max() / scale)
        if fd_b is not None:
            worst = max(worst, np.abs(grads.bias - fd_b).max()
                        / max(np.abs(fd_b).max(), 1e-8))
    _report("gradient fidelity vs central finite differences (50 configs)",
            worst <= 1e-4, f"max rel err={worst:.2e}")


def test_closed_form_loss_values():
    a = np.array([[1.0, 0.0], [0.0, 1.0]])
    loss, per = infonce_loss(a, a.copy(), tau=0.05)
    want = math.log(1.0 + math.exp(-20.0))
    singleton, _ = infonce_loss(a[:1], a[:1].copy(), tau=0.05)
    ok = abs(per[0] - want) <= 1e-12 and abs(per[1] - want) <= 1e-12 \
        and singleton == 0.0
    _report("closed-form loss (orthogonal batch log(1+e^-20); singleton 0)",
            ok, f"per-instance={per[0]!r}, singleton={singleton!r}")


# --- training efficacy + ablation (shared fixture) ----------------------------

_VERBS = ["summarize", "translate", "brainstorm", "paraphrase", "investigate"]
_NOUNS = ["tip", "law", "map", "bio", "faq", "poll", "quiz", "memo"]


def _held_out_ari(m, c, seed, reps=3, restarts=4):
    # average over a few clustering seeds so the comparison reflects the
    # embedding, not one k-means draw
    return float(np.mean([
        run_ict(m, c, seed=seed * 101 + r, restarts=restarts).ari
        for r in range(reps)
    ]))


@pytest.fixture(scope="module")
def efficacy_runs():
    t0 = time.time()
    corpus = make_vn_corpus(_VERBS, _NOUNS, 20, seed=100, filler_words=12)
    split = make_splits(corpus, (0.75, 0.25, 0.0, 0.0), seed=100)
    train_c = split.restrict_to_split("eft_train")
    test_c = split.restrict_to_split("eft_test")
    m_all = fallback_embed([i.text for i in split], ids=[i.id for i in split])
    m_train = m_all.subset([i.id for i in train_c])
    m_test = m_all.subset([i.id for i in test_c])

    identity_ari = _held_out_ari(m_test, test_c, seed=0)
    with_hn, without_hn = [], []
    for seed in range(5):
        pairs = sample_positive_pairs(train_c, seed=seed)
        pairs = attach_hard_negatives(pairs, train_c, seed=seed)
        for use_hn, bucket in ((True, with_hn), (False, without_hn)):
            cfg = TrainConfig(learning_rate=0.25, temperature=0.05, batch_size=16,
                              epochs=1, seed=seed, use_hard_negatives=use_hn,
                              head_dim=64)
            head, _ = train_head(train_c, m_train, pairs, cfg)
            bucket.append(_held_out_ari(apply_head(head, m_test), test_c, seed=seed))
    return {
        "identity": identity_ari,
        "with_hn": with_hn,
        "without_hn": without_hn,
        "elapsed": time.time() - t0,
        "n_categories": len(corpus.category_index),
        "per_category": 20,
    }


def test_training_efficacy(efficacy_runs):
    r = efficacy_runs
    wins = sum(1 for a in r["with_hn"] if a > r["identity"])
    ok = (r["n_categories"] == 40 and wins >= 4 and r["elapsed"] < 60.0)
    _report(
        "training efficacy (trained head beats identity in >=4/5 seeds)",
        ok,
        f"identity={r['identity']:.4f} trained={[f'{a:.3f}' for a in r['with_hn']]} "
        f"wins={wins}/5 {r['elapsed']:.1f}s",
    )


def test_hard_negative_ablation_direction(efficacy_runs):
    r = efficacy_runs
    mean_hn = float(np.mean(r["with_hn"]))
    mean_no = float(np.mean(r["without_hn"]))
    _report(
        "hard-negative ablation (mean held-out ARI with >= without)",
        mean_hn >= mean_no,
        f"with={mean_hn:.4f} without={mean_no:.4f}",
    )


# --- hard-negative structural audit -------------------------------------------


def test_hard_negative_structural_audit():
    verbs = [f"verb{i:02d}" for i in range(25)]
    nouns = [f"noun{j:02d}" for j in range(20)]
    corpus = make_vn_corpus(verbs, nouns, 20, seed=5, filler_words=1)
    pairs = sample_positive_pairs(corpus, seed=11)
    pairs = attach_hard_negatives(pairs, corpus, seed=11)
    attached = [p for p in pairs if p.hard_negative_id is not None]
    violations = 0
    for p in attached:
        a = corpus.get(p.anchor_id).label
        h = corpus.get(p.hard_negative_id).label
        if (a.verb == h.verb) == (a.noun == h.noun):
            violations += 1
    ok = len(attached) >= 10_000 and violations == 0
    _report(
        "hard-negative structural audit (exactly one shared field, 10k triples)",
        ok,
        f"{len(attached)} triples, {violations} violations",
    )


# --- labeler fixture -----------------------------------------------------------


def test_labeler_fixture_accuracy():
    from importlib import resources

    lexicon = default_lexicon()
    rows = []
    with resources.files("instrembed.data").joinpath("labeler_fixture.jsonl").open(
        "r", encoding="utf-8"
    ) as fh:
        for line in fh:
            rows.append(json.loads(line))
    kind_hits = lemma_hits = lemma_total = 0
    for row in rows:
        got = label_instruction(row["text"], lexicon)
        if got is not None and got.kind == row["kind"]:
            kind_hits += 1
        for field in ("verb", "noun"):
            if row[field] is not None:
                lemma_total += 1
                if got is not None and getattr(got, field) == row[field]:
                    lemma_hits += 1
    kind_acc = kind_hits / len(rows)
    lemma_acc = lemma_hits / lemma_total
    ok = len(rows) == 120 and kind_acc >= 0.90 and lemma_acc >= 0.85
    _report(
        "labeler fixture (kind acc >= 0.90, lemma acc >= 0.85 on 120 sentences)",
        ok,
        f"kind={kind_acc:.3f} lemma={lemma_acc:.3f}",
    )


# --- tiny-benchmark direction ---------------------------------------------------


def test_tiny_benchmark_direction():
    t0 = time.time()
    m, labels = make_blobs(10, 30, dim=32, sigma=0.05, seed=17)
    rng = np.random.default_rng(23)
    bias = rng.normal(0.5, 0.25, size=10)
    scores = {
        id_: float(bias[labels[i]] + rng.normal(0, 0.02))
        for i, id_ in enumerate(m.ids)
    }
    out = tiny_benchmark_study(m, scores, sizes=[10, 50, 100], runs=100,
                               seed=31, restarts=1)
    elapsed = time.time() - t0
    ok = elapsed < 30.0
    detail = []
    for size in (10, 50, 100):
        emb, rnd = out["embedding"][size], out["random"][size]
        detail.append(f"s={size}: emb={emb:.3f} rnd={rnd:.3f}")
        ok = ok and emb <= rnd
    _report(
        "tiny-benchmark direction (embedding error <= random at 10/50/100)",
        ok,
        "; ".join(detail) + f"; {elapsed:.1f}s",
    )


# --- CLI determinism -------------------------------------------------------------


def _digest_tree(paths):
    return [hashlib.sha256(Path(p).read_bytes()).hexdigest() for p in paths]


def test_cli_full_pipeline_determinism(tmp_path):
    corpus = make_vn_corpus(["write", "compose", "give"], ["story", "poem", "song"],
                            12, seed=3)
    raw = tmp_path / "corpus.jsonl"
    save_corpus(corpus, raw)

    split = tmp_path / "split.jsonl"
    emb = tmp_path / "emb.iebv"
    triples = tmp_path / "triples.jsonl"
    iis = tmp_path / "iis.jsonl"
    head = tmp_path / "head.iebh"
    trace = tmp_path / "trace.csv"
    proj = tmp_path / "proj.iebv"
    ict = tmp_path / "ict.json"
    iis_rep = tmp_path / "iis.json"
    sel = tmp_path / "sel.csv"
    tiny = tmp_path / "tiny.csv"
    ret = tmp_path / "ret.csv"
    corr = tmp_path / "corr"
    pca = tmp_path / "pca.csv"

    def run_pipeline():
        cmds = [
            ["split", "--corpus", raw, "--ratios", "0.5,0.2,0.2,0.1",
             "--seed", "5", "--out-corpus", split],
            ["embed-fallback", "--corpus", split, "--out-embeddings", emb,
             "--seed", "5"],
            ["pairs", "--corpus", split, "--split", "eft_train",
             "--mode", "triples", "--out", triples, "--seed", "5"],
            ["pairs", "--corpus", split, "--split", "all", "--mode", "iis",
             "--n-same", "30", "--n-random", "30", "--out", iis, "--seed", "5"],
            ["train", "--corpus", split, "--embeddings", emb, "--pairs", triples,
             "--lr", "0.25", "--head-dim", "32", "--out-head", head,
             "--out-trace", trace, "--seed", "5"],
            ["project", "--embeddings", emb, "--head", head,
             "--out-embeddings", proj],
            ["eval-ict", "--embeddings", proj, "--corpus", split,
             "--restarts", "3", "--out-report", ict, "--seed", "5"],
            ["eval-iis", "--embeddings", emb, "--pairs", iis,
             "--out-report", iis_rep],
            ["select", "--embeddings", proj, "--k", "9", "--restarts", "2",
             "--out-csv", sel, "--seed", "5"],
            ["tinybench", "--embeddings", proj, "--sizes", "5,9",
             "--restarts", "2", "--out-csv", tiny, "--seed", "5"],
            ["retrieve", "--query-embeddings", proj, "--pool-embeddings", proj,
             "--topk", "2", "--out-csv", ret],
            ["xcorr", "--embeddings", proj, proj, "--out-prefix", corr],
            ["plot-pca", "--embeddings", proj, "--corpus", split,
             "--out-csv", pca],
        ]
        for cmd in cmds:
            rc = cli_main([str(c) for c in cmd])
            assert rc == 0, cmd
        outputs = [split, emb, triples, iis, head, trace, proj, ict, iis_rep,
                   sel, tiny, ret, f"{corr}.csv", f"{corr}.json", pca]
        outputs += [f"{o}.manifest.json" for o in outputs
                    if Path(f"{o}.manifest.json").exists()]
        return _digest_tree(outputs)

    first = run_pipeline()
    second = run_pipeline()
    _report(
        "CLI determinism (full pipeline re-run is byte-identical)",
        first == second,
        f"{len(first)} artifacts hashed",
    )
