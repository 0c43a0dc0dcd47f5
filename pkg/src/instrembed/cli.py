"""Command-line pipeline: file-based handoffs between every stage, all
randomness flowing from --seed, and a run manifest next to each output so
any result can be traced back to exact inputs and parameters.

Exit codes: 0 ok, 1 internal error, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from . import corpus as corpus_mod
from . import downstream, evaluation, pairgen, trainer
from .embstore import (
    EmbeddingMatrix,
    FallbackEmbedderConfig,
    fallback_embed,
    read_embeddings,
    write_embeddings,
)
from .errors import InputError
from .labeler import (
    MergePolicy,
    default_lexicon,
    default_synonyms,
    filter_rare_categories,
    label_corpus,
    load_word_vectors,
    merge_categories,
)
from .labeler import Lexicon, SynonymTable

_SPLIT_CHOICES = list(corpus_mod.SPLITS[:4]) + ["all"]


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(subcommand, params, inputs, outputs, seed):
    manifest = {
        "tool": "instrembed",
        "version": __version__,
        "subcommand": subcommand,
        "seed": seed,
        "parameters": {k: v for k, v in sorted(params.items())},
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
    }
    payload = json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    for out in outputs:
        with open(f"{out}.manifest.json", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(payload)


def _restrict(c, split):
    return c if split == "all" else c.restrict_to_split(split)


def _load_labeled_matrix_corpus(args):
    m = read_embeddings(args.embeddings)
    c = corpus_mod.load_corpus(args.corpus)
    return m, c


# --- subcommand runners -----------------------------------------------------


def _cmd_label(args):
    c = corpus_mod.load_corpus(args.in_corpus)
    lexicon = Lexicon.from_file(args.lexicon) if args.lexicon else default_lexicon()
    synonyms = (
        SynonymTable.from_file(args.synonyms) if args.synonyms else default_synonyms()
    )
    vectors = load_word_vectors(args.word_vectors) if args.word_vectors else None
    c = label_corpus(c, lexicon)
    c = filter_rare_categories(c, min_count=args.min_count)
    c = merge_categories(
        c, synonyms, MergePolicy(args.merge_threshold, vectors)
    )
    corpus_mod.save_corpus(c, args.out_corpus)
    inputs = [args.in_corpus] + [
        p for p in (args.lexicon, args.synonyms, args.word_vectors) if p
    ]
    return inputs, [args.out_corpus]


def _cmd_split(args):
    c = corpus_mod.load_corpus(args.corpus)
    ratios = [float(x) for x in args.ratios.split(",")]
    c = corpus_mod.make_splits(c, ratios, seed=args.seed)
    corpus_mod.save_corpus(c, args.out_corpus)
    return [args.corpus], [args.out_corpus]


def _cmd_embed_fallback(args):
    c = _restrict(corpus_mod.load_corpus(args.corpus), args.split)
    cfg = FallbackEmbedderConfig(dim=args.dim, ngram=args.ngram, seed=args.seed)
    m = fallback_embed([i.text for i in c], ids=[i.id for i in c], cfg=cfg)
    write_embeddings(m, args.out_embeddings)
    return [args.corpus], [args.out_embeddings]


def _cmd_pairs(args):
    if args.split is None:
        # contrastive triples come from the embedding-tuning split, the IIS
        # test set from instruction-tuning train
        args.split = "eft_train" if args.mode == "triples" else "ift_train"
    c = _restrict(corpus_mod.load_corpus(args.corpus), args.split)
    if args.mode == "triples":
        pairs = pairgen.sample_positive_pairs(c, seed=args.seed)
        if not args.no_hard_negatives:
            pairs = pairgen.attach_hard_negatives(pairs, c, seed=args.seed)
        pairgen.save_triples(pairs, args.out)
    else:
        pairs = pairgen.build_iis_set(
            c, n_same=args.n_same, n_random=args.n_random, seed=args.seed
        )
        pairgen.save_iis(pairs, args.out)
    return [args.corpus], [args.out]


def _cmd_train(args):
    m = read_embeddings(args.embeddings)
    pairs = pairgen.load_triples(args.pairs)
    cfg = trainer.TrainConfig(
        learning_rate=args.lr,
        temperature=args.tau,
        batch_size=args.batch,
        epochs=args.epochs,
        seed=args.seed,
        use_hard_negatives=not args.no_hard_negatives,
        head_dim=args.head_dim,
        bias=args.bias,
        activation=args.activation,
    )
    c = corpus_mod.load_corpus(args.corpus)  # id sanity for nicer errors
    for p in pairs:
        if p.anchor_id not in c:
            raise InputError(f"pair anchor {p.anchor_id!r} not in corpus")
    head, trace = trainer.train_head(c, m, pairs, cfg)
    trainer.save_head(head, args.out_head)
    outputs = [args.out_head]
    if args.out_trace:
        trainer.save_trace(trace, args.out_trace)
        outputs.append(args.out_trace)
    return [args.corpus, args.embeddings, args.pairs], outputs


def _cmd_project(args):
    m = read_embeddings(args.embeddings)
    head = trainer.load_head(args.head)
    out = trainer.apply_head(head, m)
    write_embeddings(out, args.out_embeddings)
    return [args.embeddings, args.head], [args.out_embeddings]


def _cmd_eval_ict(args):
    m, c = _load_labeled_matrix_corpus(args)
    if args.split != "all":
        c = c.restrict_to_split(args.split)
        m = m.subset([i.id for i in c if i.id in m])
    report = evaluation.run_ict(
        m, c, k=args.k, seed=args.seed, restarts=args.restarts
    )
    with open(args.out_report, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_json())
    return [args.embeddings, args.corpus], [args.out_report]


def _cmd_eval_iis(args):
    m = read_embeddings(args.embeddings)
    pairs = pairgen.load_iis(args.pairs)
    pairgen.check_pairs_in_embeddings(pairs, m)
    value = evaluation.run_iis(m, pairs)
    payload = {"iis_spearman": value, "pairs": len(pairs)}
    with open(args.out_report, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return [args.embeddings, args.pairs], [args.out_report]


def _cmd_select(args):
    m = read_embeddings(args.embeddings)
    result = downstream.select_for_tuning(
        m, k=args.k, seed=args.seed, restarts=args.restarts
    )
    with open(args.out_csv, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("id\n")
        for id_ in result.chosen_ids:
            fh.write(f"{id_}\n")
    return [args.embeddings], [args.out_csv]


def _cmd_tinybench(args):
    m = read_embeddings(args.embeddings)
    sizes = [int(s) for s in args.sizes.split(",")]
    per_size = downstream.tiny_benchmark(
        m, sizes, seed=args.seed, restarts=args.restarts
    )
    outputs = []
    with open(args.out_csv, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("size,id\n")
        for size in sizes:
            for id_ in per_size[size]:
                fh.write(f"{size},{id_}\n")
    outputs.append(args.out_csv)
    inputs = [args.embeddings]
    if args.scores:
        scores = downstream.load_scores(args.scores)
        report = {
            str(size): downstream.estimation_error(scores, per_size[size])
            for size in sizes
        }
        with open(args.out_errors, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
        outputs.append(args.out_errors)
        inputs.append(args.scores)
    return inputs, outputs


def _cmd_retrieve(args):
    qm = read_embeddings(args.query_embeddings)
    pm = read_embeddings(args.pool_embeddings)
    hits = downstream.retrieve_demonstrations(qm, pm, topk=args.topk)
    with open(args.out_csv, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("query_id,rank,demo_id\n")
        for qid in qm.ids:
            for rank, did in enumerate(hits[qid], start=1):
                fh.write(f"{qid},{rank},{did}\n")
    return [args.query_embeddings, args.pool_embeddings], [args.out_csv]


def _cmd_xcorr(args):
    named = []
    seen_paths = {}
    for path in args.embeddings:
        name = os.path.splitext(os.path.basename(path))[0]
        if name in seen_paths:
            name = f"{name}_{len(named)}"
        seen_paths[name] = path
        named.append((name, read_embeddings(path)))
    flag = {"auto": "auto", "on": True, "off": False}[args.exclude_self_match]
    result = downstream.correlation_matrix(named, exclude_self_match=flag)
    csv_path = args.out_prefix + ".csv"
    json_path = args.out_prefix + ".json"
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(result.to_csv())
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(result.to_json())
    return list(args.embeddings), [csv_path, json_path]


_SVG_PALETTE = (
    "#1f77b4 #ff7f0e #2ca02c #d62728 #9467bd #8c564b #e377c2 "
    "#7f7f7f #bcbd22 #17becf"
).split()


def _scatter_svg(coords, labels) -> str:
    span = max(float(np.abs(coords).max()), 1e-12)
    size = 640
    pad = 20
    scale = (size - 2 * pad) / (2 * span)
    color_of = {}
    rows = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for (x, y), label in zip(coords, labels):
        if label not in color_of:
            color_of[label] = _SVG_PALETTE[len(color_of) % len(_SVG_PALETTE)]
        cx = pad + (x + span) * scale
        cy = size - (pad + (y + span) * scale)
        rows.append(
            f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3" fill="{color_of[label]}" '
            f'fill-opacity="0.75"/>'
        )
    rows.append("</svg>")
    return "\n".join(rows) + "\n"


def _cmd_plot_pca(args):
    m = read_embeddings(args.embeddings)
    labels = [""] * len(m)
    inputs = [args.embeddings]
    if args.corpus:
        c = corpus_mod.load_corpus(args.corpus)
        labels = [
            c.get(i).label.key if i in c and c.get(i).label else "" for i in m.ids
        ]
        inputs.append(args.corpus)
    coords = evaluation.pca2d(m)
    outputs = [args.out_csv]
    with open(args.out_csv, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("id,x,y,label\n")
        for id_, (x, y), label in zip(m.ids, coords, labels):
            fh.write(f"{id_},{float(x)!r},{float(y)!r},{label}\n")
    if args.svg:
        with open(args.svg, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_scatter_svg(coords, labels))
        outputs.append(args.svg)
    return inputs, outputs


# --- parser -----------------------------------------------------------------


def _add_common(sp, seed=True):
    if seed:
        sp.add_argument("--seed", type=int, default=0, help="random seed (all randomness flows from here)")
    sp.add_argument(
        "--threads",
        type=int,
        default=None,
        help="cap internal parallelism (falls back to IEB_THREADS; "
        "current implementations are single-threaded)",
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="instrembed",
        description="Instruction-embedding benchmark toolkit: labeling, splits, "
        "contrastive projection training, clustering evaluation, and "
        "embedding-driven selection.",
    )
    ap.add_argument("--version", action="version", version=f"instrembed {__version__}")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("label", help="rule-label a corpus, filter rare categories, merge synonyms")
    sp.add_argument("--in-corpus", required=True, help="input JSONL corpus")
    sp.add_argument("--lexicon", help="surface<TAB>pos<TAB>lemma file (default: bundled)")
    sp.add_argument("--synonyms", help="pos<TAB>lemma,lemma,... file (default: bundled)")
    sp.add_argument("--word-vectors", help="optional lemma<TAB>floats file gating merges")
    sp.add_argument("--min-count", type=int, default=10, help="category frequency floor")
    sp.add_argument("--merge-threshold", type=float, default=0.5, help="cosine gate for merges")
    sp.add_argument("--out-corpus", required=True)
    _add_common(sp, seed=False)
    sp.set_defaults(func=_cmd_label, seed=None)

    sp = sub.add_parser("split", help="assign EFT/IFT train/test splits at category granularity")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--ratios", required=True, help="eft_train,eft_test,ift_train,ift_test fractions")
    sp.add_argument("--out-corpus", required=True)
    _add_common(sp)
    sp.set_defaults(func=_cmd_split)

    sp = sub.add_parser("embed-fallback", help="deterministic n-gram hashing embeddings (no model)")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--split", choices=_SPLIT_CHOICES, default="all")
    sp.add_argument("--dim", type=int, default=256)
    sp.add_argument("--ngram", type=int, default=3)
    sp.add_argument("--out-embeddings", required=True)
    _add_common(sp)
    sp.set_defaults(func=_cmd_embed_fallback)

    sp = sub.add_parser("pairs", help="generate contrastive triples or labeled IIS pairs")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--mode", choices=["triples", "iis"], required=True)
    sp.add_argument("--split", choices=_SPLIT_CHOICES, default=None,
                    help="corpus slice (default: eft_train for triples, "
                    "ift_train for iis)")
    sp.add_argument("--n-same", type=int, default=1500, help="iis: guaranteed same-task pairs")
    sp.add_argument("--n-random", type=int, default=1500, help="iis: uniform random pairs")
    sp.add_argument("--no-hard-negatives", action="store_true")
    sp.add_argument("--out", required=True)
    _add_common(sp)
    sp.set_defaults(func=_cmd_pairs)

    sp = sub.add_parser("train", help="train the contrastive projection head")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--embeddings", required=True)
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--tau", type=float, default=0.05, help="InfoNCE temperature")
    sp.add_argument("--batch", type=int, default=16)
    sp.add_argument("--epochs", type=int, default=1)
    sp.add_argument("--lr", type=float, required=True, help="fixed gradient-descent step")
    sp.add_argument("--head-dim", type=int, default=None, help="output dim (default: square head)")
    sp.add_argument("--bias", action="store_true")
    sp.add_argument("--activation", choices=list(trainer.ACTIVATIONS), default="identity")
    sp.add_argument("--no-hard-negatives", action="store_true")
    sp.add_argument("--out-head", required=True)
    sp.add_argument("--out-trace", help="optional step,loss CSV")
    _add_common(sp)
    sp.set_defaults(func=_cmd_train)

    sp = sub.add_parser("project", help="apply a trained head to an embedding file")
    sp.add_argument("--embeddings", required=True)
    sp.add_argument("--head", required=True)
    sp.add_argument("--out-embeddings", required=True)
    _add_common(sp, seed=False)
    sp.set_defaults(func=_cmd_project, seed=None)

    sp = sub.add_parser("eval-ict", help="instruction clustering task metrics")
    sp.add_argument("--embeddings", required=True)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--split", choices=_SPLIT_CHOICES, default="all")
    sp.add_argument("--k", type=int, default=None, help="cluster count (default: category count)")
    sp.add_argument("--restarts", type=int, default=10)
    sp.add_argument("--out-report", required=True)
    _add_common(sp)
    sp.set_defaults(func=_cmd_eval_ict)

    sp = sub.add_parser("eval-iis", help="intention-similarity Spearman on labeled pairs")
    sp.add_argument("--embeddings", required=True)
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--out-report", required=True)
    _add_common(sp, seed=False)
    sp.set_defaults(func=_cmd_eval_iis, seed=None)

    sp = sub.add_parser("select", help="cluster-center data selection for tuning")
    sp.add_argument("--embeddings", required=True)
    sp.add_argument("--k", type=int, default=600)
    sp.add_argument("--restarts", type=int, default=10)
    sp.add_argument("--out-csv", required=True)
    _add_common(sp)
    sp.set_defaults(func=_cmd_select)

    sp = sub.add_parser("tinybench", help="tiny benchmark id lists (optional error report)")
    sp.add_argument("--embeddings", required=True)
    sp.add_argument("--sizes", default="10,50,100")
    sp.add_argument("--restarts", type=int, default=10)
    sp.add_argument("--scores", help="CSV id,score; enables the error report")
    sp.add_argument("--out-csv", required=True)
    sp.add_argument("--out-errors", help="JSON estimation-error report (with --scores)")
    _add_common(sp)
    sp.set_defaults(func=_cmd_tinybench)

    sp = sub.add_parser("retrieve", help="exact top-k cosine demonstration retrieval")
    sp.add_argument("--query-embeddings", required=True)
    sp.add_argument("--pool-embeddings", required=True)
    sp.add_argument("--topk", type=int, default=2)
    sp.add_argument("--out-csv", required=True)
    _add_common(sp, seed=False)
    sp.set_defaults(func=_cmd_retrieve, seed=None)

    sp = sub.add_parser("xcorr", help="cross-dataset task-correlation matrix")
    sp.add_argument("--embeddings", nargs="+", required=True, help="two or more IEBV files")
    sp.add_argument("--exclude-self-match", choices=["auto", "on", "off"], default="auto")
    sp.add_argument("--out-prefix", required=True, help="writes <prefix>.csv and <prefix>.json")
    _add_common(sp, seed=False)
    sp.set_defaults(func=_cmd_xcorr, seed=None)

    sp = sub.add_parser("plot-pca", help="2-D PCA coordinates (CSV, optional SVG scatter)")
    sp.add_argument("--embeddings", required=True)
    sp.add_argument("--corpus", help="optional corpus supplying category labels")
    sp.add_argument("--out-csv", required=True)
    sp.add_argument("--svg", help="optional self-contained SVG scatter")
    _add_common(sp, seed=False)
    sp.set_defaults(func=_cmd_plot_pca, seed=None)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.threads is None:
        args.threads = int(os.environ.get("IEB_THREADS", "0")) or None
    try:
        if args.subcommand == "tinybench" and args.scores and not args.out_errors:
            raise InputError("--out-errors is required when --scores is given")
        inputs, outputs = args.func(args)
        params = {
            k: v
            for k, v in vars(args).items()
            if k not in ("func", "subcommand", "seed") and not k.startswith("_")
        }
        _write_manifest(args.subcommand, params, inputs, outputs, args.seed)
        return 0
    except FileNotFoundError as exc:
        print(
            f"instrembed: error(2): missing file: {exc.filename or exc}",
            file=sys.stderr,
        )
        return 2
    except (InputError, ValueError, OSError) as exc:
        print(f"instrembed: error(2): {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - internal faults
        print(f"instrembed: error(1): {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
