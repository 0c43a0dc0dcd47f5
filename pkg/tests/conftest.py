import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from instrembed import Corpus, EmbeddingMatrix, Instruction, TaskLabel


def make_vn_corpus(verbs, nouns, per_category, seed=0, split="unassigned",
                   filler_words=8, vocab_size=400):
    """Synthetic verb-noun grid corpus: every (verb, noun) combination is a
    category; each instruction is the category phrase plus random filler so
    raw n-gram embeddings are noisy within a category."""
    rng = np.random.default_rng(seed)
    vocab = [
        "".join(rng.choice(list("abcdefghijklmnopqrstuvwxyz"), size=rng.integers(4, 9)))
        for _ in range(vocab_size)
    ]
    instructions = []
    idx = 0
    for verb in verbs:
        for noun in nouns:
            for _ in range(per_category):
                filler = " ".join(rng.choice(vocab, size=filler_words))
                text = f"{verb} a {noun} about {filler}"
                instructions.append(
                    Instruction(
                        id=f"i{idx:05d}",
                        text=text,
                        label=TaskLabel(kind="verb_noun", verb=verb, noun=noun),
                        split=split,
                        source="synthetic",
                    )
                )
                idx += 1
    return Corpus(instructions)


def make_blobs(n_blobs, per_blob, dim, sigma=0.05, seed=0):
    """Unit-norm isotropic Gaussian blobs; returns (matrix, true labels)."""
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((n_blobs, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    rows, labels, ids = [], [], []
    for b in range(n_blobs):
        pts = centers[b] + sigma * rng.standard_normal((per_blob, dim))
        rows.append(pts)
        labels.extend([b] * per_blob)
        ids.extend(f"b{b:02d}p{i:03d}" for i in range(per_blob))
    m = EmbeddingMatrix.from_rows(ids, np.vstack(rows))
    return m, labels


@pytest.fixture
def tiny_corpus():
    return Corpus(
        [
            Instruction("a1", "write a story about cats",
                        TaskLabel("verb_noun", verb="write", noun="story")),
            Instruction("a2", "write a story about dogs",
                        TaskLabel("verb_noun", verb="write", noun="story")),
            Instruction("b1", "write a poem about rain",
                        TaskLabel("verb_noun", verb="write", noun="poem")),
            Instruction("b2", "write a poem about snow",
                        TaskLabel("verb_noun", verb="write", noun="poem")),
            Instruction("c1", "compose a story about birds",
                        TaskLabel("verb_noun", verb="compose", noun="story")),
            Instruction("c2", "compose a story about fish",
                        TaskLabel("verb_noun", verb="compose", noun="story")),
            Instruction("d1", "why is the sky blue",
                        TaskLabel("wh_knowledge", wh_word="why")),
            Instruction("d2", "why do cats purr",
                        TaskLabel("wh_knowledge", wh_word="why")),
        ]
    )
