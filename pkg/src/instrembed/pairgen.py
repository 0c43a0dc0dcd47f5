"""Contrastive pair construction: anchor/positive pairs, verb-noun hard
negatives, and the labeled intention-similarity pair set.

All generators are pure functions of (corpus, seed).
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass

from .corpus import Corpus
from .errors import MissingIdError, ParseError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TriplePair:
    anchor_id: str
    positive_id: str
    hard_negative_id: str | None = None

    def __post_init__(self):
        if self.anchor_id == self.positive_id:
            raise ValueError(f"anchor and positive are both {self.anchor_id!r}")


@dataclass(frozen=True)
class IISPair:
    left_id: str
    right_id: str
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


def sample_positive_pairs(corpus: Corpus, seed: int) -> list[TriplePair]:
    """One (anchor, positive) pair per instruction, the positive drawn
    uniformly from the anchor's category. Singleton categories are skipped
    with a warning."""
    rng = random.Random(seed)
    pairs = []
    for key in sorted(corpus.category_index):
        members = list(corpus.category_index[key])
        if len(members) < 2:
            log.warning("category %s has a single member; no pairs generated", key)
            continue
        for anchor in members:
            positive = anchor
            while positive == anchor:
                positive = members[rng.randrange(len(members))]
            pairs.append(TriplePair(anchor, positive))
    return pairs


def attach_hard_negatives(pairs, corpus: Corpus, seed: int) -> list[TriplePair]:
    """Attach one hard negative per verb-noun anchor.

    Candidate tiers: (1) categories sharing the anchor verb with a
    different noun, (2) sharing the noun with a different verb; the
    negative is uniform over the winning tier's instructions. Anchors with
    no verb-noun label, or no candidates, keep no negative.
    """
    rng = random.Random(seed)
    by_verb: dict[str, list[str]] = {}
    by_noun: dict[str, list[str]] = {}
    cat_label = {}
    for key, members in corpus.category_index.items():
        label = corpus.get(members[0]).label
        cat_label[key] = label
        if label.kind == "verb_noun":
            by_verb.setdefault(label.verb, []).append(key)
            by_noun.setdefault(label.noun, []).append(key)

    out = []
    for pair in pairs:
        label = corpus.get(pair.anchor_id).label
        if label is None or label.kind != "verb_noun":
            out.append(pair)
            continue
        same_verb = [
            k for k in by_verb.get(label.verb, ()) if cat_label[k].noun != label.noun
        ]
        same_noun = [
            k for k in by_noun.get(label.noun, ()) if cat_label[k].verb != label.verb
        ]
        tier = same_verb or same_noun
        if not tier:
            out.append(pair)
            continue
        candidates = [id_ for k in sorted(tier) for id_ in corpus.category_index[k]]
        negative = candidates[rng.randrange(len(candidates))]
        out.append(TriplePair(pair.anchor_id, pair.positive_id, negative))
    return out


def build_iis_set(
    corpus: Corpus, n_same: int = 1500, n_random: int = 1500, seed: int = 0
) -> list[IISPair]:
    """n_same guaranteed same-category pairs (label 1) plus n_random
    uniform pairs labeled by category match; no unordered pair repeats.

    Raises ValueError naming the achievable maximum when the corpus cannot
    honor the requested counts.
    """
    rng = random.Random(seed)
    labeled = [i for i in corpus if i.label is not None]
    if n_same + n_random == 0:
        return []
    if not labeled:
        raise ValueError("corpus slice has no labeled instructions")
    ids = [i.id for i in labeled]
    category = {i.id: i.label.key for i in labeled}
    n = len(ids)
    total_possible = n * (n - 1) // 2

    same_pool = []
    for key in sorted(corpus.category_index):
        members = corpus.category_index[key]
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                same_pool.append((members[a], members[b]))
    if n_same > len(same_pool):
        raise ValueError(
            f"requested {n_same} same-category pairs, only {len(same_pool)} exist"
        )
    if n_same + n_random > total_possible:
        raise ValueError(
            f"requested {n_same + n_random} distinct pairs, only {total_possible} exist"
        )

    chosen = rng.sample(same_pool, n_same)
    seen = {frozenset(p) for p in chosen}
    pairs = [IISPair(a, b, 1) for a, b in chosen]

    # rejection sampling is fine while the request is a small share of all
    # pairs; fall back to full enumeration near the boundary
    attempts = 0
    max_attempts = 200 * max(n_random, 1) + 1000
    while len(pairs) < n_same + n_random and attempts < max_attempts:
        attempts += 1
        a, b = rng.sample(ids, 2)
        key = frozenset((a, b))
        if key in seen:
            continue
        seen.add(key)
        pairs.append(IISPair(a, b, 1 if category[a] == category[b] else 0))
    if len(pairs) < n_same + n_random:
        remaining = [
            (ids[i], ids[j])
            for i in range(n)
            for j in range(i + 1, n)
            if frozenset((ids[i], ids[j])) not in seen
        ]
        extra = rng.sample(remaining, n_same + n_random - len(pairs))
        pairs.extend(
            IISPair(a, b, 1 if category[a] == category[b] else 0) for a, b in extra
        )
    return pairs


# ---------------------------------------------------------------------------
# pair file persistence (JSONL)


def save_triples(pairs, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in pairs:
            fh.write(
                json.dumps(
                    {
                        "anchor": p.anchor_id,
                        "positive": p.positive_id,
                        "hard_negative": p.hard_negative_id,
                    }
                )
                + "\n"
            )


def load_triples(path) -> list[TriplePair]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(
                    TriplePair(rec["anchor"], rec["positive"], rec.get("hard_negative"))
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(path, lineno, f"bad triple record: {exc}") from exc
    return out


def save_iis(pairs, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in pairs:
            fh.write(
                json.dumps({"left": p.left_id, "right": p.right_id, "label": p.label})
                + "\n"
            )


def load_iis(path) -> list[IISPair]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(IISPair(rec["left"], rec["right"], rec["label"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(path, lineno, f"bad pair record: {exc}") from exc
    return out


def check_pairs_in_embeddings(pairs, matrix) -> None:
    """Every id referenced by the pairs must exist in the matrix."""
    for p in pairs:
        fields = (
            (p.anchor_id, p.positive_id, p.hard_negative_id)
            if isinstance(p, TriplePair)
            else (p.left_id, p.right_id)
        )
        for id_ in fields:
            if id_ is not None and id_ not in matrix:
                raise MissingIdError(f"pair references unknown id {id_!r}")
