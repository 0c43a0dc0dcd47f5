"""Rule-based task-label extraction, category merging, and frequency filtering.

A POS lexicon plus suffix heuristics stands in for full constituency
parsing: the taxonomy only needs the leading construction and the first
verb/noun heads. All classification is deterministic and total; text the
rules cannot place simply gets no label.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .corpus import WH_WORDS, Corpus, TaskLabel
from .errors import ParseError

log = logging.getLogger(__name__)

AUXILIARIES = frozenset(
    "is are was were do does did can could should will would has have".split()
)
# aux + "you" reads as a polite request, not a yes/no question
_REQUEST_AUX = frozenset({"can", "could", "would", "will"})

ARITHMETIC_KEYWORDS = frozenset(
    "add added subtract multiply divide sum product value result simplify solve".split()
)
ARITHMETIC_VERBS = frozenset("multiply simplify compute add subtract divide".split())

# cues that a yes/no question asks about supplied material rather than facts
TASK_QUESTION_CUES = frozenset(
    (
        "following sentence sentences paragraph paragraphs text statement statements "
        "word words phrase phrases grammatically grammatical correct correctly comma "
        "punctuation code given below"
    ).split()
)

# verbs whose bare objects are knowledge entities (clauses, named things)
KNOWLEDGE_VERBS = frozenset("summarize describe explain define discuss".split())

# participial cue words that never act as the instruction's main verb here
_NEVER_VERB = frozenset({"following", "given"})

# a direct object precedes any of these; the noun scan stops here
_STOP_PREPS = frozenset(
    "of in into for with by from at on to as than during".split()
)

_DETERMINERS = frozenset({"the", "a", "an"})
_QUOTE_CHARS = '"“”'
_STRIP_CHARS = "\"'‘’“”.,!?;:()[]{}"
_VOWELS = "aeiou"
_INNER_VOWELS = "aeiouy"


@dataclass(frozen=True)
class LexiconEntry:
    surface: str
    pos_tags: frozenset
    lemma: str

    def __post_init__(self):
        if not self.lemma:
            raise ValueError("lexicon lemma must be non-empty")
        if self.surface != self.surface.lower():
            raise ValueError(f"lexicon surface {self.surface!r} must be lowercase")


class Lexicon:
    """POS-tagged surface -> lemma table; realizes verb-tense restoration
    and noun singularization for the label extractor."""

    def __init__(self, entries):
        self._lemma = {}
        for e in entries:
            for pos in e.pos_tags:
                self._lemma[(e.surface, pos)] = e.lemma

    def lemma_for(self, surface: str, pos: str):
        return self._lemma.get((surface, pos))

    def has_pos(self, surface: str, pos: str) -> bool:
        return (surface, pos) in self._lemma

    def __len__(self):
        return len(self._lemma)

    @classmethod
    def from_file(cls, path) -> "Lexicon":
        entries = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ParseError(path, lineno, "expected surface<TAB>pos<TAB>lemma")
                surface, pos, lemma = parts
                if pos not in ("verb", "noun", "other"):
                    raise ParseError(path, lineno, f"unknown pos {pos!r}")
                entries.append(LexiconEntry(surface, frozenset([pos]), lemma))
        return cls(entries)


class SynonymTable:
    """Lemma synonym groups, partitioned by part of speech."""

    def __init__(self, verb_groups=(), noun_groups=()):
        self._group_of = {"verb": {}, "noun": {}}
        self.verb_groups = [frozenset(g) for g in verb_groups]
        self.noun_groups = [frozenset(g) for g in noun_groups]
        for pos, groups in (("verb", self.verb_groups), ("noun", self.noun_groups)):
            for gid, group in enumerate(groups):
                for lemma in group:
                    if lemma in self._group_of[pos]:
                        raise ValueError(
                            f"{pos} lemma {lemma!r} appears in more than one group"
                        )
                    self._group_of[pos][lemma] = gid

    def co_grouped(self, pos: str, a: str, b: str) -> bool:
        """True when the lemmas are identical or share a synonym group."""
        if a == b:
            return True
        ga = self._group_of[pos].get(a)
        return ga is not None and ga == self._group_of[pos].get(b)

    @classmethod
    def from_file(cls, path) -> "SynonymTable":
        verb_groups, noun_groups = [], []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise ParseError(path, lineno, "expected pos<TAB>lemma,lemma,...")
                pos, members = parts
                group = [m.strip() for m in members.split(",") if m.strip()]
                if pos == "verb":
                    verb_groups.append(group)
                elif pos == "noun":
                    noun_groups.append(group)
                else:
                    raise ParseError(path, lineno, f"unknown pos {pos!r}")
        return cls(verb_groups, noun_groups)


@dataclass
class MergePolicy:
    direct_merge_threshold: float = 0.5
    word_vectors: dict | None = None

    def __post_init__(self):
        if not 0.0 <= self.direct_merge_threshold <= 1.0:
            raise ValueError("direct_merge_threshold must be in [0, 1]")

    def pair_passes(self, a: str, b: str) -> bool:
        """Cosine gate for one lemma pair; identical lemmas always pass.
        With no vectors the gate is open; a missing vector fails closed."""
        if a == b or self.word_vectors is None:
            return True
        va = self.word_vectors.get(a)
        vb = self.word_vectors.get(b)
        if va is None or vb is None:
            return False
        va = np.asarray(va, dtype=np.float64)
        vb = np.asarray(vb, dtype=np.float64)
        denom = np.linalg.norm(va) * np.linalg.norm(vb)
        if denom == 0.0:
            return False
        return float(np.dot(va, vb) / denom) > self.direct_merge_threshold


def load_word_vectors(path) -> dict:
    """Read `lemma<TAB>f1 f2 ... fk` lines into a lemma -> vector map."""
    vectors = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(path, lineno, "expected lemma<TAB>f1 f2 ...")
            try:
                vectors[parts[0]] = np.array(
                    [float(x) for x in parts[1].split()], dtype=np.float64
                )
            except ValueError as exc:
                raise ParseError(path, lineno, f"bad vector: {exc}") from exc
    return vectors


def default_lexicon() -> Lexicon:
    with resources.as_file(
        resources.files("instrembed.data").joinpath("lexicon.tsv")
    ) as p:
        return Lexicon.from_file(p)


def default_synonyms() -> SynonymTable:
    with resources.as_file(
        resources.files("instrembed.data").joinpath("synonyms.tsv")
    ) as p:
        return SynonymTable.from_file(p)


# ---------------------------------------------------------------------------
# lemmatization


def _ends_cvc(stem: str) -> bool:
    if len(stem) < 3:
        return False
    c2, v, c1 = stem[-3], stem[-2], stem[-1]
    return (
        c1 not in _VOWELS
        and c1 not in "wxy"
        and v in _INNER_VOWELS
        and c2 not in _INNER_VOWELS
    )


def _repair_stem(stem: str) -> str:
    # gemination first: running -> run; never both repairs
    if (
        len(stem) >= 3
        and stem[-1] == stem[-2]
        and stem[-1] not in _VOWELS
        and stem[-1] not in "lsz"
    ):
        return stem[:-1]
    # silent-e restoration, skipping unstressed -er/-en/-on endings
    if _ends_cvc(stem) and stem[-2:] not in ("er", "en", "on"):
        return stem + "e"
    return stem


def _strip_plural_like(t: str) -> str | None:
    """Shared -ies / -es / -s handling; None when no rule applies."""
    if t.endswith("ies") and len(t) > 4:
        return t[:-3] + "y"
    if t.endswith("es") and len(t) > 3:
        stem = t[:-2]
        if stem.endswith(("ss", "x", "z", "ch", "sh", "o")):
            return stem
    if t.endswith("s") and len(t) > 3 and not t.endswith(("ss", "us", "is")):
        return t[:-1]
    return None


def lemmatize_verb(token: str, lexicon: Lexicon | None = None) -> str:
    """Verb tense restoration: exception table first, then suffix rules.

    Idempotent; unknown tokens with no matching rule come back lowercased
    unchanged.
    """
    if not token:
        raise ValueError("token must be non-empty")
    t = token.lower()
    if lexicon is not None:
        hit = lexicon.lemma_for(t, "verb")
        if hit is not None:
            return hit
    if t.endswith("ied") and len(t) > 4:
        return t[:-3] + "y"
    stripped = _strip_plural_like(t)
    if stripped is not None:
        return stripped
    for suffix in ("ing", "ed"):
        if t.endswith(suffix) and len(t) - len(suffix) >= 3:
            return _repair_stem(t[: -len(suffix)])
    return t


def singularize_noun(token: str, lexicon: Lexicon | None = None) -> str:
    """Noun singularization: exception table first, then suffix rules."""
    if not token:
        raise ValueError("token must be non-empty")
    t = token.lower()
    if lexicon is not None:
        hit = lexicon.lemma_for(t, "noun")
        if hit is not None:
            return hit
    stripped = _strip_plural_like(t)
    return stripped if stripped is not None else t


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class _Token:
    surface: str
    quoted: bool
    sentence_initial: bool

    @property
    def low(self) -> str:
        return self.surface.lower()

    @property
    def proper(self) -> bool:
        return self.surface[:1].isupper() and not self.sentence_initial

    @property
    def has_digit(self) -> bool:
        return any(ch.isdigit() for ch in self.surface)


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    in_quote = False
    sentence_start = True
    for raw in text.split():
        quoted = in_quote or raw[:1] in _QUOTE_CHARS
        if sum(raw.count(q) for q in _QUOTE_CHARS) % 2 == 1:
            in_quote = not in_quote
        word = raw.strip(_STRIP_CHARS)
        if word:
            tokens.append(_Token(word, quoted, sentence_start))
            sentence_start = False
        if raw.rstrip(_QUOTE_CHARS + "'’)]}").endswith((".", "!", "?")):
            sentence_start = True
    return tokens


def _verb_lemma(tok: _Token, lexicon: Lexicon) -> str | None:
    if tok.quoted or tok.proper or tok.has_digit:
        return None
    low = tok.low
    if low in AUXILIARIES or low in _NEVER_VERB:
        return None
    hit = lexicon.lemma_for(low, "verb")
    if hit is not None:
        return hit
    lemma = lemmatize_verb(low, lexicon)
    if lemma != low and lexicon.has_pos(lemma, "verb"):
        return lemma
    return None


def _noun_lemma(tok: _Token, lexicon: Lexicon) -> str | None:
    if tok.quoted or tok.proper or tok.has_digit:
        return None
    lemma = singularize_noun(tok.low, lexicon)
    if lexicon.has_pos(lemma, "noun"):
        return lemma
    return None


def _find_main_verb(tokens, lexicon, start=0):
    """Index and lemma of the first verb, following need/want/ask-style
    chains ("need to translate" -> translate)."""
    i = start
    n = len(tokens)
    while i < n:
        lemma = _verb_lemma(tokens[i], lexicon)
        if lemma is not None:
            for hops in range(3):  # v [pronoun] to v'
                j = i + 1
                if j < n and tokens[j].low in ("you", "me", "us"):
                    j += 1
                if j + 1 < n and tokens[j].low == "to":
                    nxt = _verb_lemma(tokens[j + 1], lexicon)
                    if nxt is not None:
                        i, lemma = j + 1, nxt
                        continue
                break
            return i, lemma
        i += 1
    return None, None


def _arithmetic_content(tokens, start=0) -> bool:
    return any(
        t.has_digit or t.low in ARITHMETIC_KEYWORDS
        for t in tokens[start:]
        if not t.quoted
    )


def label_instruction(text: str, lexicon: Lexicon) -> TaskLabel | None:
    """Classify one instruction into its task category.

    Checks, in order: leading wh-word; leading auxiliary on a question;
    first verb with a common-noun head; first verb with a knowledge-clause
    marker / arithmetic verb / lone verb; bare noun head. Returns None when
    nothing applies. Never raises on content.
    """
    if not text or not text.strip():
        raise ValueError("text must be non-empty")
    tokens = _tokenize(text)
    if not tokens:
        return None

    first = tokens[0].low
    if first.endswith("'s") or first.endswith("’s"):
        first = first[:-2]

    # (1) direct wh-question; math only for "what" questions
    if first in WH_WORDS:
        if first == "what" and _arithmetic_content(tokens, 1):
            return TaskLabel(kind="what_math", wh_word="what")
        return TaskLabel(kind="wh_knowledge", wh_word=first)

    # (2) inverted yes/no question
    if first in AUXILIARIES and "?" in text:
        is_request = first in _REQUEST_AUX and len(tokens) > 1 and tokens[1].low == "you"
        if not is_request:
            cued = any(not t.quoted and t.low in TASK_QUESTION_CUES for t in tokens[1:])
            return TaskLabel(kind="yesno_task" if cued else "yesno_knowledge")

    # (3) first verb with a following common-noun head; the scan window is
    # the direct-object position, ending at the first preposition
    vi, verb = _find_main_verb(tokens, lexicon)
    if verb is not None:
        saw_marker = False
        for tok in tokens[vi + 1 :]:
            if tok.quoted:
                continue
            if tok.low in ("that", "about"):
                saw_marker = True  # knowledge clause follows
                break
            if tok.low in _STOP_PREPS:
                break
            noun = _noun_lemma(tok, lexicon)
            if noun is not None:
                return TaskLabel(kind="verb_noun", verb=verb, noun=noun)
            if tok.proper:
                saw_marker = True  # named-entity object

        # (4) no noun head: knowledge marker, arithmetic verb, lone verb
        if not saw_marker and verb in KNOWLEDGE_VERBS:
            saw_marker = vi + 1 < len(tokens)
        if saw_marker:
            return TaskLabel(kind="verb_knowledge", verb=verb)
        if verb in ARITHMETIC_VERBS:
            return TaskLabel(kind="verb_math", verb=verb)
        return TaskLabel(kind="verb_only", verb=verb)

    # (5) no verb: bare noun head
    for tok in tokens:
        noun = _noun_lemma(tok, lexicon)
        if noun is not None:
            return TaskLabel(kind="noun_knowledge", noun=noun)
    for tok in tokens:
        if tok.proper and not tok.quoted:
            return TaskLabel(
                kind="noun_knowledge", noun=singularize_noun(tok.low, lexicon)
            )
    for tok in tokens:
        if tok.surface.isalpha() and tok.low not in _DETERMINERS:
            return TaskLabel(
                kind="noun_knowledge", noun=singularize_noun(tok.low, lexicon)
            )
    return None


def label_corpus(corpus: Corpus, lexicon: Lexicon) -> Corpus:
    """Label every instruction; existing labels are recomputed."""
    return Corpus(
        [ins.replace(label=label_instruction(ins.text, lexicon)) for ins in corpus]
    )


# ---------------------------------------------------------------------------
# category hygiene


def filter_rare_categories(corpus: Corpus, min_count: int = 10) -> Corpus:
    """Drop categories with fewer than min_count members.

    Unlabeled instructions are dropped as well (they belong to no surviving
    category). Idempotent.
    """
    keep_cats = {k for k, v in corpus.category_index.items() if len(v) >= min_count}
    kept, removed = [], []
    for ins in corpus:
        if ins.label is not None and ins.label.key in keep_cats:
            kept.append(ins)
        else:
            removed.append(ins.id)
    if removed:
        log.info(
            "filter_rare_categories: removed %d instructions below min_count=%d",
            len(removed),
            min_count,
        )
    return Corpus(kept)


def _components(nodes, edges):
    parent = {n: n for n in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    groups = {}
    for n in nodes:
        groups.setdefault(find(n), []).append(n)
    return list(groups.values())


def merge_categories(
    corpus: Corpus, synonyms: SynonymTable, policy: MergePolicy | None = None
) -> Corpus:
    """Merge verb-noun categories whose verbs and nouns are both synonyms
    (or identical), subject to the policy's cosine gate.

    Merging runs as connected components, so the result is independent of
    category order, and the surviving label is the lexicographically
    smallest key in each component.
    """
    policy = policy or MergePolicy()
    cats = {}
    for key, members in corpus.category_index.items():
        label = corpus.get(members[0]).label
        if label.kind == "verb_noun":
            cats[key] = label

    keys = sorted(cats)
    edges = []
    for i, k1 in enumerate(keys):
        l1 = cats[k1]
        for k2 in keys[i + 1 :]:
            l2 = cats[k2]
            if not synonyms.co_grouped("verb", l1.verb, l2.verb):
                continue
            if not synonyms.co_grouped("noun", l1.noun, l2.noun):
                continue
            if policy.pair_passes(l1.verb, l2.verb) and policy.pair_passes(
                l1.noun, l2.noun
            ):
                edges.append((k1, k2))

    relabel = {}
    for component in _components(keys, edges):
        target = min(component)
        for key in component:
            if key != target:
                relabel[key] = cats[target]

    if not relabel:
        return corpus
    out = []
    for ins in corpus:
        if ins.label is not None and ins.label.key in relabel:
            out.append(ins.replace(label=relabel[ins.label.key]))
        else:
            out.append(ins)
    return Corpus(out)
