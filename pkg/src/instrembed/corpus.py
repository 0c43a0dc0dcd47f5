"""Instruction records, task labels, corpus persistence, and benchmark splits.

A corpus is an immutable ordered collection of instructions. The canonical
on-disk form is JSONL, one record per line:

    {"id": str, "text": str, "label": {...}|null, "split": str, "source": str}

Task categories are keyed as "kind|verb|noun|wh_word" (empty fields empty),
which gives a total order used everywhere deterministic iteration matters.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from .errors import DuplicateIdError, ParseError

SPLITS = ("eft_train", "eft_test", "ift_train", "ift_test", "unassigned")

KINDS = (
    "verb_noun",
    "wh_knowledge",
    "what_math",
    "yesno_knowledge",
    "yesno_task",
    "verb_knowledge",
    "verb_only",
    "verb_math",
    "noun_knowledge",
)

WH_WORDS = ("what", "when", "where", "who", "why", "how")

_VERB_KINDS = ("verb_only", "verb_knowledge", "verb_math")


@dataclass(frozen=True)
class TaskLabel:
    """Task category of one instruction: a structural kind plus the
    normalized verb / noun / wh-word fields that kind requires."""

    kind: str
    verb: str | None = None
    noun: str | None = None
    wh_word: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown label kind {self.kind!r}")
        if self.kind == "verb_noun" and not (self.verb and self.noun):
            raise ValueError("verb_noun label requires both verb and noun")
        if self.kind in ("wh_knowledge", "what_math"):
            if self.wh_word not in WH_WORDS:
                raise ValueError(f"{self.kind} label requires a wh_word")
        if self.kind in _VERB_KINDS and (not self.verb or self.noun):
            raise ValueError(f"{self.kind} label requires verb present, noun absent")
        if self.kind == "noun_knowledge" and (not self.noun or self.verb):
            raise ValueError("noun_knowledge label requires noun present, verb absent")

    @property
    def key(self) -> str:
        return f"{self.kind}|{self.verb or ''}|{self.noun or ''}|{self.wh_word or ''}"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "verb": self.verb,
            "noun": self.noun,
            "wh_word": self.wh_word,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaskLabel":
        return cls(
            kind=d.get("kind"),
            verb=d.get("verb") or None,
            noun=d.get("noun") or None,
            wh_word=d.get("wh_word") or None,
        )


@dataclass(frozen=True)
class Instruction:
    id: str
    text: str
    label: TaskLabel | None = None
    split: str = "unassigned"
    source: str = ""

    def __post_init__(self):
        if not self.id:
            raise ValueError("instruction id must be non-empty")
        if not self.text or not self.text.strip():
            raise ValueError(f"instruction {self.id!r} has empty text")
        if self.split not in SPLITS:
            raise ValueError(f"instruction {self.id!r} has unknown split {self.split!r}")

    def replace(self, **kw) -> "Instruction":
        cur = {
            "id": self.id,
            "text": self.text,
            "label": self.label,
            "split": self.split,
            "source": self.source,
        }
        cur.update(kw)
        return Instruction(**cur)


class Corpus:
    """Ordered, immutable instruction collection with a category index.

    The index maps each canonical label key to the tuple of member ids, in
    corpus order; unlabeled instructions are not indexed.
    """

    def __init__(self, instructions):
        self.instructions = tuple(instructions)
        self._by_id = {}
        index: dict[str, list[str]] = {}
        for ins in self.instructions:
            if ins.id in self._by_id:
                raise DuplicateIdError(f"duplicate instruction id {ins.id!r}")
            self._by_id[ins.id] = ins
            if ins.label is not None:
                index.setdefault(ins.label.key, []).append(ins.id)
        self.category_index = {k: tuple(v) for k, v in sorted(index.items())}

    def __len__(self):
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def __contains__(self, id_):
        return id_ in self._by_id

    def get(self, id_) -> Instruction:
        return self._by_id[id_]

    @property
    def categories(self) -> list[str]:
        return list(self.category_index)

    def labeled(self) -> list[Instruction]:
        return [i for i in self.instructions if i.label is not None]

    def restrict_to_split(self, split: str) -> "Corpus":
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        return Corpus([i for i in self.instructions if i.split == split])


def _record_to_instruction(rec: dict, path, lineno: int) -> Instruction:
    if not isinstance(rec, dict):
        raise ParseError(path, lineno, "record is not a JSON object")
    for field_ in ("id", "text"):
        if field_ not in rec or not isinstance(rec[field_], str) or not rec[field_]:
            raise ParseError(path, lineno, f"missing or invalid {field_!r} field")
    label = None
    if rec.get("label") is not None:
        try:
            label = TaskLabel.from_dict(rec["label"])
        except (ValueError, AttributeError, TypeError) as exc:
            raise ParseError(path, lineno, f"invalid label: {exc}") from exc
    try:
        return Instruction(
            id=rec["id"],
            text=rec["text"],
            label=label,
            split=rec.get("split", "unassigned"),
            source=rec.get("source", ""),
        )
    except ValueError as exc:
        raise ParseError(path, lineno, str(exc)) from exc


def load_corpus(path, format: str = "jsonl") -> Corpus:
    """Load a JSONL corpus. Malformed lines raise ParseError with the line
    number; duplicate ids raise DuplicateIdError."""
    if format != "jsonl":
        raise ValueError(f"unsupported corpus format {format!r}")
    instructions = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, lineno, f"invalid JSON: {exc.msg}") from exc
            ins = _record_to_instruction(rec, path, lineno)
            if ins.id in seen:
                raise DuplicateIdError(
                    f"{path}:{lineno}: duplicate instruction id {ins.id!r}"
                )
            seen.add(ins.id)
            instructions.append(ins)
    return Corpus(instructions)


def save_corpus(corpus: Corpus, path) -> None:
    """Write JSONL (UTF-8, LF). load_corpus(save_corpus(c)) == c field-for-field."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ins in corpus:
            rec = {
                "id": ins.id,
                "text": ins.text,
                "label": ins.label.to_dict() if ins.label else None,
                "split": ins.split,
                "source": ins.source,
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def make_splits(corpus: Corpus, ratios, seed: int) -> Corpus:
    """Assign benchmark splits at category granularity.

    ratios are the (eft_train, eft_test, ift_train, ift_test) sample
    fractions. Categories are disjoint between the EFT and IFT groups and
    between eft_train and eft_test; within IFT the same category may feed
    both train and test (samples never overlap). Deterministic under seed.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 4:
        raise ValueError("ratios must have exactly 4 entries")
    if any(r < 0 for r in ratios):
        raise ValueError("ratios must be non-negative")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    unlabeled = [i.id for i in corpus if i.label is None]
    if unlabeled:
        raise ValueError(
            f"{len(unlabeled)} unlabeled instructions present (first: {unlabeled[0]!r})"
        )

    rng = random.Random(seed)
    r_eft_train, r_eft_test, r_ift_train, r_ift_test = ratios
    total = len(corpus)
    cat_sizes = {k: len(v) for k, v in corpus.category_index.items()}

    cats = sorted(corpus.category_index)
    rng.shuffle(cats)
    eft_cats, ift_cats = [], []
    eft_target = (r_eft_train + r_eft_test) * total
    acc = 0
    for cat in cats:
        if acc < eft_target:
            eft_cats.append(cat)
            acc += cat_sizes[cat]
        else:
            ift_cats.append(cat)

    assignment: dict[str, str] = {}

    rng.shuffle(eft_cats)
    eft_total = sum(cat_sizes[c] for c in eft_cats)
    denom = r_eft_train + r_eft_test
    train_target = (r_eft_train / denom) * eft_total if denom > 0 else 0
    acc = 0
    for cat in eft_cats:
        bucket = "eft_train" if acc < train_target else "eft_test"
        acc += cat_sizes[cat]
        for id_ in corpus.category_index[cat]:
            assignment[id_] = bucket

    denom = r_ift_train + r_ift_test
    test_frac = (r_ift_test / denom) if denom > 0 else 0.0
    for cat in sorted(ift_cats):
        members = list(corpus.category_index[cat])
        rng.shuffle(members)
        n_test = int(test_frac * len(members) + 0.5)
        for j, id_ in enumerate(members):
            assignment[id_] = "ift_test" if j < n_test else "ift_train"

    return Corpus([ins.replace(split=assignment[ins.id]) for ins in corpus])
