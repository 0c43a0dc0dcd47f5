"""Build a labeled instruction benchmark from raw text.

Walks the corpus-construction pipeline: rule-based task labeling, frequency
filtering, synonym-driven category merging, and category-disjoint splits.
"""

from instrembed import (
    Corpus,
    Instruction,
    default_lexicon,
    default_synonyms,
    filter_rare_categories,
    label_corpus,
    make_splits,
    merge_categories,
)

# A miniature raw corpus. Real inputs arrive as JSONL via load_corpus().
RAW = (
    ["Write a story about robot number %d." % i for i in range(12)]
    + ["Provide an answer to question %d." % i for i in range(11)]
    + ["Give an answer for puzzle %d." % i for i in range(11)]
    + ["Why is example %d interesting?" % i for i in range(12)]
    + ["Translate 'bonjour' into language %d." % i for i in range(4)]  # rare
)

corpus = Corpus(
    [Instruction(id=f"raw{i}", text=t, source="demo") for i, t in enumerate(RAW)]
)

lexicon = default_lexicon()
labeled = label_corpus(corpus, lexicon)
print("labeled categories:")
for key, members in labeled.category_index.items():
    print(f"  {key:40s} {len(members):3d} instructions")

# categories below 10 samples are treated as noise
filtered = filter_rare_categories(labeled, min_count=10)
print(f"\nafter frequency filter: {len(filtered)} of {len(labeled)} instructions")

# provide/give are synonym verbs, so the two answer categories merge
merged = merge_categories(filtered, default_synonyms())
print("after synonym merging:")
for key, members in merged.category_index.items():
    print(f"  {key:40s} {len(members):3d} instructions")

split = make_splits(merged, ratios=(0.4, 0.2, 0.3, 0.1), seed=7)
counts = {}
for ins in split:
    counts[ins.split] = counts.get(ins.split, 0) + 1
print(f"\nsplit sizes: {counts}")

# EFT and IFT never share a category
eft = {i.label.key for i in split if i.split.startswith("eft")}
ift = {i.label.key for i in split if i.split.startswith("ift")}
print(f"categories shared between EFT and IFT: {len(eft & ift)}")
