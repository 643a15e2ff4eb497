"""Text ingestion, greedy wordpiece tokenization, and synthetic task data.

File formats:
  - dataset: UTF-8 TSV, one ``text<TAB>integer-label`` example per line
  - vocabulary: UTF-8, one token per line, line number = token id; the first
    four lines must be [PAD], [UNK], [CLS], [SEP] in that order

Tokenization splits on whitespace and then greedily matches the longest
vocabulary piece, with "##" marking word-internal continuation pieces; a word
with no match becomes a single [UNK]. No lowercasing or other normalization
is applied.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

SPECIAL_TOKENS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]")
PAD_ID, UNK_ID, CLS_ID, SEP_ID = 0, 1, 2, 3

_MAX_WORD_CHARS = 100


@dataclass
class Dataset:
    examples: list[tuple[str, int]]
    num_classes: int
    split: str = ""

    def __post_init__(self):
        if not self.examples:
            raise ValueError("dataset must not be empty")
        for text, label in self.examples:
            if not 0 <= label < self.num_classes:
                raise ValueError(
                    f"label {label} out of range for {self.num_classes} classes"
                )

    def __len__(self):
        return len(self.examples)

    def labels(self) -> np.ndarray:
        return np.array([label for _, label in self.examples], dtype=np.int64)


class Vocab:
    """Token-to-id map with the four pinned special tokens at ids 0..3."""

    def __init__(self, tokens):
        tokens = list(tokens)
        if tuple(tokens[:4]) != SPECIAL_TOKENS:
            raise ValueError(f"vocabulary must start with {SPECIAL_TOKENS}")
        self.tokens = tokens
        self.index = {tok: i for i, tok in enumerate(tokens)}
        if len(self.index) != len(tokens):
            raise ValueError("vocabulary tokens must be unique")

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    @classmethod
    def from_file(cls, path):
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(lines)

    def save(self, path):
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")


def build_vocab(dataset: Dataset) -> Vocab:
    """Whole-word vocabulary from a dataset, most frequent first."""
    counts: dict[str, int] = {}
    for text, _ in dataset.examples:
        for word in text.split():
            counts[word] = counts.get(word, 0) + 1
    ordered = sorted(counts, key=lambda w: (-counts[w], w))
    return Vocab(list(SPECIAL_TOKENS) + ordered)


def _word_ids(vocab: Vocab, word: str) -> list[int]:
    if len(word) > _MAX_WORD_CHARS:
        return [UNK_ID]
    ids = []
    start = 0
    while start < len(word):
        end = len(word)
        match = None
        while start < end:
            piece = word[start:end]
            if start > 0:
                piece = "##" + piece
            pid = vocab.index.get(piece)
            if pid is not None:
                match = pid
                break
            end -= 1
        if match is None:
            return [UNK_ID]
        ids.append(match)
        start = end
    return ids


def tokenize(vocab: Vocab, text: str, max_len: int = 128):
    """ids and mask arrays of length ``max_len``: [CLS] pieces [SEP] [PAD]...

    Pieces beyond ``max_len - 2`` are dropped so the separator always fits.
    """
    if max_len < 2:
        raise ValueError(f"max_len must be >= 2, got {max_len}")
    pieces: list[int] = []
    for word in text.split():
        pieces.extend(_word_ids(vocab, word))
    ids = [CLS_ID] + pieces[: max_len - 2] + [SEP_ID]
    mask = np.zeros(max_len, dtype=np.int64)
    mask[: len(ids)] = 1
    ids = ids + [PAD_ID] * (max_len - len(ids))
    return np.array(ids, dtype=np.int64), mask


def encode_dataset(vocab: Vocab, dataset: Dataset, max_len: int = 128):
    """Tokenize every example: (ids [N, max_len], mask [N, max_len], labels [N])."""
    ids = np.empty((len(dataset), max_len), dtype=np.int64)
    mask = np.empty((len(dataset), max_len), dtype=np.int64)
    for i, (text, _) in enumerate(dataset.examples):
        ids[i], mask[i] = tokenize(vocab, text, max_len)
    return ids, mask, dataset.labels()


def load_tsv(path, num_classes: int | None = None, split: str | None = None) -> Dataset:
    """Parse a TSV dataset file; malformed lines raise with their line number.

    With ``num_classes`` given, labels are range-checked against it; otherwise
    the class count is inferred as ``max(label) + 1`` (minimum 2).
    """
    path = Path(path)
    content = path.read_text(encoding="utf-8")
    examples = []
    for lineno, line in enumerate(content.splitlines(), start=1):
        text, sep, label_str = line.rpartition("\t")
        if not sep or not text:
            raise ValueError(f"{path}:{lineno}: expected 'text<TAB>label'")
        try:
            label = int(label_str)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: label {label_str!r} is not an integer") from None
        if label < 0:
            raise ValueError(f"{path}:{lineno}: label must be non-negative")
        if num_classes is not None and label >= num_classes:
            raise ValueError(
                f"{path}:{lineno}: label {label} out of range for {num_classes} classes"
            )
        examples.append((text, label))
    if not examples:
        raise ValueError(f"{path}: file contains no examples")
    if num_classes is None:
        num_classes = max(2, max(label for _, label in examples) + 1)
    return Dataset(examples, num_classes, split if split is not None else path.stem)


def subsample(dataset: Dataset, fraction: float, seed: int) -> Dataset:
    """Label-stratified random subset with floor(fraction * N) examples.

    Per-class quotas start at floor(fraction * n_c); the remainder up to the
    total is assigned to the classes with the largest fractional parts, so no
    class deviates from its parent proportion by more than one example.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    rng = np.random.default_rng(seed)
    target_total = int(np.floor(fraction * len(dataset)))
    by_class: dict[int, list[int]] = {}
    for i, (_, label) in enumerate(dataset.examples):
        by_class.setdefault(label, []).append(i)
    labels_sorted = sorted(by_class)
    quotas = {c: int(np.floor(fraction * len(by_class[c]))) for c in labels_sorted}
    leftover = target_total - sum(quotas.values())
    remainders = sorted(
        labels_sorted,
        key=lambda c: (-(fraction * len(by_class[c]) - quotas[c]), c),
    )
    for c in remainders[:leftover]:
        quotas[c] += 1
    picked: list[int] = []
    for c in labels_sorted:
        order = rng.permutation(len(by_class[c]))
        picked.extend(by_class[c][j] for j in order[: quotas[c]])
    picked = [picked[j] for j in rng.permutation(len(picked))]
    return Dataset([dataset.examples[i] for i in picked], dataset.num_classes, dataset.split)


_SYLLABLES = ("ba", "de", "ki", "lo", "mu", "na", "po", "ra", "su", "ti", "ve", "zo", "fa", "gu")
_NOISE_WORDS = (
    "the", "and", "of", "with", "quite", "rather", "very", "some",
    "thing", "note", "case", "point", "item", "part", "bit", "deal",
)
KEYWORDS_PER_CLASS = 6
MAX_SYNTH_CLASSES = len(_SYLLABLES)


def synth_keywords(num_classes: int) -> list[list[str]]:
    """Disjoint per-class keyword sets, a fixed function of the class count."""
    return [
        [_SYLLABLES[c] + _SYLLABLES[j] + _SYLLABLES[(c + j + 1) % len(_SYLLABLES)]
         for j in range(KEYWORDS_PER_CLASS)]
        for c in range(num_classes)
    ]


def synth_generate(num_examples: int, num_classes: int, seed: int, split: str = "synth") -> Dataset:
    """Deterministic keyword-classification corpus, perfectly separable.

    Every text mixes shared noise words with one to three keywords drawn from
    its class's disjoint keyword set, so a keyword-lookup oracle classifies
    the corpus with accuracy 1. Labels cycle through the classes for balanced
    counts, then example order is shuffled.
    """
    if not 2 <= num_classes <= MAX_SYNTH_CLASSES:
        raise ValueError(f"num_classes must be in 2..{MAX_SYNTH_CLASSES}, got {num_classes}")
    if num_examples < 1:
        raise ValueError("num_examples must be >= 1")
    rng = np.random.default_rng(seed)
    keywords = synth_keywords(num_classes)
    examples = []
    for i in range(num_examples):
        label = i % num_classes
        words = list(rng.choice(_NOISE_WORDS, size=rng.integers(6, 12)))
        for _ in range(rng.integers(1, 4)):
            pos = rng.integers(0, len(words) + 1)
            words.insert(pos, keywords[label][rng.integers(KEYWORDS_PER_CLASS)])
        examples.append((" ".join(words), label))
    examples = [examples[j] for j in rng.permutation(num_examples)]
    return Dataset(examples, num_classes, split)


def keyword_oracle_accuracy(dataset: Dataset) -> float:
    """Accuracy of classifying purely by keyword lookup (1.0 by construction)."""
    keywords = synth_keywords(dataset.num_classes)
    lookup = {w: c for c, ws in enumerate(keywords) for w in ws}
    correct = 0
    for text, label in dataset.examples:
        votes = [lookup[w] for w in text.split() if w in lookup]
        if votes and votes[0] == label:
            correct += 1
    return correct / len(dataset)
