"""Whitespace-tokenized corpora and vocabularies.

Sentences are stored as tuples of token ids without BOS/EOS; the model code
adds those.  Files are UTF-8, one sentence per line, tokens separated by
single spaces.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PAD, BOS, EOS, UNK = "<pad>", "<s>", "</s>", "<unk>"
RESERVED = (PAD, BOS, EOS, UNK)
PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3

Sentence = tuple  # tuple[int, ...]


class CorpusError(ValueError):
    pass


class Vocabulary:
    """Bijection between token strings and dense integer ids.

    The four reserved tokens always occupy ids 0-3.
    """

    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if tuple(tokens[:4]) != RESERVED:
            tokens = list(RESERVED) + [t for t in tokens if t not in RESERVED]
        if len(set(tokens)) != len(tokens):
            raise CorpusError("duplicate tokens in vocabulary")
        self.tokens = tokens
        self.index = {t: i for i, t in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def __repr__(self) -> str:
        return f"Vocabulary(size={len(self)})"

    def id(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    def encode(self, line: str | Sequence[str]) -> Sentence:
        toks = line.split() if isinstance(line, str) else line
        return tuple(self.index.get(t, UNK_ID) for t in toks)

    def decode(self, ids: Iterable[int]) -> str:
        return " ".join(self.tokens[i] for i in ids)

    @property
    def content_ids(self) -> list[int]:
        return list(range(len(RESERVED), len(self)))

    def hash(self) -> str:
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if tuple(lines[:4]) != RESERVED:
            raise CorpusError(f"{path}: reserved tokens missing from the first four lines")
        return cls(lines)


def build_vocabulary(lines: Iterable[str | Sequence[str]], min_count: int = 1) -> Vocabulary:
    """Collect tokens seen at least ``min_count`` times.

    Order is frequency descending, ties broken lexicographically.
    """
    if min_count < 1:
        raise CorpusError("min-count must be >= 1")
    counts: Counter[str] = Counter()
    n_lines = 0
    for line in lines:
        n_lines += 1
        counts.update(line.split() if isinstance(line, str) else line)
    if n_lines == 0 or not counts:
        raise CorpusError("empty corpus")
    kept = [t for t, c in counts.items() if c >= min_count and t not in RESERVED]
    kept.sort(key=lambda t: (-counts[t], t))
    return Vocabulary(list(RESERVED) + kept)


def _check_sentence(ids: Sentence, vocab: Vocabulary, where: str) -> None:
    if not ids:
        raise CorpusError(f"empty sentence at {where}")
    if max(ids) >= len(vocab) or min(ids) < 0:
        raise CorpusError(f"token id out of range at {where}")


@dataclass
class ParallelCorpus:
    """Aligned (source, target) sentence pairs."""

    pairs: list[tuple[Sentence, Sentence]]
    src_vocab: Vocabulary
    tgt_vocab: Vocabulary

    def __post_init__(self) -> None:
        self.pairs = [(tuple(s), tuple(t)) for s, t in self.pairs]
        for i, (s, t) in enumerate(self.pairs):
            _check_sentence(s, self.src_vocab, f"pair {i} (source)")
            _check_sentence(t, self.tgt_vocab, f"pair {i} (target)")

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def sources(self) -> list[Sentence]:
        return [s for s, _ in self.pairs]

    @property
    def targets(self) -> list[Sentence]:
        return [t for _, t in self.pairs]

    def subset(self, indices: Iterable[int]) -> "ParallelCorpus":
        return ParallelCorpus([self.pairs[i] for i in indices], self.src_vocab, self.tgt_vocab)

    def reversed(self) -> "ParallelCorpus":
        """The same pairs with source and target swapped."""
        return ParallelCorpus([(t, s) for s, t in self.pairs], self.tgt_vocab, self.src_vocab)

    def save(self, src_path: str | Path, tgt_path: str | Path) -> None:
        write_lines(src_path, self.sources, self.src_vocab)
        write_lines(tgt_path, self.targets, self.tgt_vocab)


@dataclass
class MonoCorpus:
    """Target-side monolingual sentences."""

    sentences: list[Sentence]
    vocab: Vocabulary

    def __post_init__(self) -> None:
        self.sentences = [tuple(s) for s in self.sentences]
        for i, s in enumerate(self.sentences):
            _check_sentence(s, self.vocab, f"line {i + 1}")

    def __len__(self) -> int:
        return len(self.sentences)

    def save(self, path: str | Path) -> None:
        write_lines(path, self.sentences, self.vocab)


def read_lines(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def write_lines(path: str | Path, sentences: Iterable[Sentence], vocab: Vocabulary) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ids in sentences:
            fh.write(vocab.decode(ids) + "\n")


def _encode_file(path: str | Path, vocab: Vocabulary) -> list[Sentence]:
    out = []
    for n, line in enumerate(read_lines(path), start=1):
        ids = vocab.encode(line)
        if not ids:
            raise CorpusError(f"{path}: empty line {n}")
        out.append(ids)
    return out


def load_parallel(src_path, tgt_path, src_vocab: Vocabulary, tgt_vocab: Vocabulary) -> ParallelCorpus:
    src_lines = read_lines(src_path)
    tgt_lines = read_lines(tgt_path)
    if len(src_lines) != len(tgt_lines):
        raise CorpusError(f"line-count mismatch {len(src_lines)} vs {len(tgt_lines)}")
    return ParallelCorpus(
        list(zip(_encode_file(src_path, src_vocab), _encode_file(tgt_path, tgt_vocab))),
        src_vocab,
        tgt_vocab,
    )


def load_mono(path, vocab: Vocabulary) -> MonoCorpus:
    return MonoCorpus(_encode_file(path, vocab), vocab)


def target_unigram(corpus: ParallelCorpus | MonoCorpus) -> np.ndarray:
    """Relative frequency of every target-vocabulary id."""
    if isinstance(corpus, ParallelCorpus):
        sents, vocab = corpus.targets, corpus.tgt_vocab
    else:
        sents, vocab = corpus.sentences, corpus.vocab
    if not sents:
        raise CorpusError("empty corpus")
    counts = np.bincount(np.concatenate([np.asarray(s) for s in sents]), minlength=len(vocab)).astype(np.float64)
    return counts / counts.sum()
