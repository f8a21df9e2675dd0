"""Corpus- and model-level diagnostics: perplexity, top-N mass curves, BLEU."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .corpus import ParallelCorpus, Sentence
from .seqmodel import SeqModel, batch_logprobs


def corpus_perplexity(model: SeqModel, corpus: ParallelCorpus | Sequence[tuple[Sentence, Sentence]]) -> float:
    """exp of the per-token negative log-likelihood, EOS counted as a token."""
    pairs = corpus.pairs if isinstance(corpus, ParallelCorpus) else list(corpus)
    if not pairs:
        raise ValueError("empty corpus")
    total = math.fsum(batch_logprobs(model, pairs))
    tokens = sum(len(t) + 1 for _, t in pairs)
    return math.exp(-total / tokens)


@dataclass
class MassCurve:
    points: list[tuple[int, float]]

    def mass_at(self, n: int) -> float:
        return dict(self.points)[n]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["N", "mass"])
            for n, m in self.points:
                w.writerow([n, repr(m)])

    @classmethod
    def from_csv(cls, path: str | Path) -> "MassCurve":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        return cls([(int(r["N"]), float(r["mass"])) for r in rows])


def cumulative_mass_curve(model: SeqModel, corpus: ParallelCorpus, ns: Sequence[int],
                          batch_size: int = 512) -> MassCurve:
    """Mean cumulative probability of the N most likely tokens at every gold-prefix position."""
    ns = list(ns)
    if ns != sorted(ns) or not ns or ns[0] < 1:
        raise ValueError("Ns must be positive and sorted ascending")
    V = model.arch.tgt_vocab_size
    cols = [min(n, V) - 1 for n in ns]
    sums = np.zeros(len(ns))
    count = 0
    pairs = corpus.pairs
    with torch.no_grad():
        for start in range(0, len(pairs), batch_size):
            chunk = pairs[start: start + batch_size]
            logp, _, mask = model.forced([s for s, _ in chunk], [t for _, t in chunk])
            p = logp.exp()[mask].numpy()
            cum = np.cumsum(-np.sort(-p, axis=1), axis=1)
            sums += cum[:, cols].sum(axis=0)
            count += p.shape[0]
    return MassCurve([(n, float(s / count)) for n, s in zip(ns, sums)])


@dataclass
class BleuReport:
    score: float
    precisions: list[float]
    brevity_penalty: float
    hyp_len: int
    ref_len: int
    matches: list[int]
    totals: list[int]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _ngrams(tokens: Sequence, n: int) -> Counter:
    return Counter(tuple(tokens[i: i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(hypotheses: Sequence[Sequence], references: Sequence[Sequence], max_n: int = 4) -> BleuReport:
    """Unsmoothed corpus BLEU with clipped n-gram counts and a single reference.

    An order for which the hypotheses contain no n-grams at all (0/0) counts
    as precision 1; any other zero precision makes the score 0.
    """
    if len(hypotheses) != len(references):
        raise ValueError(f"{len(hypotheses)} hypotheses vs {len(references)} references")
    if not hypotheses:
        raise ValueError("need at least one sentence pair")
    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            h, r = _ngrams(hyp, n), _ngrams(ref, n)
            matches[n - 1] += sum(min(c, r[g]) for g, c in h.items())
            totals[n - 1] += max(len(hyp) - n + 1, 0)
    precisions = [m / t if t else 1.0 for m, t in zip(matches, totals)]
    if hyp_len == 0:
        bp = 0.0
    else:
        bp = 1.0 if hyp_len >= ref_len else math.exp(1 - ref_len / hyp_len)
    if min(precisions) <= 0:
        score = 0.0
    else:
        score = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / max_n)
    return BleuReport(score, precisions, bp, hyp_len, ref_len, matches, totals)
