"""IBM Model 1 lexical tables t(f|e) trained by EM, and their translation entropy.

Only co-occurring (e, f) pairs are stored; after the first EM step every
other entry is exactly zero.  The E-step is vectorized over all
(sentence, source position, target position) triples of the corpus.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import ParallelCorpus

NULL = -1  # target-side NULL word
NULL_TOKEN = "NULL"


@dataclass
class Ibm1Table:
    """t(f|e) over co-occurring pairs, plus a default for absent pairs."""

    e: np.ndarray  # target ids, NULL = -1
    f: np.ndarray  # source ids
    t: np.ndarray
    n_source_types: int
    default: float = 0.0

    def __post_init__(self) -> None:
        self._index = {(int(a), int(b)): i for i, (a, b) in enumerate(zip(self.e, self.f))}

    def prob(self, e: int, f: int) -> float:
        i = self._index.get((e, f))
        return self.default if i is None else float(self.t[i])

    def row(self, e: int) -> dict[int, float]:
        sel = self.e == e
        return {int(f): float(p) for f, p in zip(self.f[sel], self.t[sel])}

    def row_sums(self) -> dict[int, float]:
        sums: dict[int, float] = {}
        for e in np.unique(self.e):
            sums[int(e)] = float(self.t[self.e == e].sum())
        return sums

    def row_entropies(self) -> dict[int, float]:
        """-sum_f t log t per target word (nats)."""
        out: dict[int, float] = {}
        if self.default > 0:
            h = -self.n_source_types * self.default * math.log(self.default)
            return {int(e): h for e in np.unique(self.e)}
        plogp = np.where(self.t > 0, self.t * np.log(np.where(self.t > 0, self.t, 1.0)), 0.0)
        for e in np.unique(self.e):
            out[int(e)] = float(-plogp[self.e == e].sum())
        return out

    def to_tsv(self, path: str | Path, src_tokens: list[str], tgt_tokens: list[str]) -> None:
        def name(e):
            return NULL_TOKEN if e == NULL else tgt_tokens[e]

        rows = sorted(zip(self.e.tolist(), self.f.tolist(), self.t.tolist()),
                      key=lambda r: (name(r[0]), -r[2], src_tokens[r[1]]))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for e, f, p in rows:
                fh.write(f"{name(e)}\t{src_tokens[f]}\t{p!r}\n")


def _cooccurrence(corpus: ParallelCorpus):
    """Flattened (pair-index, source-token-index) triples over every sentence."""
    f_tok, e_tok, tok_of = [], [], []
    src_positions = 0
    for s, t in corpus.pairs:
        e_side = (NULL,) + tuple(t)
        J, I1 = len(s), len(e_side)
        f_tok.append(np.repeat(np.asarray(s), I1))
        e_tok.append(np.tile(np.asarray(e_side), J))
        tok_of.append(np.repeat(np.arange(src_positions, src_positions + J), I1))
        src_positions += J
    f_all = np.concatenate(f_tok)
    e_all = np.concatenate(e_tok)
    tok_all = np.concatenate(tok_of)
    keys = np.stack([e_all, f_all], axis=1)
    uniq, pair_idx = np.unique(keys, axis=0, return_inverse=True)
    return uniq, pair_idx.reshape(-1), tok_all, src_positions


def initial_table(corpus: ParallelCorpus) -> Ibm1Table:
    """The uniform starting point t(f|e) = 1/|V_f| over observed source types."""
    uniq, _, _, _ = _cooccurrence(corpus)
    n_f = len({f for s in corpus.sources for f in s})
    return Ibm1Table(uniq[:, 0], uniq[:, 1], np.full(len(uniq), 1.0 / n_f), n_f, default=1.0 / n_f)


def train_ibm1(corpus: ParallelCorpus, iterations: int = 15) -> tuple[Ibm1Table, list[float]]:
    """EM for t(f|e), NULL prepended to every target sentence.

    Returns the table after ``iterations`` EM steps and the corpus
    log-likelihood sum_s sum_j log((1/(I_s+1)) sum_i t(f_j|e_i)) computed
    with the table each E-step started from.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    uniq, pair_idx, tok, n_tokens = _cooccurrence(corpus)
    n_f = len(np.unique(uniq[:, 1]))
    t = np.full(len(uniq), 1.0 / n_f)
    e_of_pair = uniq[:, 0]
    _, e_group = np.unique(e_of_pair, return_inverse=True)
    # per source token: number of target positions incl. NULL
    lengths = np.bincount(tok, minlength=n_tokens)
    loglik = []
    for _ in range(iterations):
        contrib = t[pair_idx]
        denom = np.bincount(tok, weights=contrib, minlength=n_tokens)
        loglik.append(float(np.sum(np.log(denom / lengths))))
        post = contrib / denom[tok]
        counts = np.bincount(pair_idx, weights=post, minlength=len(uniq))
        totals = np.bincount(e_group, weights=counts)
        t = counts / totals[e_group]
    return Ibm1Table(e_of_pair.copy(), uniq[:, 1].copy(), t, n_f), loglik


def translation_entropy(table: Ibm1Table, weights: np.ndarray) -> float:
    """sum_e w(e) * H(t(.|e)) in nats; NULL carries no weight."""
    ent = table.row_entropies()
    total = 0.0
    for e, w in enumerate(np.asarray(weights, dtype=np.float64)):
        if w > 0:
            total += w * ent.get(e, 0.0)
    return total


def save_table(table: Ibm1Table, loglik: list[float], path_prefix: str | Path,
               src_tokens: list[str], tgt_tokens: list[str], iterations: int) -> None:
    table.to_tsv(f"{path_prefix}.tsv", src_tokens, tgt_tokens)
    meta = {"iterations": iterations, "loglik": loglik, "n_entries": int(len(table.t))}
    Path(f"{path_prefix}.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
