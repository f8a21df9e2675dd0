"""Synthetic noisy-channel translation tasks with an exactly known Pr(f|e).

A target sentence is drawn from a small template grammar; each target word
is then replaced by one of its source options, and a local swap moves a
trigger word behind its right neighbour.  Everything about the channel is
computable in closed form, which makes it a reference for the search and
sampling oracles below.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import EOS_ID, RESERVED, MonoCorpus, ParallelCorpus, Sentence, Vocabulary
from .decode import (GeneratorSpec, Hypothesis, SpecError, _Stepper, beam_search,
                     nbest_selection_probs, strategy_step_dist, generate)
from .seqmodel import SeqModel

ENUMERATION_LIMIT = 10 ** 7


class EnumerationError(ValueError):
    pass


@dataclass
class ToyChannel:
    templates: list[tuple[float, list[str]]]
    slots: dict[str, list[tuple[str, float]]]
    options: dict[str, list[tuple[str, float]]]
    swap_triggers: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.templates = [(float(w), list(t)) for w, t in self.templates]
        self.slots = {k: [(w, float(p)) for w, p in v] for k, v in self.slots.items()}
        self.options = {k: [(w, float(p)) for w, p in v] for k, v in self.options.items()}
        for name, dist in [("templates", [(None, w) for w, _ in self.templates])] + \
                [(f"slot {k}", v) for k, v in self.slots.items()] + \
                [(f"options of {k}", v) for k, v in self.options.items()]:
            total = sum(p for _, p in dist)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"{name} sums to {total}, not 1")
        for _, tmpl in self.templates:
            for slot in tmpl:
                for word, _ in self.slots[slot]:
                    if word not in self.options:
                        raise ValueError(f"target word {word!r} has no channel options")

    @property
    def target_words(self) -> list[str]:
        seen: dict[str, None] = {}
        for _, tmpl in self.templates:
            for slot in tmpl:
                for w, _ in self.slots[slot]:
                    seen.setdefault(w)
        return list(seen)

    @property
    def source_words(self) -> list[str]:
        seen: dict[str, None] = {}
        for e in self.target_words:
            for f, _ in self.options[e]:
                seen.setdefault(f)
        return list(seen)

    def vocabularies(self) -> tuple[Vocabulary, Vocabulary]:
        return Vocabulary(list(RESERVED) + self.source_words), Vocabulary(list(RESERVED) + self.target_words)

    def permutation(self, target: Sequence[str]) -> list[int]:
        """Source position i holds the translation of target position perm[i]."""
        perm = list(range(len(target)))
        i = 0
        while i < len(target) - 1:
            if target[i] in self.swap_triggers:
                perm[i], perm[i + 1] = perm[i + 1], perm[i]
                i += 2
            else:
                i += 1
        return perm

    def sample_target(self, rng: np.random.Generator) -> list[str]:
        weights = [w for w, _ in self.templates]
        tmpl = self.templates[int(rng.choice(len(weights), p=weights))][1]
        out = []
        for slot in tmpl:
            words = self.slots[slot]
            out.append(words[int(rng.choice(len(words), p=[p for _, p in words]))][0])
        return out

    def sample_source(self, target: Sequence[str], rng: np.random.Generator) -> list[str]:
        trans = []
        for e in target:
            opts = self.options[e]
            trans.append(opts[int(rng.choice(len(opts), p=[p for _, p in opts]))][0])
        return [trans[j] for j in self.permutation(target)]

    def source_prob(self, source: Sequence[str], target: Sequence[str]) -> float:
        """Exact Pr(f | e)."""
        if len(source) != len(target):
            return 0.0
        perm = self.permutation(target)
        p = 1.0
        for i, j in enumerate(perm):
            p *= dict(self.options[target[j]]).get(source[i], 0.0)
        return p

    def source_distribution(self, target: Sequence[str]) -> dict[tuple[str, ...], float]:
        """Every source sentence with non-zero Pr(f | e)."""
        perm = self.permutation(target)
        out: dict[tuple[str, ...], float] = {}
        for combo in itertools.product(*(self.options[e] for e in target)):
            words = [combo[j][0] for j in perm]
            out[tuple(words)] = out.get(tuple(words), 0.0) + math.prod(p for _, p in combo)
        return out

    def target_prob(self, target: Sequence[str]) -> float:
        total = 0.0
        for w, tmpl in self.templates:
            if len(tmpl) != len(target):
                continue
            p = w
            for slot, word in zip(tmpl, target):
                p *= dict(self.slots[slot]).get(word, 0.0)
            total += p
        return total

    def to_dict(self) -> dict:
        return {
            "templates": [[w, t] for w, t in self.templates],
            "slots": {k: [[w, p] for w, p in v] for k, v in self.slots.items()},
            "options": {k: [[w, p] for w, p in v] for k, v in self.options.items()},
            "swap_triggers": list(self.swap_triggers),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ToyChannel":
        return cls(d["templates"], d["slots"], d["options"], d.get("swap_triggers", []))


def default_channel() -> ToyChannel:
    """13 target words, 16 source words, sentence lengths 2-4.

    No source word is an option of two target words, so IBM-1 can recover
    the channel; ``the`` has the 0.6/0.3/0.1 split.
    """
    return ToyChannel(
        templates=[(0.45, ["DET", "NOUN", "VERB"]), (0.3, ["DET", "ADJ", "NOUN", "VERB"]),
                   (0.15, ["NOUN", "VERB"]), (0.1, ["DET", "NOUN"])],
        slots={
            "DET": [("the", 0.6), ("a", 0.4)],
            "ADJ": [("big", 0.6), ("red", 0.4)],
            "NOUN": [("cat", 0.35), ("dog", 0.3), ("house", 0.2), ("bird", 0.15)],
            "VERB": [("runs", 0.4), ("sleeps", 0.35), ("sings", 0.25)],
        },
        options={
            "the": [("der", 0.6), ("die", 0.3), ("das", 0.1)],
            "a": [("ein", 0.7), ("eine", 0.3)],
            "big": [("gross", 1.0)],
            "red": [("rot", 1.0)],
            "cat": [("katze", 0.85), ("mieze", 0.15)],
            "dog": [("hund", 1.0)],
            "house": [("haus", 1.0)],
            "bird": [("vogel", 1.0)],
            "runs": [("laeuft", 0.6), ("rennt", 0.4)],
            "sleeps": [("schlaeft", 1.0)],
            "sings": [("singt", 1.0)],
        },
        swap_triggers=["big", "red"],
    )


def tiny_channel() -> ToyChannel:
    """A 6-word task small enough for exhaustive enumeration at max-len 4."""
    return ToyChannel(
        templates=[(0.6, ["A", "B"]), (0.4, ["A", "B", "C"])],
        slots={"A": [("x", 0.7), ("y", 0.3)], "B": [("p", 0.5), ("q", 0.5)], "C": [("z", 1.0)]},
        options={
            "x": [("X1", 0.6), ("X2", 0.3), ("X3", 0.1)],
            "y": [("Y1", 1.0)],
            "p": [("P1", 0.8), ("X2", 0.2)],
            "q": [("Q1", 1.0)],
            "z": [("Z1", 0.5), ("Z2", 0.5)],
        },
    )


@dataclass
class ToyConfig:
    channel: ToyChannel = field(default_factory=default_channel)
    bilingual: int = 10_000
    mono: int = 40_000
    dev: int = 1_000
    seed: int = 0

    def to_dict(self) -> dict:
        return {"channel": self.channel.to_dict(), "bilingual": self.bilingual, "mono": self.mono,
                "dev": self.dev, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "ToyConfig":
        channel = ToyChannel.from_dict(d["channel"]) if "channel" in d else default_channel()
        return cls(channel, int(d.get("bilingual", 10_000)), int(d.get("mono", 40_000)),
                   int(d.get("dev", 1_000)), int(d.get("seed", 0)))

    @classmethod
    def load(cls, path: str | Path) -> "ToyConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class ToyTask:
    bilingual: ParallelCorpus
    mono: MonoCorpus
    heldout: ParallelCorpus  # mono targets with their true sources
    dev: ParallelCorpus
    channel: ToyChannel

    def full_bilingual(self) -> ParallelCorpus:
        return ParallelCorpus(self.bilingual.pairs + self.heldout.pairs, self.bilingual.src_vocab,
                              self.bilingual.tgt_vocab)


def sample_pairs(channel: ToyChannel, n: int, rng: np.random.Generator) -> list[tuple[list[str], list[str]]]:
    out = []
    for _ in range(n):
        e = channel.sample_target(rng)
        out.append((channel.sample_source(e, rng), e))
    return out


def make_toy_task(config: ToyConfig | None = None, seed: int | None = None) -> ToyTask:
    config = config or ToyConfig()
    if min(config.bilingual, config.mono, config.dev) < 1:
        raise ValueError("toy corpus sizes must be >= 1")
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    ch = config.channel
    sv, tv = ch.vocabularies()

    def corpus(n):
        return ParallelCorpus([(sv.encode(f), tv.encode(e)) for f, e in sample_pairs(ch, n, rng)], sv, tv)

    bilingual = corpus(config.bilingual)
    heldout = corpus(config.mono)
    dev = corpus(config.dev)
    return ToyTask(bilingual, MonoCorpus(heldout.targets, tv), heldout, dev, ch)


# -- enumeration oracles -------------------------------------------------------

@dataclass
class EnumeratedDistribution:
    probs: dict[Sentence, float]
    logprobs: dict[Sentence, float]  # model log p of each entry
    coverage: float
    argmax: Sentence | None  # best length-normalized model score

    def tv_distance(self, counts: dict[Sentence, int], total: int) -> float:
        """Total variation against empirical counts; leftover mass is one extra outcome."""
        keys = set(self.probs) | set(counts)
        tv = sum(abs(self.probs.get(k, 0.0) - counts.get(k, 0) / total) for k in keys)
        rest_emp = 1.0 - sum(counts.get(k, 0) for k in keys) / total
        tv += abs((1.0 - self.coverage) - rest_emp)
        return 0.5 * tv


def _check_guard(model: SeqModel, max_len: int) -> None:
    if model.arch.tgt_vocab_size ** max_len > ENUMERATION_LIMIT:
        raise EnumerationError(f"|V|^max-len = {model.arch.tgt_vocab_size}^{max_len} exceeds {ENUMERATION_LIMIT}")


def _enumerate(model: SeqModel, source: Sentence, max_len: int, spec: GeneratorSpec | None) -> EnumeratedDistribution:
    _check_guard(model, max_len)
    stepper = _Stepper(model, [tuple(source)])
    prefixes: list[tuple[tuple[int, ...], float, float]] = [((), 0.0, 0.0)]  # ids, log p, log q
    probs: dict[Sentence, float] = {}
    logps: dict[Sentence, float] = {}
    for t in range(max_len + 1):
        lp = stepper.next_logprobs()
        p = np.exp(lp)
        q = p if spec is None else strategy_step_dist(p, spec)
        rows, toks, nxt = [], [], []
        for r, (ids, lpp, lqq) in enumerate(prefixes):
            if q[r, EOS_ID] > 0:
                probs[ids] = math.exp(lqq + math.log(q[r, EOS_ID]))
                logps[ids] = lpp + lp[r, EOS_ID]
            if t == max_len:
                continue
            for tok in np.nonzero(q[r] > 0)[0]:
                tok = int(tok)
                if tok == EOS_ID:
                    continue
                nxt.append((ids + (tok,), lpp + lp[r, tok], lqq + math.log(q[r, tok])))
                rows.append(r)
                toks.append(tok)
        if not nxt:
            break
        prefixes = nxt
        stepper.advance(np.array(toks), np.array(rows))
    best = min(logps, key=lambda k: (-logps[k] / (len(k) + 1), k)) if logps else None
    return EnumeratedDistribution(probs, logps, float(sum(probs.values())), best)


def enumerate_model_distribution(model: SeqModel, source: Sentence, max_len: int) -> EnumeratedDistribution:
    """Exact generation-time p(f | e) of every output with at most ``max_len`` tokens."""
    return _enumerate(model, source, max_len, None)


def strategy_exact_distribution(model: SeqModel, source: Sentence, spec: GeneratorSpec,
                                max_len: int | None = None) -> EnumeratedDistribution:
    """Exact sentence-level distribution induced by ``spec``."""
    source = tuple(source)
    cap = spec.max_len(len(source)) if max_len is None else max_len
    _check_guard(model, cap)
    s = spec.strategy
    if s in ("beam", "greedy"):
        if s == "beam":
            hyp = beam_search(model, source, spec.beam_size, cap)[0]
        else:
            hyp = generate(model, source, GeneratorSpec("greedy", max_len_a=0.0, max_len_b=cap))
        return _point_mass(hyp)
    if s == "nbest":
        hyps = beam_search(model, source, spec.nbest_n, cap)
        probs = nbest_selection_probs(hyps)
        return EnumeratedDistribution({h.ids: float(p) for h, p in zip(hyps, probs)},
                                      {h.ids: h.logprob for h in hyps}, float(probs.sum()), hyps[0].ids)
    if s in ("sample", "topk", "restricted"):
        return _enumerate(model, source, cap, spec)
    raise SpecError(f"no exact distribution for strategy {s}")


def _point_mass(hyp: Hypothesis) -> EnumeratedDistribution:
    if not hyp.finished:
        return EnumeratedDistribution({}, {}, 0.0, None)
    return EnumeratedDistribution({hyp.ids: 1.0}, {hyp.ids: hyp.logprob}, 1.0, hyp.ids)
