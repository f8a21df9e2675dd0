"""Generation procedures over a model's step distributions.

Every strategy sees the same masked step distribution: PAD, BOS and UNK get
probability zero, and EOS is disallowed at the first position so that every
output is a non-empty sentence.  The strategy then transforms that
distribution (or searches over it).

Randomness contract: a sampled sentence consumes one uniform per decoding
step from its own stream, in order, and N-best sampling consumes a single
uniform.  Corpus-level generation derives the stream of row ``(i, n)`` from
``(seed, *key, i, n)``, so outputs do not depend on worker count.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np
import torch

from .corpus import BOS_ID, EOS_ID, PAD_ID, UNK_ID, Sentence
from .seqmodel import SeqModel

log = logging.getLogger(__name__)

STRATEGIES = ("greedy", "beam", "sample", "topk", "restricted", "nbest")
_ALIASES = {
    "top-k-sample": "topk",
    "top-k": "topk",
    "restricted-sample": "restricted",
    "nbest-sample": "nbest",
}
RENORM_MODES = ("l1", "softmax-over-probs")
BANNED = (PAD_ID, BOS_ID, UNK_ID)
CHUNK_ROWS = 256


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorSpec:
    strategy: str = "beam"
    beam_size: int = 5
    k: int = 10
    tau: float = 0.1
    nbest_n: int = 50
    renorm_mode: str = "l1"
    max_len_a: float = 1.5
    max_len_b: float = 5.0
    temperature: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        strategy = _ALIASES.get(self.strategy, self.strategy)
        object.__setattr__(self, "strategy", strategy)
        if strategy not in STRATEGIES:
            raise SpecError(f"unknown strategy {self.strategy!r}; expected one of {', '.join(STRATEGIES)}")
        if not 0.0 <= self.tau < 0.5:
            raise SpecError(f"tau must lie in [0, 0.5), got {self.tau}; use greedy for the tau >= 0.5 limit")
        if self.beam_size < 1 or self.k < 1 or self.nbest_n < 1:
            raise SpecError("beam-size, k and nbest-N must be >= 1")
        if self.renorm_mode not in RENORM_MODES:
            raise SpecError(f"unknown renorm-mode {self.renorm_mode!r}")
        if self.temperature <= 0:
            raise SpecError("temperature must be positive")
        if self.max_len(1) < 1:
            raise SpecError("max-len cap must be >= 1")

    @property
    def deterministic(self) -> bool:
        return self.strategy in ("greedy", "beam")

    def max_len(self, input_len: int) -> int:
        return int(math.ceil(self.max_len_a * input_len + self.max_len_b - 1e-12))

    @property
    def label(self) -> str:
        s = self.strategy
        if s == "beam":
            return f"beam:{self.beam_size}"
        if s == "topk":
            return f"topk:{self.k}"
        if s == "restricted":
            return f"restricted:{self.tau:g}"
        if s == "nbest":
            return f"nbest:{self.nbest_n}"
        return s

    @classmethod
    def parse(cls, text: str, **overrides) -> "GeneratorSpec":
        """Parse ``beam[:size]``, ``sample``, ``topk:k``, ``restricted:tau``, ``nbest:N`` or ``greedy``."""
        name, _, arg = text.strip().partition(":")
        name = _ALIASES.get(name, name)
        kw = dict(overrides)
        try:
            if name == "beam" and arg:
                kw["beam_size"] = int(arg)
            elif name == "topk":
                kw["k"] = int(arg)
            elif name == "restricted":
                kw["tau"] = float(arg)
            elif name == "nbest":
                kw["nbest_n"] = int(arg)
            elif arg:
                raise SpecError(f"strategy {name!r} takes no argument")
        except ValueError as exc:
            if isinstance(exc, SpecError):
                raise
            raise SpecError(f"bad strategy argument in {text!r}") from None
        if name in ("topk", "restricted", "nbest") and not arg:
            raise SpecError(f"strategy {name!r} needs an argument, e.g. {name}:<value>")
        return cls(strategy=name, **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorSpec":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise SpecError(f"unknown GeneratorSpec fields: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class Hypothesis:
    ids: Sentence
    logprob: float
    finished: bool = True
    truncated: bool = False

    @property
    def score(self) -> float:
        return self.logprob / (len(self.ids) + 1)


# -- per-step transforms -------------------------------------------------

def step_filter_renormalize(dist: np.ndarray, tau: float, mode: str = "l1") -> np.ndarray:
    """Keep tokens with probability >= tau and renormalize them.

    Zero-probability tokens are never kept.  When nothing reaches ``tau`` the
    result is one-hot on the argmax (lowest id on ties).  Works row-wise on
    2-D input.
    """
    if not 0.0 <= tau < 0.5:
        raise SpecError(f"tau must lie in [0, 0.5), got {tau}")
    if mode not in RENORM_MODES:
        raise SpecError(f"unknown renorm-mode {mode!r}")
    p = np.atleast_2d(np.asarray(dist, dtype=np.float64))
    keep = (p >= tau) & (p > 0)
    if mode == "l1":
        q = np.where(keep, p, 0.0)
    else:
        q = np.where(keep, np.exp(np.where(keep, p, 0.0)), 0.0)
    total = q.sum(axis=1, keepdims=True)
    empty = total[:, 0] <= 0
    if empty.any():
        q[empty] = 0.0
        q[empty, np.argmax(p[empty], axis=1)] = 1.0
        total[empty] = 1.0
    q = q / total
    return q[0] if np.ndim(dist) == 1 else q


def topk_renormalize(dist: np.ndarray, k: int) -> np.ndarray:
    p = np.atleast_2d(np.asarray(dist, dtype=np.float64))
    order = np.argsort(-p, axis=1, kind="stable")
    keep = np.zeros_like(p, dtype=bool)
    np.put_along_axis(keep, order[:, :k], True, axis=1)
    q = np.where(keep, p, 0.0)
    q = q / q.sum(axis=1, keepdims=True)
    return q[0] if np.ndim(dist) == 1 else q


def apply_temperature(dist: np.ndarray, temperature: float) -> np.ndarray:
    if temperature == 1.0:
        return dist
    p = np.atleast_2d(np.asarray(dist, dtype=np.float64))
    q = np.where(p > 0, p, 0.0) ** (1.0 / temperature)
    q = q / q.sum(axis=1, keepdims=True)
    return q[0] if np.ndim(dist) == 1 else q


def strategy_step_dist(dist: np.ndarray, spec: GeneratorSpec) -> np.ndarray:
    """Per-step selection distribution q for the step-wise strategies."""
    s = spec.strategy
    if s == "sample":
        return apply_temperature(dist, spec.temperature)
    if s == "topk":
        return topk_renormalize(dist, spec.k)
    if s == "restricted":
        return step_filter_renormalize(dist, spec.tau, spec.renorm_mode)
    if s == "greedy":
        p = np.atleast_2d(dist)
        q = np.zeros_like(p)
        q[np.arange(len(p)), np.argmax(p, axis=1)] = 1.0
        return q[0] if np.ndim(dist) == 1 else q
    raise SpecError(f"{s} is not a step-wise strategy")


def inverse_cdf(dists: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise categorical draw from uniforms in [0, 1) over ascending ids."""
    cdf = np.cumsum(dists, axis=1)
    thresh = u * cdf[:, -1]
    idx = (cdf <= thresh[:, None]).sum(axis=1)
    last_nonzero = dists.shape[1] - 1 - np.argmax(dists[:, ::-1] > 0, axis=1)
    return np.minimum(idx, last_nonzero)


def sample_step(dist: np.ndarray, rng: np.random.Generator) -> int:
    return int(inverse_cdf(np.asarray(dist, dtype=np.float64)[None, :], np.array([rng.random()]))[0])


def nbest_selection_probs(hyps: Sequence[Hypothesis]) -> np.ndarray:
    if not hyps:
        raise SpecError("empty hypothesis list")
    s = np.array([h.score for h in hyps], dtype=np.float64)
    e = np.exp(s - s.max())
    return e / e.sum()


# -- model access ----------------------------------------------------------

def mask_logprobs(logp: torch.Tensor, first: bool) -> np.ndarray:
    """Generation-time log-distribution: banned tokens removed, renormalized."""
    lp = logp.detach().clone()
    lp[:, list(BANNED)] = float("-inf")
    if first:
        lp[:, EOS_ID] = float("-inf")
    lp = lp - torch.logsumexp(lp, dim=1, keepdim=True)
    return lp.numpy()


class _Stepper:
    """Incremental decoder over a fixed batch of rows."""

    def __init__(self, model: SeqModel, sources: Sequence[Sentence]):
        self.model = model
        self.enc = model.encode(sources)
        self.dec = model.start(self.enc)
        self.prev = torch.full((len(sources),), BOS_ID, dtype=torch.long)
        self.t = 0

    def next_logprobs(self) -> np.ndarray:
        with torch.no_grad():
            logp, self._pending = self.model.step(self.enc, self.dec, self.prev)
        return mask_logprobs(logp, self.t == 0)

    def advance(self, tokens: np.ndarray, rows: np.ndarray | None = None) -> None:
        """Feed ``tokens``; ``rows`` reorders/selects the batch first (beam search)."""
        dec = self._pending
        if rows is not None:
            idx = torch.as_tensor(rows, dtype=torch.long)
            dec = dec.select(idx)
            self.enc = self.enc.select(idx)
        self.dec = dec
        self.prev = torch.as_tensor(np.asarray(tokens), dtype=torch.long)
        self.t += 1


# -- step-wise strategies ---------------------------------------------------

def _stepwise(model: SeqModel, sources: Sequence[Sentence], spec: GeneratorSpec,
              uniforms: np.ndarray | None) -> list[Hypothesis]:
    B = len(sources)
    caps = np.array([spec.max_len(len(s)) for s in sources])
    stepper = _Stepper(model, sources)
    out: list[list[int]] = [[] for _ in range(B)]
    logprob = np.zeros(B)
    done = np.zeros(B, dtype=bool)
    finished = np.zeros(B, dtype=bool)
    rows = np.arange(B)
    t = 0
    while not done.all():
        lp = stepper.next_logprobs()
        p = np.exp(lp)
        if spec.strategy == "greedy":
            tok = np.argmax(p, axis=1)
        else:
            tok = inverse_cdf(strategy_step_dist(p, spec), uniforms[:, t])
        for b in rows[~done]:
            tb = int(tok[b])
            if tb == EOS_ID:
                logprob[b] += lp[b, tb]
                done[b] = finished[b] = True
            elif t == caps[b]:
                done[b] = True
            else:
                logprob[b] += lp[b, tb]
                out[b].append(tb)
        stepper.advance(tok)
        t += 1
    return [Hypothesis(tuple(out[b]), float(logprob[b]), bool(finished[b]), not finished[b]) for b in range(B)]


# -- beam search -----------------------------------------------------------

def beam_search(model: SeqModel, source: Sentence, beam_size: int, max_len: int | None = None) -> list[Hypothesis]:
    """Finished hypotheses ranked by length-normalized score (best first).

    Finished hypotheses keep their beam slot, so at most ``beam_size`` are
    returned.  Candidate ties go to the earlier beam entry, then the lower
    token id.
    """
    if beam_size < 1:
        raise SpecError("beam-size must be >= 1")
    cap = GeneratorSpec().max_len(len(source)) if max_len is None else max_len
    if cap < 1:
        raise SpecError("max-len must be >= 1")
    stepper = _Stepper(model, [tuple(source)])
    alive: list[tuple[tuple[int, ...], float]] = [((), 0.0)]
    finished: list[Hypothesis] = []
    for t in range(cap + 1):
        lp = stepper.next_logprobs()
        cand = np.array([s for _, s in alive])[:, None] + lp
        if t == cap:
            eos_only = np.full_like(cand, -np.inf)
            eos_only[:, EOS_ID] = cand[:, EOS_ID]
            cand = eos_only
        flat = cand.ravel()
        order = np.argsort(-flat, kind="stable")
        slots = beam_size - len(finished)
        new_alive, rows, toks = [], [], []
        for pos in order[:slots]:
            score = flat[pos]
            if not np.isfinite(score):
                break
            r, tok = divmod(int(pos), cand.shape[1])
            ids = alive[r][0]
            if tok == EOS_ID:
                finished.append(Hypothesis(ids, float(score)))
            else:
                new_alive.append((ids + (tok,), float(score)))
                rows.append(r)
                toks.append(tok)
        if not new_alive:
            break
        alive = new_alive
        stepper.advance(np.array(toks), np.array(rows))
    if not finished:
        best = max(alive, key=lambda a: a[1] / (len(a[0]) + 1))
        return [Hypothesis(best[0], best[1], finished=False, truncated=True)]
    finished.sort(key=lambda h: (-h.score, h.ids))
    return finished


# -- dispatch ----------------------------------------------------------------

def _draws_needed(spec: GeneratorSpec, source: Sentence) -> int:
    if spec.strategy == "nbest":
        return 1
    if spec.deterministic:
        return 0
    return spec.max_len(len(source)) + 1


def _select_nbest(hyps: list[Hypothesis], u: float, n: int) -> Hypothesis:
    if len(hyps) < n:
        log.debug("n-best shortfall: requested %d, found %d", n, len(hyps))
    probs = nbest_selection_probs(hyps)
    return hyps[int(inverse_cdf(probs[None, :], np.array([u]))[0])]


def generate(model: SeqModel, source: Sentence, spec: GeneratorSpec,
             rng: np.random.Generator | None = None) -> Hypothesis:
    """Draw one output for ``source`` under ``spec``."""
    source = tuple(source)
    if spec.strategy == "beam":
        return beam_search(model, source, spec.beam_size, spec.max_len(len(source)))[0]
    if spec.strategy == "greedy":
        return _stepwise(model, [source], spec, None)[0]
    if rng is None:
        raise SpecError(f"strategy {spec.strategy} needs a random generator")
    if spec.strategy == "nbest":
        hyps = beam_search(model, source, spec.nbest_n, spec.max_len(len(source)))
        return _select_nbest(hyps, rng.random(), spec.nbest_n)
    u = rng.random(_draws_needed(spec, source))
    return _stepwise(model, [source], spec, u[None, :])[0]


def row_stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def generate_corpus(model: SeqModel, sources: Sequence[Sentence], spec: GeneratorSpec, seed: int,
                    n: int = 1, key: Sequence[int] = (), workers: int = 1) -> list[list[Hypothesis]]:
    """``n`` outputs per source; row ``(i, j)`` uses stream ``(seed, *key, i, j)``.

    Step-wise strategies run batched in fixed chunks of rows; beam and n-best
    lists are computed once per distinct source.
    """
    sources = [tuple(s) for s in sources]
    rows = [(i, j) for i in range(len(sources)) for j in range(n)]
    results: dict[tuple[int, int], Hypothesis] = {}

    if spec.strategy in ("beam", "nbest"):
        size = spec.beam_size if spec.strategy == "beam" else spec.nbest_n
        distinct = sorted(set(sources))

        def search(src):
            return src, beam_search(model, src, size, spec.max_len(len(src)))

        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            lists = dict(pool.map(search, distinct))
        for i, j in rows:
            hyps = lists[sources[i]]
            if spec.strategy == "beam":
                results[i, j] = hyps[0]
            else:
                u = row_stream(seed, *key, i, j).random()
                results[i, j] = _select_nbest(hyps, u, spec.nbest_n)
    else:
        chunks = [rows[c: c + CHUNK_ROWS] for c in range(0, len(rows), CHUNK_ROWS)]

        def run(chunk):
            srcs = [sources[i] for i, _ in chunk]
            u = None
            if spec.strategy != "greedy":
                width = max(_draws_needed(spec, s) for s in srcs)
                u = np.zeros((len(chunk), width))
                for r, (i, j) in enumerate(chunk):
                    d = _draws_needed(spec, sources[i])
                    u[r, :d] = row_stream(seed, *key, i, j).random(d)
            return chunk, _stepwise(model, srcs, spec, u)

        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            for chunk, hyps in pool.map(run, chunks):
                results.update(zip(chunk, hyps))
    return [[results[i, j] for j in range(n)] for i in range(len(sources))]
