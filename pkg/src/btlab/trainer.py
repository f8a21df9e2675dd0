"""Mini-batch Adam training with dev-set checkpoints.

At each checkpoint the dev perplexity and greedy-decoding BLEU are recorded.
The learning rate is multiplied by ``decay_factor`` once ``plateau_patience``
consecutive checkpoints fail to improve dev perplexity, and the returned
parameters are those of the best dev-BLEU checkpoint (lower dev perplexity
breaks ties).  ``select="ppl"`` picks the lowest dev perplexity instead.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterator, Sequence, Union

import numpy as np
import torch

from .analysis import corpus_bleu, corpus_perplexity
from .corpus import ParallelCorpus, Sentence
from .decode import GeneratorSpec, generate_corpus
from .seqmodel import SeqModel, loss_tensor

log = logging.getLogger(__name__)

WeightedPair = tuple[Sentence, Sentence, float]
TrainData = Union[ParallelCorpus, Sequence[WeightedPair], Callable[[int], Sequence[WeightedPair]]]


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    label_smoothing: float = 0.1
    learning_rate: float = 3e-4
    decay_factor: float = 0.7
    plateau_patience: int = 3
    checkpoint_interval: int = 500
    batch_size: int = 4096  # target tokens, EOS included
    max_updates: int = 20_000
    stop_patience: int = 0  # checkpoints without a new best before stopping; 0 = never
    select: str = "bleu"  # best checkpoint by dev "bleu" (ties: lower PPL) or by dev "ppl"
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError("label smoothing must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 < self.decay_factor <= 1.0:
            raise ValueError("decay factor must lie in (0, 1]")
        if self.checkpoint_interval < 1 or self.batch_size < 1 or self.max_updates < 1:
            raise ValueError("checkpoint interval, batch size and max updates must be >= 1")
        if self.select not in ("bleu", "ppl"):
            raise ValueError(f"select must be 'bleu' or 'ppl', got {self.select!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass
class CheckpointRecord:
    update: int
    epoch: int
    train_loss: float
    dev_ppl: float
    dev_bleu: float
    learning_rate: float


@dataclass
class TrainLog:
    records: list[CheckpointRecord] = field(default_factory=list)
    best_update: int | None = None

    def append(self, rec: CheckpointRecord) -> None:
        if self.records and rec.update <= self.records[-1].update:
            raise ValueError("checkpoint updates must be strictly increasing")
        self.records.append(rec)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r)) + "\n" for r in self.records)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TrainLog":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls([CheckpointRecord(**json.loads(l)) for l in lines if l.strip()])


class PlateauSchedule:
    """Multiply the rate by ``factor`` after ``patience`` consecutive non-improving checkpoints."""

    def __init__(self, lr: float, factor: float = 0.7, patience: int = 3):
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.best = math.inf
        self.bad = 0

    def step(self, dev_ppl: float) -> float:
        if dev_ppl < self.best:
            self.best = dev_ppl
            self.bad = 0
        else:
            self.bad += 1
            if self.bad >= self.patience:
                self.lr *= self.factor
                self.bad = 0
        return self.lr


def _epoch_pairs(data: TrainData, epoch: int) -> list[WeightedPair]:
    if isinstance(data, ParallelCorpus):
        return [(s, t, 1.0) for s, t in data.pairs]
    if callable(data):
        return list(data(epoch))
    return list(data)


def _batches(pairs: list[WeightedPair], tokens: int, rng: np.random.Generator) -> Iterator[list[WeightedPair]]:
    order = rng.permutation(len(pairs))
    batch: list[WeightedPair] = []
    n_tok = 0
    for i in order:
        batch.append(pairs[i])
        n_tok += len(pairs[i][1]) + 1
        if n_tok >= tokens:
            yield batch
            batch, n_tok = [], 0
    if batch:
        yield batch


def evaluate(model: SeqModel, dev: ParallelCorpus, workers: int = 1) -> tuple[float, float]:
    """Dev perplexity and greedy-decoding BLEU."""
    ppl = corpus_perplexity(model, dev)
    hyps = generate_corpus(model, dev.sources, GeneratorSpec("greedy"), seed=0, workers=workers)
    bleu = corpus_bleu([h[0].ids for h in hyps], dev.targets).score
    return ppl, bleu


def train(model: SeqModel, data: TrainData, dev: ParallelCorpus, cfg: TrainConfig,
          workers: int = 1) -> tuple[SeqModel, TrainLog]:
    """Train a copy of ``model``; returns the best dev-BLEU checkpoint and the log.

    ``data`` is a corpus, a list of ``(source, target, weight)`` triples, or a
    callable mapping the epoch number to such a list.
    """
    if len(dev) == 0:
        raise ValueError("empty dev corpus")
    model = model.copy()
    net = model.net
    opt = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate)
    sched = PlateauSchedule(cfg.learning_rate, cfg.decay_factor, cfg.plateau_patience)
    trainlog = TrainLog()
    best_key, best_params, since_best = None, model.get_params(), 0
    update, epoch = 0, 0
    run_loss, run_n = 0.0, 0

    def checkpoint() -> bool:
        nonlocal best_key, best_params, since_best, run_loss, run_n
        ppl, bleu = evaluate(model, dev, workers)
        lr = sched.step(ppl)
        for g in opt.param_groups:
            g["lr"] = lr
        rec = CheckpointRecord(update, epoch, run_loss / max(run_n, 1), ppl, bleu, lr)
        trainlog.append(rec)
        log.info("update %d epoch %d loss %.4f dev-ppl %.4f dev-bleu %.2f lr %.3g",
                 update, epoch, rec.train_loss, ppl, bleu, lr)
        run_loss, run_n = 0.0, 0
        key = (bleu, -ppl) if cfg.select == "bleu" else (-ppl, bleu)
        if best_key is None or key > best_key:
            best_key, best_params, since_best = key, model.get_params(), 0
            trainlog.best_update = update
        else:
            since_best += 1
        return cfg.stop_patience > 0 and since_best >= cfg.stop_patience

    stop = False
    while not stop and update < cfg.max_updates:
        pairs = _epoch_pairs(data, epoch)
        if not pairs:
            raise ValueError("empty training data")
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(epoch,)))
        for batch in _batches(pairs, cfg.batch_size, rng):
            opt.zero_grad(set_to_none=True)
            loss = loss_tensor(model, [(s, t) for s, t, _ in batch], cfg.label_smoothing,
                               weights=[w for _, _, w in batch])
            value = float(loss.detach())
            if not math.isfinite(value):
                raise TrainingDiverged(f"non-finite loss {value} at update {update + 1} (epoch {epoch})")
            loss.backward()
            opt.step()
            update += 1
            run_loss += value
            run_n += 1
            if update % cfg.checkpoint_interval == 0 or update == cfg.max_updates:
                if checkpoint():
                    stop = True
                    break
            if update >= cfg.max_updates:
                break
        epoch += 1
    if run_n:
        checkpoint()
    model.set_params(best_params)
    return model, trainlog
