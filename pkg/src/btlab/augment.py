"""Pseudo-parallel corpora from monolingual targets, and the controlled scenario.

A pseudo corpus aligns every monolingual target sentence with N generated
sources.  In training each of those N pairs carries weight 1/N; the 1/I_s
factor is the trainer's per-sentence token normalization.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .analysis import corpus_perplexity
from .corpus import MonoCorpus, ParallelCorpus, Sentence, Vocabulary, load_mono, target_unigram
from .decode import GeneratorSpec, generate_corpus
from .ibm1 import train_ibm1, translation_entropy
from .seqmodel import SeqModel
from .trainer import TrainConfig, TrainLog, WeightedPair, evaluate, train

log = logging.getLogger(__name__)

PSEUDO_FORMAT = "btlab-pseudo/1"


class AugmentError(ValueError):
    pass


@dataclass
class PseudoCorpus:
    targets: list[Sentence]
    sources: list[list[Sentence]]
    truncated: list[list[bool]]
    spec: GeneratorSpec
    seed: int
    generator_hash: str
    src_vocab: Vocabulary
    tgt_vocab: Vocabulary

    def __post_init__(self) -> None:
        if not self.sources or any(not s for s in self.sources):
            raise AugmentError("every entry needs at least one source")
        if len({len(s) for s in self.sources}) != 1:
            raise AugmentError("every entry must have the same number of sources")

    @property
    def n(self) -> int:
        return len(self.sources[0])

    def __len__(self) -> int:
        return len(self.targets)

    def pairs(self, drop_truncated: bool = False) -> list[tuple[Sentence, Sentence]]:
        return [(src, tgt) for tgt, srcs, flags in zip(self.targets, self.sources, self.truncated)
                for src, trunc in zip(srcs, flags) if not (drop_truncated and trunc)]

    def as_parallel(self, drop_truncated: bool = False) -> ParallelCorpus:
        return ParallelCorpus(self.pairs(drop_truncated), self.src_vocab, self.tgt_vocab)

    def provenance(self) -> dict:
        return {
            "format": PSEUDO_FORMAT,
            "spec": self.spec.to_dict(),
            "n": self.n,
            "seed": self.seed,
            "generator_hash": self.generator_hash,
            "src_vocab_hash": self.src_vocab.hash(),
            "tgt_vocab_hash": self.tgt_vocab.hash(),
            "truncated": [[i, j] for i, flags in enumerate(self.truncated) for j, t in enumerate(flags) if t],
        }

    def save(self, prefix: str | Path) -> list[Path]:
        """Write ``prefix.tgt``, ``prefix.src.1`` .. ``prefix.src.N`` and ``prefix.json``."""
        prefix = str(prefix)
        paths = [Path(f"{prefix}.tgt")]
        MonoCorpus(self.targets, self.tgt_vocab).save(paths[0])
        for j in range(self.n):
            p = Path(f"{prefix}.src.{j + 1}")
            MonoCorpus([srcs[j] for srcs in self.sources], self.src_vocab).save(p)
            paths.append(p)
        meta = Path(f"{prefix}.json")
        meta.write_text(json.dumps(self.provenance(), indent=2) + "\n", encoding="utf-8")
        return paths + [meta]

    @classmethod
    def load(cls, prefix: str | Path, src_vocab: Vocabulary, tgt_vocab: Vocabulary) -> "PseudoCorpus":
        prefix = str(prefix)
        meta = json.loads(Path(f"{prefix}.json").read_text(encoding="utf-8"))
        if meta.get("format") != PSEUDO_FORMAT:
            raise AugmentError(f"{prefix}.json: not a pseudo-corpus sidecar")
        if meta["src_vocab_hash"] != src_vocab.hash() or meta["tgt_vocab_hash"] != tgt_vocab.hash():
            raise AugmentError(f"{prefix}: vocabulary hash mismatch")
        targets = load_mono(f"{prefix}.tgt", tgt_vocab).sentences
        columns = [load_mono(f"{prefix}.src.{j + 1}", src_vocab).sentences for j in range(meta["n"])]
        if any(len(c) != len(targets) for c in columns):
            raise AugmentError(f"{prefix}: source files and target file differ in length")
        truncated = [[False] * meta["n"] for _ in targets]
        for i, j in meta["truncated"]:
            truncated[i][j] = True
        return cls(targets, [list(r) for r in zip(*columns)], truncated,
                   GeneratorSpec.from_dict(meta["spec"]), meta["seed"], meta["generator_hash"],
                   src_vocab, tgt_vocab)


def generate_pseudo_corpus(generator: SeqModel, mono: MonoCorpus, spec: GeneratorSpec, n: int = 1,
                           seed: int = 0, workers: int = 1, key: Sequence[int] = ()) -> PseudoCorpus:
    """Generate ``n`` sources per monolingual sentence with the target-to-source ``generator``."""
    if n < 1:
        raise AugmentError("N must be >= 1")
    if spec.deterministic and n > 1:
        raise AugmentError("deterministic strategy yields duplicate sources")
    if generator.src_vocab.hash() != mono.vocab.hash():
        raise AugmentError("generator source vocabulary differs from the monolingual vocabulary")
    hyps = generate_corpus(generator, mono.sentences, spec, seed, n=n, key=key, workers=workers)
    return PseudoCorpus(
        targets=list(mono.sentences),
        sources=[[h.ids for h in row] for row in hyps],
        truncated=[[not h.finished for h in row] for row in hyps],
        spec=spec,
        seed=seed,
        generator_hash=generator.hash(),
        src_vocab=generator.tgt_vocab,
        tgt_vocab=mono.vocab,
    )


@dataclass
class MixedTrainingSet:
    bilingual: ParallelCorpus
    pseudo: PseudoCorpus
    bilingual_weight: float = 1.0
    pseudo_weight: float = 1.0
    drop_truncated: bool = False

    def __post_init__(self) -> None:
        if self.bilingual.src_vocab != self.pseudo.src_vocab or self.bilingual.tgt_vocab != self.pseudo.tgt_vocab:
            raise AugmentError("bilingual and pseudo corpora use different vocabularies")


def build_training_view(mixed: MixedTrainingSet, mode: str = "static", epoch: int = 0, seed: int = 0,
                        generator: SeqModel | None = None, workers: int = 1) -> list[WeightedPair]:
    """Weighted ``(source, target, weight)`` triples for one epoch, shuffled by ``(seed, epoch)``.

    ``regenerate`` mode draws fresh sources every epoch from streams keyed by
    the epoch, with the pseudo corpus's own spec and seed.
    """
    if mode not in ("static", "regenerate"):
        raise AugmentError(f"unknown mode {mode!r}")
    pseudo = mixed.pseudo
    if mode == "regenerate":
        if generator is None:
            raise AugmentError("regenerate mode needs the generator model")
        pseudo = generate_pseudo_corpus(generator, MonoCorpus(pseudo.targets, pseudo.tgt_vocab), pseudo.spec,
                                        pseudo.n, pseudo.seed, workers=workers, key=(epoch + 1,))
    w = mixed.pseudo_weight / pseudo.n
    out: list[WeightedPair] = [(s, t, mixed.bilingual_weight) for s, t in mixed.bilingual.pairs]
    for tgt, srcs, flags in zip(pseudo.targets, pseudo.sources, pseudo.truncated):
        for src, trunc in zip(srcs, flags):
            if not (mixed.drop_truncated and trunc):
                out.append((src, tgt, w))
    order = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(epoch,))).permutation(len(out))
    return [out[i] for i in order]


# -- controlled scenario -------------------------------------------------------

TABLE2_STRATEGIES = ("beam", "sample", "sample-nols", "restricted:0.1", "nbest:50")


@dataclass
class ScenarioRow:
    name: str
    entropy: float
    train_ppl: float
    synthetic_ppl: float | None
    dev_ppl: float
    dev_bleu: float
    truncated_rate: float = 0.0


@dataclass
class ScenarioReport:
    rows: list[ScenarioRow]
    seed: int
    n_bilingual: int
    n_mono: int
    config: dict = field(default_factory=dict)

    def row(self, name: str) -> ScenarioRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "n_bilingual": self.n_bilingual, "n_mono": self.n_mono,
                "config": self.config, "rows": [asdict(r) for r in self.rows]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self, path: str | Path) -> None:
        """One row per scenario row; missing values are written as empty cells."""
        names = [f.name for f in fields(ScenarioRow)]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for r in self.rows:
                vals = [getattr(r, n) for n in names]
                w.writerow(["" if v is None or v != v else (v if isinstance(v, str) else repr(v)) for v in vals])

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioReport":
        return cls([ScenarioRow(**r) for r in d["rows"]], d["seed"], d["n_bilingual"], d["n_mono"],
                   d.get("config", {}))

    def to_table(self) -> str:
        head = f"{'':16s} {'Entropy':>8s} {'PPL train':>10s} {'PPL synth':>10s} {'PPL dev':>8s} {'BLEU dev':>9s} {'trunc':>6s}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            synth = "-" if r.synthetic_ppl is None else f"{r.synthetic_ppl:.3f}"
            ent = "-" if r.entropy != r.entropy else f"{r.entropy:.3f}"
            lines.append(f"{r.name:16s} {ent:>8s} {r.train_ppl:>10.3f} {synth:>10s} "
                         f"{r.dev_ppl:>8.3f} {r.dev_bleu:>9.2f} {r.truncated_rate:>6.3f}")
        return "\n".join(lines) + "\n"


def split_corpus(full: ParallelCorpus, ratio: float, seed: int) -> tuple[ParallelCorpus, ParallelCorpus]:
    """Seeded shuffle, then the first ``round(ratio * S)`` pairs stay bilingual."""
    if not 0.0 < ratio < 1.0:
        raise AugmentError("split ratio must lie in (0, 1)")
    n_bi = int(round(ratio * len(full)))
    if n_bi < 1 or n_bi >= len(full):
        raise AugmentError(f"corpus of {len(full)} pairs is too small to split at {ratio}")
    order = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,))).permutation(len(full))
    return full.subset(order[:n_bi].tolist()), full.subset(order[n_bi:].tolist())


def _strategy_spec(name: str, base: GeneratorSpec) -> tuple[GeneratorSpec, bool]:
    """Parse a row name; the second value says whether the generator is the no-LS one."""
    if name in ("sample-nols", "sample-wo-ls"):
        return GeneratorSpec.parse("sample", **_spec_overrides(base)), True
    return GeneratorSpec.parse(name, **_spec_overrides(base)), False


def _spec_overrides(base: GeneratorSpec) -> dict:
    d = base.to_dict()
    for k in ("strategy", "beam_size", "k", "tau", "nbest_n"):
        d.pop(k)
    return d


def train_generator(bilingual: ParallelCorpus, dev: ParallelCorpus, cfg: TrainConfig, arch: dict | None = None,
                    seed: int = 0, label_smoothing: float | None = None, workers: int = 1) -> SeqModel:
    """Target-to-source model on the reversed source-to-target ``bilingual`` corpus.

    Initialization and batching both follow ``seed``, so two calls that
    differ only in ``label_smoothing`` produce directly comparable models.
    """
    inv_train, inv_dev = bilingual.reversed(), dev.reversed()
    overrides = {"seed": seed} if label_smoothing is None else {"seed": seed, "label_smoothing": label_smoothing}
    cfg = TrainConfig.from_dict({**cfg.to_dict(), **overrides})
    init = SeqModel.create(inv_train.src_vocab, inv_train.tgt_vocab, seed=seed, **(arch or {}))
    model, _ = train(init, inv_train, inv_dev, cfg, workers)
    return model


def run_controlled_scenario(full: ParallelCorpus, dev: ParallelCorpus, split_ratio: float = 0.2,
                            strategies: Sequence[str] = TABLE2_STRATEGIES,
                            generator_cfg: TrainConfig | None = None, model_cfg: TrainConfig | None = None,
                            arch: dict | None = None, seed: int = 0, n: int = 1,
                            base_spec: GeneratorSpec | None = None, ibm1_iterations: int = 15,
                            baseline: bool = True, reference: bool = True, workers: int = 1,
                            artifacts: dict | None = None) -> ScenarioReport:
    """Split, back-translate, retrain, and measure every strategy.

    ``full`` and ``dev`` are source-to-target corpora.  The generator is
    trained target-to-source on the bilingual part; the no-LS generator
    (for ``sample-nols``) shares its seed with label smoothing switched off.
    Passing a dict as ``artifacts`` collects the trained models and corpora.
    """
    generator_cfg = generator_cfg or TrainConfig()
    model_cfg = model_cfg or TrainConfig()
    arch = arch or {}
    base_spec = base_spec or GeneratorSpec()
    bilingual, heldout = split_corpus(full, split_ratio, seed)
    mono = MonoCorpus(heldout.targets, full.tgt_vocab)

    generators: dict[bool, SeqModel] = {}

    def generator(no_ls: bool) -> SeqModel:
        if no_ls not in generators:
            log.info("training %s generator", "no-LS" if no_ls else "LS")
            generators[no_ls] = train_generator(bilingual, dev, generator_cfg, arch, seed,
                                                label_smoothing=0.0 if no_ls else None, workers=workers)
        return generators[no_ls]

    fwd_cfg = TrainConfig.from_dict({**model_cfg.to_dict(), "seed": seed})

    def fit(data) -> tuple[SeqModel, TrainLog]:
        init = SeqModel.create(full.src_vocab, full.tgt_vocab, seed=seed + 1, **arch)
        return train(init, data, dev, fwd_cfg, workers)

    def measure(name: str, synthetic: ParallelCorpus | None, data, trunc_rate: float = 0.0) -> ScenarioRow:
        model, _ = fit(data)
        train_pairs = bilingual.pairs + (synthetic.pairs if synthetic is not None else [])
        ppl_dev, bleu_dev = evaluate(model, dev, workers)
        if synthetic is not None:
            table, _ = train_ibm1(synthetic.reversed(), ibm1_iterations)
            ent = float(translation_entropy(table, target_unigram(synthetic)))
            synth_ppl = corpus_perplexity(model, synthetic)
        else:
            ent, synth_ppl = float("nan"), None
        row = ScenarioRow(name, ent, corpus_perplexity(model, train_pairs), synth_ppl, ppl_dev, bleu_dev, trunc_rate)
        log.info("row %s: %s", name, row)
        if artifacts is not None:
            artifacts.setdefault("models", {})[name] = model
            if synthetic is not None:
                artifacts.setdefault("corpora", {})[name] = synthetic
        return row

    rows = []
    if baseline:
        rows.append(measure("baseline", None, bilingual))
    for name in strategies:
        spec, no_ls = _strategy_spec(name, base_spec)
        pseudo = generate_pseudo_corpus(generator(no_ls), mono, spec, n=n if not spec.deterministic else 1,
                                        seed=seed, workers=workers)
        synthetic = pseudo.as_parallel()
        trunc = float(np.mean([t for row in pseudo.truncated for t in row]))
        mixed = MixedTrainingSet(bilingual, pseudo)
        rows.append(measure(name, synthetic, lambda ep, m=mixed: build_training_view(m, "static", ep, seed), trunc))
    if reference:
        rows.append(measure("reference", heldout, ParallelCorpus(bilingual.pairs + heldout.pairs,
                                                                 full.src_vocab, full.tgt_vocab)))
    if artifacts is not None:
        artifacts["generators"] = generators
        artifacts["bilingual"] = bilingual
        artifacts["heldout"] = heldout
    config = {"split_ratio": split_ratio, "strategies": list(strategies), "n": n,
              "generator_cfg": generator_cfg.to_dict(), "model_cfg": model_cfg.to_dict(),
              "arch": arch, "base_spec": base_spec.to_dict(), "ibm1_iterations": ibm1_iterations}
    return ScenarioReport(rows, seed, len(bilingual), len(heldout), config)
