"""Command-line entry point: ``btlab <command> [flags]``.

Every command writes its artifacts plus a JSON run manifest recording the
argument vector, resolved configuration and SHA-256 checksums of inputs and
outputs.  ``btlab rerun MANIFEST`` replays a run and verifies the outputs.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path
from typing import Callable, Sequence

import torch

from . import __version__
from .analysis import corpus_bleu, corpus_perplexity, cumulative_mass_curve
from .augment import (TABLE2_STRATEGIES, MixedTrainingSet, PseudoCorpus, build_training_view,
                      generate_pseudo_corpus, run_controlled_scenario)
from .corpus import (CorpusError, MonoCorpus, ParallelCorpus, Vocabulary, build_vocabulary, load_mono,
                     load_parallel, read_lines, target_unigram, write_lines)
from .decode import _ALIASES, GeneratorSpec, SpecError, generate_corpus
from .ibm1 import save_table, train_ibm1, translation_entropy
from .seqmodel import ModelError, SeqModel
from .toyharness import ToyConfig, make_toy_task
from .trainer import TrainConfig, TrainingDiverged, train

log = logging.getLogger("btlab")

MANIFEST_FORMAT = "btlab-manifest/1"
DEFAULT_NS = (1, 2, 5, 10, 20, 50, 100)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class Run:
    """Collects inputs and outputs of one command for the manifest."""

    def __init__(self, args: argparse.Namespace, argv: Sequence[str]):
        self.args = args
        self.argv = list(argv)
        self.inputs: list[Path] = []
        self.outputs: list[Path] = []
        self.extra: dict = {}

    def input(self, path: str | Path | None) -> Path | None:
        if path is None:
            return None
        p = Path(path)
        if not p.is_file():
            raise UsageError(f"input file not found: {p}")
        self.inputs.append(p)
        return p

    def output(self, path: str | Path) -> Path:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(p)
        return p

    def manifest(self) -> dict:
        config = {k: v for k, v in vars(self.args).items() if k not in ("func", "manifest")}
        return {
            "format": MANIFEST_FORMAT,
            "version": __version__,
            "command": self.args.command,
            "argv": self.argv,
            "cwd": os.getcwd(),
            "seed": getattr(self.args, "seed", None),
            "config": config,
            "inputs": {str(p): sha256(p) for p in self.inputs},
            "outputs": {str(p): sha256(p) for p in self.outputs},
            **self.extra,
        }


# -- shared flag groups ----------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="single source of all randomness")
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads (default: $BTLAB_WORKERS or 1); never changes outputs")
    p.add_argument("--manifest", default=None, help="run-manifest path (default: next to the main output)")
    p.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])


_SPEC_ARG_FIELDS = {"beam_size": "beam", "k": "topk", "tau": "restricted", "nbest_n": "nbest"}


def _add_spec(p: argparse.ArgumentParser, default: str = "beam") -> None:
    g = p.add_argument_group("generation")
    g.add_argument("--strategy", default=default,
                   help="beam[:size], sample, topk:k, restricted:tau, nbest:N or greedy")
    g.add_argument("--beam-size", type=int, default=None)
    g.add_argument("--k", type=int, default=None)
    g.add_argument("--tau", type=float, default=None)
    g.add_argument("--nbest-n", type=int, default=None)
    g.add_argument("--renorm-mode", default=None, choices=["l1", "softmax-over-probs"])
    g.add_argument("--max-len-a", type=float, default=None)
    g.add_argument("--max-len-b", type=float, default=None)
    g.add_argument("--temperature", type=float, default=None)


def _spec_from_args(args: argparse.Namespace) -> GeneratorSpec:
    name, _, inline = args.strategy.partition(":")
    name = _ALIASES.get(name, name)
    kw = {}
    for fname, owner in _SPEC_ARG_FIELDS.items():
        value = getattr(args, fname)
        if value is None:
            continue
        if owner != name:
            raise UsageError(f"--{fname.replace('_', '-')} does not apply to --strategy {name}")
        if inline:
            raise UsageError(f"give the {name} parameter either inline ({args.strategy}) or as a flag, not both")
        kw[fname] = value
    for fname in ("renorm_mode", "max_len_a", "max_len_b", "temperature"):
        if getattr(args, fname) is not None:
            kw[fname] = getattr(args, fname)
    if kw.get("renorm_mode") and name != "restricted":
        raise UsageError("--renorm-mode only applies to --strategy restricted")
    kw["seed"] = args.seed
    try:
        if inline or name not in ("topk", "restricted", "nbest") or not any(f in kw for f in _SPEC_ARG_FIELDS):
            return GeneratorSpec.parse(args.strategy, **kw)
        return GeneratorSpec(strategy=name, **kw)
    except SpecError as exc:
        raise UsageError(str(exc)) from None


def _add_train(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("training")
    for f in fields(TrainConfig):
        if f.name == "seed":
            continue
        g.add_argument("--" + f.name.replace("_", "-"), type=type(f.default), default=None)
    g.add_argument("--emb-dim", type=int, default=32)
    g.add_argument("--hidden-dim", type=int, default=64)
    g.add_argument("--layers", type=int, default=1)
    g.add_argument("--no-attention", action="store_true")


def _train_cfg(args: argparse.Namespace, **defaults) -> TrainConfig:
    d = {**TrainConfig().to_dict(), **defaults, "seed": args.seed}
    for f in fields(TrainConfig):
        v = getattr(args, f.name, None)
        if v is not None and f.name != "seed":
            d[f.name] = v
    try:
        return TrainConfig.from_dict(d)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _arch(args: argparse.Namespace) -> dict:
    return {"emb_dim": args.emb_dim, "hidden_dim": args.hidden_dim, "layers": args.layers,
            "attention": not args.no_attention}


def _workers(args: argparse.Namespace) -> int:
    if args.workers is not None:
        n = args.workers
    else:
        env = os.environ.get("BTLAB_WORKERS", "1")
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"BTLAB_WORKERS must be an integer, got {env!r}") from None
    if n < 1:
        raise UsageError("worker count must be >= 1")
    return n


def _ns(text: str) -> list[int]:
    try:
        ns = sorted({int(x) for x in text.split(",") if x.strip()})
    except ValueError:
        raise UsageError(f"bad --ns list {text!r}") from None
    if not ns or ns[0] < 1:
        raise UsageError("--ns values must be positive integers")
    return ns


# -- commands ----------------------------------------------------------------------

def cmd_vocab(args, run: Run) -> Path:
    lines = []
    for path in args.input:
        lines.extend(read_lines(run.input(path)))
    vocab = build_vocabulary(lines, args.min_count)
    vocab.save(run.output(args.output))
    print(f"{len(vocab)} tokens -> {args.output}")
    return Path(args.output)


def cmd_train(args, run: Run) -> Path:
    sv = Vocabulary.load(run.input(args.src_vocab))
    tv = Vocabulary.load(run.input(args.tgt_vocab))
    corpus = load_parallel(run.input(args.src), run.input(args.tgt), sv, tv)
    dev = load_parallel(run.input(args.dev_src), run.input(args.dev_tgt), sv, tv)
    cfg = _train_cfg(args)
    if args.init_from:
        init = SeqModel.load(run.input(args.init_from), sv, tv)
    else:
        init = SeqModel.create(sv, tv, seed=args.seed, **_arch(args))
    data: object = corpus
    if args.pseudo:
        for suffix in (".tgt", ".json"):
            run.input(args.pseudo + suffix)
        pseudo = PseudoCorpus.load(args.pseudo, sv, tv)
        for j in range(pseudo.n):
            run.input(f"{args.pseudo}.src.{j + 1}")
        mixed = MixedTrainingSet(corpus, pseudo, drop_truncated=args.drop_truncated)
        generator = None
        if args.mode == "regenerate":
            if not args.generator:
                raise UsageError("--mode regenerate needs --generator")
            generator = SeqModel.load(run.input(args.generator), tv, sv)
        workers = _workers(args)

        def epoch_view(epoch, m=mixed, g=generator):
            return build_training_view(m, args.mode, epoch, args.seed, g, workers)

        data = epoch_view
    elif args.mode == "regenerate" or args.generator:
        raise UsageError("--mode regenerate and --generator need --pseudo")
    model, trainlog = train(init, data, dev, cfg, _workers(args))
    model.save(run.output(args.output))
    trainlog.save(run.output(args.output + ".log.jsonl"))
    best = next(r for r in trainlog.records if r.update == trainlog.best_update)
    print(f"best update {best.update}: dev PPL {best.dev_ppl:.4f} BLEU {best.dev_bleu:.2f} -> {args.output}")
    return Path(args.output)


def cmd_translate(args, run: Run) -> Path:
    spec = _spec_from_args(args)
    model = SeqModel.load(run.input(args.model))
    sources = MonoCorpus(load_mono(run.input(args.input), model.src_vocab).sentences, model.src_vocab)
    hyps = generate_corpus(model, sources.sentences, spec, args.seed, workers=_workers(args))
    write_lines(run.output(args.output), [h[0].ids for h in hyps], model.tgt_vocab)
    return Path(args.output)


def cmd_augment(args, run: Run) -> Path:
    spec = _spec_from_args(args)
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    if spec.deterministic and args.n > 1:
        raise UsageError(f"deterministic strategy yields duplicate sources: --strategy {spec.label} "
                         f"with --n {args.n}; use --n 1 or a sampling strategy")
    generator = SeqModel.load(run.input(args.generator))
    mono = load_mono(run.input(args.mono), generator.src_vocab)
    pseudo = generate_pseudo_corpus(generator, mono, spec, args.n, args.seed, _workers(args))
    for p in pseudo.save(args.output):
        run.output(p)
    rate = sum(t for row in pseudo.truncated for t in row) / (len(pseudo) * pseudo.n)
    print(f"{len(pseudo)} targets x {pseudo.n} sources ({spec.label}), truncated {rate:.4f} -> {args.output}.*")
    return Path(args.output + ".json")


def _load_text_pair(run: Run, src: str, tgt: str) -> ParallelCorpus:
    src_lines, tgt_lines = read_lines(run.input(src)), read_lines(run.input(tgt))
    sv, tv = build_vocabulary(src_lines), build_vocabulary(tgt_lines)
    return load_parallel(src, tgt, sv, tv)


def cmd_ibm1(args, run: Run) -> Path:
    corpus = _load_text_pair(run, args.src, args.tgt)
    table, loglik = train_ibm1(corpus, args.iterations)
    entropy = translation_entropy(table, target_unigram(corpus))
    save_table(table, loglik, args.output, corpus.src_vocab.tokens, corpus.tgt_vocab.tokens, args.iterations)
    meta_path = Path(args.output + ".json")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    meta["entropy"] = entropy
    meta_path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    run.output(args.output + ".tsv")
    run.output(meta_path)
    print(f"entropy {entropy:.4f} nats, final log-likelihood {loglik[-1]:.4f}")
    return meta_path


def cmd_stats(args, run: Run) -> Path:
    from .plotting import plot_mass_curves

    models = {}
    for item in args.model:
        label, sep, path = item.partition("=")
        if not sep:
            label, path = Path(item).stem, item
        if label in models:
            raise UsageError(f"duplicate model label {label!r}")
        models[label] = SeqModel.load(run.input(path))
    first = next(iter(models.values()))
    for label, m in models.items():
        if m.src_vocab != first.src_vocab or m.tgt_vocab != first.tgt_vocab:
            raise UsageError(f"model {label!r} uses different vocabularies from the first model")
    corpus = load_parallel(run.input(args.src), run.input(args.tgt), first.src_vocab, first.tgt_vocab)
    ns = _ns(args.ns)
    curves, report = {}, {"ns": ns, "models": {}}
    for label, m in models.items():
        curve = cumulative_mass_curve(m, corpus, ns)
        curves[label] = curve
        curve.to_csv(run.output(f"{args.output}.{label}.mass.csv"))
        report["models"][label] = {"perplexity": corpus_perplexity(m, corpus), "mass": dict(curve.points)}
    out = run.output(args.output + ".json")
    out.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    if not args.no_plot:
        plot_mass_curves(curves, run.output(args.output + ".png"))
    for label, r in report["models"].items():
        print(f"{label}: PPL {r['perplexity']:.4f}  " + "  ".join(f"top{n} {v:.4f}" for n, v in r["mass"].items()))
    return out


def cmd_bleu(args, run: Run) -> Path | None:
    hyps = [l.split() for l in read_lines(run.input(args.hyp))]
    refs = [l.split() for l in read_lines(run.input(args.ref))]
    if len(hyps) != len(refs):
        raise CorpusError(f"line-count mismatch {len(hyps)} vs {len(refs)}")
    report = corpus_bleu(hyps, refs)
    print(f"BLEU {report.score:.2f} ({'/'.join(f'{p * 100:.1f}' for p in report.precisions)}, "
          f"BP {report.brevity_penalty:.4f}, {report.hyp_len}/{report.ref_len})")
    if args.output:
        run.output(args.output).write_text(report.to_json() + "\n", encoding="utf-8")
        return Path(args.output)
    return None


def cmd_toytask(args, run: Run) -> Path:
    config = ToyConfig.load(run.input(args.config)) if args.config else ToyConfig()
    for name in ("bilingual", "mono", "dev"):
        if getattr(args, name) is not None:
            setattr(config, name, getattr(args, name))
    config.seed = args.seed
    task = make_toy_task(config)
    d = Path(args.output_dir)
    task.bilingual.save(run.output(d / "train.src"), run.output(d / "train.tgt"))
    task.heldout.save(run.output(d / "heldout.src"), run.output(d / "mono.tgt"))
    task.dev.save(run.output(d / "dev.src"), run.output(d / "dev.tgt"))
    task.bilingual.src_vocab.save(run.output(d / "vocab.src"))
    task.bilingual.tgt_vocab.save(run.output(d / "vocab.tgt"))
    cfg_path = run.output(d / "config.json")
    cfg_path.write_text(json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(f"{len(task.bilingual)} bilingual / {len(task.mono)} mono / {len(task.dev)} dev -> {d}")
    return d


def cmd_scenario(args, run: Run) -> Path:
    from .plotting import plot_scenario

    d = Path(args.data_dir)
    sv = Vocabulary.load(run.input(d / "vocab.src"))
    tv = Vocabulary.load(run.input(d / "vocab.tgt"))
    if args.full_src:
        full = load_parallel(run.input(args.full_src), run.input(args.full_tgt), sv, tv)
    else:
        train_part = load_parallel(run.input(d / "train.src"), run.input(d / "train.tgt"), sv, tv)
        held = load_parallel(run.input(d / "heldout.src"), run.input(d / "mono.tgt"), sv, tv)
        full = ParallelCorpus(train_part.pairs + held.pairs, sv, tv)
    dev = load_parallel(run.input(d / "dev.src"), run.input(d / "dev.tgt"), sv, tv)
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    for s in strategies:
        if s not in ("sample-nols", "sample-wo-ls"):
            try:
                GeneratorSpec.parse(s)
            except SpecError as exc:
                raise UsageError(str(exc)) from None
    cfg = _train_cfg(args)
    report = run_controlled_scenario(full, dev, args.split_ratio, strategies, generator_cfg=cfg, model_cfg=cfg,
                                     arch=_arch(args), seed=args.seed, n=args.n,
                                     ibm1_iterations=args.iterations, baseline=not args.no_baseline,
                                     workers=_workers(args))
    out = Path(args.output_dir)
    run.output(out / "report.json").write_text(report.to_json(), encoding="utf-8")
    table = report.to_table()
    run.output(out / "report.txt").write_text(table, encoding="utf-8")
    report.to_csv(run.output(out / "report.csv"))
    if not args.no_plot:
        plot_scenario(report, run.output(out / "report.png"))
    print(table, end="")
    return out / "report.json"


def cmd_rerun(args, run: Run) -> int:
    manifest = json.loads(Path(args.manifest_file).read_text(encoding="utf-8"))
    if manifest.get("format") != MANIFEST_FORMAT:
        raise UsageError(f"{args.manifest_file}: not a run manifest")
    if manifest["cwd"] != os.getcwd():
        log.warning("manifest was written in %s; relative paths resolve against %s", manifest["cwd"], os.getcwd())
    for path, digest in manifest["inputs"].items():
        if not Path(path).is_file() or sha256(path) != digest:
            raise RuntimeError(f"input {path} is missing or differs from the recorded checksum")
    argv = list(manifest["argv"])
    if args.workers is not None:
        argv += ["--workers", str(args.workers)]
    replay = args.manifest_out or str(args.manifest_file) + ".rerun.json"
    argv += ["--manifest", replay]
    code = main(argv)
    if code != 0:
        return code
    bad = [p for p, digest in manifest["outputs"].items() if not Path(p).is_file() or sha256(p) != digest]
    if bad:
        print("outputs differ from the manifest: " + ", ".join(bad), file=sys.stderr)
        return 2
    print(f"reproduced {len(manifest['outputs'])} output(s) byte-identically")
    return 0


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="btlab", description="Back-translation generation toolkit.", allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"btlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, func: Callable, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help, description=help, allow_abbrev=False)
        p.set_defaults(func=func)
        return p

    p = add("vocab", cmd_vocab, "Build a vocabulary from whitespace-tokenized text.")
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--min-count", type=int, default=1)
    _add_common(p)

    p = add("train", cmd_train, "Train a sequence model, optionally on bilingual plus pseudo-parallel data.")
    for name in ("src", "tgt", "src-vocab", "tgt-vocab", "dev-src", "dev-tgt", "output"):
        p.add_argument("--" + name, required=True)
    p.add_argument("--pseudo", default=None, help="pseudo-corpus prefix written by `augment`")
    p.add_argument("--mode", choices=["static", "regenerate"], default="static")
    p.add_argument("--generator", default=None, help="generator checkpoint for --mode regenerate")
    p.add_argument("--drop-truncated", action="store_true")
    p.add_argument("--init-from", default=None, help="start from this checkpoint (fine-tuning)")
    _add_train(p)
    _add_common(p)

    p = add("translate", cmd_translate, "Decode a file with a trained model.")
    for name in ("model", "input", "output"):
        p.add_argument("--" + name, required=True)
    _add_spec(p)
    _add_common(p)

    p = add("augment", cmd_augment, "Back-translate monolingual targets into a pseudo-parallel corpus.")
    p.add_argument("--generator", required=True, help="target-to-source checkpoint")
    p.add_argument("--mono", required=True)
    p.add_argument("--output", required=True, help="output prefix")
    p.add_argument("--n", type=int, default=1, help="sources per target sentence")
    _add_spec(p)
    _add_common(p)

    p = add("ibm1", cmd_ibm1, "Train IBM Model 1 t(f|e) and report its translation entropy.")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--output", required=True, help="output prefix (.tsv, .json)")
    p.add_argument("--iterations", type=int, default=15)
    _add_common(p)

    p = add("stats", cmd_stats, "Perplexity and cumulative top-N mass curves under forced decoding.")
    p.add_argument("--model", action="append", required=True, help="[LABEL=]checkpoint, repeatable")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--output", required=True, help="output prefix (.json, .LABEL.mass.csv, .png)")
    p.add_argument("--ns", default=",".join(map(str, DEFAULT_NS)))
    p.add_argument("--no-plot", action="store_true")
    _add_common(p)

    p = add("bleu", cmd_bleu, "Corpus BLEU-4 of a hypothesis file against one reference file.")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--output", default=None, help="JSON report path")
    _add_common(p)

    p = add("toytask", cmd_toytask, "Sample a toy noisy-channel task with known inverse translation probabilities.")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--config", default=None, help="JSON channel/size config")
    p.add_argument("--bilingual", type=int, default=None)
    p.add_argument("--mono", type=int, default=None)
    p.add_argument("--dev", type=int, default=None)
    _add_common(p)

    p = add("scenario", cmd_scenario, "Controlled back-translation scenario over several strategies.")
    p.add_argument("--data-dir", required=True, help="directory written by `toytask` (vocab.*, dev.*, ...)")
    p.add_argument("--full-src", default=None, help="use this full bilingual corpus instead of train+heldout")
    p.add_argument("--full-tgt", default=None)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--split-ratio", type=float, default=0.2)
    p.add_argument("--strategies", default=",".join(TABLE2_STRATEGIES))
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--iterations", type=int, default=15, help="IBM-1 EM iterations")
    p.add_argument("--no-baseline", action="store_true")
    p.add_argument("--no-plot", action="store_true")
    _add_train(p)
    _add_common(p)

    p = add("rerun", cmd_rerun, "Replay a run from its manifest and verify the outputs byte for byte.")
    p.add_argument("manifest_file")
    p.add_argument("--workers", type=int, default=None, help="override the worker count")
    p.add_argument("--manifest-out", default=None, help="where the replay writes its own manifest")
    p.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return parser


def _manifest_path(args, primary: Path | None) -> Path:
    if args.manifest:
        return Path(args.manifest)
    if primary is None:
        return Path(f"btlab-{args.command}.manifest.json")
    if primary.is_dir():
        return primary / "manifest.json"
    return primary.with_name(primary.name + ".manifest.json")


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    # a single intra-op thread keeps float reductions identical across runs
    torch.set_num_threads(1)
    try:
        if args.command == "rerun":
            return cmd_rerun(args, None)
        run = Run(args, argv)
        primary = args.func(args, run)
        if args.command == "scenario" or args.command == "toytask":
            primary = Path(args.output_dir)
        path = _manifest_path(args, primary)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(run.manifest(), indent=2) + "\n", encoding="utf-8")
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CorpusError, ModelError, SpecError, TrainingDiverged, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
