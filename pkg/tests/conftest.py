import numpy as np
import pytest
import torch

from btlab.corpus import ParallelCorpus, build_vocabulary
from btlab.seqmodel import SeqModel
from btlab.toyharness import ToyConfig, make_toy_task, tiny_channel
from btlab.trainer import TrainConfig, train

torch.set_num_threads(1)


def corpus_from_text(pairs):
    sv = build_vocabulary([s for s, _ in pairs])
    tv = build_vocabulary([t for _, t in pairs])
    return ParallelCorpus([(sv.encode(s), tv.encode(t)) for s, t in pairs], sv, tv)


@pytest.fixture(scope="session")
def tiny_task():
    return make_toy_task(ToyConfig(tiny_channel(), bilingual=3000, mono=500, dev=200, seed=11))


@pytest.fixture(scope="session")
def tiny_generator(tiny_task):
    """Target-to-source model on the tiny channel: 9 input, 12 output tokens."""
    inv = tiny_task.bilingual.reversed()
    init = SeqModel.create(inv.src_vocab, inv.tgt_vocab, seed=3, emb_dim=8, hidden_dim=16)
    cfg = TrainConfig(learning_rate=1e-2, batch_size=1500, checkpoint_interval=50, max_updates=150,
                      label_smoothing=0.1, select="ppl", seed=3)
    model, _ = train(init, inv, tiny_task.dev.reversed(), cfg)
    return model


@pytest.fixture
def small_model():
    sv = build_vocabulary(["a b c d"])
    tv = build_vocabulary(["x y z"])
    return SeqModel.create(sv, tv, seed=1, emb_dim=4, hidden_dim=6, init_scale=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    """Store the verdict for one acceptance criterion; printed at the end of the run."""
    ACCEPTANCE[criterion] = (bool(ok), detail)
    print(f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[c]
        terminalreporter.write_line(f"criterion {c:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
