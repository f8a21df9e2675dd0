from collections import Counter

import numpy as np
import pytest

from btlab.corpus import build_vocabulary
from btlab.decode import GeneratorSpec, beam_search
from btlab.seqmodel import SeqModel
from btlab.toyharness import (EnumerationError, ToyChannel, ToyConfig, default_channel, enumerate_model_distribution,
                              make_toy_task, sample_pairs, strategy_exact_distribution, tiny_channel)


def test_same_seed_same_task():
    cfg = ToyConfig(bilingual=50, mono=30, dev=10, seed=4)
    a, b = make_toy_task(cfg), make_toy_task(cfg)
    assert a.bilingual == b.bilingual and a.mono == b.mono and a.dev == b.dev
    c = make_toy_task(cfg, seed=5)
    assert c.bilingual != a.bilingual


def test_default_sizes_and_vocab():
    ch = default_channel()
    sv, tv = ch.vocabularies()
    assert 8 <= len(ch.target_words) <= 16 and 8 <= len(ch.source_words) <= 16
    assert ToyConfig().bilingual == 10_000 and ToyConfig().mono == 40_000
    assert sorted(p for _, p in ch.options["the"]) == [0.1, 0.3, 0.6]


def test_mono_has_repeated_sentences():
    task = make_toy_task(ToyConfig(bilingual=10, mono=2000, dev=10))
    counts = Counter(task.mono.sentences)
    assert counts.most_common(1)[0][1] > 10


def test_deterministic_mapping_is_tokenwise():
    ch = ToyChannel([(1.0, ["A", "B"])], {"A": [("x", 1.0)], "B": [("y", 0.5), ("z", 0.5)]},
                    {"x": [("X", 1.0)], "y": [("Y", 1.0)], "z": [("Z", 1.0)]})
    rng = np.random.default_rng(0)
    for f, e in sample_pairs(ch, 50, rng):
        assert f == [w.upper() for w in e]


def test_swap_reordering():
    ch = default_channel()
    assert ch.permutation(["the", "big", "cat", "runs"]) == [0, 2, 1, 3]
    f = ch.sample_source(["the", "big", "cat", "runs"], np.random.default_rng(0))
    assert f[2] == "gross" and f[1] in ("katze", "mieze")


def test_source_distribution_sums_to_one():
    ch = default_channel()
    for e in (["the", "red", "dog", "sings"], ["a", "cat"]):
        dist = ch.source_distribution(e)
        assert sum(dist.values()) == pytest.approx(1.0)
        for f, p in dist.items():
            assert ch.source_prob(f, e) == pytest.approx(p)


def test_counting_oracle():
    ch = default_channel()
    rng = np.random.default_rng(7)
    counts: dict[str, Counter] = {}
    for f, e in sample_pairs(ch, 100_000, rng):
        perm = ch.permutation(e)
        for i, j in enumerate(perm):
            counts.setdefault(e[j], Counter())[f[i]] += 1
    for e, opts in ch.options.items():
        total = sum(counts[e].values())
        for f, p in opts:
            assert counts[e][f] / total == pytest.approx(p, abs=0.01)


def test_invalid_channel():
    with pytest.raises(ValueError):
        ToyChannel([(0.5, ["A"])], {"A": [("x", 1.0)]}, {"x": [("X", 1.0)]})
    with pytest.raises(ValueError):
        make_toy_task(ToyConfig(bilingual=0))


def test_channel_json_roundtrip():
    ch = tiny_channel()
    assert ToyChannel.from_dict(ch.to_dict()) == ch


def peaked_model(target_ids):
    """Zero output weights plus a large bias: every step puts all mass on ``target_ids``, tied."""
    import torch

    sv = build_vocabulary(["a"])
    tv = build_vocabulary(["x y"])
    m = SeqModel.create(sv, tv, seed=0, emb_dim=2, hidden_dim=2)
    m.zero_output_layer()
    with torch.no_grad():
        m.net.out.bias[target_ids] = 80.0
    return m


def test_enumeration_of_peaked_models():
    from btlab.corpus import EOS_ID

    # EOS is banned at the first step, so 'x' is certain there; later 'x' and EOS tie
    dist = enumerate_model_distribution(peaked_model([4, EOS_ID]), (4,), 3)
    big = {k: v for k, v in dist.probs.items() if v > 1e-20}
    assert big == pytest.approx({(4,): 0.5, (4, 4): 0.25, (4, 4, 4): 0.125}, abs=1e-12)
    assert dist.coverage == pytest.approx(0.875)
    assert dist.argmax == (4,)
    # all mass on 'x' at every step: nothing terminates within the cap
    stuck = enumerate_model_distribution(peaked_model([4]), (4,), 3)
    assert stuck.coverage < 1e-20


def test_enumeration_guard(small_model):
    with pytest.raises(EnumerationError):
        enumerate_model_distribution(small_model, (4,), 12)


def test_argmax_equals_exhaustive_beam(tiny_generator, tiny_task):
    V = tiny_generator.arch.tgt_vocab_size
    for src in list(dict.fromkeys(tiny_task.dev.targets))[:10]:
        dist = enumerate_model_distribution(tiny_generator, src, 3)
        assert 0 < dist.coverage <= 1 + 1e-9
        assert beam_search(tiny_generator, src, V ** 3, 3)[0].ids == dist.argmax


def test_strategy_distributions(tiny_generator, tiny_task):
    src = tiny_task.dev.targets[0]
    full = enumerate_model_distribution(tiny_generator, src, 4)
    sample = strategy_exact_distribution(tiny_generator, src, GeneratorSpec("sample"), 4)
    assert sample.probs == full.probs
    beam = strategy_exact_distribution(tiny_generator, src, GeneratorSpec("beam"), 4)
    assert list(beam.probs.values()) == [1.0]
    assert list(beam.probs) == [beam_search(tiny_generator, src, 5, 4)[0].ids]
    for tau in (0.1, 0.25):
        d = strategy_exact_distribution(tiny_generator, src, GeneratorSpec("restricted", tau=tau), 4)
        assert sum(d.probs.values()) <= 1 + 1e-9
    nb = strategy_exact_distribution(tiny_generator, src, GeneratorSpec.parse("nbest:5"), 4)
    assert sum(nb.probs.values()) == pytest.approx(1.0)


def test_restricted_tau_025_drops_rare_option(tiny_generator, tiny_task):
    """x has a 0.6/0.3/0.1 split; the 0.1 option X3 loses its mass under tau = 0.25."""
    tv = tiny_generator.tgt_vocab
    sv = tiny_generator.src_vocab
    src = sv.encode("x p")
    d = strategy_exact_distribution(tiny_generator, src, GeneratorSpec("restricted", tau=0.25), 4)
    assert not any(tv.id("X3") in ids for ids in d.probs)
    full = enumerate_model_distribution(tiny_generator, src, 4)
    assert sum(p for ids, p in full.probs.items() if tv.id("X3") in ids) > 0.01
