"""Small attentional encoder-decoder p(e_i | f, e_<i) in float64 torch.

The encoder is a pair of GRUs (left-to-right and right-to-left, the latter run
on each sentence reversed within its own length so padding never leaks into
real positions).  The decoder is a GRU cell with input feeding and bilinear
attention.  PAD is never predicted.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn

from .corpus import BOS_ID, EOS_ID, PAD_ID, Sentence, Vocabulary

DTYPE = torch.float64
CHECKPOINT_FORMAT = "btlab-seqmodel/1"
_PAD_INDEX = torch.tensor([PAD_ID])


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ArchConfig:
    src_vocab_size: int
    tgt_vocab_size: int
    emb_dim: int = 32
    hidden_dim: int = 64
    layers: int = 1
    attention: bool = True


class _Net(nn.Module):
    def __init__(self, arch: ArchConfig):
        super().__init__()
        d, h, n = arch.emb_dim, arch.hidden_dim, arch.layers
        self.attention = arch.attention
        self.src_emb = nn.Embedding(arch.src_vocab_size, d)
        self.tgt_emb = nn.Embedding(arch.tgt_vocab_size, d)
        self.enc_fwd = nn.GRU(d, h, num_layers=n, batch_first=True)
        self.enc_bwd = nn.GRU(d, h, num_layers=n, batch_first=True)
        self.bridge = nn.Linear(2 * h, h)
        self.cells = nn.ModuleList([nn.GRUCell(d + 2 * h, h)] + [nn.GRUCell(h, h) for _ in range(n - 1)])
        self.attn = nn.Linear(h, 2 * h, bias=False)
        self.combine = nn.Linear(3 * h, h)
        self.out = nn.Linear(h, arch.tgt_vocab_size)


@dataclass
class EncoderState:
    memory: torch.Tensor  # (B, J, 2h)
    mask: torch.Tensor  # (B, J) bool, True on real tokens

    def select(self, index: torch.Tensor) -> "EncoderState":
        return EncoderState(self.memory[index], self.mask[index])


@dataclass
class DecoderState:
    hidden: list[torch.Tensor]  # per layer (B, h)
    context: torch.Tensor  # (B, 2h)

    def select(self, index: torch.Tensor) -> "DecoderState":
        return DecoderState([h[index] for h in self.hidden], self.context[index])


def pad_batch(seqs: Sequence[Sequence[int]], pad: int = PAD_ID) -> tuple[torch.Tensor, torch.Tensor]:
    lengths = torch.tensor([len(s) for s in seqs], dtype=torch.long)
    out = torch.full((len(seqs), int(lengths.max())), pad, dtype=torch.long)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = torch.as_tensor(s, dtype=torch.long)
    return out, lengths


def _reverse_within(x: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
    """Reverse the first ``lengths[b]`` steps of every row, leave padding in place."""
    J = x.shape[1]
    pos = torch.arange(J).unsqueeze(0)
    rev = lengths.unsqueeze(1) - 1 - pos
    idx = torch.where(rev >= 0, rev, pos)
    return x.gather(1, idx.unsqueeze(-1).expand_as(x))


class SeqModel:
    """Parameters plus architecture plus the two vocabularies."""

    def __init__(self, arch: ArchConfig, src_vocab: Vocabulary, tgt_vocab: Vocabulary, seed: int = 0,
                 init_scale: float = 0.1):
        if arch.src_vocab_size != len(src_vocab) or arch.tgt_vocab_size != len(tgt_vocab):
            raise ModelError("architecture vocabulary sizes do not match the vocabularies")
        self.arch = arch
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.net = _Net(arch).to(DTYPE)
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for p in self.net.parameters():
                p.copy_((torch.rand(p.shape, generator=gen, dtype=DTYPE) * 2 - 1) * init_scale)
        self.net.eval()

    @classmethod
    def create(cls, src_vocab: Vocabulary, tgt_vocab: Vocabulary, seed: int = 0, init_scale: float = 0.1,
               **arch_kw) -> "SeqModel":
        return cls(ArchConfig(len(src_vocab), len(tgt_vocab), **arch_kw), src_vocab, tgt_vocab, seed=seed,
                   init_scale=init_scale)

    # -- parameters ------------------------------------------------------
    @property
    def n_params(self) -> int:
        return sum(p.numel() for p in self.net.parameters())

    def get_params(self) -> np.ndarray:
        return torch.cat([p.detach().reshape(-1) for p in self.net.parameters()]).numpy().copy()

    def set_params(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.n_params:
            raise ModelError(f"expected {self.n_params} parameters, got {flat.size}")
        offset = 0
        with torch.no_grad():
            for p in self.net.parameters():
                n = p.numel()
                p.copy_(torch.from_numpy(flat[offset: offset + n].copy()).reshape(p.shape))
                offset += n

    def copy(self) -> "SeqModel":
        other = SeqModel(self.arch, self.src_vocab, self.tgt_vocab)
        other.set_params(self.get_params())
        return other

    def zero_output_layer(self) -> None:
        with torch.no_grad():
            self.net.out.weight.zero_()
            self.net.out.bias.zero_()

    # -- computation -----------------------------------------------------
    def encode(self, sources: Sequence[Sentence]) -> EncoderState:
        if any(len(s) == 0 for s in sources):
            raise ModelError("empty source sentence")
        src, lengths = pad_batch(sources)
        if int(src.max()) >= self.arch.src_vocab_size or int(src.min()) < 0:
            raise ModelError("source token id out of range")
        net = self.net
        emb = net.src_emb(src)
        fwd, _ = net.enc_fwd(emb)
        bwd, _ = net.enc_bwd(_reverse_within(emb, lengths))
        bwd = _reverse_within(bwd, lengths)
        mask = torch.arange(src.shape[1]).unsqueeze(0) < lengths.unsqueeze(1)
        return EncoderState(torch.cat([fwd, bwd], dim=-1), mask)

    def start(self, enc: EncoderState) -> DecoderState:
        m = enc.mask.unsqueeze(-1).to(DTYPE)
        mean = (enc.memory * m).sum(1) / m.sum(1)
        h0 = torch.tanh(self.net.bridge(mean))
        return DecoderState([h0] * len(self.net.cells), torch.zeros_like(mean))

    def step(self, enc: EncoderState, dec: DecoderState, prev: torch.Tensor) -> tuple[torch.Tensor, DecoderState]:
        """One decoder step; returns log-probabilities (B, V) and the new state."""
        net = self.net
        x = torch.cat([net.tgt_emb(prev), dec.context], dim=-1)
        hidden = []
        for cell, h in zip(net.cells, dec.hidden):
            x = cell(x, h)
            hidden.append(x)
        top = hidden[-1]
        if net.attention:
            scores = torch.bmm(enc.memory, net.attn(top).unsqueeze(-1)).squeeze(-1)
            scores = scores.masked_fill(~enc.mask, float("-inf"))
            weights = torch.softmax(scores, dim=-1)
            context = torch.bmm(weights.unsqueeze(1), enc.memory).squeeze(1)
        else:
            m = enc.mask.unsqueeze(-1).to(DTYPE)
            context = (enc.memory * m).sum(1) / m.sum(1)
        o = torch.tanh(net.combine(torch.cat([top, context], dim=-1)))
        logits = net.out(o).index_fill(1, _PAD_INDEX, float("-inf"))
        return torch.log_softmax(logits, dim=-1), DecoderState(hidden, context)

    def forced(self, sources: Sequence[Sentence], targets: Sequence[Sentence]) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Teacher-forced log-probabilities.

        Returns ``(logp (B, T, V), gold (B, T), mask (B, T))`` where each gold
        row is the target followed by EOS.
        """
        if any(len(t) == 0 for t in targets):
            raise ModelError("empty target sentence")
        gold, glen = pad_batch([tuple(t) + (EOS_ID,) for t in targets])
        if int(gold.max()) >= self.arch.tgt_vocab_size or int(gold.min()) < 0:
            raise ModelError("target token id out of range")
        inp = torch.cat([torch.full((gold.shape[0], 1), BOS_ID, dtype=torch.long), gold[:, :-1]], dim=1)
        enc = self.encode(sources)
        dec = self.start(enc)
        steps = []
        for i in range(gold.shape[1]):
            logp, dec = self.step(enc, dec, inp[:, i])
            steps.append(logp)
        mask = torch.arange(gold.shape[1]).unsqueeze(0) < glen.unsqueeze(1)
        return torch.stack(steps, dim=1), gold, mask

    # -- persistence -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "arch": asdict(self.arch),
            "src_vocab": self.src_vocab.tokens,
            "tgt_vocab": self.tgt_vocab.tokens,
            "src_vocab_hash": self.src_vocab.hash(),
            "tgt_vocab_hash": self.tgt_vocab.hash(),
            "params": self.get_params().tolist(),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict()).encode("utf-8")).hexdigest()

    @classmethod
    def load(cls, path: str | Path, src_vocab: Vocabulary | None = None,
             tgt_vocab: Vocabulary | None = None) -> "SeqModel":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if data.get("format") != CHECKPOINT_FORMAT:
            raise ModelError(f"{path}: not a {CHECKPOINT_FORMAT} checkpoint")
        sv, tv = Vocabulary(data["src_vocab"]), Vocabulary(data["tgt_vocab"])
        if sv.hash() != data["src_vocab_hash"] or tv.hash() != data["tgt_vocab_hash"]:
            raise ModelError(f"{path}: stored vocabulary does not match its hash")
        if src_vocab is not None and src_vocab.hash() != data["src_vocab_hash"]:
            raise ModelError(f"{path}: source vocabulary hash mismatch")
        if tgt_vocab is not None and tgt_vocab.hash() != data["tgt_vocab_hash"]:
            raise ModelError(f"{path}: target vocabulary hash mismatch")
        model = cls(ArchConfig(**data["arch"]), sv, tv)
        model.set_params(np.asarray(data["params"], dtype=np.float64))
        return model


def forward_step(model: SeqModel, source: Sentence, prefix: Sequence[int]) -> np.ndarray:
    """Next-token distribution after ``prefix`` (conditioned on BOS when empty)."""
    V = model.arch.tgt_vocab_size
    if any(t < 0 or t >= V for t in prefix):
        raise ModelError("prefix token id out of range")
    with torch.no_grad():
        enc = model.encode([tuple(source)])
        dec = model.start(enc)
        prev = torch.tensor([BOS_ID])
        for tok in prefix:
            _, dec = model.step(enc, dec, prev)
            prev = torch.tensor([tok])
        logp, _ = model.step(enc, dec, prev)
    return logp[0].exp().numpy()


def sequence_logprob(model: SeqModel, source: Sentence, target: Sentence) -> tuple[np.ndarray, float, float]:
    """Per-position log-probs (EOS step included), their sum, and the sum / (len + 1)."""
    if len(target) == 0:
        raise ModelError("empty target sentence")
    with torch.no_grad():
        logp, gold, _ = model.forced([tuple(source)], [tuple(target)])
    per_pos = logp[0].gather(1, gold[0].unsqueeze(1)).squeeze(1).numpy()
    total = float(per_pos.sum())
    return per_pos, total, total / (len(target) + 1)


def batch_logprobs(model: SeqModel, pairs: Sequence[tuple[Sentence, Sentence]], batch_size: int = 512) -> list[float]:
    """Total log p(target | source) for every pair, EOS included."""
    out: list[float] = []
    with torch.no_grad():
        for start in range(0, len(pairs), batch_size):
            chunk = pairs[start: start + batch_size]
            logp, gold, mask = model.forced([s for s, _ in chunk], [t for _, t in chunk])
            tok = logp.gather(2, gold.unsqueeze(-1)).squeeze(-1).masked_fill(~mask, 0.0)
            out.extend(tok.sum(1).tolist())
    return out


def loss_tensor(model: SeqModel, pairs: Sequence[tuple[Sentence, Sentence]], eps: float,
                weights: Sequence[float] | None = None, normalize: str = "sentence") -> torch.Tensor:
    """Label-smoothed cross-entropy as a differentiable scalar.

    ``normalize="sentence"`` averages per-sentence token means (pair weights
    apply per sentence); ``"token"`` divides the weighted token sum by the
    weighted token count.
    """
    if not pairs:
        raise ModelError("empty batch")
    if not 0.0 <= eps < 1.0:
        raise ModelError("label smoothing must lie in [0, 1)")
    logp, gold, mask = model.forced([s for s, _ in pairs], [t for _, t in pairs])
    nll = -logp.gather(2, gold.unsqueeze(-1)).squeeze(-1)
    if eps > 0.0:
        smooth = -logp[:, :, PAD_ID + 1:].mean(-1)
        tok = (1.0 - eps) * nll + eps * smooth
    else:
        tok = nll
    tok = tok.masked_fill(~mask, 0.0)
    m = mask.to(DTYPE)
    w = torch.ones(len(pairs), dtype=DTYPE) if weights is None else torch.as_tensor(weights, dtype=DTYPE)
    if normalize == "sentence":
        per_sent = tok.sum(1) / m.sum(1)
        return (w * per_sent).sum() / w.sum()
    if normalize == "token":
        return (w * tok.sum(1)).sum() / (w * m.sum(1)).sum()
    raise ModelError(f"unknown normalization {normalize!r}")


def loss(model: SeqModel, pairs, eps: float = 0.0, weights=None, normalize: str = "sentence") -> float:
    with torch.no_grad():
        return float(loss_tensor(model, pairs, eps, weights, normalize))


def gradient(model: SeqModel, pairs, eps: float = 0.0, weights=None, normalize: str = "sentence") -> np.ndarray:
    """Exact gradient of :func:`loss` with respect to the flat parameter vector."""
    model.net.zero_grad(set_to_none=True)
    loss_tensor(model, pairs, eps, weights, normalize).backward()
    grads = [p.grad.reshape(-1) if p.grad is not None else torch.zeros(p.numel(), dtype=DTYPE)
             for p in model.net.parameters()]
    model.net.zero_grad(set_to_none=True)
    return torch.cat(grads).numpy().copy()
