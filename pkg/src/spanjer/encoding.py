"""Contextual token encoding behind a fixed contract.

Words may split into several subtokens; the alignment maps each word to a
contiguous subtoken range so span pooling can slice encoder output directly.
Two backends: a small deterministic toy encoder for tests and experiments
without downloads, and an adapter for pretrained transformer encoders.
"""
from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass
from typing import Sequence

import torch
from torch import nn

log = logging.getLogger(__name__)


class EncodingError(RuntimeError):
    """The encoder backend failed or produced inconsistent output."""


@dataclass(frozen=True)
class SubwordAlignment:
    """Per-word inclusive subtoken ranges covering 0..subtoken_count-1."""

    ranges: tuple[tuple[int, int], ...]
    subtoken_count: int

    def __post_init__(self) -> None:
        if not self.ranges:
            raise ValueError("alignment needs at least one word")
        expect = 0
        for w, (a, b) in enumerate(self.ranges):
            if a != expect or b < a:
                raise ValueError(f"word {w}: range ({a}, {b}) breaks contiguity at {expect}")
            expect = b + 1
        if expect != self.subtoken_count:
            raise ValueError(
                f"ranges cover {expect} subtokens but subtoken_count={self.subtoken_count}"
            )

    @property
    def word_count(self) -> int:
        return len(self.ranges)

    def word_slice(self, w: int) -> tuple[int, int]:
        return self.ranges[w]

    def span_slice(self, i: int, j: int) -> tuple[int, int]:
        """Inclusive subtoken range covering words i..j."""
        if not 0 <= i <= j < len(self.ranges):
            raise ValueError(f"word span ({i}, {j}) out of range for {len(self.ranges)} words")
        return self.ranges[i][0], self.ranges[j][1]


@dataclass
class EncoderOutput:
    """One vector per subtoken plus a whole-sentence vector of the same size."""

    token_vectors: torch.Tensor
    sentence_vector: torch.Tensor

    def __post_init__(self) -> None:
        if self.token_vectors.ndim != 2:
            raise EncodingError("token_vectors must be (subtokens, dim)")
        if self.sentence_vector.shape != (self.token_vectors.shape[1],):
            raise EncodingError("sentence_vector dim must match token_vectors")
        if not bool(torch.isfinite(self.token_vectors).all()) or not bool(
            torch.isfinite(self.sentence_vector).all()
        ):
            raise EncodingError("encoder produced non-finite values")


class ToyTokenizer:
    """Greedy longest-prefix subword splitter over a fixed piece vocabulary.

    With an empty vocabulary every word stays whole (identity alignment).
    Single characters are always valid fallback pieces.
    """

    def __init__(self, subwords: Sequence[str] = ()):
        self.subwords = tuple(subwords)
        self._pieces = {p for p in self.subwords if p}
        self._max_len = max((len(p) for p in self._pieces), default=0)

    def split_word(self, word: str) -> list[str]:
        if not word:
            raise ValueError("cannot tokenize an empty word")
        if not self._pieces or word in self._pieces:
            return [word]
        out = []
        pos = 0
        while pos < len(word):
            piece = word[pos]
            for ln in range(min(self._max_len, len(word) - pos), 1, -1):
                cand = word[pos : pos + ln]
                if cand in self._pieces:
                    piece = cand
                    break
            out.append(piece)
            pos += len(piece)
        return out

    def subtokens(self, words: Sequence[str]) -> list[str]:
        out = []
        for w in words:
            out.extend(self.split_word(w))
        return out

    def align(self, words: Sequence[str]) -> SubwordAlignment:
        if not words:
            raise ValueError("cannot align an empty sentence")
        ranges = []
        pos = 0
        for w in words:
            n = len(self.split_word(w))
            ranges.append((pos, pos + n - 1))
            pos += n
        return SubwordAlignment(tuple(ranges), pos)


def _bucket(token: str, buckets: int) -> int:
    # crc32, not hash(): stable across processes regardless of PYTHONHASHSEED
    return zlib.crc32(token.encode("utf-8")) % buckets


class ToyEncoder(nn.Module):
    """Deterministic hash-embedding encoder with one local mixing layer.

    Each subtoken is embedded by a bucketed lookup; token vectors mix the
    embedding with its left and right neighbors, so the same word gets
    different vectors in different contexts.  The sentence vector runs the
    mean embedding through the same mixing layer.
    """

    def __init__(
        self,
        dim: int = 32,
        buckets: int = 2048,
        subwords: Sequence[str] = (),
        seed: int = 0,
    ):
        super().__init__()
        if dim < 1 or buckets < 1:
            raise ValueError("dim and buckets must be positive")
        self.dim = dim
        self.buckets = buckets
        self.tokenizer = ToyTokenizer(subwords)
        gen = torch.Generator().manual_seed(seed)
        self.embed = nn.Embedding(buckets, dim)
        self.mix = nn.Linear(3 * dim, dim)
        with torch.no_grad():
            self.embed.weight.normal_(0.0, 1.0, generator=gen)
            self.mix.weight.normal_(0.0, (3 * dim) ** -0.5, generator=gen)
            self.mix.bias.zero_()

    def tokenize_align(self, words: Sequence[str]) -> SubwordAlignment:
        return self.tokenizer.align(words)

    def forward(self, words: Sequence[str]) -> EncoderOutput:
        toks = self.tokenizer.subtokens(words)
        ids = torch.tensor([_bucket(t, self.buckets) for t in toks], dtype=torch.long)
        e = self.embed(ids)
        zero = e.new_zeros(1, self.dim)
        prev = torch.cat([zero, e[:-1]], dim=0)
        nxt = torch.cat([e[1:], zero], dim=0)
        token_vectors = torch.tanh(self.mix(torch.cat([prev, e, nxt], dim=-1)))
        mean = e.mean(dim=0)
        sentence_vector = torch.tanh(self.mix(torch.cat([mean, mean, mean], dim=-1)))
        return EncoderOutput(token_vectors, sentence_vector)


class PretrainedEncoder(nn.Module):
    """Adapter for a Hugging Face transformer encoder.

    Requires the `transformers` package and locally available weights for
    `model_name`.  Token vectors are the final hidden states of the word
    pieces; the sentence vector is the hidden state of the leading special
    token when present, else the mean over word pieces.
    """

    def __init__(self, model_name: str, dim: int | None = None):
        super().__init__()
        try:
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise EncodingError("pretrained encoder needs the 'transformers' package") from exc
        self.model_name = model_name
        self.hf_tokenizer = AutoTokenizer.from_pretrained(model_name, use_fast=True)
        self.hf_model = AutoModel.from_pretrained(model_name)
        hidden = int(self.hf_model.config.hidden_size)
        if dim is not None and dim != hidden:
            raise EncodingError(f"{model_name} hidden size is {hidden}, not {dim}")
        self.dim = hidden

    def _encode_words(self, words: Sequence[str]):
        if not words or any(w == "" for w in words):
            raise ValueError("words must be non-empty strings")
        return self.hf_tokenizer(list(words), is_split_into_words=True, return_tensors="pt")

    def tokenize_align(self, words: Sequence[str]) -> SubwordAlignment:
        enc = self._encode_words(words)
        ranges: list[list[int]] = [[-1, -1] for _ in words]
        pos = 0
        last = None
        for wid in enc.word_ids(0):
            if wid is None:
                continue
            if last is not None and wid < last:
                raise EncodingError("tokenizer produced non-monotonic word ids")
            if ranges[wid][0] == -1:
                ranges[wid][0] = pos
            ranges[wid][1] = pos
            pos += 1
            last = wid
        if any(a == -1 for a, _ in ranges):
            bad = [words[k] for k, (a, _) in enumerate(ranges) if a == -1]
            raise EncodingError(f"tokenizer dropped words: {bad!r}")
        return SubwordAlignment(tuple((a, b) for a, b in ranges), pos)

    def forward(self, words: Sequence[str]) -> EncoderOutput:
        enc = self._encode_words(words)
        hidden = self.hf_model(**enc).last_hidden_state[0]
        word_ids = enc.word_ids(0)
        keep = [k for k, wid in enumerate(word_ids) if wid is not None]
        token_vectors = hidden[keep]
        if keep and keep[0] > 0:
            sentence_vector = hidden[0]
        else:
            sentence_vector = token_vectors.mean(dim=0)
        return EncoderOutput(token_vectors, sentence_vector)


def build_encoder(
    kind: str,
    dim: int,
    model_name: str = "",
    buckets: int = 2048,
    subwords: Sequence[str] = (),
    seed: int = 0,
) -> nn.Module:
    if kind == "toy":
        return ToyEncoder(dim=dim, buckets=buckets, subwords=subwords, seed=seed)
    if kind == "pretrained":
        if not model_name:
            raise ValueError("pretrained encoder needs a model name")
        return PretrainedEncoder(model_name, dim=dim)
    raise ValueError(f"unknown encoder kind {kind!r} (expected 'toy' or 'pretrained')")
