"""Expression tokenization and the bi-directional LSTM sentence encoder."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import torch
from torch import nn

from .errors import DatasetError

PAD = "<pad>"
UNK = "<unk>"
PAD_IDX = 0
UNK_IDX = 1


class Vocabulary:
    """Dense token index map; PAD is 0 and UNK is 1."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = [PAD, UNK]
        self.stoi: dict[str, int] = {PAD: PAD_IDX, UNK: UNK_IDX}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def index(self, token: str) -> int:
        return self.stoi.get(token, UNK_IDX)

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.index(t) for t in tokens]

    def to_dict(self) -> dict:
        return {"tokens": self.itos[2:]}

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        return cls(data["tokens"])

    def save(self, path: Path):
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "Vocabulary":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Vocabulary not found: {path}")
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))


def tokenize(text: str) -> list[str]:
    """Lower-cased whitespace tokenization."""
    return text.lower().split()


def build_vocab(corpus: Iterable[list[str]]) -> Vocabulary:
    """Vocabulary over every token of the corpus, in sorted order after PAD and UNK."""
    corpus = list(corpus)
    if not corpus:
        raise DatasetError("Cannot build a vocabulary from an empty corpus")
    return Vocabulary(sorted({tok for sentence in corpus for tok in sentence}))


@dataclass(slots=True)
class ExpressionEmbedding:
    r: torch.Tensor  # (d_r,)
    token_states: torch.Tensor  # (T, d_r)


class LanguageEncoder(nn.Module):
    """
    Word embedding, dropout on the embeddings, then a single-layer BiLSTM.

    The sentence vector r is [final forward state, final backward state]
    (pooling="final") or the mean of the per-token states (pooling="mean").
    """

    def __init__(
        self,
        vocab_size: int,
        word_dim: int = 32,
        d_r: int = 64,
        dropout: float = 0.1,
        max_tokens: int = 22,
        pooling: str = "final",
    ):
        super().__init__()
        if d_r % 2:
            raise ValueError("d_r must be even")
        self.max_tokens = max_tokens
        self.pooling = pooling
        self.embedding = nn.Embedding(vocab_size, word_dim, padding_idx=PAD_IDX)
        self.dropout = nn.Dropout(dropout)
        self.lstm = nn.LSTM(word_dim, d_r // 2, batch_first=True, bidirectional=True)

    def forward(self, token_ids: torch.Tensor) -> ExpressionEmbedding:
        if token_ids.numel() == 0:
            raise DatasetError("Cannot encode an empty expression")
        token_ids = token_ids[: self.max_tokens]
        embedded = self.dropout(self.embedding(token_ids.unsqueeze(0)))
        states, (h_n, _) = self.lstm(embedded)
        states = states.squeeze(0)
        if self.pooling == "mean":
            r = states.mean(dim=0)
        else:
            r = torch.cat([h_n[0, 0], h_n[1, 0]], dim=-1)
        return ExpressionEmbedding(r=r, token_states=states)


def encode_expression(tokens: list[str], vocab: Vocabulary, encoder: LanguageEncoder) -> ExpressionEmbedding:
    """Embed a token list; tokens past max_tokens are dropped, unknown tokens map to UNK."""
    if not tokens:
        raise DatasetError("Cannot encode an empty expression")
    ids = torch.tensor(vocab.encode(tokens[: encoder.max_tokens]), dtype=torch.long)
    return encoder(ids)
