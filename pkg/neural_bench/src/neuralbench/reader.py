"""Cloze model: bidirectional encoders, two-level attention conditioned on
the mask token's encoding, and cosine ranking of candidate embeddings."""

from __future__ import annotations

import logging

import torch
from torch import nn
from torch.nn import functional as F

from .attention import AttentiveReader, margin_loss
from .config import ModelConfig
from .data import UNK, ClozeExample, Vocabulary

logger = logging.getLogger(__name__)


class ClozeReader(nn.Module):
    def __init__(self, vocab: Vocabulary, config: ModelConfig):
        super().__init__()
        torch.manual_seed(config.seed)
        self.vocab = vocab
        self.config = config
        self.embedding = nn.Embedding(len(vocab), config.embed_dim, padding_idx=0)
        self.question_encoder = nn.LSTM(
            config.embed_dim, config.hidden_dim, bidirectional=True, batch_first=True
        )
        self.story_encoder = nn.LSTM(
            config.embed_dim, config.hidden_dim, bidirectional=True, batch_first=True
        )
        enc_dim = 2 * config.hidden_dim
        self.reader = AttentiveReader(enc_dim, enc_dim)
        self.answer_projection = nn.Linear(enc_dim, config.embed_dim)
        self._warned_unknown: set[str] = set()

    def _encode(self, encoder: nn.LSTM, toks: list[str]) -> torch.Tensor:
        ids = torch.tensor([self.vocab.ids(toks)], dtype=torch.long)
        output, _ = encoder(self.embedding(ids))
        return output[0]

    def encode_context(self, example: ClozeExample) -> list[torch.Tensor]:
        return [self._encode(self.story_encoder, para) for para in example.context]

    def answer_vector(self, example: ClozeExample) -> torch.Tensor:
        question = self._encode(self.question_encoder, example.question)
        mask_encoding = question[example.mask_position]
        context = self.reader(mask_encoding, self.encode_context(example))
        return self.answer_projection(mask_encoding + context)

    def candidate_scores(self, example: ClozeExample) -> torch.Tensor:
        for candidate in example.candidates:
            if self.vocab.id(candidate) == self.vocab.index[UNK] and candidate not in self._warned_unknown:
                self._warned_unknown.add(candidate)
                logger.warning("candidate %r not in vocabulary, using shared unknown embedding",
                               candidate)
        answer = self.answer_vector(example)
        ids = torch.tensor(self.vocab.ids(example.candidates), dtype=torch.long)
        return F.cosine_similarity(answer.unsqueeze(0), self.embedding(ids), dim=1)

    def predict(self, example: ClozeExample) -> int:
        with torch.no_grad():
            return int(self.candidate_scores(example).argmax())

    def loss(self, example: ClozeExample) -> torch.Tensor:
        return margin_loss(self.candidate_scores(example), example.answer_index,
                           self.config.margin)


def train_reader(
    model: ClozeReader,
    examples: list[ClozeExample],
    steps: int,
    learning_rate: float | None = None,
) -> list[float]:
    """Full-batch gradient steps; returns the loss trajectory."""
    optimizer = torch.optim.Adam(
        model.parameters(), lr=learning_rate or model.config.learning_rate
    )
    trajectory = []
    for _ in range(steps):
        optimizer.zero_grad()
        total = sum(model.loss(ex) for ex in examples) / len(examples)
        total.backward()
        optimizer.step()
        trajectory.append(float(total.detach()))
    return trajectory


def reader_accuracy(model: ClozeReader, examples: list[ClozeExample],
                    entity_only: bool = True) -> float:
    scored = [ex for ex in examples if ex.is_entity_question or not entity_only]
    if not scored:
        raise ValueError("no evaluable examples")
    hits = sum(model.predict(ex) == ex.answer_index for ex in scored)
    return hits / len(scored)
