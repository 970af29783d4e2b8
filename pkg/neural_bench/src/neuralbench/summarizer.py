"""Summary-completion model: an LSTM decoder that re-attends over the
aligned story paragraphs at every step, ranks candidate completions by mean
token log-likelihood, and can free-run when no candidates are given."""

from __future__ import annotations

import logging

import torch
from torch import nn
from torch.nn import functional as F

from .attention import AttentiveReader
from .config import ModelConfig
from .data import BOS, EOS, SummExample, Vocabulary

logger = logging.getLogger(__name__)


class SummaryDecoder(nn.Module):
    def __init__(self, vocab: Vocabulary, config: ModelConfig):
        super().__init__()
        torch.manual_seed(config.seed)
        self.vocab = vocab
        self.config = config
        self.embedding = nn.Embedding(len(vocab), config.embed_dim, padding_idx=0)
        self.story_encoder = nn.LSTM(
            config.embed_dim, config.hidden_dim, bidirectional=True, batch_first=True
        )
        self.reader = AttentiveReader(config.hidden_dim, 2 * config.hidden_dim)
        self.cell = nn.LSTMCell(config.embed_dim + 2 * config.hidden_dim, config.hidden_dim)
        self.out_projection = nn.Linear(config.hidden_dim, len(vocab))

    def encode_context(self, context: list[list[str]]) -> list[torch.Tensor]:
        encodings = []
        for para in context:
            ids = torch.tensor([self.vocab.ids(para)], dtype=torch.long)
            output, _ = self.story_encoder(self.embedding(ids))
            encodings.append(output[0])
        return encodings

    def step_scores(self, context_encodings: list[torch.Tensor],
                    target: list[str]) -> torch.Tensor:
        """Log-probabilities (len(target), vocab) of each target position
        given the teacher-forced prefix."""
        inputs = [BOS] + target[:-1]
        hidden = torch.zeros(self.config.hidden_dim)
        state = torch.zeros(self.config.hidden_dim)
        rows = []
        for tok in inputs:
            context = self.reader(hidden, context_encodings)
            emb = self.embedding(torch.tensor(self.vocab.id(tok), dtype=torch.long))
            hidden, state = self.cell(
                torch.cat([emb, context]).unsqueeze(0),
                (hidden.unsqueeze(0), state.unsqueeze(0)),
            )
            hidden, state = hidden[0], state[0]
            rows.append(F.log_softmax(self.out_projection(hidden), dim=0))
        return torch.stack(rows)

    def loss(self, example: SummExample) -> torch.Tensor:
        target = example.seed + example.candidates[example.answer_index] + [EOS]
        scores = self.step_scores(self.encode_context(example.context), target)
        ids = torch.tensor(self.vocab.ids(target), dtype=torch.long)
        return F.nll_loss(scores, ids)

    def rank(self, example: SummExample) -> int:
        """Mean log-likelihood of each candidate's tokens after the seed;
        empty candidates are excluded from the ranking."""
        with torch.no_grad():
            context = self.encode_context(example.context)
            best_index, best_value = 0, -float("inf")
            for k, candidate in enumerate(example.candidates):
                if not candidate:
                    logger.warning("%s: empty candidate %d excluded", example.item_id, k)
                    continue
                target = example.seed + candidate + [EOS]
                scores = self.step_scores(context, target)
                span = range(len(example.seed), len(example.seed) + len(candidate))
                ids = self.vocab.ids(candidate)
                mean = sum(float(scores[t, ids[t - len(example.seed)]]) for t in span) / len(span)
                if mean > best_value:
                    best_index, best_value = k, mean
        return best_index

    def generate(self, context: list[list[str]], seed: list[str],
                 max_length: int = 60) -> list[str]:
        """Greedy continuation of a teacher-forced seed, stopping at the end
        token or the length cap. Returns the generated tokens only."""
        with torch.no_grad():
            encodings = self.encode_context(context)
            hidden = torch.zeros(self.config.hidden_dim)
            state = torch.zeros(self.config.hidden_dim)

            def step(tok: str) -> torch.Tensor:
                nonlocal hidden, state
                context_vec = self.reader(hidden, encodings)
                emb = self.embedding(torch.tensor(self.vocab.id(tok), dtype=torch.long))
                new_h, new_s = self.cell(
                    torch.cat([emb, context_vec]).unsqueeze(0),
                    (hidden.unsqueeze(0), state.unsqueeze(0)),
                )
                hidden, state = new_h[0], new_s[0]
                return self.out_projection(hidden)

            logits = None
            for tok in [BOS] + seed:
                logits = step(tok)
            inverse = {v: k for k, v in self.vocab.index.items()}
            generated: list[str] = []
            while len(generated) < max_length:
                next_tok = inverse[int(logits.argmax())]
                generated.append(next_tok)
                if next_tok == EOS:
                    break
                logits = step(next_tok)
            return generated


def train_summarizer(
    model: SummaryDecoder,
    examples: list[SummExample],
    steps: int,
    learning_rate: float | None = None,
) -> list[float]:
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


def summarizer_accuracy(model: SummaryDecoder, examples: list[SummExample]) -> float:
    if not examples:
        raise ValueError("no examples")
    hits = sum(model.rank(ex) == ex.answer_index for ex in examples)
    return hits / len(examples)
