"""Two-level attention over story paragraphs, plus the ranking loss.

A query vector first attends over the tokens of each paragraph (producing
one summary vector per paragraph), then over the paragraph summaries of the
aligned set; the output is the attention-weighted sum of paragraph vectors.
Both attention stages are bilinear in the query.
"""

from __future__ import annotations

import torch
from torch import nn


class AttentiveReader(nn.Module):
    def __init__(self, query_dim: int, token_dim: int):
        super().__init__()
        self.token_weights = nn.Linear(query_dim, token_dim, bias=False)
        self.paragraph_weights = nn.Linear(query_dim, token_dim, bias=False)

    def attention(self, query: torch.Tensor, paragraphs: list[torch.Tensor]):
        """Token-level weights per paragraph, paragraph summaries, and
        paragraph-level weights."""
        if not paragraphs:
            raise ValueError("attentive reader needs at least one paragraph")
        token_query = self.token_weights(query)
        paragraph_query = self.paragraph_weights(query)
        alphas = []
        summaries = []
        for para in paragraphs:
            alpha = torch.softmax(para @ token_query, dim=0)
            alphas.append(alpha)
            summaries.append(alpha @ para)
        stacked = torch.stack(summaries)
        beta = torch.softmax(stacked @ paragraph_query, dim=0)
        return alphas, stacked, beta

    def forward(self, query: torch.Tensor, paragraphs: list[torch.Tensor]) -> torch.Tensor:
        _, summaries, beta = self.attention(query, paragraphs)
        return beta @ summaries


def margin_loss(scores: torch.Tensor, answer_index: int, margin: float) -> torch.Tensor:
    """Hinge over (correct, negative) pairs: zero exactly when the correct
    candidate beats every other by at least the margin."""
    correct = scores[answer_index]
    others = torch.cat([scores[:answer_index], scores[answer_index + 1 :]])
    if others.numel() == 0:
        return torch.zeros((), dtype=scores.dtype, device=scores.device)
    return torch.clamp(margin - correct + others, min=0).sum()
