"""Model hyperparameters and defaults."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class ModelConfig:
    embed_dim: int = 200
    hidden_dim: int = 200
    margin: float = 0.1
    learning_rate: float = 1e-4
    batch_size: int = 32
    min_count: int = 2  # vocabulary cutoff; candidate tokens are always kept
    seed: int = 0
    # When a question's alignment row is empty, fall back to attending over
    # the whole story instead of failing.
    context_fallback_all: bool = True

    def __post_init__(self) -> None:
        if self.embed_dim <= 0 or self.hidden_dim <= 0:
            raise ValueError("dimensions must be positive")
        if self.margin <= 0:
            raise ValueError("margin must be positive")
