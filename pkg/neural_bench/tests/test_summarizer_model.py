from __future__ import annotations

import logging

from bench_fixtures import overfit_summ_examples, symmetric_summ_examples
from neuralbench import ModelConfig, SummaryDecoder, summ_vocabulary, summarizer_accuracy
from neuralbench.data import EOS


def small_config(**overrides) -> ModelConfig:
    base = dict(embed_dim=16, hidden_dim=16, seed=10, learning_rate=8e-3, min_count=1)
    base.update(overrides)
    return ModelConfig(**base)


class TestRanking:
    def test_untrained_model_near_chance(self):
        examples = symmetric_summ_examples(n=500, seed=2)
        vocab = summ_vocabulary(examples, min_count=1)
        model = SummaryDecoder(vocab, small_config())
        accuracy = summarizer_accuracy(model, examples)
        assert 0.05 <= accuracy <= 0.15

    def test_empty_candidate_excluded(self, caplog):
        examples = overfit_summ_examples(n=2, seed=1)
        target = examples[0]
        target.candidates[1 if target.answer_index != 1 else 2] = []
        vocab = summ_vocabulary(examples, min_count=1)
        model = SummaryDecoder(vocab, small_config())
        with caplog.at_level(logging.WARNING):
            choice = model.rank(target)
        assert 0 <= choice < len(target.candidates)
        assert any("excluded" in rec.message for rec in caplog.records)


class TestGeneration:
    def test_shape_and_termination(self):
        examples = overfit_summ_examples(n=4, seed=3)
        vocab = summ_vocabulary(examples, min_count=1)
        model = SummaryDecoder(vocab, small_config())
        out = model.generate(examples[0].context, examples[0].seed, max_length=60)
        assert 1 <= len(out) <= 60
        assert all(isinstance(tok, str) for tok in out)
        assert out[-1] == EOS or len(out) == 60

    def test_deterministic_given_seed(self):
        examples = overfit_summ_examples(n=4, seed=3)
        vocab = summ_vocabulary(examples, min_count=1)
        first = SummaryDecoder(vocab, small_config(seed=5))
        second = SummaryDecoder(vocab, small_config(seed=5))
        assert first.generate(examples[0].context, examples[0].seed) == second.generate(
            examples[0].context, examples[0].seed
        )
