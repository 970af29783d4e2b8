from __future__ import annotations

from pathlib import Path

import pytest

from storyalign.aligner import Alignment
from storyalign.corpus import gold_path, load_corpus, load_gold
from storyalign.tasks import load_entity_tags

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixture_root() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return FIXTURES / "corpus"


@pytest.fixture(scope="session")
def gold_dir() -> Path:
    return FIXTURES / "gold"


@pytest.fixture(scope="session")
def tags_file() -> Path:
    return FIXTURES / "tags" / "entity.tags"


@pytest.fixture(scope="session")
def chapters():
    return {c.key: c for c in load_corpus(FIXTURES / "corpus")}


@pytest.fixture(scope="session")
def entity_tags():
    return load_entity_tags(FIXTURES / "tags" / "entity.tags")


@pytest.fixture(scope="session")
def gold_as_alignment():
    """Gold links wrapped as an Alignment, for feeding gold context to task
    builders and the evaluator."""

    def build(chapter_key: str) -> Alignment:
        gold = load_gold(gold_path(FIXTURES / "gold", chapter_key))
        return Alignment(chapter_key, gold.links, "gold")

    return build
