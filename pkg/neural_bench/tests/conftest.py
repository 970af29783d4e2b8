from __future__ import annotations

import pytest

from bench_fixtures import write_mirror_corpus


@pytest.fixture(scope="session")
def mirror_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("mirror")
    return write_mirror_corpus(root)
