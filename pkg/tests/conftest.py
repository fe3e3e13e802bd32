"""Shared fixtures."""

import pytest

from synth import build_synthetic_dataset


@pytest.fixture(scope="session")
def synthetic_dataset(tmp_path_factory):
    """Session-scoped dataset; tests must not mutate it."""
    root = tmp_path_factory.mktemp("synth")
    return build_synthetic_dataset(root)
