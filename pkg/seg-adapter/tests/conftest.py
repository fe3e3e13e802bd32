"""Shared fixtures."""

import pytest

from smoke import build_smoke_set


@pytest.fixture()
def smoke_set(tmp_path):
    return build_smoke_set(tmp_path)
