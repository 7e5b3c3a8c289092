"""Shared fixtures for the holodisc test suite."""

import numpy as np
import pytest


@pytest.fixture
def rng():
    """Fresh seeded generator, one per test."""
    return np.random.default_rng(20260819)
