"""Shared fixtures. The corpus-suite matrix is expensive (125 campaigns), so
it runs once per session, parallelized across processes, and is shared by the
acceptance tests for optimum recovery, replay, ablations, and criteria."""

from __future__ import annotations

import pytest

from popfuzz.suite import run_suite


@pytest.fixture(scope="session")
def corpus_suite():
    """Full matrix: 5 scenarios x 5 seeds x 5 engine variants. Workers default
    to the machine's core count; oversubscribing a small box only inflates the
    per-campaign wall-clock measurements the acceptance gate asserts on."""
    return run_suite()
