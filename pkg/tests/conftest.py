from __future__ import annotations

import os

import pytest
from hypothesis import HealthCheck, settings

from commutekit import corpus
from commutekit.commutativity import solver_available
from commutekit.lang import parse
from commutekit.lang.domain import input_spec

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

EXPLORABLE = sorted(n for n in corpus.names() if n not in corpus.EXPLORATION_EXCLUDED)


def load_prog(src: str):
    prog = parse(src)
    return prog, input_spec(prog.domain, prog.init)


@pytest.fixture
def needs_solver():
    if not solver_available():
        pytest.skip("no SMT solver available")
