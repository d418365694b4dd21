import sys

import pytest
from hypothesis import settings

from timedrelease.group import example_group, make_params
from timedrelease.protocol import build_request, keygen

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")

WORKED_SKS = (3, 4, 5, 6)


@pytest.fixture
def toy():
    return example_group()


@pytest.fixture(scope="session")
def curve():
    return make_params("curve")


@pytest.fixture
def worked(toy):
    """The worked toy example: 4 holders, t=3, k=22, r=7."""
    kps = [keygen(toy, sk=sk, index=i) for i, sk in enumerate(WORKED_SKS, start=1)]
    req = build_request(toy, 22, 7, b"worked message", 1000, [kp.pk for kp in kps], 3)
    return toy, kps, req


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, (_, line) in sorted(mod.RESULTS.items()):
        terminalreporter.write_line(line)
