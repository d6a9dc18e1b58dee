import sys

import pytest

from vbsprep import embedding, recompiler


@pytest.fixture(scope="session")
def recompiled_block():
    """Full-budget 8-layer recompilation of the embedded projector.

    Shared across modules because the optimizer run is the most expensive
    fixture in the suite; seed 7 reproducibly reaches loss < 1e-6.
    """
    cfg = recompiler.OptimizerConfig(seed=7)
    res = recompiler.recompile(embedding.embedded_unitary("direct"), 8, cfg)
    assert res.final_loss < 1e-6
    return res


def pytest_terminal_summary(terminalreporter):
    """Re-emit acceptance verdicts so they show even with capture enabled."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICT_LINES", None)
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
