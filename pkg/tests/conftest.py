import pytest

from topoms import synthetic
from topoms.topo import TopoConfig, run

# The CLI defaults.
DEFAULTS = dict(alpha=20.0, beta=200.0, epsilon=0.05, kappa=0.01)
# Same eps and kappa, with alpha and beta chosen so that a unit step on the
# unit square is detectable and the ball radius sits inside the smoothing
# length sqrt(alpha).
DETECTABLE = dict(alpha=0.02, beta=0.01, epsilon=0.05, kappa=0.01)


@pytest.fixture(scope="session")
def step128():
    return synthetic.step_image(128)


@pytest.fixture(scope="session")
def detectable_run(step128):
    return run(step128, TopoConfig(batch_size=1, **DETECTABLE))


# criterion number -> (passed, detail), filled by the acceptance module
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
