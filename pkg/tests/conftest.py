import numpy as np
import pytest

from pmdlab.instances import InstanceSpec, generate

_CRITERIA = {}


def record_criterion(number, title, passed, detail=""):
    """Remember one acceptance outcome and echo it immediately."""
    line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2}: {title}"
    if detail:
        line += f" ({detail})"
    _CRITERIA[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[n])


@pytest.fixture
def cycle_mdp():
    """Two states, one action, deterministic swap, regret 1 in state 1 only."""
    from pmdlab.mdp import Dmdp

    P = np.array([[[0.0, 1.0]], [[1.0, 0.0]]])
    R = np.array([[0.0], [1.0]])
    return Dmdp(P, R, 0.5)


@pytest.fixture
def small_random():
    return generate(InstanceSpec(num_states=4, num_actions=3, gamma=0.9, seed=7))
