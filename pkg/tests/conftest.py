import numpy as np
import pytest

from lambdatele.fockspace import CompositeState

# criterion number -> (description, passed, detail); filled by test_acceptance
ACCEPTANCE_RESULTS: dict = {}


def random_state(subsystems, rng, max_fock=None):
    """Normalized random state; cavity amplitudes only on levels <= max_fock."""
    dims = [s.dim for s in subsystems]
    t = rng.normal(size=dims) + 1j * rng.normal(size=dims)
    if max_fock is not None:
        for axis, sub in enumerate(subsystems):
            if not hasattr(sub, "n_max"):
                continue
            sel = [slice(None)] * len(dims)
            sel[axis] = slice(max_fock + 1, None)
            t[tuple(sel)] = 0.0
    t /= np.linalg.norm(t)
    return CompositeState(tuple(subsystems), t.reshape(-1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        desc, passed, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {n}: {desc} -- {detail}")
