import numpy as np
import pytest

from qot import backend


@pytest.fixture
def bell():
    return backend.PureState(np.array([1, 0, 0, 1]) / np.sqrt(2))


def brute_partial_trace(amps, n, keep):
    """Loop-based partial trace, independent of the reshape/transpose path."""
    k = len(keep)
    rest = [q for q in range(n) if q not in keep]
    rho = np.zeros((2**k, 2**k), dtype=complex)

    def bit(idx, q):
        return (idx >> (n - 1 - q)) & 1

    for i in range(2**n):
        for j in range(2**n):
            if any(bit(i, q) != bit(j, q) for q in rest):
                continue
            a = sum(bit(i, q) << (k - 1 - m) for m, q in enumerate(keep))
            b = sum(bit(j, q) << (k - 1 - m) for m, q in enumerate(keep))
            rho[a, b] += amps[i] * np.conj(amps[j])
    return rho


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
