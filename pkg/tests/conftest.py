import numpy as np
import pytest

from idnc_d2d.net_model import NetworkState


def make_state(U, edges, has, num_files, eps=0.1):
    conn = np.eye(U, dtype=bool)
    for a, b in edges:
        conn[a, b] = conn[b, a] = True
    eras = np.full((U, U), float(eps))
    np.fill_diagonal(eras, 0.0)
    return NetworkState(conn, eras, [frozenset(h) for h in has], num_files)


# Seven devices, three files. Devices 2 and 3 hold everything; device 0
# needs file 0 like 1 and 4; device 5 needs file 1, device 6 needs file 2.
SEVEN_EDGES = [(0, 1), (0, 5), (1, 2), (2, 6), (3, 0), (3, 1), (3, 4)]
SEVEN_HAS = [{1, 2}, {1, 2}, {0, 1, 2}, {0, 1, 2}, {1, 2}, {0, 2}, {0, 1}]


@pytest.fixture
def seven_devices():
    return make_state(7, SEVEN_EDGES, SEVEN_HAS, 3, eps=0.0)


@pytest.fixture
def make():
    return make_state


# one PASS/FAIL line per acceptance criterion, echoed at the end of the run
_report_key = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    lines = request.config.stash.setdefault(_report_key, [])

    def add(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        lines.append(line)
        print(line)
        return passed

    return add


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_report_key, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
