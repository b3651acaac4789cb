import numpy as np
import pytest

from dsc_rd import (
    LinearObservation,
    backward_channel,
    build_context,
    node_statistic,
)

ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")


class Built:
    """Package objects for an oracle Instance."""

    def __init__(self, inst):
        self.inst = inst
        self.own = LinearObservation(*inst.own, label="y")
        self.channels = [backward_channel(inst.source_cov, d) for d in inst.child_ds]
        self.side = None if inst.side is None else LinearObservation(*inst.side, label="side")
        self.stat = node_statistic(self.own, self.channels, inst.source_cov)
        self.ctx = build_context(inst.source_cov, self.stat, self.side)


@pytest.fixture
def build():
    return Built


@pytest.fixture
def s1():
    """Scalar two-hop case (setup_s1.json, node j).

    Σ_x = 1, own y_j (A=1, Σ=1), one child with D = 1/4, side y_k (A=1, Σ=1).
    """
    own = LinearObservation([[1.0]], [[1.0]], "y_j")
    child = backward_channel([[1.0]], [[0.25]])
    side = LinearObservation([[1.0]], [[1.0]], "y_k")
    stat = node_statistic(own, [child], [[1.0]])
    return {"own": own, "child": child, "side": side, "stat": stat,
            "ctx": build_context([[1.0]], stat, side)}


@pytest.fixture
def fifth_ctx():
    """Scalar context with Σ_{x|y_k} = 1/2 and Σ_{x|T,y_k} = 1/5 (statistic precision 3)."""
    stat = LinearObservation([[3.0]], [[3.0]], "T")
    return build_context([[1.0]], stat, LinearObservation([[1.0]], [[1.0]], "y_k"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
