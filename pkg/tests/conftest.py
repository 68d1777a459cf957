import numpy as np
import pytest

from miml.bagdata import Bag, MimlDataset, SynthSpec, generate_synthetic


def random_bags(rng, n, n_feat=2, max_size=4):
    return [Bag(f"b{i}", rng.normal(size=(int(rng.integers(1, max_size + 1)), n_feat)))
            for i in range(n)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_synth():
    return generate_synthetic(SynthSpec(n_bag=60, n_i_range=(2, 4), n_feat=4, n_labels=3,
                                        chain_dependency=True, seed=7, allow_empty=False))


@pytest.fixture
def tiny_ds():
    bags = (Bag("a", [[0.0, 1.0]]), Bag("b", [[2.0, 3.0], [4.0, 5.0]]))
    return MimlDataset(bags, np.array([[1, 0], [0, 1]]))


ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, ok: bool | None, detail: str) -> None:
    """Log one acceptance line; ``ok=None`` marks a skipped criterion."""
    status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
    line = f"[{status}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
