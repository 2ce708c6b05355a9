import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, passed: bool | None, detail: str) -> None:
    """Queue one summary line; ``passed=None`` marks a skipped criterion."""
    status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append(f"[{status}] {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def gaussian_blobs(seed: int, n_per: int = 300) -> np.ndarray:
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-5, 5, size=(3, 2))
    return np.concatenate([rng.normal(c, 0.7, size=(n_per, 2)) for c in centers])


def fixture_datasets() -> dict[str, np.ndarray]:
    """The seeded data sets on which derivative and unimodality checks run."""
    from svddtrace.datagen import ShapeSpec, sample_shape_interior, two_donuts_circle

    return {
        "blobs-0": gaussian_blobs(0),
        "blobs-1": gaussian_blobs(1),
        "donuts-0": two_donuts_circle(0)[0],
        "sphere5-0": sample_shape_interior(ShapeSpec("sphere", 5), 1000, 0),
        "sphere5-1": sample_shape_interior(ShapeSpec("sphere", 5), 1000, 1),
    }


@pytest.fixture(scope="session")
def datasets():
    return fixture_datasets()
