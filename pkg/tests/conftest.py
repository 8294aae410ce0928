import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from relugeom import init_mlp  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


def random_mlp(arch, seed, bias_scale=0.5):
    """init_mlp weights with Gaussian biases, so hyperplanes avoid the origin."""
    mlp = init_mlp(arch, seed)
    rng = np.random.default_rng(seed + 10_000)
    params = [p if i % 2 == 0 else rng.normal(0.0, bias_scale, p.shape)
              for i, p in enumerate(mlp.params())]
    return mlp.with_params(params)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
