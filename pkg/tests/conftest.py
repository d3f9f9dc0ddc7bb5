import numpy as np
import pytest

from miasched.model import (
    ChannelDistribution,
    LinkModel,
    PacketLengthDistribution,
    PowerMenu,
    RateTable,
    SystemConfig,
)

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


def make_model(menu, gains, probs, rates, lengths, lprobs=None):
    if lprobs is None:
        lprobs = [1.0 / len(lengths)] * len(lengths)
    return LinkModel(
        PowerMenu(tuple(menu)),
        ChannelDistribution(tuple(gains), tuple(probs)),
        RateTable(tuple(tuple(r) for r in rates)),
        PacketLengthDistribution(tuple(lengths), tuple(lprobs)),
    )


def random_model(rng: np.random.Generator, n_opt=None, n_gain=None, lengths=(1,), max_step=2):
    """Random valid model with monotone integer rates and an increasing menu."""
    n_opt = n_opt or int(rng.integers(1, 4))
    n_gain = n_gain or int(rng.integers(1, 4))
    menu = np.cumsum(rng.uniform(0.1, 1.0, n_opt))
    gains = np.cumsum(rng.uniform(0.1, 2.0, n_gain))
    probs = rng.dirichlet(np.ones(n_gain))
    probs = probs / probs.sum()
    steps = rng.integers(0, max_step + 1, size=(n_gain, n_opt))
    rates = 1 + np.cumsum(np.cumsum(steps, axis=0), axis=1)
    return make_model(
        menu.tolist(), gains.tolist(), probs.tolist(), rates.tolist(), list(lengths)
    )


@pytest.fixture(scope="session")
def small_model():
    # dyadic powers keep queue arithmetic exact
    return make_model([0.5, 1.5], [1.0, 4.0], [0.5, 0.5], [[1, 2], [2, 4]], [3, 6], [0.5, 0.5])


@pytest.fixture
def small_config():
    return SystemConfig(beta=1.0, v_param=10.0, horizon_frames=500, seed=11)


@pytest.fixture(scope="session")
def three_by_three():
    return make_model(
        [0.25, 1.0, 2.0],
        [0.5, 1.0, 3.0],
        [0.625, 0.25, 0.125],
        [[1, 1, 2], [1, 2, 3], [2, 3, 5]],
        [2, 5, 9],
        [0.25, 0.5, 0.25],
    )
