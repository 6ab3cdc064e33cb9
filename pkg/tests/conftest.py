import numpy as np
import pytest

from xdrlab.topology import LinkAttr, NetworkGraph


class TwoActionEnv:
    """Contrived environment with a brute-force-known optimal policy:
    action 0 always pays 1, action 1 always pays 0, regardless of state.
    The state one-hot encodes a two-value clock so both states get visited.
    """

    state_dim = 2
    n_actions = 2

    def __init__(self, horizon: int = 10, pay: tuple[float, float] = (1.0, 0.0)):
        self.horizon = horizon
        self.pay = pay
        self._t = 0

    def _state(self) -> np.ndarray:
        vec = np.zeros(2)
        vec[self._t % 2] = 1.0
        return vec

    def reset(self) -> np.ndarray:
        self._t = 0
        return self._state()

    def step(self, action: int):
        r = self.pay[action]
        self._t += 1
        return self._state(), r, self._t >= self.horizon


def line_graph(names, cap=10.0, delay=1.0, domains=None):
    domains = domains or {n: 1 for n in names}
    edges = {}
    for a, b in zip(names, names[1:]):
        key = (min(a, b), max(a, b))
        edges[key] = LinkAttr(cap, delay, domains[a] != domains[b])
    return NetworkGraph(list(names), edges, domains)


@pytest.fixture
def two_action_env():
    return TwoActionEnv()
