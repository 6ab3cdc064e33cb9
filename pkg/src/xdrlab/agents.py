"""Learning and decision layer: dueling Q-network routing agents, the GRU
traffic predictor, and single/multi-agent path selection.

One agent per scope picks among k candidate path matrices. Its state is the
current normalized traffic matrix concatenated with the predicted next one;
its reward blends the normalized link indicators along the links its chosen
matrix actually uses, positive for remaining bandwidth and negative for
everything else, so routing through currently-healthy links pays.

Training is offline over collected telemetry history: an episode replays a
stretch of recorded intervals, and the reward for an action is evaluated
against the indicators of the following interval, which is what makes the
predicted-next-matrix half of the state informative.

Cross-domain routing composes per-domain choices: the path for a
cross-domain pair starts from the root agent's global path and substitutes
each in-domain sub-segment with that domain's own chosen path between the
same entry and exit switches, falling back to the untouched global path if
the substitution would break simplicity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .neural import DenseLayer, GruCell, Optimizer
from .routing import CandidatePathSet, PathMatrix
from .telemetry import DEFAULT_BOUNDS, InfoMatrices, TrafficMatrix, normalize_tm
from .topology import NetworkGraph


class AgentError(Exception):
    pass


class EmptyPathSet(AgentError):
    """Chosen path matrix traverses no links in scope."""


class InsufficientPool(AgentError):
    pass


class TooShort(AgentError):
    pass


class WrongWindow(AgentError):
    pass


# ---------------------------------------------------------------------------
# exploration schedule


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear exploration decay from e_max to e_min over total_steps.

    The alternative cumulative-decay variant (epsilon dropping by
    steps*decay each iteration) is available behind ``variant="cumulative"``
    but stays off by default.
    """

    e_max: float = 0.95
    e_min: float = 0.05
    total_steps: int = 10_000
    variant: str = "linear"
    decay: float = 1e-6

    def __post_init__(self) -> None:
        if not 0.0 <= self.e_min <= self.e_max <= 1.0:
            raise AgentError(f"need 0 <= e_min <= e_max <= 1, got {self}")
        if self.variant not in ("linear", "cumulative"):
            raise AgentError(f"unknown schedule variant {self.variant!r}")

    def epsilon_at(self, steps: int) -> float:
        if steps < 0:
            raise AgentError(f"steps must be >= 0, got {steps}")
        if self.variant == "cumulative":
            drop = self.decay * steps * (steps + 1) / 2.0
            return max(self.e_min, self.e_max - drop)
        u = min(1.0, steps / self.total_steps) if self.total_steps else 1.0
        if u == 0.0:
            return self.e_max
        if u == 1.0:
            return self.e_min
        return self.e_max + u * (self.e_min - self.e_max)


def select_action(
    qnet: "DuelingQNet", state: np.ndarray, epsilon: float, rng: np.random.Generator
) -> int:
    """Exploring action with probability epsilon, else greedy argmax with
    lowest-index tie-breaking."""
    if not 0.0 <= epsilon <= 1.0:
        raise AgentError(f"epsilon must be in [0, 1], got {epsilon}")
    x = rng.random()
    if x > 1.0 - epsilon:
        return int(rng.integers(qnet.n_actions))
    return int(np.argmax(qnet.q_values(state)))


# ---------------------------------------------------------------------------
# dueling Q-network


class DuelingQNet:
    """Shared dense trunk with a scalar state-value head and a per-action
    advantage head; Q is their plain sum."""

    def __init__(
        self,
        state_dim: int,
        n_actions: int,
        hidden: tuple[int, int] = (128, 128),
        seed: int = 0,
    ) -> None:
        rng = np.random.default_rng(seed)
        self.state_dim = state_dim
        self.n_actions = n_actions
        self.hidden = tuple(hidden)
        self.trunk = [
            DenseLayer(state_dim, hidden[0], "relu", rng),
            DenseLayer(hidden[0], hidden[1], "relu", rng),
        ]
        self.value_head = DenseLayer(hidden[1], 1, "identity", rng)
        self.adv_head = DenseLayer(hidden[1], n_actions, "identity", rng)

    def _blocks(self) -> dict[str, DenseLayer]:
        return {
            "trunk0": self.trunk[0],
            "trunk1": self.trunk[1],
            "value": self.value_head,
            "advantage": self.adv_head,
        }

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, layer in self._blocks().items():
            for name, arr in layer.params().items():
                out[f"{prefix}/{name}"] = arr
        return out

    def forward(self, states: np.ndarray) -> tuple[np.ndarray, tuple]:
        h, c0 = self.trunk[0].forward(states)
        h, c1 = self.trunk[1].forward(h)
        vf, cv = self.value_head.forward(h)
        af, ca = self.adv_head.forward(h)
        return vf + af, (c0, c1, cv, ca)

    def backward(self, cache: tuple, dq: np.ndarray) -> dict[str, np.ndarray]:
        c0, c1, cv, ca = cache
        dvf = dq.sum(axis=1, keepdims=True)
        dh_v, gv = self.value_head.backward(cv, dvf)
        dh_a, ga = self.adv_head.backward(ca, dq)
        dh, g1 = self.trunk[1].backward(c1, dh_v + dh_a)
        _, g0 = self.trunk[0].backward(c0, dh)
        grads = {}
        for prefix, g in (("trunk0", g0), ("trunk1", g1), ("value", gv), ("advantage", ga)):
            for name, arr in g.items():
                grads[f"{prefix}/{name}"] = arr
        return grads

    def q_values(self, state: np.ndarray) -> np.ndarray:
        q, _ = self.forward(np.asarray(state, dtype=float).reshape(1, -1))
        return q[0]

    def value_and_advantage(self, state: np.ndarray) -> tuple[float, np.ndarray]:
        x = np.asarray(state, dtype=float).reshape(1, -1)
        h, _ = self.trunk[0].forward(x)
        h, _ = self.trunk[1].forward(h)
        vf, _ = self.value_head.forward(h)
        af, _ = self.adv_head.forward(h)
        return float(vf[0, 0]), af[0]

    def clone(self) -> "DuelingQNet":
        twin = DuelingQNet(self.state_dim, self.n_actions, self.hidden)
        src, dst = self.params(), twin.params()
        for name in src:
            np.copyto(dst[name], src[name])
        return twin


def soft_update(target: DuelingQNet, policy: DuelingQNet, tau: float) -> None:
    """target <- tau * policy + (1 - tau) * target, blockwise."""
    tp, pp = target.params(), policy.params()
    for name in tp:
        tp[name] *= 1.0 - tau
        tp[name] += tau * pp[name]


# ---------------------------------------------------------------------------
# replay buffer


class ReplayBuffer:
    def __init__(self, capacity: int = 50_000) -> None:
        if capacity < 1:
            raise AgentError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._items: list[tuple] = []

    def push(self, transition: tuple) -> None:
        self._items.append(transition)
        if len(self._items) > self.capacity:
            self._items.pop(0)

    def __len__(self) -> int:
        return len(self._items)

    def sample(self, n: int, rng: np.random.Generator) -> list[tuple]:
        if n > len(self._items):
            raise InsufficientPool(f"wanted {n} of {len(self._items)} transitions")
        picks = rng.choice(len(self._items), size=n, replace=False)
        return [self._items[i] for i in picks]


# ---------------------------------------------------------------------------
# reward


@dataclass(frozen=True)
class RewardWeights:
    """Indicator weights for the reward blend, each in [0, 1]; remaining
    bandwidth rewards, the other five penalise."""

    bw: float = 0.5
    delay: float = 0.4
    loss: float = 0.3
    used_bw: float = 0.3
    drops: float = 0.3
    errors: float = 0.3

    def __post_init__(self) -> None:
        for name in ("bw", "delay", "loss", "used_bw", "drops", "errors"):
            w = getattr(self, name)
            if not 0.0 <= w <= 1.0:
                raise AgentError(f"reward weight {name}={w} outside [0, 1]")


def _normalized_indicator(info: InfoMatrices, name: str) -> dict[tuple[int, int], float]:
    """Min-max map of one indicator's on-link entries to [0, 1]; a
    degenerate range maps to all zeros."""
    mat = info.indicator(name)
    pairs = info.link_indices()
    vals = np.array([mat[i, j] for i, j in pairs])
    lo, hi = vals.min(), vals.max()
    if hi == lo:
        return {p: 0.0 for p in pairs}
    return {p: float((mat[i, j] - lo) / (hi - lo)) for p, (i, j) in zip(pairs, pairs)}


def reward(info: InfoMatrices, chosen_paths: PathMatrix, phi: RewardWeights) -> float:
    """Signed blend of per-indicator normalized means over the links the
    chosen path matrix traverses (each link counted once)."""
    node_idx = {n: i for i, n in enumerate(info.nodes)}
    link_set = set(info.links)
    traversed = [l for l in chosen_paths.traversed_links() if l in link_set]
    if not traversed:
        raise EmptyPathSet(f"no links traversed in scope {info.scope}")
    idx_pairs = [(node_idx[u], node_idx[v]) for u, v in traversed]
    means = {}
    for name in ("bw", "delay", "loss", "used_bw", "drops", "errors"):
        norm = _normalized_indicator(info, name)
        means[name] = float(np.mean([norm[p] for p in idx_pairs]))
    return (
        phi.bw * means["bw"]
        - phi.delay * means["delay"]
        - phi.loss * means["loss"]
        - phi.used_bw * means["used_bw"]
        - phi.drops * means["drops"]
        - phi.errors * means["errors"]
    )


# ---------------------------------------------------------------------------
# offline training environment


@dataclass
class AgentEnvSpec:
    """Static description of one agent's decision problem."""

    scope: int | str
    state_dim: int
    n_actions: int
    gamma: float = 0.9
    phi: RewardWeights = field(default_factory=RewardWeights)
    horizon: int = 50
    candidates: CandidatePathSet | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise AgentError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.n_actions < 1:
            raise AgentError("need at least one action")


class OfflineRoutingEnv:
    """Episode source blending recorded telemetry with the simulator.

    States come from the recorded history: the normalized current matrix
    concatenated with the predictor's next-step estimate (zeros for the
    no-prediction ablation). Rewards come from the simulator when a
    ``RewardSimulator`` is attached: the upcoming interval's recorded
    demands are routed with the chosen candidate matrix and one interval is
    simulated, so the chosen paths are scored on link indicators that
    include the congestion the action itself causes — and the predicted
    matrix carries exactly the information the reward depends on, the
    upcoming traffic. Without a reward simulator, the chosen matrix is
    scored against the recorded next-interval indicators as-is.
    """

    def __init__(
        self,
        frames: list[InfoMatrices],
        raw_tms: list[TrafficMatrix],
        candidates: CandidatePathSet,
        phi: RewardWeights,
        *,
        seq: int = 5,
        horizon: int = 50,
        bounds: tuple[float, float] = DEFAULT_BOUNDS,
        predictor: "GruPredictor | None" = None,
        reward_sim=None,
        seed: int = 0,
    ) -> None:
        if len(frames) != len(raw_tms):
            raise AgentError("frames and traffic matrices must align")
        if len(frames) < seq + 2:
            raise InsufficientPool(
                f"history of {len(frames)} intervals cannot cover window {seq}"
            )
        self.frames = frames
        self.candidates = candidates
        self.phi = phi
        self.seq = seq
        self.horizon = horizon
        self.bounds = bounds
        self.predictor = predictor
        self.reward_sim = reward_sim
        self.rng = np.random.default_rng(seed)
        self.norm_tms = [normalize_tm(tm, *bounds) for tm in raw_tms]
        self._flats = [tm.flat() for tm in self.norm_tms]
        dim = self._flats[0].size
        self.state_dim = 2 * dim
        self.n_actions = len(candidates)
        self._reward_cache: dict[tuple[int, int], float] = {}
        self._pred_cache: dict[int, np.ndarray] = {}
        self._t = 0
        self._steps = 0

    def _predicted(self, t: int) -> np.ndarray:
        if self.predictor is None:
            return np.zeros_like(self._flats[t])
        if t not in self._pred_cache:
            window = self.norm_tms[t - self.seq + 1 : t + 1]
            self._pred_cache[t] = self.predictor.predict_tm(window).flat()
        return self._pred_cache[t]

    def state(self) -> np.ndarray:
        return np.concatenate([self._flats[self._t], self._predicted(self._t)])

    def reset(self) -> np.ndarray:
        hi = len(self.frames) - 2
        lo = self.seq - 1
        self._t = int(self.rng.integers(lo, max(lo + 1, hi - self.horizon + 1)))
        self._steps = 0
        return self.state()

    def _reward_at(self, t: int, action: int) -> float:
        if self.reward_sim is not None:
            return self.reward_sim.score(t, self.candidates[action], self.phi)
        return reward(self.frames[t], self.candidates[action], self.phi)

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        key = (self._t + 1, action)
        if key not in self._reward_cache:
            self._reward_cache[key] = self._reward_at(self._t + 1, action)
        ur = self._reward_cache[key]
        self._t += 1
        self._steps += 1
        done = self._steps >= self.horizon or self._t >= len(self.frames) - 1
        return self.state(), ur, done


# ---------------------------------------------------------------------------
# DQN training


@dataclass
class DqnHyper:
    lr: float = 1e-3
    batch: int = 32
    gamma: float = 0.9
    freq: int = 100
    tau: float = 0.1
    episodes: int = 60
    hidden: tuple[int, int] = (128, 128)
    buffer_capacity: int = 50_000
    sched: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    seed: int = 0


def bellman_targets(
    rewards: np.ndarray, q_next_max: np.ndarray, terminal: np.ndarray, gamma: float
) -> np.ndarray:
    """TD targets: the bare reward on terminal transitions, otherwise the
    reward plus the discounted best target-network value."""
    return rewards + gamma * q_next_max * (1.0 - terminal)


def train_dqn(env, hyper: DqnHyper) -> tuple[DuelingQNet, list[float]]:
    """Train a dueling Q-network against an episodic environment.

    The environment contract: ``reset() -> state``, ``step(action) ->
    (state, reward, done)``, plus ``state_dim`` and ``n_actions``
    attributes. Returns the policy network and per-episode reward sums.
    """
    rng = np.random.default_rng(hyper.seed)
    policy = DuelingQNet(env.state_dim, env.n_actions, hyper.hidden, seed=hyper.seed)
    target = policy.clone()
    opt = Optimizer("adam", lr=hyper.lr)
    buffer = ReplayBuffer(hyper.buffer_capacity)
    steps = 0
    episode_rewards: list[float] = []
    for _ in range(hyper.episodes):
        state = env.reset()
        done = False
        total = 0.0
        while not done:
            eps = hyper.sched.epsilon_at(steps)
            action = select_action(policy, state, eps, rng)
            nxt, ur, done = env.step(action)
            buffer.push((state, action, ur, nxt, done))
            total += ur
            if len(buffer) >= hyper.batch:
                batch = buffer.sample(hyper.batch, rng)
                states = np.stack([b[0] for b in batch])
                actions = np.array([b[1] for b in batch])
                rewards = np.array([b[2] for b in batch])
                nexts = np.stack([b[3] for b in batch])
                terminal = np.array([b[4] for b in batch], dtype=float)
                q_next, _ = target.forward(nexts)
                t_value = bellman_targets(
                    rewards, q_next.max(axis=1), terminal, hyper.gamma
                )
                q, cache = policy.forward(states)
                rows = np.arange(hyper.batch)
                p_value = q[rows, actions]
                dq = np.zeros_like(q)
                dq[rows, actions] = 2.0 * (p_value - t_value) / hyper.batch
                grads = policy.backward(cache, dq)
                opt.update(policy.params(), grads)
            steps += 1
            if steps % hyper.freq == 0:
                soft_update(target, policy, hyper.tau)
            state = nxt
        episode_rewards.append(total)
    return policy, episode_rewards


# ---------------------------------------------------------------------------
# GRU traffic predictor


def timeseriesify(series: list, seq: int) -> tuple[list[list], list]:
    """Sliding windows over an ordered history: window i covers positions
    [i, i+seq) and its target is position i+seq."""
    if len(series) <= seq:
        raise TooShort(f"history of {len(series)} cannot form windows of {seq}")
    windows = [list(series[i : i + seq]) for i in range(len(series) - seq)]
    targets = [series[i + seq] for i in range(len(series) - seq)]
    return windows, targets


@dataclass
class GruHyper:
    lr: float = 1e-3
    batch: int = 8
    epochs: int = 60
    seed: int = 0


class GruPredictor:
    """Stacked GRU cells plus a linear head mapping the final hidden state
    to a next-step matrix estimate; outputs clamp to the normalization range."""

    def __init__(
        self,
        dim: int,
        hidden_dim: int = 64,
        seq: int = 5,
        n_layers: int = 1,
        bounds: tuple[float, float] = DEFAULT_BOUNDS,
        seed: int = 0,
    ) -> None:
        rng = np.random.default_rng(seed)
        self.dim = dim
        self.hidden_dim = hidden_dim
        self.seq = seq
        self.bounds = bounds
        self.cells = [
            GruCell(dim if i == 0 else hidden_dim, hidden_dim, rng)
            for i in range(n_layers)
        ]
        self.head = DenseLayer(hidden_dim, dim, "identity", rng)

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for i, cell in enumerate(self.cells):
            for name, arr in cell.params().items():
                out[f"gru{i}/{name}"] = arr
        for name, arr in self.head.params().items():
            out[f"head/{name}"] = arr
        return out

    def _forward(self, xs: list[np.ndarray]) -> tuple[np.ndarray, list, tuple]:
        batch = xs[0].shape[0]
        layer_inputs = xs
        all_caches = []
        for cell in self.cells:
            h = np.zeros((batch, self.hidden_dim))
            caches = []
            outs = []
            for x in layer_inputs:
                h, cache = cell.step(x, h)
                caches.append(cache)
                outs.append(h)
            all_caches.append(caches)
            layer_inputs = outs
        pred, head_cache = self.head.forward(h)
        return pred, all_caches, head_cache

    def _backward(self, all_caches, head_cache, dpred) -> dict[str, np.ndarray]:
        dh, head_grads = self.head.backward(head_cache, dpred)
        grads = {f"head/{k}": v for k, v in head_grads.items()}
        dh_steps = None
        dh_final = dh
        for i in range(len(self.cells) - 1, -1, -1):
            cell_grads, dxs, _ = self.cells[i].backward_sequence(
                all_caches[i], dh_final, dh_steps
            )
            for name, arr in cell_grads.items():
                grads[f"gru{i}/{name}"] = arr
            dh_final = None
            dh_steps = dxs
        return grads

    def predict_vec(self, window: list[np.ndarray]) -> np.ndarray:
        if len(window) != self.seq:
            raise WrongWindow(f"need exactly {self.seq} matrices, got {len(window)}")
        xs = [np.asarray(x, dtype=float).reshape(1, -1) for x in window]
        pred, _, _ = self._forward(xs)
        mu1, mu2 = self.bounds
        return np.clip(pred[0], mu1, mu2)

    def predict_tm(self, window: list[TrafficMatrix]) -> TrafficMatrix:
        if len(window) != self.seq:
            raise WrongWindow(f"need exactly {self.seq} matrices, got {len(window)}")
        scopes = {tm.scope for tm in window}
        if len(scopes) != 1:
            raise WrongWindow(f"window mixes scopes {scopes}")
        last = window[-1]
        vec = self.predict_vec([tm.flat() for tm in window])
        n = last.dim
        values = vec.reshape(n, n)
        mu1, mu2 = self.bounds
        out = np.full((n, n), mu2)
        for i, j in last.link_indices():
            out[i, j] = values[i, j]
            out[j, i] = values[j, i]
        return TrafficMatrix(
            last.scope, last.tick + 1, last.nodes, list(last.links), out,
            normalized=True, bounds=self.bounds,
        )


def train_gru(
    pred: GruPredictor, windows: list[list], targets: list, hyper: GruHyper
) -> list[float]:
    """Epochs of truncated backprop over the training windows; hidden state
    carries within a window and resets between windows. Returns per-epoch
    mean squared error."""
    if not windows:
        raise TooShort("no training windows")

    def to_vec(x):
        return x.flat() if isinstance(x, TrafficMatrix) else np.asarray(x, dtype=float)

    xs_all = [[to_vec(x) for x in w] for w in windows]
    ys_all = [to_vec(t) for t in targets]
    opt = Optimizer("adam", lr=hyper.lr)
    trace: list[float] = []
    for _ in range(hyper.epochs):
        losses = []
        for start in range(0, len(xs_all), hyper.batch):
            chunk = slice(start, start + hyper.batch)
            xs = [
                np.stack([w[t] for w in xs_all[chunk]])
                for t in range(pred.seq)
            ]
            ys = np.stack(ys_all[chunk])
            out, caches, head_cache = pred._forward(xs)
            diff = out - ys
            losses.append(float(np.mean(diff * diff)))
            dpred = 2.0 * diff / diff.size
            grads = pred._backward(caches, head_cache, dpred)
            opt.update(pred.params(), grads)
        trace.append(float(np.mean(losses)))
    return trace


# ---------------------------------------------------------------------------
# single-agent and multi-agent routing


@dataclass
class DrlTpModel:
    """Everything one scope's routing decision needs at inference time."""

    scope: int | str
    qnet: DuelingQNet
    candidates: CandidatePathSet
    predictor: GruPredictor | None = None
    seq: int = 5
    bounds: tuple[float, float] = DEFAULT_BOUNDS


def drl_tp_route(
    model: DrlTpModel, tm_now: TrafficMatrix, window: list[TrafficMatrix]
) -> PathMatrix:
    """Greedy routing decision: build the state from the current matrix and
    the predicted next one, then take the argmax candidate matrix."""
    if len(window) != model.seq:
        raise WrongWindow(f"need a window of {model.seq}, got {len(window)}")
    now = tm_now if tm_now.normalized else normalize_tm(tm_now, *model.bounds)
    norm_window = [
        tm if tm.normalized else normalize_tm(tm, *model.bounds) for tm in window
    ]
    if model.predictor is not None:
        pred = model.predictor.predict_tm(norm_window).flat()
    else:
        pred = np.zeros_like(now.flat())
    state = np.concatenate([now.flat(), pred])
    action = int(np.argmax(model.qnet.q_values(state)))
    return model.candidates[action]


def _domain_runs(graph: NetworkGraph, path: tuple[str, ...]) -> list[tuple[int, int, int]]:
    """Maximal same-domain runs of a path as (domain, first, last) indices."""
    runs = []
    start = 0
    for i in range(1, len(path) + 1):
        if i == len(path) or graph.domains[path[i]] != graph.domains[path[start]]:
            runs.append((graph.domains[path[start]], start, i - 1))
            start = i
    return runs


def splice_cross_domain_path(
    graph: NetworkGraph,
    inter_path: tuple[str, ...] | list[str],
    intra_matrices: dict[int, PathMatrix],
) -> tuple[str, ...]:
    """Replace each in-domain sub-segment of a global path with that
    domain's own chosen path between the same entry/exit nodes; falls back
    to the untouched global path when the result would not be simple."""
    inter_path = tuple(inter_path)
    parts: list[str] = []
    for domain, first, last in _domain_runs(graph, inter_path):
        entry, exit_ = inter_path[first], inter_path[last]
        if entry == exit_ or domain not in intra_matrices:
            segment = inter_path[first : last + 1]
        else:
            segment = intra_matrices[domain].path(entry, exit_)
        parts.extend(segment)
    spliced = tuple(parts)
    if len(set(spliced)) != len(spliced):
        return inter_path
    for a, b in zip(spliced, spliced[1:]):
        if not graph.has_link(a, b):
            return inter_path
    return spliced


def mdrl_tp_route(
    graph: NetworkGraph,
    src: str,
    dst: str,
    intra_matrices: dict[int, PathMatrix],
    inter_path_source,
) -> tuple[str, ...]:
    """End-to-end path for one pair: the domain's own path when src and dst
    share a domain, otherwise the root-provided global path with in-domain
    sub-segments spliced in. ``inter_path_source(src, dst)`` may be a root
    path-matrix lookup or a blocking protocol request."""
    d_src, d_dst = graph.domains[src], graph.domains[dst]
    if d_src == d_dst:
        return tuple(intra_matrices[d_src].path(src, dst))
    inter = tuple(inter_path_source(src, dst))
    if not inter or inter[0] != src or inter[-1] != dst:
        raise AgentError(f"bad interdomain path for {src}->{dst}: {inter}")
    return splice_cross_domain_path(graph, inter, intra_matrices)
