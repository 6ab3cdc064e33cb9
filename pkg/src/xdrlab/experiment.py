"""End-to-end experiment pipeline: telemetry collection runs, per-scope
agent training, and the algorithm-comparison evaluation sweep.

Collection drives the simulator with seeded random demand sets whose rates
follow a period-three heavy/heavy/light pattern; the pattern is invisible
from a single interval but learnable from a window, which is exactly the
gap the traffic predictor is there to close. Training then runs offline
over the recorded history, one agent per domain plus the global agent.

Evaluation replays identical demand sets and simulator seeds for every
algorithm at every offered-load level: hop-count shortest path stays
static, the delay-weighted baseline re-measures and re-routes each
interval, and the learned router re-reads the traffic matrices and picks
fresh candidate matrices each interval before splicing cross-domain paths.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import netsim
from .agents import (
    DqnHyper,
    DrlTpModel,
    DuelingQNet,
    EpsilonSchedule,
    GruHyper,
    GruPredictor,
    OfflineRoutingEnv,
    RewardWeights,
    drl_tp_route,
    mdrl_tp_route,
    timeseriesify,
    train_dqn,
    train_gru,
)
from .metrics import AveragedReport, LinkMetricFrame, domain_averages, frame_from_sim, global_averages
from .neural import load_params, save_params
from .routing import CandidatePathSet, PathMatrix, build_candidates, candidate_count, dijkstra_paths, ospf_paths
from .telemetry import (
    DEFAULT_BOUNDS,
    InfoMatrices,
    TmWeights,
    TrafficMatrix,
    build_tm,
    build_utm,
    collect_border_info,
    collect_info,
    normalize_tm,
)
from .topology import (
    GLOBAL,
    NetworkGraph,
    generate_experiment_topology,
    load_topology_file,
    serialize_topology,
)

ALGORITHMS = ("mdrl-tp", "dijkstra", "ospf")
INDICATOR_NAMES = ("bw", "delay", "loss", "used_bw", "drops", "errors")


class ExperimentError(Exception):
    pass


class MissingCheckpoint(ExperimentError):
    pass


class MissingPool(ExperimentError):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass
class CollectSettings:
    ticks_per_level: int = 16
    delta_t: float = 1.0
    flow_active: int = 6  # intervals each collection flow stays up
    load_pattern: tuple[float, ...] = (1.0, 1.0, 0.4)
    flows_per_level: int | None = None  # None = one flow per node; 0 = idle
    passes: int = 1  # sweep repetitions with fresh demand draws


@dataclass
class AgentSettings:
    gamma: float = 0.9
    lr: float = 1e-3
    batch: int = 32
    freq: int = 100
    tau: float = 0.1
    episodes: int = 60
    hidden: tuple[int, int] = (128, 128)
    e_max: float = 0.95
    e_min: float = 0.05
    total_steps: int = 10_000
    seq: int = 5
    horizon: int = 50
    gru_hidden: int = 64
    gru_lr: float = 2e-3
    gru_batch: int = 8
    gru_epochs: int = 40


@dataclass
class EvalSettings:
    window: int = 10
    warmup: int = 6
    flow_active: int = 6  # intervals each evaluation flow stays up
    algorithms: tuple[str, ...] = ALGORITHMS


@dataclass
class ExperimentConfig:
    seed: int = 7
    out_dir: Path = Path("runs/default")
    bw_list: tuple[float, ...] = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10)
    topology_file: Path | None = None
    domain_sizes: tuple[int, ...] = (13, 13, 13)
    bw_range: tuple[float, float] = (1.0, 10.0)
    capped_domain: tuple[int, float] | None = (1, 5.0)
    intra_edge_factor: float = 2.0
    border_layout: dict[tuple[int, int], int] | None = None
    tm_weights: TmWeights = field(default_factory=TmWeights)
    reward_weights: RewardWeights = field(default_factory=RewardWeights)
    bounds: tuple[float, float] = DEFAULT_BOUNDS
    collect: CollectSettings = field(default_factory=CollectSettings)
    agent: AgentSettings = field(default_factory=AgentSettings)
    evaluate: EvalSettings = field(default_factory=EvalSettings)

    def __post_init__(self) -> None:
        self.out_dir = Path(self.out_dir)
        loads = tuple(self.bw_list)
        if not loads or list(loads) != sorted(loads):
            raise ExperimentError("bw_list must be non-empty and ascending")
        self.bw_list = loads

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        cfg = cls()
        simple = {
            "seed": int,
            "out_dir": Path,
            "topology_file": Path,
        }
        for key, cast in simple.items():
            if key in doc and doc[key] is not None:
                setattr(cfg, key, cast(doc[key]))
        if "bw_list" in doc:
            cfg.bw_list = tuple(float(x) for x in doc["bw_list"])
        if "domain_sizes" in doc:
            cfg.domain_sizes = tuple(int(x) for x in doc["domain_sizes"])
        if "bw_range" in doc:
            cfg.bw_range = tuple(float(x) for x in doc["bw_range"])
        if "capped_domain" in doc:
            cap = doc["capped_domain"]
            cfg.capped_domain = None if cap is None else (int(cap[0]), float(cap[1]))
        if "intra_edge_factor" in doc:
            cfg.intra_edge_factor = float(doc["intra_edge_factor"])
        if "border_layout" in doc and doc["border_layout"] is not None:
            cfg.border_layout = {
                (int(a), int(b)): int(n)
                for (a, b), n in (
                    ((key.split("-")), value)
                    for key, value in doc["border_layout"].items()
                )
            }
        if "tm_weights" in doc:
            cfg.tm_weights = TmWeights(*doc["tm_weights"])
        if "reward_weights" in doc:
            cfg.reward_weights = RewardWeights(*doc["reward_weights"])
        if "bounds" in doc:
            cfg.bounds = tuple(float(x) for x in doc["bounds"])
        for section, target in (
            ("collect", cfg.collect),
            ("agent", cfg.agent),
            ("evaluate", cfg.evaluate),
        ):
            for key, value in doc.get(section, {}).items():
                if not hasattr(target, key):
                    raise ExperimentError(f"unknown {section} option {key!r}")
                current = getattr(target, key)
                if isinstance(current, tuple):
                    value = tuple(value)
                setattr(target, key, value)
        cfg.__post_init__()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ExperimentError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)


def scope_label(scope: int | str) -> str:
    return GLOBAL if scope == GLOBAL else f"d{scope}"


def scope_from_label(label: str) -> int | str:
    return GLOBAL if label == GLOBAL else int(label.removeprefix("d"))


def resolve_topology(cfg: ExperimentConfig) -> NetworkGraph:
    if cfg.topology_file is not None:
        return load_topology_file(cfg.topology_file)
    return generate_experiment_topology(
        cfg.seed, cfg.domain_sizes, cfg.bw_range, cfg.capped_domain,
        intra_edge_factor=cfg.intra_edge_factor,
        border_layout=cfg.border_layout,
    )


def graph_hash(graph: NetworkGraph) -> str:
    return hashlib.sha256(serialize_topology(graph).encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# demand generation


def make_demand_set(
    graph: NetworkGraph, rng: np.random.Generator, rate: float, count: int | None = None
) -> list[netsim.FlowDemand]:
    """One steady flow per randomly chosen ordered node pair."""
    nodes = list(graph.nodes)
    count = len(nodes) if count is None else count
    demands = []
    for _ in range(count):
        src, dst = rng.choice(nodes, size=2, replace=False)
        demands.append(netsim.FlowDemand(str(src), str(dst), rate))
    return demands


def make_staggered_demands(
    graph: NetworkGraph,
    rng: np.random.Generator,
    rate: float,
    total_intervals: int,
    active_intervals: int,
    count: int | None = None,
) -> list[netsim.FlowDemand]:
    """Demand set with session churn: each flow runs for a bounded stretch
    of the window, with start times spread across it."""
    base = make_demand_set(graph, rng, rate, count)
    span = max(1, total_intervals - active_intervals)
    out = []
    for d in base:
        start = int(rng.integers(0, span))
        out.append(
            netsim.FlowDemand(d.src, d.dst, d.rate_mbit, start, start + active_intervals)
        )
    return out


# ---------------------------------------------------------------------------
# collection


@dataclass
class CollectionResult:
    frames: dict[str, list[InfoMatrices]]
    raw_tms: dict[str, list[TrafficMatrix]]
    demands: list[list[netsim.FlowDemand]] = field(default_factory=list)

    def scopes(self) -> list[str]:
        return sorted(self.frames)

    def __len__(self) -> int:
        return len(next(iter(self.frames.values()), []))


def run_collection(
    graph: NetworkGraph,
    cfg: ExperimentConfig,
    models: dict[str, DrlTpModel] | None = None,
) -> CollectionResult:
    """Drive the simulator across the offered-load sweep and fold every
    interval into per-scope indicator matrices and raw traffic matrices.

    With ``models`` given, traffic is routed by the learned router instead
    of static shortest paths, so a second collection round records the
    state distribution the trained policy itself induces.
    """
    domains = graph.domain_ids()
    labels = [scope_label(d) for d in domains] + [GLOBAL]
    frames: dict[str, list[InfoMatrices]] = {lab: [] for lab in labels}
    raw_tms: dict[str, list[TrafficMatrix]] = {lab: [] for lab in labels}
    tick_demands: list[list[netsim.FlowDemand]] = []
    sim = netsim.init_sim(graph, seed=cfg.seed, probe_jitter_ms=0.0)
    base_paths = dijkstra_paths(graph)
    router = _LearnedRouter(graph, models, cfg) if models else None
    pattern = cfg.collect.load_pattern
    tick = 0
    sweep = [
        (pass_idx, level_idx, rate)
        for pass_idx in range(max(1, cfg.collect.passes))
        for level_idx, rate in enumerate(cfg.bw_list)
    ]
    for pass_idx, level_idx, rate in sweep:
        rng = np.random.default_rng([cfg.seed, 101, pass_idx, level_idx])
        n_flows = cfg.collect.flows_per_level
        window = make_staggered_demands(
            graph, rng, rate, cfg.collect.ticks_per_level,
            cfg.collect.flow_active, n_flows,
        )
        for t in range(cfg.collect.ticks_per_level):
            factor = pattern[tick % len(pattern)]
            effective = [
                netsim.FlowDemand(d.src, d.dst, d.rate_mbit * factor)
                for d in window
                if d.start_tick <= t < d.end_tick
            ]
            if router is not None:
                routes = router.routes(effective)
            else:
                routes = {
                    (d.src, d.dst): base_paths.path(d.src, d.dst) for d in effective
                }
            netsim.clear_flows(sim)
            for d in effective:
                netsim.assign_flow(sim, d, routes[(d.src, d.dst)])
            netsim.step(sim, cfg.collect.delta_t)
            if router is not None:
                router.observe(sim)
            tick_demands.append(effective)
            snap = netsim.snapshot(sim)
            domain_tms = {}
            for d in domains:
                info = collect_info(graph, snap, d)
                frames[scope_label(d)].append(info)
                tm = build_tm(info, cfg.tm_weights)
                raw_tms[scope_label(d)].append(tm)
                domain_tms[d] = tm
            frames[GLOBAL].append(collect_info(graph, snap, GLOBAL))
            utm = build_utm(
                graph, domain_tms, collect_border_info(graph, snap),
                cfg.tm_weights, normalize=False,
            )
            raw_tms[GLOBAL].append(utm)
            tick += 1
    return CollectionResult(frames, raw_tms, tick_demands)


def _info_to_tm_like(info: InfoMatrices, name: str) -> TrafficMatrix:
    n = len(info.nodes)
    values = np.full((n, n), np.inf)
    mat = info.indicator(name)
    for i, j in info.link_indices():
        values[i, j] = mat[i, j]
        values[j, i] = mat[j, i]
    return TrafficMatrix(info.scope, info.tick, info.nodes, list(info.links), values)


def save_collection(out_dir: Path, result: CollectionResult) -> None:
    for label, tms in result.raw_tms.items():
        pool_dir = out_dir / "pools" / label
        pool_dir.mkdir(parents=True, exist_ok=True)
        for i, tm in enumerate(tms):
            (pool_dir / f"tick_{i:05d}.csv").write_text(tm.to_csv(), encoding="utf-8")
    for label, frames in result.frames.items():
        frame_dir = out_dir / "frames" / label
        frame_dir.mkdir(parents=True, exist_ok=True)
        for i, info in enumerate(frames):
            for name in INDICATOR_NAMES:
                path = frame_dir / f"tick_{i:05d}.{name}.csv"
                path.write_text(_info_to_tm_like(info, name).to_csv(), encoding="utf-8")
    schedule = [
        [
            {"src": d.src, "dst": d.dst, "rate_mbit": d.rate_mbit}
            for d in per_tick
        ]
        for per_tick in result.demands
    ]
    (out_dir / "pools" / "demands.json").write_text(
        json.dumps(schedule), encoding="utf-8"
    )


def load_collection(out_dir: Path, labels: list[str]) -> CollectionResult:
    frames: dict[str, list[InfoMatrices]] = {}
    raw_tms: dict[str, list[TrafficMatrix]] = {}
    for label in labels:
        scope = scope_from_label(label)
        pool_dir = out_dir / "pools" / label
        frame_dir = out_dir / "frames" / label
        if not pool_dir.is_dir() or not frame_dir.is_dir():
            raise MissingPool(f"no collected pool for scope {label} under {out_dir}")
        tm_files = sorted(pool_dir.glob("tick_*.csv"))
        frames[label] = []
        raw_tms[label] = []
        for i, tm_file in enumerate(tm_files):
            raw_tms[label].append(
                TrafficMatrix.from_csv(tm_file.read_text(encoding="utf-8"), scope, i)
            )
            mats = {}
            for name in INDICATOR_NAMES:
                f = frame_dir / f"tick_{i:05d}.{name}.csv"
                tm = TrafficMatrix.from_csv(f.read_text(encoding="utf-8"), scope, i)
                values = tm.values.copy()
                values[~np.isfinite(values)] = 0.0
                mats[name] = values
            ref = raw_tms[label][-1]
            frames[label].append(
                InfoMatrices(scope, i, ref.nodes, list(ref.links), **mats)
            )
    demands: list[list[netsim.FlowDemand]] = []
    schedule_file = out_dir / "pools" / "demands.json"
    if schedule_file.exists():
        doc = json.loads(schedule_file.read_text(encoding="utf-8"))
        demands = [
            [netsim.FlowDemand(e["src"], e["dst"], float(e["rate_mbit"])) for e in tick]
            for tick in doc
        ]
    return CollectionResult(frames, raw_tms, demands)


# ---------------------------------------------------------------------------
# candidate caching


def cached_candidates(
    graph: NetworkGraph, scope: int | str, k: int, cache_dir: Path | None
) -> CandidatePathSet:
    if cache_dir is None:
        return build_candidates(graph, scope, k)
    cache_dir.mkdir(parents=True, exist_ok=True)
    key = cache_dir / f"{scope_label(scope)}_k{k}_{graph_hash(graph)}.json"
    if key.exists():
        doc = json.loads(key.read_text(encoding="utf-8"))
        matrices = [
            PathMatrix(scope, {(s, d): tuple(p) for s, d, p in entry})
            for entry in doc["matrices"]
        ]
        return CandidatePathSet(scope, doc["k"], matrices)
    cands = build_candidates(graph, scope, k)
    doc = {
        "k": cands.k,
        "matrices": [
            [[s, d, list(p)] for (s, d), p in sorted(m.paths.items())]
            for m in cands.matrices
        ],
    }
    key.write_text(json.dumps(doc), encoding="utf-8")
    return cands


# ---------------------------------------------------------------------------
# training


class RewardSimulator:
    """Scores a candidate matrix by actually applying it.

    The recorded demands of the scored interval are routed with the chosen
    matrix (traffic outside the agent's scope keeps its recorded baseline
    paths) and one interval is simulated on a fresh state. The whole
    candidate matrix is then scored on the resulting indicators, so the
    blend reads the scope-wide consequences of the action: spending more
    capacity, congesting links, or relieving a hotspot all show up, and the
    action is charged for the congestion it causes rather than judged
    against telemetry recorded under someone else's routing.
    """

    def __init__(
        self,
        graph: NetworkGraph,
        demands_per_tick: list[list[netsim.FlowDemand]],
        scope: int | str,
        *,
        delta_t: float = 1.0,
        seed: int = 0,
    ) -> None:
        self.graph = graph
        self.demands = demands_per_tick
        self.scope = scope
        self.delta_t = delta_t
        self.seed = seed
        self.baseline = dijkstra_paths(graph)

    def _in_scope(self, demand: netsim.FlowDemand) -> bool:
        if self.scope == GLOBAL:
            return True
        d = int(self.scope)
        return (
            self.graph.domains[demand.src] == d
            and self.graph.domains[demand.dst] == d
        )

    def score(self, tick: int, matrix: PathMatrix, phi) -> float:
        from .agents import EmptyPathSet, reward, splice_cross_domain_path

        sim = netsim.init_sim(
            self.graph, seed=self.seed, p_err=0.0, probe_jitter_ms=0.0
        )
        for d in self.demands[tick]:
            if self._in_scope(d):
                path = matrix.path(d.src, d.dst)
            elif self.scope != GLOBAL:
                # cross traffic transiting this domain follows the candidate
                # for its in-domain run, exactly as the composed route would
                path = splice_cross_domain_path(
                    self.graph, self.baseline.path(d.src, d.dst),
                    {int(self.scope): matrix},
                )
            else:
                path = self.baseline.path(d.src, d.dst)
            netsim.assign_flow(sim, d, path)
        netsim.step(sim, self.delta_t)
        info = collect_info(self.graph, netsim.snapshot(sim), self.scope)
        try:
            return reward(info, matrix, phi)
        except EmptyPathSet:
            return 0.0


@dataclass
class TrainedAgent:
    scope: int | str
    model: DrlTpModel
    reward_trace: list[float]
    gru_loss_trace: list[float]


def train_scope(
    graph: NetworkGraph,
    cfg: ExperimentConfig,
    scope: int | str,
    collection: CollectionResult,
    *,
    with_predictor: bool = True,
    cache_dir: Path | None = None,
    seed_offset: int = 0,
) -> TrainedAgent:
    """Train the traffic predictor then the routing agent for one scope."""
    label = scope_label(scope)
    frames = collection.frames[label]
    raw = collection.raw_tms[label]
    if len(frames) < cfg.agent.seq + 2:
        raise MissingPool(f"history too short for scope {label}: {len(frames)}")
    k = candidate_count(cfg.domain_sizes)
    cands = cached_candidates(graph, scope, k, cache_dir)
    norm = [normalize_tm(tm, *cfg.bounds) for tm in raw]
    dim = norm[0].dim ** 2
    seed = cfg.seed + seed_offset

    predictor = None
    loss_trace: list[float] = []
    if with_predictor:
        predictor = GruPredictor(
            dim, cfg.agent.gru_hidden, cfg.agent.seq, bounds=cfg.bounds, seed=seed
        )
        windows, targets = timeseriesify(norm, cfg.agent.seq)
        loss_trace = train_gru(
            predictor, windows, targets,
            GruHyper(cfg.agent.gru_lr, cfg.agent.gru_batch, cfg.agent.gru_epochs, seed),
        )

    reward_sim = None
    if collection.demands:
        reward_sim = RewardSimulator(
            graph, collection.demands, scope,
            delta_t=cfg.collect.delta_t, seed=cfg.seed,
        )
    env = OfflineRoutingEnv(
        frames, raw, cands, cfg.reward_weights,
        seq=cfg.agent.seq, horizon=cfg.agent.horizon, bounds=cfg.bounds,
        predictor=predictor, reward_sim=reward_sim, seed=seed,
    )
    hyper = DqnHyper(
        lr=cfg.agent.lr, batch=cfg.agent.batch, gamma=cfg.agent.gamma,
        freq=cfg.agent.freq, tau=cfg.agent.tau, episodes=cfg.agent.episodes,
        hidden=cfg.agent.hidden,
        sched=EpsilonSchedule(cfg.agent.e_max, cfg.agent.e_min, cfg.agent.total_steps),
        seed=seed,
    )
    qnet, reward_trace = train_dqn(env, hyper)
    model = DrlTpModel(scope, qnet, cands, predictor, cfg.agent.seq, cfg.bounds)
    return TrainedAgent(scope, model, reward_trace, loss_trace)


def save_agent(out_dir: Path, agent: TrainedAgent, cfg: ExperimentConfig) -> None:
    label = scope_label(agent.scope)
    ckpt = out_dir / "checkpoints"
    ckpt.mkdir(parents=True, exist_ok=True)
    save_params(ckpt / f"dqn_{label}.xdrm", agent.model.qnet.params())
    meta = {
        "scope": label,
        "state_dim": agent.model.qnet.state_dim,
        "n_actions": agent.model.qnet.n_actions,
        "hidden": list(agent.model.qnet.hidden),
        "seq": agent.model.seq,
        "bounds": list(agent.model.bounds),
        "gru_hidden": cfg.agent.gru_hidden,
        "has_predictor": agent.model.predictor is not None,
    }
    (ckpt / f"meta_{label}.json").write_text(json.dumps(meta, indent=2), "utf-8")
    if agent.model.predictor is not None:
        save_params(ckpt / f"gru_{label}.xdrm", agent.model.predictor.params())
    traces = out_dir / "traces"
    traces.mkdir(parents=True, exist_ok=True)
    _write_trace(traces / f"reward_{label}.csv", agent.reward_trace, "episode")
    if agent.gru_loss_trace:
        _write_trace(traces / f"gru_loss_{label}.csv", agent.gru_loss_trace, "epoch")


def _write_trace(path: Path, values: list[float], index_name: str) -> None:
    lines = [f"{index_name},value"]
    lines += [f"{i},{v:.6g}" for i, v in enumerate(values)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_agent(
    out_dir: Path, graph: NetworkGraph, scope: int | str, cache_dir: Path | None = None
) -> DrlTpModel:
    label = scope_label(scope)
    ckpt = out_dir / "checkpoints"
    meta_path = ckpt / f"meta_{label}.json"
    dqn_path = ckpt / f"dqn_{label}.xdrm"
    if not meta_path.exists() or not dqn_path.exists():
        raise MissingCheckpoint(f"no trained model for scope {label} under {ckpt}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    qnet = DuelingQNet(meta["state_dim"], meta["n_actions"], tuple(meta["hidden"]))
    _load_into_params(qnet.params(), dqn_path)
    predictor = None
    if meta["has_predictor"]:
        dim = meta["state_dim"] // 2
        predictor = GruPredictor(
            dim, meta["gru_hidden"], meta["seq"], bounds=tuple(meta["bounds"])
        )
        _load_into_params(predictor.params(), ckpt / f"gru_{label}.xdrm")
    cands = cached_candidates(graph, scope, meta["n_actions"], cache_dir)
    return DrlTpModel(
        scope, qnet, cands, predictor, meta["seq"], tuple(meta["bounds"])
    )


def _load_into_params(params: dict[str, np.ndarray], path: Path) -> None:
    stored = load_params(path)
    for name, target in params.items():
        np.copyto(target, stored[name].reshape(target.shape))


# ---------------------------------------------------------------------------
# evaluation


def make_live_root_oracle(
    graph: NetworkGraph, cfg: ExperimentConfig, model: DrlTpModel, registry
):
    """Interdomain path oracle for the serving root controller.

    Assembles union matrices from the domain matrices streamed into the
    registry (border links measured on the root's own simulator replica)
    and asks the global agent; answers with plain shortest-hop paths until
    a full prediction window of common ticks has arrived.
    """
    fallback = dijkstra_paths(graph)
    replica = netsim.init_sim(graph, seed=cfg.seed, probe_jitter_ms=0.0)
    netsim.step(replica, cfg.collect.delta_t)
    border = collect_border_info(graph, netsim.snapshot(replica))

    def assemble(tick: int):
        records = registry.tms_at(tick)
        by_domain = {}
        for name, tm in records.items():
            if not name.startswith("C"):
                return None
            d = int(name.removeprefix("C"))
            by_domain[d] = TrafficMatrix(d, tick, tm.nodes, list(tm.links), tm.values)
        if set(by_domain) != set(graph.domain_ids()):
            return None
        border.tick = tick
        return build_utm(graph, by_domain, border, cfg.tm_weights, normalize=False)

    def oracle(src: str, dst: str):
        names = registry.names()
        if names:
            common = set.intersection(
                *(set(registry.record(n).tms.keys()) for n in names)
            )
            ticks = sorted(common)[-model.seq :]
            if len(ticks) == model.seq:
                window = [assemble(t) for t in ticks]
                if all(w is not None for w in window):
                    matrix = drl_tp_route(model, window[-1], window)
                    return matrix.path(src, dst)
        return fallback.path(src, dst)

    return oracle


class _StaticRouter:
    def __init__(self, graph: NetworkGraph):
        self.matrix = dijkstra_paths(graph)

    def routes(self, demands):
        return {(d.src, d.dst): self.matrix.path(d.src, d.dst) for d in demands}

    def observe(self, sim) -> None:
        pass


class _DelayRouter:
    """Re-measures link delays each interval and re-routes on them."""

    def __init__(self, graph: NetworkGraph):
        self.graph = graph
        self.matrix = dijkstra_paths(graph)

    def routes(self, demands):
        return {(d.src, d.dst): self.matrix.path(d.src, d.dst) for d in demands}

    def observe(self, sim) -> None:
        delays = netsim.measure_all_delays(sim)
        floored = {k: max(v, 1e-6) for k, v in delays.items()}
        self.matrix = ospf_paths(self.graph, floored)


class _LearnedRouter:
    """Learned routing decision for the evaluation window.

    Traffic matrices accumulate while the window warms up under shortest-hop
    routing; once a full prediction window of history exists, each domain
    agent and the global agent pick their candidate matrices and the choice
    stays installed for the rest of the measurement window, mirroring the
    one-decision-per-flow-size shape of the routing procedure. Cross-domain
    pairs splice the domain choices into the global agent's path.
    """

    def __init__(
        self,
        graph,
        models: dict[str, DrlTpModel],
        cfg: ExperimentConfig,
        *,
        decide_once: bool = True,
        decide_after: int | None = None,
    ):
        self.graph = graph
        self.models = models
        self.cfg = cfg
        self.seq = cfg.agent.seq
        self.decide_once = decide_once
        self.decide_after = (
            max(cfg.evaluate.warmup, self.seq) if decide_after is None else decide_after
        )
        self.observed = 0
        self.history: dict[str, list[TrafficMatrix]] = {
            label: [] for label in models
        }
        self.fallback = dijkstra_paths(graph)
        self.intra: dict[int, PathMatrix] = {}
        self.inter: PathMatrix | None = None

    def observe(self, sim) -> None:
        if self.decide_once and self.inter is not None:
            return
        snap = netsim.snapshot(sim)
        domain_tms = {}
        for d in self.graph.domain_ids():
            info = collect_info(self.graph, snap, d)
            domain_tms[d] = build_tm(info, self.cfg.tm_weights)
            self.history[scope_label(d)].append(domain_tms[d])
        utm = build_utm(
            self.graph, domain_tms, collect_border_info(self.graph, snap),
            self.cfg.tm_weights, normalize=False,
        )
        self.history[GLOBAL].append(utm)
        self.observed += 1
        for label in self.history:
            self.history[label] = self.history[label][-self.seq :]
        if len(self.history[GLOBAL]) < self.seq:
            return
        if self.decide_once and self.observed < self.decide_after:
            return
        self.intra = {}
        for d in self.graph.domain_ids():
            label = scope_label(d)
            series = self.history[label]
            self.intra[d] = drl_tp_route(self.models[label], series[-1], series)
        series = self.history[GLOBAL]
        self.inter = drl_tp_route(self.models[GLOBAL], series[-1], series)

    def routes(self, demands):
        out = {}
        for d in demands:
            if self.inter is None or not self.intra:
                out[(d.src, d.dst)] = self.fallback.path(d.src, d.dst)
            else:
                out[(d.src, d.dst)] = mdrl_tp_route(
                    self.graph, d.src, d.dst, self.intra,
                    lambda s, t: self.inter.path(s, t),
                )
        return out


def _make_router(algorithm: str, graph, models, cfg):
    if algorithm == "dijkstra":
        return _StaticRouter(graph)
    if algorithm == "ospf":
        return _DelayRouter(graph)
    if algorithm == "mdrl-tp":
        if not models:
            raise MissingCheckpoint("mdrl-tp evaluation needs trained models")
        return _LearnedRouter(graph, models, cfg)
    raise ExperimentError(f"unknown algorithm {algorithm!r}")


def evaluate_algorithms(
    graph: NetworkGraph,
    cfg: ExperimentConfig,
    models: dict[str, DrlTpModel] | None,
    *,
    eval_seed: int | None = None,
    algorithms: tuple[str, ...] | None = None,
) -> list[AveragedReport]:
    """Run the offered-load sweep for each algorithm over paired demand
    sets and simulator seeds; returns global plus per-domain report rows."""
    algorithms = algorithms or cfg.evaluate.algorithms
    eval_seed = cfg.seed if eval_seed is None else eval_seed
    reports: list[AveragedReport] = []
    total = cfg.evaluate.warmup + cfg.evaluate.window
    for level_idx, rate in enumerate(cfg.bw_list):
        demand_rng = np.random.default_rng([eval_seed, 202, level_idx])
        demands = make_staggered_demands(
            graph, demand_rng, rate, total, cfg.evaluate.flow_active
        )
        for algorithm in algorithms:
            router = _make_router(algorithm, graph, models, cfg)
            sim = netsim.init_sim(graph, seed=eval_seed, probe_jitter_ms=0.0)
            frames: dict[str, list[LinkMetricFrame]] = {
                scope_label(d): [] for d in graph.domain_ids()
            }
            frames[GLOBAL] = []
            for interval in range(total):
                routes = router.routes(demands)
                netsim.clear_flows(sim)
                for d in demands:
                    netsim.assign_flow(sim, d, routes[(d.src, d.dst)])
                netsim.step(sim, cfg.collect.delta_t)
                router.observe(sim)
                if interval >= cfg.evaluate.warmup:
                    for d in graph.domain_ids():
                        frames[scope_label(d)].append(
                            frame_from_sim(sim, d, cfg.collect.delta_t)
                        )
                    frames[GLOBAL].append(
                        frame_from_sim(sim, GLOBAL, cfg.collect.delta_t)
                    )
            tput, delay, loss = global_averages(frames[GLOBAL], graph)
            reports.append(
                AveragedReport(algorithm, GLOBAL, rate, tput, delay, loss)
            )
            for d in graph.domain_ids():
                tput, delay, loss = domain_averages(frames[scope_label(d)], graph, d)
                reports.append(
                    AveragedReport(algorithm, scope_label(d), rate, tput, delay, loss)
                )
    return reports
