import numpy as np
import pytest

from xdrlab.agents import (
    AgentError,
    DqnHyper,
    DrlTpModel,
    DuelingQNet,
    EmptyPathSet,
    EpsilonSchedule,
    GruHyper,
    GruPredictor,
    InsufficientPool,
    OfflineRoutingEnv,
    ReplayBuffer,
    RewardWeights,
    TooShort,
    WrongWindow,
    bellman_targets,
    drl_tp_route,
    mdrl_tp_route,
    reward,
    select_action,
    soft_update,
    splice_cross_domain_path,
    timeseriesify,
    train_dqn,
    train_gru,
)
from xdrlab.routing import CandidatePathSet, PathMatrix, build_candidates, dijkstra_paths
from xdrlab.telemetry import InfoMatrices, TrafficMatrix, TmWeights, build_tm, collect_info, normalize_tm
from xdrlab.netsim import FlowDemand, assign_flow, init_sim, snapshot, step
from xdrlab.topology import GLOBAL, LinkAttr, NetworkGraph, generate_experiment_topology

from conftest import TwoActionEnv, line_graph


# -- epsilon schedule -------------------------------------------------------------


def test_epsilon_endpoints():
    sched = EpsilonSchedule(e_max=0.9, e_min=0.1, total_steps=100)
    assert sched.epsilon_at(0) == 0.9
    assert sched.epsilon_at(100) == 0.1
    assert sched.epsilon_at(5000) == 0.1


def test_epsilon_midpoint_linear():
    sched = EpsilonSchedule(e_max=1.0, e_min=0.1, total_steps=1000)
    assert sched.epsilon_at(500) == pytest.approx(0.55)


def test_epsilon_validation():
    with pytest.raises(AgentError):
        EpsilonSchedule(e_max=0.1, e_min=0.5)
    with pytest.raises(AgentError):
        EpsilonSchedule().epsilon_at(-1)


def test_epsilon_cumulative_variant():
    sched = EpsilonSchedule(e_max=0.9, e_min=0.1, variant="cumulative", decay=1e-3)
    values = [sched.epsilon_at(s) for s in range(0, 200, 10)]
    assert values[0] == 0.9
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert min(values) >= 0.1


# -- action selection -------------------------------------------------------------


def test_greedy_when_epsilon_zero():
    qnet = DuelingQNet(3, 4, hidden=(8, 8), seed=1)
    rng = np.random.default_rng(0)
    state = np.array([0.1, 0.2, 0.3])
    expected = int(np.argmax(qnet.q_values(state)))
    assert all(select_action(qnet, state, 0.0, rng) == expected for _ in range(50))


def test_uniform_when_epsilon_one():
    qnet = DuelingQNet(2, 4, hidden=(8, 8), seed=2)
    rng = np.random.default_rng(3)
    state = np.array([1.0, -1.0])
    counts = np.zeros(4)
    n = 10_000
    for _ in range(n):
        counts[select_action(qnet, state, 1.0, rng)] += 1
    expected = n / 4
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < 16.27  # chi-square critical value, 3 dof, alpha = 0.001


def test_tie_breaks_to_lowest_index():
    qnet = DuelingQNet(2, 3, hidden=(4, 4), seed=0)
    # zero advantage head -> all Q equal the state value -> 3-way tie
    qnet.adv_head.w[:] = 0.0
    qnet.adv_head.b[:] = 0.0
    rng = np.random.default_rng(0)
    assert select_action(qnet, np.array([0.5, 0.5]), 0.0, rng) == 0


# -- dueling decomposition ---------------------------------------------------------


def test_constant_value_head():
    qnet = DuelingQNet(2, 3, hidden=(4, 4), seed=0)
    qnet.adv_head.w[:] = 0.0
    qnet.adv_head.b[:] = 0.0
    qnet.value_head.w[:] = 0.0
    qnet.value_head.b[:] = 2.5
    q = qnet.q_values(np.array([0.3, -0.4]))
    assert np.allclose(q, 2.5)


def test_advantage_shift_invariance():
    qnet = DuelingQNet(3, 4, hidden=(8, 8), seed=5)
    state = np.array([0.2, -0.1, 0.4])
    before = qnet.q_values(state)
    qnet.adv_head.b += 1.7
    after = qnet.q_values(state)
    assert np.allclose(after - before, 1.7)
    assert np.argmax(after) == np.argmax(before)


def test_q_recomposes_from_heads():
    qnet = DuelingQNet(3, 5, hidden=(8, 8), seed=9)
    state = np.array([0.1, 0.5, -0.3])
    vf, af = qnet.value_and_advantage(state)
    assert np.allclose(qnet.q_values(state), vf + af)


def test_soft_update_algebra():
    a = DuelingQNet(2, 2, hidden=(4, 4), seed=1)
    b = DuelingQNet(2, 2, hidden=(4, 4), seed=2)
    tau = 0.3
    expected = {
        k: tau * pa + (1 - tau) * pb
        for (k, pa), pb in zip(a.params().items(), b.params().values())
    }
    soft_update(b, a, tau)
    for k, v in b.params().items():
        assert np.allclose(v, expected[k])


def test_hard_update_limit():
    policy = DuelingQNet(2, 2, hidden=(4, 4), seed=1)
    target = DuelingQNet(2, 2, hidden=(4, 4), seed=2)
    soft_update(target, policy, tau=1.0)
    for k, v in target.params().items():
        assert np.array_equal(v, policy.params()[k])


# -- replay buffer ------------------------------------------------------------------


def test_replay_buffer_eviction_and_sampling():
    buf = ReplayBuffer(capacity=3)
    for i in range(5):
        buf.push((i,))
    assert len(buf) == 3
    with pytest.raises(InsufficientPool):
        buf.sample(4, np.random.default_rng(0))


def test_replay_uniformity_chi_square():
    buf = ReplayBuffer(capacity=10)
    for i in range(10):
        buf.push((i,))
    rng = np.random.default_rng(42)
    counts = np.zeros(10)
    n = 10_000
    for _ in range(n):
        counts[buf.sample(1, rng)[0][0]] += 1
    expected = n / 10
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < 27.88  # chi-square critical value, 9 dof, alpha = 0.001


# -- reward -----------------------------------------------------------------------


def info_from_maps(nodes, links, **indicator_maps):
    n = len(nodes)
    idx = {v: i for i, v in enumerate(nodes)}
    mats = {}
    for name in ("bw", "delay", "loss", "used_bw", "drops", "errors"):
        mat = np.zeros((n, n))
        for link, value in indicator_maps.get(name, {}).items():
            i, j = idx[link[0]], idx[link[1]]
            mat[i, j] = mat[j, i] = value
        mats[name] = mat
    return InfoMatrices(1, 0, tuple(nodes), list(links), **mats)


def path_matrix_over(links, scope=1):
    paths = {}
    for (u, v) in links:
        paths[(u, v)] = (u, v)
        paths[(v, u)] = (v, u)
    return PathMatrix(scope, paths)


def test_reward_uniform_indicators_zero():
    nodes = ["a", "b", "c"]
    links = [("a", "b"), ("b", "c")]
    info = info_from_maps(
        nodes, links, bw={l: 5.0 for l in links}, delay={l: 2.0 for l in links}
    )
    ur = reward(info, path_matrix_over(links), RewardWeights())
    assert ur == 0.0


def test_reward_best_bandwidth_link_is_one():
    nodes = ["a", "b", "c"]
    links = [("a", "b"), ("b", "c")]
    info = info_from_maps(nodes, links, bw={("a", "b"): 10.0, ("b", "c"): 2.0})
    phi = RewardWeights(1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    ur = reward(info, path_matrix_over([("a", "b")]), phi)
    assert ur == pytest.approx(1.0)


def test_reward_three_link_path_hand_computed():
    nodes = ["a", "b", "c", "d"]
    links = [("a", "b"), ("b", "c"), ("c", "d")]
    bw = {("a", "b"): 10.0, ("b", "c"): 5.0, ("c", "d"): 0.0}
    delay = {("a", "b"): 1.0, ("b", "c"): 3.0, ("c", "d"): 5.0}
    info = info_from_maps(nodes, links, bw=bw, delay=delay)
    phi = RewardWeights(0.5, 0.4, 0.3, 0.3, 0.3, 0.3)
    # independent evaluation: min-max each indicator, mean over the 3 links
    bw_norm = [(v - 0.0) / 10.0 for v in (10.0, 5.0, 0.0)]
    delay_norm = [(v - 1.0) / 4.0 for v in (1.0, 3.0, 5.0)]
    expected = 0.5 * np.mean(bw_norm) - 0.4 * np.mean(delay_norm)
    ur = reward(info, path_matrix_over(links), phi)
    assert ur == pytest.approx(expected)


def test_reward_bounds_property():
    rng = np.random.default_rng(0)
    nodes = ["a", "b", "c", "d"]
    links = [("a", "b"), ("b", "c"), ("c", "d")]
    phi = RewardWeights()
    lo = -(phi.delay + phi.loss + phi.used_bw + phi.drops + phi.errors)
    for _ in range(50):
        maps = {
            name: {l: float(rng.uniform(0, 100)) for l in links}
            for name in ("bw", "delay", "loss", "used_bw", "drops", "errors")
        }
        info = info_from_maps(nodes, links, **maps)
        ur = reward(info, path_matrix_over(links), phi)
        assert lo - 1e-9 <= ur <= phi.bw + 1e-9


def test_reward_empty_path_set():
    nodes = ["a", "b"]
    info = info_from_maps(nodes, [("a", "b")], bw={("a", "b"): 1.0})
    trivial = PathMatrix(1, {("a", "a"): ("a",)})
    with pytest.raises(EmptyPathSet):
        reward(info, trivial, RewardWeights())


# -- bellman targets and training ----------------------------------------------------


def test_bellman_terminal_is_bare_reward():
    t = bellman_targets(
        np.array([1.5, 2.0]), np.array([9.0, 9.0]), np.array([1.0, 0.0]), 0.9
    )
    assert t[0] == 1.5
    assert t[1] == pytest.approx(2.0 + 0.9 * 9.0)


def test_train_dqn_learns_contrived_env(two_action_env):
    hyper = DqnHyper(
        lr=5e-3, batch=16, gamma=0.9, freq=20, tau=0.5, episodes=40,
        hidden=(16, 16), sched=EpsilonSchedule(0.9, 0.05, 200), seed=3,
    )
    qnet, trace = train_dqn(two_action_env, hyper)
    for t in range(2):
        state = np.zeros(2)
        state[t] = 1.0
        assert int(np.argmax(qnet.q_values(state))) == 0
    assert len(trace) == 40


def test_train_dqn_gamma_zero_bandit_limit(two_action_env):
    hyper = DqnHyper(
        lr=5e-3, batch=16, gamma=0.0, freq=20, tau=0.5, episodes=60,
        hidden=(16, 16), sched=EpsilonSchedule(1.0, 0.2, 300), seed=1,
    )
    qnet, _ = train_dqn(two_action_env, hyper)
    for t in range(2):
        state = np.zeros(2)
        state[t] = 1.0
        q = qnet.q_values(state)
        assert abs(q[0] - 1.0) < 0.1
        assert abs(q[1] - 0.0) < 0.1


# -- time series and GRU -------------------------------------------------------------


def test_timeseriesify_counts():
    assert len(timeseriesify(list(range(6)), 5)[0]) == 1
    windows, targets = timeseriesify(list(range(10)), 5)
    assert len(windows) == 5
    assert windows[0] == [0, 1, 2, 3, 4] and targets[0] == 5
    with pytest.raises(TooShort):
        timeseriesify(list(range(5)), 5)


def test_train_gru_fits_constant_series():
    dim = 4
    series = [np.full(dim, 0.6) for _ in range(20)]
    windows, targets = timeseriesify(series, 3)
    pred = GruPredictor(dim, hidden_dim=12, seq=3, seed=0)
    trace = train_gru(pred, windows, targets, GruHyper(lr=0.02, batch=4, epochs=50))
    assert trace[-1] < 1e-6
    out = pred.predict_vec(series[:3])
    assert np.allclose(out, 0.6, atol=1e-3)


def test_train_gru_learns_alternating_series():
    dim = 3
    a, b = np.full(dim, 0.2), np.full(dim, 0.8)
    series = [a if i % 2 == 0 else b for i in range(24)]
    windows, targets = timeseriesify(series, 4)
    pred = GruPredictor(dim, hidden_dim=16, seq=4, seed=1)
    trace = train_gru(pred, windows, targets, GruHyper(lr=0.02, batch=4, epochs=80))
    variance = float(np.var([0.2, 0.8]))
    assert trace[-1] < 0.1 * variance


def test_untrained_zero_predictor_fixed_point():
    dim = 4
    pred = GruPredictor(dim, hidden_dim=8, seq=2, seed=0)
    for arr in pred.params().values():
        arr[:] = 0.0
    out = pred.predict_vec([np.zeros(dim), np.zeros(dim)])
    assert np.allclose(out, 0.0)


def test_predict_vec_wrong_window():
    pred = GruPredictor(4, seq=3)
    with pytest.raises(WrongWindow):
        pred.predict_vec([np.zeros(4)] * 2)


def test_predict_clamps_to_bounds():
    dim = 4
    pred = GruPredictor(dim, hidden_dim=8, seq=2, bounds=(0.0, 1.0), seed=0)
    pred.head.b[:] = 100.0  # force raw outputs far above range
    out = pred.predict_vec([np.zeros(dim), np.zeros(dim)])
    assert np.all(out == 1.0)


def make_tm_series(graph, ticks, seed=0):
    sim = init_sim(graph, seed=seed, p_err=0.0, probe_jitter_ms=0.0)
    pm = dijkstra_paths(graph)
    rng = np.random.default_rng(seed)
    frames, tms = [], []
    w = TmWeights()
    nodes = list(graph.nodes)
    for t in range(ticks):
        if t % 4 == 0:
            from xdrlab.netsim import clear_flows

            clear_flows(sim)
            for _ in range(3):
                src, dst = rng.choice(nodes, size=2, replace=False)
                assign_flow(
                    sim,
                    FlowDemand(str(src), str(dst), float(rng.uniform(1, 6))),
                    pm.path(str(src), str(dst)),
                )
        step(sim)
        snap = snapshot(sim)
        info = collect_info(graph, snap, GLOBAL)
        frames.append(info)
        tms.append(build_tm(info, w))
    return frames, tms


def test_predict_tm_shape_and_mask():
    g = line_graph(["a", "b", "c"])
    _, tms = make_tm_series(g, 8)
    norm = [normalize_tm(tm) for tm in tms]
    pred = GruPredictor(9, hidden_dim=8, seq=3, seed=0)
    out = pred.predict_tm(norm[:3])
    assert out.values.shape == (3, 3)
    assert out.normalized
    assert out.values[0, 2] == 1.0  # no a-c link: worst-cost sentinel
    assert 0.0 <= out.values[0, 1] <= 1.0


# -- offline env and routing ----------------------------------------------------------


def build_offline_env(graph, ticks=30, k=2, seed=0, predictor=None):
    frames, tms = make_tm_series(graph, ticks, seed=seed)
    cands = build_candidates(graph, GLOBAL, k)
    return OfflineRoutingEnv(
        frames, tms, cands, RewardWeights(), seq=3, horizon=8,
        predictor=predictor, seed=seed,
    )


def test_offline_env_contract():
    g = line_graph(["a", "b", "c", "d"])
    env = build_offline_env(g)
    state = env.reset()
    assert state.shape == (2 * 16,)
    nxt, ur, done = env.step(0)
    assert nxt.shape == state.shape
    assert isinstance(ur, float)
    assert not done


def test_offline_env_rejects_short_history():
    g = line_graph(["a", "b", "c"])
    frames, tms = make_tm_series(g, 4)
    cands = build_candidates(g, GLOBAL, 1)
    with pytest.raises(InsufficientPool):
        OfflineRoutingEnv(frames, tms, cands, RewardWeights(), seq=5, horizon=4)


def test_drl_tp_route_degenerate_k1():
    g = line_graph(["a", "b", "c"])
    _, tms = make_tm_series(g, 8)
    cands = build_candidates(g, GLOBAL, 1)
    model = DrlTpModel(
        GLOBAL, DuelingQNet(2 * 9, 1, hidden=(8, 8)), cands, seq=3
    )
    norm = [normalize_tm(tm) for tm in tms]
    pm = drl_tp_route(model, norm[3], norm[1:4])
    assert pm.paths == cands[0].paths


def test_drl_tp_route_window_guard():
    g = line_graph(["a", "b", "c"])
    _, tms = make_tm_series(g, 8)
    cands = build_candidates(g, GLOBAL, 1)
    model = DrlTpModel(GLOBAL, DuelingQNet(18, 1, hidden=(8, 8)), cands, seq=3)
    with pytest.raises(WrongWindow):
        drl_tp_route(model, tms[3], tms[:2])


def test_drl_tp_route_selects_in_range():
    g = line_graph(["a", "b", "c", "d"])
    _, tms = make_tm_series(g, 10)
    k = 3
    cands = build_candidates(g, GLOBAL, k)
    norm = [normalize_tm(tm) for tm in tms]
    for seed in range(5):
        model = DrlTpModel(
            GLOBAL, DuelingQNet(2 * 16, k, hidden=(8, 8), seed=seed), cands, seq=3
        )
        pm = drl_tp_route(model, norm[4], norm[2:5])
        assert any(pm.paths == c.paths for c in cands.matrices)


# -- cross-domain composition ----------------------------------------------------------


def cross_domain_fixture():
    # two domains joined by the unique border link b2-c1
    nodes = ["b1", "b2", "b3", "c1", "c2", "c3"]
    domains = {"b1": 1, "b2": 1, "b3": 1, "c1": 2, "c2": 2, "c3": 2}
    edges = {}

    def add(u, v):
        edges[(min(u, v), max(u, v))] = LinkAttr(10.0, 1.0, domains[u] != domains[v])

    for pair in [("b1", "b2"), ("b2", "b3"), ("b1", "b3"),
                 ("c1", "c2"), ("c2", "c3"), ("c1", "c3"), ("b2", "c1")]:
        add(*pair)
    return NetworkGraph(nodes, edges, domains)


def test_mdrl_codomain_uses_intra_matrix():
    g = cross_domain_fixture()
    intra = {d: dijkstra_paths(g, scope=d) for d in (1, 2)}
    path = mdrl_tp_route(g, "b1", "b3", intra, lambda s, d: ())
    assert path == intra[1].path("b1", "b3")


def test_mdrl_cross_domain_contains_border_link():
    g = cross_domain_fixture()
    intra = {d: dijkstra_paths(g, scope=d) for d in (1, 2)}
    inter = dijkstra_paths(g)
    path = mdrl_tp_route(g, "b1", "c3", intra, lambda s, d: inter.path(s, d))
    assert path[0] == "b1" and path[-1] == "c3"
    assert ("b2", "c1") in {tuple(sorted(p)) for p in zip(path, path[1:])}


def test_splice_substitutes_intra_segment():
    g = cross_domain_fixture()
    # force domain 1 to route b1->b2 via b3 while the global path goes direct
    detour = {
        (s, d): (s,) if s == d else None
        for s in g.domain_nodes(1)
        for d in g.domain_nodes(1)
    }
    full = dijkstra_paths(g, scope=1).paths.copy()
    full[("b1", "b2")] = ("b1", "b3", "b2")
    intra = {1: PathMatrix(1, full), 2: dijkstra_paths(g, scope=2)}
    spliced = splice_cross_domain_path(g, ("b1", "b2", "c1", "c3"), intra)
    assert spliced == ("b1", "b3", "b2", "c1", "c3")


def test_splice_falls_back_when_not_simple():
    g = cross_domain_fixture()
    # intra matrix whose b1->b2 path runs through c-side entry node? not
    # possible in-domain; instead make the domain-2 segment collide with a
    # node already used by making it wander: c1->c3 via c2 is fine, so force
    # a self-conflicting substitution by duplicating entry node
    bad = dijkstra_paths(g, scope=2).paths.copy()
    bad[("c1", "c3")] = ("c1", "c2", "c1", "c3")  # deliberately broken
    intra = {1: dijkstra_paths(g, scope=1), 2: PathMatrix(2, bad)}
    raw = ("b1", "b2", "c1", "c3")
    assert splice_cross_domain_path(g, raw, intra) == raw


def test_splice_validity_on_random_demands():
    g = generate_experiment_topology(seed=11, domain_sizes=(5, 5, 5), border_pairs=2)
    intra = {d: dijkstra_paths(g, scope=d) for d in (1, 2, 3)}
    inter = dijkstra_paths(g)
    rng = np.random.default_rng(0)
    nodes = list(g.nodes)
    for _ in range(100):
        src, dst = (str(x) for x in rng.choice(nodes, size=2, replace=False))
        path = mdrl_tp_route(g, src, dst, intra, lambda s, d: inter.path(s, d))
        assert path[0] == src and path[-1] == dst
        assert len(set(path)) == len(path)
        assert all(g.has_link(a, b) for a, b in zip(path, path[1:]))
