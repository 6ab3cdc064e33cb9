import pytest

from xdrlab.metrics import (
    AveragedReport,
    EmptyWindow,
    NegativeLoss,
    UnknownLink,
    domain_averages,
    emit_report,
    frame_from_sim,
    global_averages,
    link_delay,
    link_loss,
    link_throughput,
)
from xdrlab.netsim import FlowDemand, assign_flow, init_sim, step
from xdrlab.topology import LinkAttr, NetworkGraph


def single_link_graph(cap=10.0, delay=2.0):
    return NetworkGraph(
        ["a", "b"], {("a", "b"): LinkAttr(cap, delay, False)}, {"a": 1, "b": 1}
    )


def two_domain_graph(cap=10.0, delay=2.0):
    nodes = ["a", "b", "c", "d"]
    domains = {"a": 1, "b": 1, "c": 2, "d": 2}
    edges = {
        ("a", "b"): LinkAttr(cap, delay, False),
        ("c", "d"): LinkAttr(cap, delay, False),
        ("b", "c"): LinkAttr(cap, delay, True),
    }
    return NetworkGraph(nodes, edges, domains)


def test_throughput_idle():
    assert link_throughput(0, 5.0, 1.0) == 0.0


def test_throughput_direct_evaluation():
    # oracle: 1 Mbit sent / (2 Mbit/s remaining * 1 s) = 0.5
    one_mbit_in_bytes = 1_000_000 // 8
    assert link_throughput(one_mbit_in_bytes, 2.0, 1.0) == pytest.approx(0.5)


def test_throughput_floors_remaining_bandwidth():
    got = link_throughput(125_000, 0.0, 1.0)
    assert got == pytest.approx(1.0 / 0.01)


def test_loss_cases():
    assert link_loss(10, 10) == 0.0
    # oracle: (12 - 10) / 12 = 1/6
    assert link_loss(12, 10) == pytest.approx(1.0 / 6.0)
    assert link_loss(0, 0) == 0.0
    with pytest.raises(NegativeLoss):
        link_loss(5, 6)


def test_link_delay_idle_is_base():
    sim = init_sim(single_link_graph(delay=2.0), seed=1, probe_jitter_ms=0.0)
    step(sim)
    assert link_delay(sim, ("a", "b")) == pytest.approx(2.0)


def test_link_delay_border_link_mean():
    sim = init_sim(two_domain_graph(delay=6.0), seed=1, probe_jitter_ms=0.0)
    step(sim)
    # border probe returns two one-way stamps; delay is their mean
    assert link_delay(sim, ("b", "c")) == pytest.approx(6.0)


def test_link_delay_unknown_pair():
    sim = init_sim(two_domain_graph(), seed=1)
    with pytest.raises(UnknownLink):
        link_delay(sim, ("a", "d"))


def test_domain_average_counts_both_directions():
    # single-link 2-node domain: denominator 4, numerator twice the value
    g = single_link_graph(cap=10.0, delay=2.0)
    sim = init_sim(g, seed=1, probe_jitter_ms=0.0, p_err=0.0)
    assign_flow(sim, FlowDemand("a", "b", 4.0), ["a", "b"])
    step(sim, 1.0)
    frame = frame_from_sim(sim, 1, 1.0)
    tput, delay, loss = domain_averages([frame], g, 1)
    expected_tput = 2.0 * (4.0 / 6.0) / 4.0
    assert tput == pytest.approx(expected_tput)
    assert loss == 0.0
    link_d = frame.delay_ms[("a", "b")]
    assert delay == pytest.approx(2.0 * link_d / 4.0)


def test_idle_domain_average():
    g = two_domain_graph(delay=2.0)
    sim = init_sim(g, seed=1, probe_jitter_ms=0.0)
    step(sim)
    frame = frame_from_sim(sim, 1, 1.0)
    tput, delay, loss = domain_averages([frame], g, 1)
    assert tput == 0.0
    assert loss == 0.0
    assert delay == pytest.approx(2.0 * 2.0 / 4.0)


def test_time_average_of_constant_window():
    g = two_domain_graph()
    sim = init_sim(g, seed=1, probe_jitter_ms=0.0, p_err=0.0)
    assign_flow(sim, FlowDemand("a", "b", 3.0), ["a", "b"])
    step(sim)
    f1 = frame_from_sim(sim, 1, 1.0)
    step(sim)
    f2 = frame_from_sim(sim, 1, 1.0)
    one = domain_averages([f1], g, 1)
    two = domain_averages([f1, f2], g, 1)
    assert one == pytest.approx(two)


def test_window_concatenation_linearity():
    g = two_domain_graph()
    sim = init_sim(g, seed=1, probe_jitter_ms=0.0, p_err=0.0)
    assign_flow(sim, FlowDemand("a", "c", 2.0), ["a", "b", "c"])
    step(sim)
    frame = frame_from_sim(sim, "global", 1.0)
    single = global_averages([frame], g)
    doubled = global_averages([frame, frame], g)
    assert single == pytest.approx(doubled)


def test_global_reduces_to_domain_for_single_domain():
    g = single_link_graph()
    sim = init_sim(g, seed=1, probe_jitter_ms=0.0, p_err=0.0)
    assign_flow(sim, FlowDemand("a", "b", 5.0), ["a", "b"])
    step(sim)
    dom = domain_averages([frame_from_sim(sim, 1, 1.0)], g, 1)
    glob = global_averages([frame_from_sim(sim, "global", 1.0)], g)
    assert dom == pytest.approx(glob)


def test_global_denominator_39_nodes():
    from xdrlab.topology import generate_experiment_topology

    g = generate_experiment_topology(seed=7)
    sim = init_sim(g, seed=1, probe_jitter_ms=0.0)
    step(sim)
    frame = frame_from_sim(sim, "global", 1.0)
    _, delay, _ = global_averages([frame], g)
    manual = 2.0 * sum(frame.delay_ms.values()) / (39 * 39)
    assert delay == pytest.approx(manual)


def test_empty_window_rejected():
    g = single_link_graph()
    with pytest.raises(EmptyWindow):
        global_averages([], g)


def report_rows(algos=3, scopes=4, loads=10):
    return [
        AveragedReport(f"algo{a}", f"scope{s}", float(l + 1), 0.5, 1.25, 0.01)
        for a in range(algos)
        for s in range(scopes)
        for l in range(loads)
    ]


def test_report_cartesian_count():
    text = emit_report(report_rows())
    lines = text.strip().split("\n")
    assert len(lines) == 1 + 120


def test_report_single_row():
    text = emit_report([AveragedReport("dijkstra", "global", 5.0, 0.1, 2.0, 0.0)])
    lines = text.strip().split("\n")
    assert lines[0] == "algorithm,scope,offered_load_mbit,avg_throughput,avg_delay_ms,avg_loss"
    assert lines[1] == "dijkstra,global,5,0.1,2,0"


def test_report_deterministic():
    rows = report_rows(2, 2, 2)
    assert emit_report(rows) == emit_report(list(reversed(rows)))


def test_report_six_significant_digits():
    text = emit_report(
        [AveragedReport("ospf", "d1", 1.0, 0.123456789, 3.14159265, 0.000123456789)]
    )
    assert "0.123457" in text
    assert "3.14159" in text
    assert "0.000123457" in text
