"""Operator entry point.

Subcommands mirror the experiment lifecycle: ``gen-topo`` writes a topology
fixture, ``collect`` records simulator telemetry into matrix pools,
``train`` fits the per-scope predictor and routing agent, ``serve-root``
and ``serve-local`` bring the controller protocol up over loopback, and
``evaluate``/``report`` produce the algorithm-comparison CSVs.

Every command is fully seeded: the same config and seed give byte-identical
pool dumps, checkpoints, and report files. Exit codes are stable per error
class so scripts can branch on them (see EXIT_* constants).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import sys
import threading
import time
from pathlib import Path

from . import netsim
from .agents import AgentError
from .coopcomm import (
    DEFAULT_ROOT_ADDR,
    BindFailure,
    LocalClient,
    ProtocolError,
    RootServer,
)
from .experiment import (
    ExperimentConfig,
    ExperimentError,
    MissingCheckpoint,
    MissingPool,
    evaluate_algorithms,
    load_agent,
    load_collection,
    make_live_root_oracle,
    resolve_topology,
    run_collection,
    save_agent,
    save_collection,
    scope_from_label,
    scope_label,
    train_scope,
)
from .metrics import REPORT_HEADER, emit_report
from .routing import dijkstra_paths
from .telemetry import build_tm, collect_info
from .topology import (
    GLOBAL,
    TopologyError,
    border_links,
    generate_experiment_topology,
    serialize_topology,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_TOPOLOGY = 3
EXIT_MISSING_INPUT = 4
EXIT_BIND = 5
EXIT_PROTOCOL = 6
EXIT_TRAINING = 7

ENV_ROOT_ADDR = "XDR_ROOT_ADDR"


def _root_addr(args) -> str:
    return args.root_addr or os.environ.get(ENV_ROOT_ADDR) or DEFAULT_ROOT_ADDR


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
    else:
        cfg = ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = Path(args.out)
    return cfg


def _topology_for(cfg: ExperimentConfig):
    fixture = cfg.out_dir / "topology.json"
    if cfg.topology_file is None and fixture.exists():
        cfg.topology_file = fixture
    return resolve_topology(cfg)


# ---------------------------------------------------------------------------
# commands


def cmd_gen_topo(args) -> int:
    cfg = _load_config(args)
    graph = generate_experiment_topology(
        cfg.seed, cfg.domain_sizes, cfg.bw_range, cfg.capped_domain
    )
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    target = cfg.out_dir / "topology.json"
    target.write_text(serialize_topology(graph), encoding="utf-8")
    print(target)
    return EXIT_OK


def cmd_collect(args) -> int:
    cfg = _load_config(args)
    graph = _topology_for(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / "topology.json").write_text(serialize_topology(graph), "utf-8")
    result = run_collection(graph, cfg)
    save_collection(cfg.out_dir, result)
    print(f"collected {len(result)} intervals over scopes {result.scopes()}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    graph = _topology_for(cfg)
    labels = (
        [scope_label(d) for d in graph.domain_ids()] + [GLOBAL]
        if args.scope == "all"
        else [args.scope]
    )
    collection = load_collection(cfg.out_dir, labels)
    cache = cfg.out_dir / "candidates"
    for label in labels:
        agent = train_scope(
            graph, cfg, scope_from_label(label), collection,
            with_predictor=not args.ablation, cache_dir=cache,
        )
        save_agent(cfg.out_dir, agent, cfg)
        first = agent.reward_trace[0] if agent.reward_trace else float("nan")
        last = agent.reward_trace[-1] if agent.reward_trace else float("nan")
        print(f"trained {label}: episode reward {first:.3f} -> {last:.3f}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    graph = _topology_for(cfg)
    algorithms = tuple(args.algorithms.split(","))
    models = None
    if "mdrl-tp" in algorithms:
        cache = cfg.out_dir / "candidates"
        models = {
            label: load_agent(cfg.out_dir, graph, scope_from_label(label), cache)
            for label in [scope_label(d) for d in graph.domain_ids()] + [GLOBAL]
        }
    eval_seed = args.eval_seed if args.eval_seed is not None else cfg.seed
    reports = evaluate_algorithms(
        graph, cfg, models, eval_seed=eval_seed, algorithms=algorithms
    )
    out = cfg.out_dir / "reports"
    out.mkdir(parents=True, exist_ok=True)
    target = out / f"eval_seed{eval_seed}.csv"
    target.write_text(emit_report(reports), encoding="utf-8")
    print(target)
    return EXIT_OK


def cmd_report(args) -> int:
    rows: list[str] = []
    for path in args.inputs:
        lines = Path(path).read_text(encoding="utf-8").strip().split("\n")
        if lines[0] != REPORT_HEADER:
            raise ExperimentError(f"{path} is not an evaluation report")
        rows.extend(lines[1:])
    text = REPORT_HEADER + "\n" + "\n".join(sorted(set(rows))) + "\n"
    if args.merged_out:
        Path(args.merged_out).write_text(text, encoding="utf-8")
        print(args.merged_out)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _install_stop_handler(stop: threading.Event) -> None:
    def handler(signum, frame):
        stop.set()

    signal.signal(signal.SIGTERM, handler)
    signal.signal(signal.SIGINT, handler)


def cmd_serve_root(args) -> int:
    cfg = _load_config(args)
    graph = _topology_for(cfg)
    fallback = dijkstra_paths(graph)
    server = RootServer(_root_addr(args), lambda s, d: fallback.path(s, d))
    if args.oracle == "model":
        model = load_agent(cfg.out_dir, graph, GLOBAL, cfg.out_dir / "candidates")
        server.path_oracle = make_live_root_oracle(graph, cfg, model, server.registry)
    server.start()
    print(f"root serving on {server.addr}", flush=True)
    stop = threading.Event()
    _install_stop_handler(stop)
    try:
        while not stop.is_set():
            stop.wait(0.2)
    finally:
        server.stop()
    return EXIT_OK


def cmd_serve_local(args) -> int:
    cfg = _load_config(args)
    graph = _topology_for(cfg)
    domain = args.domain
    if domain not in graph.domain_ids():
        raise ExperimentError(f"unknown domain {domain}")
    nodes = list(graph.domain_nodes(domain))
    edges = [{"u": u, "v": v} for (u, v) in graph.intra_links(domain)]
    dpids = sorted(
        {n for (u, v), da, db in border_links(graph) for n in (u, v)
         if graph.domains[n] == domain}
    )
    client = LocalClient(f"C{domain}", _root_addr(args))
    client.connect(retries=args.retries, delay=0.3)
    client.register(nodes, edges, dpids)
    print(f"C{domain} registered with root at {_root_addr(args)}", flush=True)

    sim = netsim.init_sim(graph, seed=cfg.seed, probe_jitter_ms=0.0)
    base_paths = dijkstra_paths(graph)
    stop = threading.Event()
    _install_stop_handler(stop)
    ticks = 0
    try:
        while not stop.is_set() and (args.ticks == 0 or ticks < args.ticks):
            netsim.step(sim, cfg.collect.delta_t)
            snap = netsim.snapshot(sim)
            tm = build_tm(collect_info(graph, snap, domain), cfg.tm_weights)
            client.syn_global_view([tm])
            ticks += 1
            if stop.wait(args.tick_seconds):
                break
    finally:
        client.close()
    print(f"C{domain} streamed {ticks} intervals")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xdrlab",
        description="multi-domain routing lab: simulate, learn, compare",
    )
    parser.add_argument("--config", help="experiment config JSON")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--out", default=None, help="output directory override")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("gen-topo", help="write the experiment topology fixture")
    sub.add_parser("collect", help="run the simulator and dump matrix pools")

    p_train = sub.add_parser("train", help="train predictor and routing agent")
    p_train.add_argument("--scope", default="all", help="d1|d2|d3|global|all")
    p_train.add_argument(
        "--ablation", action="store_true", help="train without the traffic predictor"
    )

    p_eval = sub.add_parser("evaluate", help="offered-load sweep across algorithms")
    p_eval.add_argument("--algorithms", default="mdrl-tp,dijkstra,ospf")
    p_eval.add_argument("--eval-seed", type=int, default=None)

    p_rep = sub.add_parser("report", help="merge evaluation CSVs")
    p_rep.add_argument("inputs", nargs="+")
    p_rep.add_argument("--merged-out", default=None)

    p_root = sub.add_parser("serve-root", help="run the root controller")
    p_root.add_argument("--root-addr", default=None)
    p_root.add_argument("--oracle", choices=("dijkstra", "model"), default="dijkstra")

    p_local = sub.add_parser("serve-local", help="run one local controller")
    p_local.add_argument("--domain", type=int, required=True)
    p_local.add_argument("--root-addr", default=None)
    p_local.add_argument("--tick-seconds", type=float, default=1.0)
    p_local.add_argument("--ticks", type=int, default=0, help="0 = run until signal")
    p_local.add_argument("--retries", type=int, default=5)
    return parser


_COMMANDS = {
    "gen-topo": cmd_gen_topo,
    "collect": cmd_collect,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "serve-root": cmd_serve_root,
    "serve-local": cmd_serve_local,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (MissingCheckpoint, MissingPool) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except BindFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BIND
    except ProtocolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except TopologyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOPOLOGY
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AgentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except Exception as exc:  # noqa: BLE001 - last resort, still report cleanly
        logger.exception("unexpected failure")
        print(f"unexpected error: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
