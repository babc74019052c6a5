"""Command line entry point: ``srmaps <experiment> [flags]``.

Every run writes its artifacts plus ``manifest.json`` into ``--out``.
Exit status: 0 success, 1 I/O problem, 2 usage error, 3 invariant violation.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import io as sio
from .analysis import (
    autocorrelation_peak_count,
    classical_mds,
    matrix_error,
    metric_mds,
    silhouette,
    spearman,
)
from .environments import (
    StateSpace,
    TransitionMatrix,
    build_grid_room,
    build_language_space,
    default_maze,
    ground_truth_tp,
    load_maze_file,
    sample_sentences,
    sample_transition_pairs,
)
from .errors import ConfigError, InvariantError, LayoutError
from .navigation import AgentConfig, bfs_distances, greedy_rollout, policy_tp_matrix, train_agent
from .network import TrainConfig, init_network, predict_tp_matrix, save_network, train
from .render import render_scatter, write_heatmap
from .sr import SRConfig, sr_decomposition, sr_eigenmaps, successor_matrix, value_function

log = logging.getLogger("srmaps")

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_INVARIANT = 0, 1, 2, 3
EDGE_THRESHOLD = 1e-4
ROW_SUM_TOL = 1e-12

# reduced desk-scale budgets; --paper-budget swaps in the published ones
BUDGETS = {
    "explore": dict(samples=50_000, epochs=200, batch=64, lr=1e-3, gamma=0.9, t=10),
    "language": dict(samples=5_000, epochs=50, batch=32, lr=1e-2, gamma=1.0, t=2),
    "navigate": dict(episodes=40_000, lr=0.1, gamma=0.9, t=100),
    "eigen": dict(gamma=0.9, t=10, k=30),
    "mds": dict(samples=5_000, epochs=50, batch=32, lr=1e-2, gamma=1.0, t=2),
}
PAPER_BUDGETS = {
    "explore": dict(samples=50_000, epochs=10_000),
    "language": dict(samples=5_000, epochs=50),
    "mds": dict(samples=5_000, epochs=50),
    "navigate": dict(episodes=10_000),
}
DEFAULT_ENV = {
    "explore": "room10",
    "navigate": "maze",
    "language": "language",
    "eigen": "room10",
    "mds": "language",
    "oracle": "room10",
}


class Run:
    """Output directory plus the manifest being assembled for it."""

    def __init__(self, kind: str, out: Path, config: dict):
        self.kind = kind
        self.out = out
        self.config = config
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self.metrics: dict = {}
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(name)
        return p

    def matrix(self, name: str, m) -> None:
        sio.write_matrix_csv(self.path(name), m)

    def finish(self) -> None:
        doc = {
            "experiment": self.kind,
            "tool_version": __version__,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": {name: sio.file_digest(self.out / name) for name in sorted(set(self.outputs))},
            "metrics": self.metrics,
        }
        sio.write_json(self.out / "manifest.json", doc)


def resolve_env(name: str, maze_file: str | None) -> StateSpace:
    if maze_file:
        return load_maze_file(maze_file)
    m = re.fullmatch(r"room(\d+)(?:x(\d+))?", name)
    if m:
        rows = int(m.group(1))
        return build_grid_room(rows, int(m.group(2) or rows))
    if name == "maze":
        return default_maze()
    if name == "language":
        return build_language_space()
    raise ConfigError(f"unknown environment {name!r} (use roomN, roomRxC, maze or language)")


def check_rows(tp: TransitionMatrix, what: str) -> None:
    sums = tp.probs.sum(axis=1)
    live = ~tp.excluded
    worst = float(np.abs(sums[live] - 1.0).max()) if live.any() else 0.0
    if worst > ROW_SUM_TOL:
        raise InvariantError(f"{what}: row sums deviate from 1 by {worst:.3g}")
    if not np.all(np.isfinite(tp.probs)) or tp.probs.min() < 0:
        raise InvariantError(f"{what}: entries must be finite and non-negative")


def grid_field(space: StateSpace, values: np.ndarray) -> np.ndarray:
    f = np.where(space.valid_mask, values, np.nan)
    return f.reshape(space.grid_shape)


def write_edges(path: Path, tp: np.ndarray, threshold: float = EDGE_THRESHOLD) -> int:
    """Plain-text ``source target probability`` lines for entries >= threshold."""
    src, dst = np.nonzero(tp >= threshold)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# source target probability\n")
        for s, t in zip(src, dst):
            fh.write(f"{s} {t} {format(float(tp[s, t]), '.17g')}\n")
    return len(src)


def _budget(args, kind: str) -> dict:
    b = dict(BUDGETS.get(kind, {}))
    if args.paper_budget:
        b.update(PAPER_BUDGETS.get(kind, {}))
    for key in ("samples", "epochs", "batch", "lr", "gamma", "t", "k", "episodes"):
        val = getattr(args, key, None)
        if val is not None:
            b[key] = val
    return b


def _sr_config(b: dict) -> SRConfig:
    return SRConfig(b["gamma"], b["t"])


def _train_supervised(space, data, b, args, run: Run):
    net = init_network(space.n_states, args.hidden, args.seed)
    cfg = TrainConfig(b["epochs"], b["batch"], b["lr"], args.seed, args.optimizer)
    report = train(net, data, cfg)
    sio.write_vector_csv(run.path("loss.csv"), ["epoch", "loss"], enumerate(report.epoch_loss, 1))
    save_network(net, run.path("network.npz"))
    run.metrics["final_loss"] = report.final_loss
    run.metrics["train_seconds"] = round(report.duration, 3)
    tp = predict_tp_matrix(net, space)
    check_rows(tp, "learned TP")
    return net, tp


def _start_states(space: StateSpace, starts: str | None) -> list[int]:
    if starts:
        return [int(s) for s in starts.split(",")]
    rows, cols = space.grid_shape
    return [space.index(rows // 2, cols // 2), space.index(1, 1)]


def cmd_explore(args, run: Run) -> None:
    space = resolve_env(args.env or DEFAULT_ENV["explore"], args.maze_file)
    if space.grid_shape is None:
        raise ConfigError("explore needs a spatial environment")
    b = _budget(args, "explore")
    run.config.update(b)
    data = sample_transition_pairs(space, b["samples"], args.seed)
    _, tp = _train_supervised(space, data, b, args, run)
    truth = ground_truth_tp(space)
    cfg = _sr_config(b)
    sr, sr_truth = successor_matrix(tp, cfg), successor_matrix(truth, cfg)
    run.matrix("tp.csv", tp.probs)
    run.matrix("sr.csv", sr.entries)
    run.matrix("tp_truth.csv", truth.probs)
    run.matrix("sr_truth.csv", sr_truth.entries)
    tp_err = matrix_error(tp, truth)
    sr_err = matrix_error(sr, sr_truth, excluded=truth.excluded)
    sio.write_json(run.path("error_report.json"), {"tp": tp_err.to_dict(), "sr": sr_err.to_dict()})
    run.metrics.update(tp_mean_tv=tp_err.mean_tv, sr_frobenius_relative=sr_err.frobenius_relative)
    for s in _start_states(space, args.starts):
        write_heatmap(run.path(f"maps/sr_start_{s:03d}.pgm"), grid_field(space, sr.entries[s]), "gray", args.scale)
        write_heatmap(run.path(f"maps/sr_truth_start_{s:03d}.pgm"), grid_field(space, sr_truth.entries[s]), "gray", args.scale)


def cmd_navigate(args, run: Run) -> None:
    space = resolve_env(args.env or DEFAULT_ENV["navigate"], args.maze_file)
    if args.maze_file:
        run.inputs[args.maze_file] = sio.file_digest(args.maze_file)
    b = _budget(args, "navigate")
    run.config.update(b)
    cfg = AgentConfig(episodes=b["episodes"], learning_rate=b["lr"], seed=args.seed, hidden_width=args.hidden)
    agent = train_agent(space, cfg)
    tp = policy_tp_matrix(agent)
    check_rows(tp, "policy TP")
    truth = ground_truth_tp(space)
    sr_cfg = _sr_config(b)
    sr, sr_truth = successor_matrix(tp, sr_cfg), successor_matrix(truth, sr_cfg)
    run.matrix("tp.csv", tp.probs)
    run.matrix("sr.csv", sr.entries)
    run.matrix("tp_truth.csv", truth.probs)
    run.matrix("sr_truth.csv", sr_truth.entries)

    dist = bfs_distances(space, sorted(space.reward_states))
    rollouts = [greedy_rollout(agent, s, max_steps=4 * space.n_states) for s in space.valid_states]
    sio.write_episodes_csv(run.path("episodes.csv"), rollouts)
    reached = [ep.cause.value == "Goal" for ep in rollouts]
    within = [ok and ep.length <= dist[ep.visited[0]] + 2 for ok, ep in zip(reached, rollouts)]
    rewards = np.zeros(space.n_states)
    rewards[sorted(space.reward_states)] = 1.0
    value = value_function(sr, rewards)
    save_network(agent.net, run.path("agent.npz"), action_head="compass8", temperature=cfg.temperature)
    causes = [ep.cause.value for ep in agent.episodes]
    run.metrics.update(
        greedy_goal_fraction=float(np.mean(reached)),
        greedy_within_bfs_plus_2=float(np.mean(within)),
        training_causes={c: causes.count(c) for c in sorted(set(causes))},
    )
    write_heatmap(run.path("maps/value.pgm"), grid_field(space, value), "gray", args.scale)
    valid = space.valid_states
    order = np.argsort(dist[valid], kind="stable")
    picks = args.starts and [int(s) for s in args.starts.split(",")]
    picks = picks or [int(valid[order[i]]) for i in sorted({len(order) // 10, len(order) // 2, len(order) - 1})]
    for s in picks:
        write_heatmap(run.path(f"maps/sr_start_{s:03d}.pgm"), grid_field(space, sr.entries[s]), "gray", args.scale)
        write_heatmap(run.path(f"maps/sr_truth_start_{s:03d}.pgm"), grid_field(space, sr_truth.entries[s]), "gray", args.scale)


def _language_run(args, run: Run, kind: str):
    space = resolve_env(args.env or DEFAULT_ENV[kind], None)
    if space.labels is None:
        raise ConfigError(f"{kind} needs the language environment")
    b = _budget(args, kind)
    run.config.update(b)
    data = sample_sentences(space, b["samples"], args.seed)
    _, tp = _train_supervised(space, data, b, args, run)
    return space, b, tp


def cmd_language(args, run: Run) -> None:
    space, b, tp = _language_run(args, run, "language")
    truth = ground_truth_tp(space)
    cfg = _sr_config(b)
    sr, sr_truth = successor_matrix(tp, cfg), successor_matrix(truth, cfg)
    run.matrix("tp.csv", tp.probs)
    run.matrix("sr.csv", sr.entries)
    run.matrix("tp_truth.csv", truth.probs)
    run.matrix("sr_truth.csv", sr_truth.entries)
    n_edges = write_edges(run.path("edges.txt"), tp.probs)
    write_edges(run.path("edges_truth.txt"), truth.probs)
    err = matrix_error(tp, truth)
    sio.write_json(run.path("error_report.json"), {"tp": err.to_dict()})
    on_class = []
    for s in range(space.n_states):
        if space.adjacency[s]:
            target = space.labels[space.adjacency[s][0]]
            on_class.append(float(tp.probs[s, space.labels == target].sum()))
    run.metrics.update(tp_mean_tv=err.mean_tv, min_successor_class_mass=min(on_class), edges=n_edges)
    for name, m in (("tp", tp.probs), ("sr", sr.entries), ("tp_truth", truth.probs), ("sr_truth", sr_truth.entries)):
        write_heatmap(run.path(f"maps/{name}.pgm"), m, "gray", args.scale)


def cmd_eigen(args, run: Run) -> None:
    space = resolve_env(args.env or DEFAULT_ENV["eigen"], args.maze_file)
    if space.grid_shape is None:
        raise ConfigError("eigenmaps need a spatial environment")
    b = _budget(args, "eigen")
    run.config.update(b)
    if args.sr_file:
        run.inputs[args.sr_file] = sio.file_digest(args.sr_file)
        m = sio.read_matrix_csv(args.sr_file)
    else:
        m = successor_matrix(ground_truth_tp(space), _sr_config(b)).entries
    dec = sr_decomposition(m, space)
    maps = sr_eigenmaps(m, space, b["k"], decomposition=dec)
    valid = space.valid_states
    sym = (m[np.ix_(valid, valid)] + m[np.ix_(valid, valid)].T) / 2
    residual = float(np.abs(sym @ dec.eigenvectors - dec.eigenvectors * dec.eigenvalues).max())
    if residual >= 1e-8:
        raise InvariantError(f"eigenpair residual {residual:.3g} exceeds 1e-8")
    sio.write_vector_csv(run.path("eigenvalues.csv"), ["rank", "eigenvalue"], enumerate(dec.eigenvalues, 1))
    peaks = []
    for em in maps:
        field = np.where(space.valid_mask.reshape(space.grid_shape), em.values, np.nan)
        write_heatmap(run.path(f"maps/eigen_{em.rank:03d}.pgm"), field, "gray", args.scale)
        write_heatmap(run.path(f"maps/eigen_{em.rank:03d}.svg"), field, "diverging", max(args.scale, 1))
        peaks.append(autocorrelation_peak_count(em))
    run.metrics.update(
        max_residual=residual,
        symmetrization_residual=dec.symmetrization_residual,
        peak_counts=peaks,
    )
    if len(maps) >= 3:
        upto = min(len(maps), 20)
        run.metrics["rank_peak_spearman"] = spearman(range(2, upto + 1), peaks[1:upto])


def cmd_mds(args, run: Run) -> None:
    space, b, tp = _language_run(args, run, "mds")
    truth = ground_truth_tp(space)
    cfg = _sr_config(b)
    embed = metric_mds if args.method == "metric" else classical_mds
    run.config["method"] = args.method
    sources = {
        "tp_truth": truth.probs,
        "sr_truth": successor_matrix(truth, cfg).entries,
        "tp_learned": tp.probs,
        "sr_learned": successor_matrix(tp, cfg).entries,
    }
    scores = {}
    for name, vectors in sources.items():
        emb = embed(vectors, space.labels)
        sio.write_embedding_csv(run.path(f"embedding_{name}.csv"), emb, space.class_names)
        run.path(f"mds_{name}.svg").write_bytes(render_scatter(emb.coords, emb.labels, title=name))
        scores[name] = silhouette(emb)
    sio.write_json(run.path("silhouette.json"), scores)
    run.metrics["silhouette"] = scores


def cmd_oracle(args, run: Run) -> None:
    env = args.env or DEFAULT_ENV["oracle"]
    space = resolve_env(env, args.maze_file)
    spatial = space.grid_shape is not None
    gamma = args.gamma if args.gamma is not None else (0.9 if spatial else 1.0)
    t = args.t if args.t is not None else (10 if spatial else 2)
    run.config.update(gamma=gamma, t=t)
    truth = ground_truth_tp(space)
    check_rows(truth, "ground-truth TP")
    run.matrix("tp.csv", truth.probs)
    run.matrix("sr.csv", successor_matrix(truth, SRConfig(gamma, t)).entries)
    if not spatial:
        write_edges(run.path("edges.txt"), truth.probs)


COMMANDS = {
    "explore": (cmd_explore, "train the supervised room model (TP/SR, place-field maps)"),
    "navigate": (cmd_navigate, "train the maze navigation agent (policy TP/SR, rollouts)"),
    "language": (cmd_language, "train on generated sentences (word TP/SR, edge list)"),
    "eigen": (cmd_eigen, "render the leading SR eigenmaps"),
    "mds": (cmd_mds, "embed word TP/SR rows in 2D and score word-class clusters"),
    "oracle": (cmd_oracle, "write ground-truth TP/SR matrices only"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--env", help="room10, roomRxC, maze or language")
    common.add_argument("--maze-file", help="maze layout text file ('#', '.', 'F')")
    common.add_argument("--samples", type=int)
    common.add_argument("--epochs", type=int)
    common.add_argument("--batch", type=int)
    common.add_argument("--lr", type=float)
    common.add_argument("--gamma", type=float)
    common.add_argument("--t", type=int, help="SR horizon (number of steps)")
    common.add_argument("--k", type=int, help="number of eigenmaps")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output directory (default runs/<command>-<env>-s<seed>)")
    common.add_argument("--paper-budget", action="store_true", help="use the published sample/epoch budgets")
    common.add_argument("--episodes", type=int, help="navigation training episodes")
    common.add_argument("--hidden", type=int, help="hidden width (default: number of states)")
    common.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    common.add_argument("--starts", help="comma-separated state ids for SR heatmaps")
    common.add_argument("--sr-file", help="SR matrix CSV to decompose (eigen)")
    common.add_argument("--method", choices=("metric", "classical"), default="metric", help="MDS variant (mds)")
    common.add_argument("--scale", type=int, default=16, help="pixels per cell in images")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="srmaps", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"srmaps {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    env = args.env or (Path(args.maze_file).stem if args.maze_file else DEFAULT_ENV[args.command])
    out = Path(args.out or f"runs/{args.command}-{env}-s{args.seed}")
    config = {"command": args.command, "env": env, "seed": args.seed, "maze_file": args.maze_file}
    config.update(optimizer=args.optimizer, hidden=args.hidden, paper_budget=args.paper_budget)
    try:
        run = Run(args.command, out, config)
        if args.maze_file:
            run.inputs[args.maze_file] = sio.file_digest(args.maze_file)
        COMMANDS[args.command][0](args, run)
        run.finish()
    except InvariantError as exc:
        print(f"srmaps: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (OSError, LayoutError) as exc:
        print(f"srmaps: cannot read input: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"srmaps: {exc}", file=sys.stderr)
        return EXIT_USAGE
    log.info("wrote %s", out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
