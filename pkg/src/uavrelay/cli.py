"""Command-line entry point: train, eval, sweep, validate, replay."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import agent as ag
from . import experiments as ex
from . import export
from .config import ConfigError, ScenarioConfig
from .env import make_env
from .nn import MlpQNetwork
from .traces import diff_steps, record_episode, replay_steps
from .validation import SUITES, run_all

log = logging.getLogger("uavrelay")

AGENT_KINDS = {"replay": "replay", "baseline": "baseline", "greedy": "greedy"}


def _common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", type=Path, default=default, help="scenario file (INI sections)")
    parser.add_argument("--seed", type=int, default=default, help="run seed (default 0)")
    parser.add_argument("--out", type=Path, default=default, help="output directory (default ./runs)")
    parser.add_argument("--agent", choices=sorted(AGENT_KINDS), default=default,
                        help="agent kind (default replay)")
    parser.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS if suppress else 0)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uavrelay", description="UAV relay navigation simulator and DQN trainer")
    _common(p, suppress=False)
    sub = p.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text, description=help_text)
        _common(sp, suppress=True)
        return sp

    sp = add("train", "train one agent on one scenario, then evaluate it")
    sp.add_argument("--episodes", type=int, help="training episodes (overrides the config)")

    sp = add("eval", "evaluate a stored network (or the greedy policy)")
    sp.add_argument("--network", type=Path, help="network file written by train")
    sp.add_argument("--episodes", type=int, help="evaluation episodes (overrides the config)")
    sp.add_argument("--trace", action="store_true", help="write one JSONL trace per episode")

    sp = add("sweep", "run an experiment grid over one axis")
    sp.add_argument("--axis", required=True, choices=sorted(ex.AXES))
    sp.add_argument("--grid", type=_floats, help="comma-separated grid points (default: the axis grid)")
    sp.add_argument("--seeds", type=int, help="number of seeds, counted up from --seed")
    sp.add_argument("--agents", type=_agents, default=ex.AGENTS,
                    help="comma-separated agent kinds (default: all three)")
    sp.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    sp.add_argument("--name", default="sweep", help="experiment name used in file names")

    sp = add("validate", "run the property suites; exit 0 only if all pass")
    sp.add_argument("--suite", action="append", choices=sorted(SUITES), help="run only these suites")

    sp = add("replay", "re-run a logged episode and report differences")
    sp.add_argument("log", type=Path, help="JSONL trace written by eval --trace")
    return p


def _floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from exc


def _agents(text: str) -> tuple:
    kinds = tuple(x.strip() for x in text.split(",") if x.strip())
    bad = [k for k in kinds if k not in AGENT_KINDS]
    if bad or not kinds:
        raise argparse.ArgumentTypeError(f"unknown agent kinds {bad}")
    return kinds


def _load_config(args) -> ScenarioConfig:
    return ScenarioConfig.load(args.config) if args.config else ScenarioConfig()


def cmd_train(args, config: ScenarioConfig) -> int:
    if args.episodes is not None:
        config = config.replace(episodes=args.episodes)
    kind = args.agent
    result = ex.train_agent(config, kind, args.seed)
    episodes = ex.evaluate_agent(config, kind, args.seed, None if result is None else result.net)
    manifest = export.write_run_artifacts(args.out, config, args.seed, kind, result, episodes)
    summary = ag.summarize(episodes)
    print(f"{kind} seed {args.seed}: " + ", ".join(f"{k}={v:.4g}" for k, v in summary.items()))
    print(f"manifest: {manifest}")
    return 0


def cmd_eval(args, config: ScenarioConfig) -> int:
    if args.episodes is not None:
        config = config.replace(eval_episodes=args.episodes)
    kind = args.agent
    net = None
    if kind != "greedy":
        if args.network is None:
            print("error: --network is required for learned agents", file=sys.stderr)
            return 2
        net = MlpQNetwork.load(args.network)
    seeds = ag.eval_seeds(args.seed, config.eval_episodes)
    if args.trace:
        rows = []
        for k, s in enumerate(seeds):
            metrics, header, steps = record_episode(config, args.seed, s, kind, net,
                                                    None if args.network is None else str(args.network))
            path = export.write_trace(Path(args.out) / "traces" / f"{kind}_s{args.seed}_e{k}.jsonl", header, steps)
            rows.append(metrics)
            print(f"trace: {path}")
        episodes = rows
    else:
        episodes = ex.evaluate_agent(config, kind, args.seed, net, make_env(config, args.seed))
    summary = ag.summarize(episodes)
    export.write_json(Path(args.out) / f"eval_{kind}_s{args.seed}.json",
                      {"scenario_id": config.digest(), "seed": args.seed, "agent": kind,
                       "network": None if args.network is None else str(args.network),
                       "summary": summary, "episodes": [e.as_dict() for e in episodes]})
    print(f"{kind} seed {args.seed}: " + ", ".join(f"{k}={v:.4g}" for k, v in summary.items()))
    return 0


def cmd_sweep(args, config: ScenarioConfig) -> int:
    n = args.seeds if args.seeds is not None else len(config.seeds)
    seeds = tuple(range(args.seed, args.seed + n)) if args.seeds is not None else config.seeds
    records = ex.run_experiment(config, args.axis, args.grid, seeds, args.agents, args.out, args.workers)
    out = Path(args.out)
    export.export_records(records, out / f"{args.name}_{args.axis}_records.csv")
    summary = ex.aggregate(records)
    export.export_summary(summary, out, args.name)
    failed = [r for r in records if not r.ok]
    print(f"{len(records)} runs, {len(failed)} failed; tables in {out}")
    for c in summary.cells:
        print(f"  {c.axis}={c.value:g} {c.agent:8s} eta={c.mean['eta']:.4f}±{c.std['eta']:.4f} "
              f"aoi={c.mean['aoi']:.4f} reward={c.mean['reward']:.2f}")
    return 1 if failed else 0


def cmd_validate(args, config: ScenarioConfig) -> int:
    results = run_all(args.seed, args.suite)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} ({r.seconds:.2f}s): {r.detail}")
    return 0 if all(r.passed for r in results) else 1


def cmd_replay(args, config: ScenarioConfig) -> int:
    header, steps = export.read_trace(args.log)
    diffs = diff_steps(steps, replay_steps(header, steps))
    for d in diffs:
        print(d)
    print(f"{len(diffs)} differences over {len(steps)} steps")
    return 0 if not diffs else 1


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep, "validate": cmd_validate,
            "replay": cmd_replay}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.seed = 0 if args.seed is None else args.seed
    args.out = Path("runs") if args.out is None else args.out
    args.agent = args.agent or "replay"
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _load_config(args)
        return COMMANDS[args.command](args, config)
    except (ConfigError, ex.SweepError, export.ExportError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
