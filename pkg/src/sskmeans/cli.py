"""Command-line entry point: ``sskmeans run|oracle|analyze|gen-data|sweep``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .config import OUTPUT_ENV, ConfigError, load_config
from .topology import HonestPartition, Topology
from .transcript import TranscriptError, TranscriptStore


def _ids(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated node ids, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sskmeans",
        description="Secret-shared distributed k-means simulator.",
        epilog=f"Default output root comes from ${OUTPUT_ENV} (else ./runs).",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="secure run + reference + leakage audit")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="output directory")

    p = sub.add_parser("oracle", help="centralized k-means only")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="output directory (default: <run dir>/oracle)")

    p = sub.add_parser("analyze", help="leakage report from persisted transcripts")
    p.add_argument("transcripts", help="the transcripts/ directory of a run")
    p.add_argument("--corrupted", type=_ids, required=True, help="comma-separated node ids")
    p.add_argument("-o", "--output", help="write the report here instead of stdout")

    p = sub.add_parser("gen-data", help="sample a dataset from a config's data section")
    p.add_argument("spec")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("sweep", help="repeat run over consecutive master seeds")
    p.add_argument("config")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-o", "--output")
    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    outcome = harness.run_experiment(cfg, args.output)
    m = outcome.metrics
    print(
        f"{cfg.run_id}: iterations={m.iterations} converged={m.kmeans_converged} "
        f"agreement={m.label_agreement} leakage={m.leakage_perfect}/{m.leakage_bounded}/{m.leakage_full}"
        f" ({outcome.message})"
    )
    return outcome.exit_code


def _cmd_oracle(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.output) if args.output else cfg.default_output() / "oracle"
    result = harness.run_oracle(cfg, out)
    print(f"oracle: iterations={result.iterations} converged={result.converged} -> {out}")
    return harness.EXIT_OK if result.converged else harness.EXIT_KMEANS


def _cmd_analyze(args) -> int:
    tdir = Path(args.transcripts)
    graph = Topology.load(tdir / "graph.txt")
    store = TranscriptStore.load(tdir)
    part = HonestPartition.from_corrupted(store.n, args.corrupted)
    text = harness.analyze_run(store, graph, part).to_text()
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return harness.EXIT_OK


def _cmd_gen_data(args) -> int:
    cfg = load_config(args.spec)
    if cfg.n is None:
        raise ConfigError("topology.n is required to size the dataset")
    ds = harness.generate_data(harness.mixture_from_config(cfg), cfg.n, cfg.seed_for("data"))
    harness.write_dataset(ds, args.output)
    return harness.EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.trials < 1:
        raise ConfigError("--trials must be >= 1")
    out = Path(args.output) if args.output else cfg.default_output()
    outcomes, summary = harness.sweep(cfg, args.trials, out, jobs=args.jobs)
    print(
        f"sweep: {summary['trials']} trials, {summary['failures']} failures, "
        f"agreement {summary['label_agreement']}/{summary['trials']}"
    )
    return harness.EXIT_OK if summary["failures"] == 0 else max(o.exit_code for o in outcomes)


COMMANDS = {
    "run": _cmd_run,
    "oracle": _cmd_oracle,
    "analyze": _cmd_analyze,
    "gen-data": _cmd_gen_data,
    "sweep": _cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, TranscriptError, FileNotFoundError, ValueError) as exc:
        print(f"sskmeans {args.command}: error: {exc}", file=sys.stderr)
        return harness.EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
