"""Command-line front end.

Subcommands::

    semifl partition --config runs.cfg [--out DIR] [--seed N]
    semifl train     --config runs.cfg --out DIR [--seed N] [--cluster-order ...]
    semifl compare   --subject a.sfl1 --reference b.sfl1 [--out report.csv]
    semifl report    RUN_DIR [RUN_DIR ...]

Exit codes: 0 success, 1 configuration error, 2 data error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import clustering, experiment
from .config import parse_config, validate_config
from .errors import ConfigError, DataError


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ConfigError (exit code 1)."""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="semifl",
                     description="Clustered federated-learning simulator")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def add_common(p):
        p.add_argument("--config", required=True, help="key = value run spec")
        p.add_argument("--seed", type=int, default=None,
                       help="override master_seed from the config")

    p = sub.add_parser("partition",
                       help="materialise the client partition and clusters")
    add_common(p)
    p.add_argument("--out", default=".", help="output directory (default: .)")

    p = sub.add_parser("train", help="run one experiment")
    add_common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--cluster-order", default=None,
                   help="override cluster_order: fixed | shuffled:<seed>")

    p = sub.add_parser("compare", help="per-layer divergence of two checkpoints")
    p.add_argument("--subject", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--out", default=None, help="write the CSV here instead of stdout")

    p = sub.add_parser("report", help="summarise finished runs")
    p.add_argument("runs", nargs="+", metavar="RUN_DIR",
                   help="run directories (or metrics.csv paths)")
    return parser


def _load_config(args):
    cfg = parse_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"--seed must be >= 0, got {args.seed}")
        cfg.master_seed = args.seed
    if getattr(args, "cluster_order", None):
        cfg.cluster_order = args.cluster_order
    return validate_config(cfg)


def _cmd_partition(args) -> int:
    cfg = _load_config(args)
    train, _ = experiment.load_datasets(cfg)
    clients = experiment.build_clients(cfg, train)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "clients.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["client_id", "examples", "labels"])
        for c in clients:
            writer.writerow([c.client_id, len(c),
                             "|".join(str(l) for l in c.distinct_labels)])
    print(f"wrote {out / 'clients.csv'} ({len(clients)} clients)")

    if cfg.mode == "semifl":
        assignment = experiment.build_assignment(cfg, clients)
        clustering.save_assignment(assignment, out / "clusters.txt")
        print(f"wrote {out / 'clusters.txt'} ({assignment.num_clusters} clusters, "
              f"pattern {assignment.pattern})")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_config(args)
    records = experiment.run_experiment(cfg, args.out)
    evaluated = [r for r in records if r.test_accuracy == r.test_accuracy]
    final = evaluated[-1] if evaluated else records[-1]
    print(f"{cfg.mode} run finished: {len(records)} rounds, "
          f"final accuracy {final.test_accuracy:.4f} "
          f"(artifacts in {args.out})")
    return 0


def _cmd_compare(args) -> int:
    report = experiment.compare_checkpoints(args.subject, args.reference)
    text = report.to_csv()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_report(args) -> int:
    for run in args.runs:
        s = experiment.summarize_run(run)
        line = (f"{s['run']}: mode={s['mode']} pattern={s['pattern']} "
                f"rounds={s['rounds']} final_acc={s['final_accuracy']:.4f} "
                f"best_acc={s['best_accuracy']:.4f}")
        if "total_uplink_models" in s:
            line += (f" uplink_models={s['total_uplink_models']} "
                     f"uplink_bytes={s['total_uplink_bytes']}")
        print(line)
    return 0


_COMMANDS = {
    "partition": _cmd_partition,
    "train": _cmd_train,
    "compare": _cmd_compare,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_help()
            return 1
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 -- CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
