import argparse
import dataclasses
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .adapters import Adapter, export_dot, load_bundle, load_condensed, save_bundle, save_condensed, write_report
from .condense import budget_from_rate, condense
from .config import CondenseConfig, EvalConfig, parse_value
from .evaluation import (
    attack_lmia,
    attack_mia,
    compare_efficiency,
    make_edge_split,
    measure_efficiency,
    run_lp,
    stats,
    train_lp,
    train_node_classifier,
)
from .exceptions import BundleLoadError, ConfigurationError, HydroError, NumericalError
from .numerics import Rng
from .spectral import select
from .synth import ba_bundle, sbm_bundle

log = logging.getLogger(__name__)

LOG_ENV = "GC_LOG"
MANIFEST_FILE = "manifest.json"
REPORT_FILE = "report.json"
STATS_FILE = "stats.json"

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

# covered by the global --seed and --threads flags
GLOBAL_FIELDS = {"seed": "seed", "workers": "threads"}
FLAG_ALIASES = {"reduction_rate": ["--rate"]}


def configure_logging():
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


class RunManifest:
    """
    Record of one command invocation, written as ``manifest.json`` next to its outputs.

    Holds everything needed to replay the command: the argument vector, the
    resolved config and its hash, the seed and the tool version.
    """

    command: list
    config_hash: str
    seed: int

    def __init__(self, command, config=None, seed=0):
        self.command = list(command)
        self.config = config
        self.config_hash = config.config_hash() if config is not None else None
        self.seed = seed
        self.version = __version__
        self.started = _now()
        self.finished = None
        self.outputs = []

    def add_output(self, path):
        self.outputs.append(str(path))

    def to_dict(self):
        return {
            "command": self.command,
            "config": self.config.to_dict() if self.config is not None else None,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "version": self.version,
            "started": self.started,
            "finished": self.finished,
            "outputs": self.outputs,
        }

    def write(self, directory):
        self.finished = _now()
        Adapter(directory).write_json(MANIFEST_FILE, self.to_dict())
        log.info(f"Wrote manifest to {directory}")


def _now():
    return datetime.now(timezone.utc).isoformat()


def _flag_type(kind, name):
    def convert(raw):
        try:
            return parse_value(kind, raw, name)
        except ConfigurationError as e:
            raise argparse.ArgumentTypeError(str(e)) from e

    convert.__name__ = kind.__name__
    return convert


def add_config_flags(parser, config_class):
    """Adds one ``--kebab-case`` flag per config field, defaulting to None so files win over nothing."""
    group = parser.add_argument_group(f"{config_class.__name__} keys")
    for f in dataclasses.fields(config_class):
        if f.name in GLOBAL_FIELDS:
            continue
        flags = [f"--{f.name.replace('_', '-')}"] + FLAG_ALIASES.get(f.name, [])
        group.add_argument(
            *flags,
            dest=f.name,
            type=_flag_type(type(f.default), f.name),
            default=None,
            metavar=type(f.default).__name__.upper(),
            help=f"{f.metadata.get('help', '')} (default: {f.default})",
        )


def resolve_config(args, config_class):
    """Built-in defaults, then the ``--config`` file, then command-line flags."""
    config = config_class()
    if args.config:
        config = config_class.from_file(args.config, base=config)
    values = {f.name: getattr(args, f.name, None) for f in dataclasses.fields(config_class)}
    for name, flag in GLOBAL_FIELDS.items():
        values[name] = getattr(args, flag, None)
    return config.overrides(**values)


def _common_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="run seed")
    common.add_argument("--config", default=None, help="key = value config file")
    common.add_argument("--out", default=None, help="output path")
    common.add_argument("--threads", type=int, default=None, help="concurrent repeats or runs")
    return common


def build_parser():
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="pyhydro", description="Hyperbolic spectral graph condensation with privacy evaluation"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", metavar="command")

    synth = commands.add_parser("synth", parents=[common], help="generate a synthetic bundle")
    synth.add_argument("--kind", choices=("sbm", "ba"), default="sbm")
    synth.add_argument("--sizes", default="250,250,250,250", help="comma-separated SBM block sizes")
    synth.add_argument("--p-in", type=float, default=0.05, help="SBM edge probability inside a block")
    synth.add_argument("--p-out", type=float, default=0.002, help="SBM edge probability across blocks")
    synth.add_argument("--nodes", type=int, default=500, help="Barabasi-Albert node count")
    synth.add_argument("--m", type=int, default=3, help="Barabasi-Albert edges per new node")
    synth.add_argument("--classes", type=int, default=2, help="Barabasi-Albert class count")
    synth.add_argument("--features", type=int, default=32, help="feature dimension")
    synth.add_argument("--name", default=None, help="dataset name")
    synth.set_defaults(handler=cmd_synth)

    selection = commands.add_parser("select", parents=[common], help="run node selection only")
    selection.add_argument("--data", required=True, help="bundle directory")
    add_config_flags(selection, CondenseConfig)
    selection.set_defaults(handler=cmd_select)

    cond = commands.add_parser("condense", parents=[common], help="select and condense a bundle")
    cond.add_argument("--data", required=True, help="bundle directory")
    add_config_flags(cond, CondenseConfig)
    cond.set_defaults(handler=cmd_condense)

    evaluate = commands.add_parser("eval", help="evaluate a condensed graph")
    tasks = evaluate.add_subparsers(dest="task", metavar="task")
    for task, text in (
        ("lp", "link-prediction F1 on the original test edges"),
        ("mia", "membership inference on train nodes"),
        ("lmia", "link membership inference on train edges"),
        ("stats", "node, edge and density statistics"),
        ("efficiency", "training time and storage"),
    ):
        sub = tasks.add_parser(task, parents=[common], help=text)
        sub.add_argument("--data", required=task != "stats", help="original bundle directory")
        sub.add_argument("--condensed", default=None, help="condensed artifact directory (original when omitted)")
        add_config_flags(sub, EvalConfig)
        sub.set_defaults(handler=cmd_eval, task=task)
    evaluate.set_defaults(parser=evaluate)

    dot = commands.add_parser("export-dot", parents=[common], help="write a condensed graph as Graphviz DOT")
    dot.add_argument("--condensed", required=True, help="condensed artifact directory")
    dot.add_argument("--threshold", type=float, default=0.0, help="omit pairs with weight at or below this")
    dot.set_defaults(handler=cmd_export_dot)
    return parser


def _out_dir(args, default):
    return Path(args.out if args.out else default)


def cmd_synth(args):
    seed = args.seed or 0
    if args.kind == "sbm":
        try:
            sizes = [int(size) for size in args.sizes.split(",")]
        except ValueError as e:
            raise ConfigurationError(f"Invalid --sizes {args.sizes!r}") from e
        bundle = sbm_bundle(sizes, args.p_in, args.p_out, args.features, seed, name=args.name or "sbm")
    else:
        bundle = ba_bundle(args.nodes, args.m, args.classes, args.features, seed, name=args.name or "ba")
    out = _out_dir(args, bundle.name)
    manifest = RunManifest(args.argv, seed=seed)
    manifest.add_output(save_bundle(bundle, out))
    manifest.write(out)
    return EXIT_OK


def cmd_select(args):
    cfg = resolve_config(args, CondenseConfig)
    g = load_bundle(args.data)
    split = make_edge_split(g, seed=cfg.seed)
    budget = budget_from_rate(g, cfg.reduction_rate, cfg.rate_basis)
    result = select(
        g.with_edges(split.train_pos),
        budget,
        method=cfg.selection,
        k_eig=cfg.k_eig or None,
        epsilon=cfg.epsilon,
        dense_threshold=cfg.dense_threshold,
        rng=Rng(cfg.seed),
    )
    out = _out_dir(args, "selection")
    manifest = RunManifest(args.argv, cfg, cfg.seed)
    manifest.add_output(write_report(out / "selection.json", result.to_dict()))
    manifest.write(out)
    return EXIT_OK


def cmd_condense(args):
    cfg = resolve_config(args, CondenseConfig)
    g = load_bundle(args.data)
    condensed = condense(g, cfg)
    out = _out_dir(args, "condensed")
    manifest = RunManifest(args.argv, cfg, cfg.seed)
    manifest.add_output(save_condensed(condensed, out))
    manifest.write(out)
    return EXIT_OK


def _eval_split(g, condensed, cfg):
    # reuse the split the condensation observed so test edges stay unseen
    seed = cfg.seed
    if condensed is not None and "edge_seed" in condensed.provenance:
        seed = int(condensed.provenance["edge_seed"])
    return make_edge_split(g, seed=seed, ratios=cfg.ratios)


def _report_extra(g, condensed, cfg):
    provenance = condensed.provenance if condensed is not None else {}
    return {
        "dataset": g.name if g is not None else condensed.name,
        "rate": provenance.get("reduction_rate"),
        "source": "condensed" if condensed is not None else "original",
        "num_runs": cfg.runs,
    }


def cmd_eval(args):
    cfg = resolve_config(args, EvalConfig)
    condensed = load_condensed(args.condensed) if args.condensed else None
    g = load_bundle(args.data) if args.data else None
    if g is None and condensed is None:
        raise ConfigurationError("eval needs --data or --condensed")
    out = _out_dir(args, f"eval-{args.task}")
    manifest = RunManifest(args.argv, cfg, cfg.seed)

    if args.task == "stats":
        data = {}
        if condensed is not None:
            data["condensed"] = stats(condensed, cfg.edge_threshold).to_dict()
        if g is not None:
            data["original"] = stats(g).to_dict()
        manifest.add_output(write_report(out / STATS_FILE, data))
        report = dict(data, task="stats", **_report_extra(g, condensed, cfg))
        manifest.add_output(write_report(out / REPORT_FILE, report))
        manifest.write(out)
        return EXIT_OK

    split = _eval_split(g, condensed, cfg)
    training = condensed if condensed is not None else g
    if args.task == "lp":
        result = run_lp(
            training, g, split, cfg.runs, cfg.seed, cfg.lp_epochs, cfg.lp_hidden, cfg.lp_lr, cfg.edge_threshold,
            cfg.workers,
        )
        report = result.to_dict(**_report_extra(g, condensed, cfg))
    elif args.task == "mia":
        target = train_node_classifier(training, cfg.seed, cfg.target_epochs, cfg.target_hidden, cfg.target_lr)
        result = attack_mia(target, g, cfg.runs, cfg.seed, cfg.workers)
        report = result.to_dict(**_report_extra(g, condensed, cfg))
    elif args.task == "lmia":
        target = train_lp(training, split, cfg.seed, cfg.lp_epochs, cfg.lp_hidden, cfg.lp_lr, cfg.edge_threshold)
        result = attack_lmia(target, g, split, cfg.runs, cfg.seed, cfg.workers)
        report = result.to_dict(**_report_extra(g, condensed, cfg))
    else:
        original = measure_efficiency(
            g, split, cfg.efficiency_epochs, cfg.lp_hidden, cfg.lp_lr, cfg.seed, cfg.efficiency_repeats,
            artifact_path=args.data, edge_threshold=cfg.edge_threshold,
        )
        report = {"task": "efficiency", **_report_extra(g, condensed, cfg), "original": original.to_dict()}
        if condensed is not None:
            reduced = measure_efficiency(
                condensed, split, cfg.efficiency_epochs, cfg.lp_hidden, cfg.lp_lr, cfg.seed, cfg.efficiency_repeats,
                artifact_path=Path(args.condensed), edge_threshold=cfg.edge_threshold,
            )
            report.update(compare_efficiency(original, reduced))
    manifest.add_output(write_report(out / REPORT_FILE, report))
    manifest.write(out)
    return EXIT_OK


def cmd_export_dot(args):
    condensed = load_condensed(args.condensed)
    path = Path(args.out) if args.out else Path(args.condensed) / "condensed.dot"
    manifest = RunManifest(args.argv, seed=args.seed or 0)
    manifest.add_output(export_dot(condensed, path, threshold=args.threshold))
    manifest.write(path.parent)
    return EXIT_OK


def main(argv=None):
    """
    Entry point of the ``pyhydro`` command.

    Returns:
        int: 0 on success, 1 on I/O or data errors, 2 on configuration errors
        and 3 on numerical failures.
    """
    configure_logging()
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "handler", None) is None:
        (getattr(args, "parser", None) or parser).print_help()
        return EXIT_CONFIG
    args.argv = argv

    try:
        return args.handler(args)
    except ConfigurationError as e:
        log.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except NumericalError as e:
        log.error(f"Numerical error: {e}")
        return EXIT_NUMERICAL
    except BundleLoadError as e:
        log.error(f"Cannot load input: {e}")
        return EXIT_IO
    except (HydroError, OSError) as e:
        log.error(f"{type(e).__name__}: {e}")
        return EXIT_IO
