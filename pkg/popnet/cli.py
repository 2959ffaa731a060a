# -*- coding: utf-8 -*-
"""Command line interface: ``python -m popnet <command>``."""
import argparse
import dataclasses
import json
import logging
import sys
import popnet.settings as settings
from popnet.config import load_config, apply_overrides, ModelConfig
from popnet.exceptions import PopNetError, ValidationError, DataError, NumericError
from popnet.generators import NoiseModel, random_scene_specs, export_dataset
from popnet.metrics import evaluate_dataset, MetricsReport, compare_reports, object_counts, add_object_count_split
from popnet.readwrite import read_json
from popnet.tools.evaluation import evaluate, infer
from popnet.tools.gradcheck import GRADCHECK_LOSSES, run_gradcheck, results_table
from popnet.tools.plot import plot_reports
from popnet.tools.training import train
from popnet.utils import resolve_seed


logger = logging.getLogger(__name__)


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    """Parser raising ``UsageError`` instead of exiting, so that every usage problem maps to the same exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_train_parser(subparsers):
    parser = subparsers.add_parser("train", help="train the popping and segmentation networks")
    parser.add_argument("--config", help="TOML configuration file (defaults when omitted)")
    parser.add_argument("--data", required=True, help="dataset root")
    parser.add_argument("--out", required=True, help="checkpoint to write")
    parser.add_argument("--disable-loss", nargs="+", default=[], choices=settings.LOSS_NAMES,
                        help="losses to disable (ablation)")
    parser.add_argument("--resume", help="checkpoint to resume from")
    parser.add_argument("--log", help="JSON-lines log path (default: next to the checkpoint)")
    parser.add_argument("--progress", action="store_true", help="display a progress bar")
    parser.add_argument("--full-scale", action="store_true", help="use the residual 64/64/128/256/512 networks")
    for flag, key, kind in (("--max-steps", "max_steps", int), ("--lr", "learning_rate", float),
                            ("--epochs", "epochs", int), ("--batch-size", "batch_size", int),
                            ("--resolution", "resolution", int), ("--seed", "seed", int),
                            ("--workers", "workers", int), ("--device", "device", str),
                            ("--depth-subdir", "depth_subdir", str), ("--train-fraction", "train_fraction", float),
                            ("--checkpoint-every", "checkpoint_every", int),
                            ("--lambda1", "hyper.lambda1", float), ("--lambda2", "hyper.lambda2", float),
                            ("--alpha1", "hyper.alpha1", float), ("--alpha2", "hyper.alpha2", float),
                            ("--sigma", "hyper.sigma", float), ("--gamma", "hyper.gamma", float),
                            ("--wtv-power", "hyper.wtv_power", int), ("--ssim-window", "hyper.ssim_window", int),
                            ("--ssim-c1", "hyper.ssim_c1", float), ("--ssim-c2", "hyper.ssim_c2", float),
                            ("--width", "model.width", float), ("--encoder", "model.encoder", str)):
        parser.add_argument(flag, dest=key, type=kind, default=None)


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="popnet", description="Pop-out depth to segmentation pipeline.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors")
    subparsers = parser.add_subparsers(dest="command", parser_class=ArgumentParser)
    subparsers.required = True

    _add_train_parser(subparsers)

    evaluation = subparsers.add_parser("eval", help="evaluate a checkpoint on a dataset")
    evaluation.add_argument("--ckpt", help="checkpoint to evaluate")
    evaluation.add_argument("--data", required=True, help="dataset root")
    evaluation.add_argument("--report", required=True, help="JSON report to write (a CSV mirror is written too)")
    evaluation.add_argument("--config", help="TOML configuration the checkpoint must match, its [hyper] table replaces "
                            "the stored one")
    evaluation.add_argument("--hard-separation", action="store_true", help="also score binarized separation masks")
    evaluation.add_argument("--identity", action="store_true", help="score the ground truth masks themselves")
    evaluation.add_argument("--by-object-count", action="store_true",
                            help="also report single-object and multi-object scenes apart (needs the manifest)")
    evaluation.add_argument("--depth-subdir", default=settings.DEPTHS_DIR)
    evaluation.add_argument("--no-normalize", action="store_true", help="do not min-max rescale predictions")

    inference = subparsers.add_parser("infer", help="run a checkpoint on one image")
    inference.add_argument("--ckpt", required=True)
    inference.add_argument("--image", required=True)
    inference.add_argument("--depth", required=True)
    inference.add_argument("--out", required=True, help="output directory")
    inference.add_argument("--config", help="TOML configuration the checkpoint must match, its [hyper] table replaces "
                           "the stored one")
    inference.add_argument("--depth-convention", choices=settings.DEPTH_CONVENTIONS, default=None,
                           help="min-max rescale the raw depth under this convention")

    gradcheck = subparsers.add_parser("gradcheck", help="check loss gradients against finite differences")
    gradcheck.add_argument("--loss", choices=GRADCHECK_LOSSES + ("all",), default="all")
    gradcheck.add_argument("--f64", action="store_true", help="64-bit precision (default 32-bit)")
    gradcheck.add_argument("--instances", type=int, default=settings.GRADCHECK_INSTANCES)
    gradcheck.add_argument("--seed", type=int, default=settings.DEFAULT_SEED)

    synth = subparsers.add_parser("synth", help="export a synthetic dataset")
    synth.add_argument("--n", type=int, required=True, help="number of scenes")
    synth.add_argument("--out", required=True, help="dataset root to write")
    synth.add_argument("--seed", type=int, required=True)
    synth.add_argument("--camouflage", type=float, default=0.0)
    synth.add_argument("--size", type=int, default=64)
    synth.add_argument("--min-objects", type=int, default=1)
    synth.add_argument("--max-objects", type=int, default=3)
    synth.add_argument("--noise-sigma", type=float, default=0.05)
    synth.add_argument("--blur", type=float, default=2.0)
    synth.add_argument("--warp", type=float, default=2.0)
    synth.add_argument("--dropout", type=float, default=0.0)
    synth.add_argument("--force", action="store_true", help="overwrite a non-empty directory")

    metrics = subparsers.add_parser("metrics", help="evaluate prediction PNGs against mask PNGs")
    metrics.add_argument("--pred", required=True)
    metrics.add_argument("--gt", required=True)
    metrics.add_argument("--report", required=True)
    metrics.add_argument("--no-normalize", action="store_true")
    metrics.add_argument("--workers", type=int, default=None)
    metrics.add_argument("--manifest", help="dataset manifest used to split the report by object count")

    plot = subparsers.add_parser("plot", help="plot report means as SVG")
    plot.add_argument("reports", nargs="+")
    plot.add_argument("--out", required=True)

    compare = subparsers.add_parser("compare", help="count images improved over a baseline report")
    compare.add_argument("baseline")
    compare.add_argument("candidate")
    compare.add_argument("--metric", choices=settings.METRIC_NAMES, default="Fm")
    return parser


def build_train_config(args):
    """Merge the configuration file, the command line flags and the ``POPNET_SEED`` override."""
    config = load_config(args.config)
    overrides = {key: value for key, value in vars(args).items() if key.startswith("hyper.") or key.startswith("model.")
                 or key in ("max_steps", "learning_rate", "epochs", "batch_size", "resolution", "seed", "workers",
                            "device", "depth_subdir", "train_fraction", "checkpoint_every")}
    if args.full_scale:
        config = dataclasses.replace(config, model=ModelConfig.full_scale())
    config = apply_overrides(config, overrides)
    if args.disable_loss:
        config = dataclasses.replace(config, losses=config.losses.without(args.disable_loss))
    return dataclasses.replace(config, seed=resolve_seed(config.seed))


def _print_report(report: MetricsReport):
    if report.mean:
        print(json.dumps(report.mean, indent=2, sort_keys=True))
    for error in report.errors:
        print("error: %s" % error, file=sys.stderr)


def _optional_config(path):
    if path is None:
        return None
    try:
        return load_config(path)
    except ValidationError as e:
        raise UsageError(str(e))


def run_command(args) -> int:
    if args.command == "train":
        try:
            config = build_train_config(args)
        except ValidationError as e:
            raise UsageError(str(e))
        entries = train(config, args.data, args.out, resume=args.resume, log_path=args.log, progress=args.progress)
        if entries:
            print(json.dumps(entries[-1], sort_keys=True))
        return settings.EXIT_SUCCESS
    if args.command == "eval":
        if args.ckpt is None and not args.identity:
            raise UsageError("--ckpt is required unless --identity is given")
        config = _optional_config(args.config)
        report = evaluate(args.ckpt, args.data, model_config=config.model if config else None,
                          hyper=config.hyper if config else None,
                          hard_separation_metrics=args.hard_separation, identity=args.identity,
                          depth_subdir=args.depth_subdir, normalize=not args.no_normalize,
                          by_object_count=args.by_object_count)
        report.write(args.report)
        _print_report(report)
        return settings.EXIT_SUCCESS if not report.errors else settings.EXIT_DATA_ERROR
    if args.command == "infer":
        config = _optional_config(args.config)
        paths = infer(args.ckpt, args.image, args.depth, args.out, model_config=config.model if config else None,
                      hyper=config.hyper if config else None, depth_convention=args.depth_convention)
        print(json.dumps(paths, indent=2, sort_keys=True))
        return settings.EXIT_SUCCESS
    if args.command == "gradcheck":
        names = None if args.loss == "all" else [args.loss]
        results = run_gradcheck(names, "float64" if args.f64 else "float32", args.instances, args.seed)
        print(results_table(results).to_string(index=False))
        if not all(r.passed for r in results):
            raise NumericError("Gradient check failed for %s" % ", ".join(r.loss for r in results if not r.passed))
        return settings.EXIT_SUCCESS
    if args.command == "synth":
        try:
            noise = NoiseModel(sigma=args.noise_sigma, blur=args.blur, warp=args.warp, dropout=args.dropout)
            specs = random_scene_specs(args.n, args.seed, size=args.size, min_objects=args.min_objects,
                                       max_objects=args.max_objects, camouflage=args.camouflage, noise=noise)
        except ValidationError as e:
            raise UsageError(str(e))
        manifest = export_dataset(specs, args.out, args.seed, force=args.force)
        print("%d scenes written to %s" % (manifest["count"], args.out))
        return settings.EXIT_SUCCESS
    if args.command == "metrics":
        report = evaluate_dataset(args.pred, args.gt, normalize=not args.no_normalize, workers=args.workers)
        if args.manifest is not None and report.per_image:
            add_object_count_split(report, object_counts(read_json(args.manifest)))
        report.write(args.report)
        _print_report(report)
        return settings.EXIT_SUCCESS if not report.errors else settings.EXIT_DATA_ERROR
    if args.command == "plot":
        plot_reports(args.reports, args.out)
        return settings.EXIT_SUCCESS
    if args.command == "compare":
        comparison = compare_reports(MetricsReport.read(args.baseline), MetricsReport.read(args.candidate),
                                     args.metric)
        print(json.dumps(comparison, indent=2, sort_keys=True))
        return settings.EXIT_SUCCESS
    raise UsageError("Unknown command '%s'" % str(args.command))


def main(argv=None) -> int:
    """Run the command line and return its exit code: 0 on success, 1 on usage errors, 2 on data errors and 3 on
    numeric failures."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print("popnet: error: %s" % str(e), file=sys.stderr)
        return settings.EXIT_USAGE
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=settings.LOG_FORMAT)
    try:
        return run_command(args)
    except UsageError as e:
        print("popnet: error: %s" % str(e), file=sys.stderr)
        return settings.EXIT_USAGE
    except NumericError as e:
        logger.error("%s", str(e))
        return settings.EXIT_NUMERIC_FAILURE
    except (DataError, ValidationError, PopNetError) as e:
        logger.error("%s", str(e))
        return settings.EXIT_DATA_ERROR
