"""Tumor Cascade - command line entry point"""
import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, List, Optional, Sequence, TypeVar

from autonet.checkpoint import load_checkpoint, save_checkpoint
from ctxwin.proposals import OracleProposalSource
from ctxwin.pipeline import scan_windows
from ctxwin.textio import records_for, write_records
from database.db_handler import ResultsStore
from segarch.cascade import run_cascade
from segarch.config import DetectorConfig
from segarch.detector import DetectorProposalSource, detector_from_checkpoint
from segarch.segnet import segnet_from_checkpoint
from segarch.training import detector_samples, seg_samples, train_detector, train_seg
from segmetrics.report import evaluate_scan, write_aggregate_csv, write_scan_json
from utils.config import RunConfig, config_from_mapping, load_run_config, parse_key_values
from utils.errors import EXIT_OK, EXIT_USAGE, ScanIdMismatch, TumorCascadeError, UsageError
from utils.logging_setup import setup_logging
from utils.manifest import ManifestEntry, load_manifest, load_scan, split_manifest, write_manifest
from volcore.errors import IoFailure
from volcore.synthetic import SyntheticSpec, make_synthetic_dataset
from volcore.vvl import convert_raw, load_raw_specs, read_volume, write_meta, write_volume

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

MODALITY_FILE_KEYS = (("FLAIR", "flair"), ("T1", "t1"), ("T1c", "t1c"), ("T2", "t2"))


class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors surface as UsageError (exit code 1)"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _map_ordered(fn: Callable[[T], R], items: Sequence[T], jobs: int) -> List[R]:
    """Apply ``fn`` to every item, in parallel when jobs > 1; results keep input order"""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _sorted_entries(path: str) -> List[ManifestEntry]:
    return sorted(load_manifest(path), key=lambda e: e.scan_id)


def _include_wall_clock(config: RunConfig) -> bool:
    return not config.deterministic


def cmd_convert(args, config: RunConfig, out: Path) -> int:
    specs = load_raw_specs(args.spec)
    for spec in specs:
        convert_raw(spec)
    logger.info(f"Converted {len(specs)} volumes")
    return EXIT_OK


def cmd_windows(args, config: RunConfig, out: Path) -> int:
    entries = _sorted_entries(args.manifest)
    if args.detector:
        source = DetectorProposalSource(detector_from_checkpoint(load_checkpoint(args.detector)).eval(),
                                        config.proposals_per_window)
    else:
        source = OracleProposalSource(config.proposals_per_window)
    out.mkdir(parents=True, exist_ok=True)

    def run(entry: ManifestEntry) -> Path:
        scan = load_scan(entry)
        records = records_for(scan_windows(scan, config, source), include_proposals=args.proposals)
        path = out / f"{entry.scan_id}.windows.txt"
        write_records(records, path)
        return path

    paths = _map_ordered(run, entries, config.jobs)
    logger.info(f"Wrote window files for {len(paths)} scans to {out}")
    return EXIT_OK


def _record_training(args, report, checkpoint_path: Path, config: RunConfig) -> None:
    if not args.db:
        return
    store = ResultsStore(args.db)
    try:
        store.record_training(report, str(checkpoint_path), config.to_dict())
    finally:
        store.close()


def cmd_train(args, config: RunConfig, out: Path) -> int:
    train_entries, val_entries = split_manifest(load_manifest(args.manifest), config.val_fraction, config.seed)
    train_scans = [load_scan(e) for e in train_entries]
    val_scans = [load_scan(e) for e in val_entries]

    if args.kind == "seg":
        checkpoint, report = train_seg(seg_samples(train_scans, config), config,
                                       val_samples=seg_samples(val_scans, config))
    else:
        source = OracleProposalSource(config.proposals_per_window)
        det_cfg = DetectorConfig.from_run_config(config)
        checkpoint, report = train_detector(detector_samples(train_scans, config, source, det_cfg), config,
                                            det_cfg=det_cfg,
                                            val_samples=detector_samples(val_scans, config, source, det_cfg))

    checkpoint_path = save_checkpoint(checkpoint, out / f"{args.kind}.ckpt")
    report.write(out / f"{args.kind}_report.json", _include_wall_clock(config))
    _record_training(args, report, checkpoint_path, config)
    logger.info(f"Trained {args.kind}: final loss {report.losses[-1] if report.losses else float('nan'):.5f}")
    return EXIT_OK


def cmd_infer(args, config: RunConfig, out: Path) -> int:
    entries = _sorted_entries(args.manifest)
    detector = detector_from_checkpoint(load_checkpoint(args.detector)).eval()
    segnet = segnet_from_checkpoint(load_checkpoint(args.segnet)).eval()
    out.mkdir(parents=True, exist_ok=True)

    def run(entry: ManifestEntry) -> ManifestEntry:
        result = run_cascade(load_scan(entry, with_labels=False), detector, segnet, config)
        path = out / f"{entry.scan_id}_pred.vvl"
        write_volume(result.labels, path)
        write_meta(path, entry.scan_id, "label")
        return ManifestEntry(entry.scan_id, label=path)

    predictions = _map_ordered(run, entries, config.jobs)
    write_manifest(predictions, out / "predictions.txt")
    logger.info(f"Wrote {len(predictions)} predictions to {out}")
    return EXIT_OK


def cmd_evaluate(args, config: RunConfig, out: Path) -> int:
    predicted = {e.scan_id: e for e in load_manifest(args.pred)}
    truth = {e.scan_id: e for e in load_manifest(args.truth)}
    if set(predicted) != set(truth):
        missing = sorted(set(truth) ^ set(predicted))
        raise ScanIdMismatch(f"manifests disagree on scans: {missing[:5]}")
    for scan_id, entry in list(predicted.items()) + list(truth.items()):
        if entry.label is None:
            raise ScanIdMismatch(f"scan {scan_id} has no label volume")
    out.mkdir(parents=True, exist_ok=True)

    def run(scan_id: str):
        report = evaluate_scan(read_volume(predicted[scan_id].label), read_volume(truth[scan_id].label),
                               percentile=config.hausdorff_percentile, scan_id=scan_id)
        write_scan_json(report, out / f"{scan_id}.json")
        return report

    reports = _map_ordered(run, sorted(truth), config.jobs)
    write_aggregate_csv(reports, out / "aggregate.csv")
    if args.db:
        store = ResultsStore(args.db)
        try:
            store.record_evaluations(reports, batch=str(out))
        finally:
            store.close()
    logger.info(f"Evaluated {len(reports)} scans into {out}")
    return EXIT_OK


def cmd_make_synthetic(args, config: RunConfig, out: Path) -> int:
    spec = SyntheticSpec(
        dims=tuple(args.dims),
        radius_range=(args.radius_min, args.radius_max),
        contrast=args.contrast,
        noise=args.noise,
    )
    scans = make_synthetic_dataset(args.count, config.seed, spec, args.prefix)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for scan in scans:
        modalities = {}
        for name, key in MODALITY_FILE_KEYS:
            path = out / f"{scan.scan_id}_{key}.vvl"
            write_volume(scan.modalities[name], path)
            write_meta(path, scan.scan_id, name)
            modalities[name] = path
        label_path = out / f"{scan.scan_id}_label.vvl"
        write_volume(scan.labels, label_path)
        write_meta(label_path, scan.scan_id, "label")
        entries.append(ManifestEntry(scan.scan_id, modalities, label_path))
    write_manifest(entries, out / "manifest.txt")
    logger.info(f"Wrote {len(scans)} synthetic scans to {out}")
    return EXIT_OK


COMMANDS = {
    "convert": cmd_convert,
    "windows": cmd_windows,
    "train": cmd_train,
    "infer": cmd_infer,
    "evaluate": cmd_evaluate,
    "make-synthetic": cmd_make_synthetic,
}


def build_parser() -> CliParser:
    parser = CliParser(prog="tumor-cascade", description="Cascaded brain tumor detection and segmentation")
    parser.add_argument("--config", help="Run config: YAML or key=value file (defaults to config.yaml)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Override one config key")
    parser.add_argument("--seed", type=int, help="Random seed")
    parser.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=None,
                        help="Deterministic kernels and byte-reproducible reports")
    parser.add_argument("--jobs", type=int, help="Parallel scans")
    parser.add_argument("--out", default="out", help="Output directory")
    parser.add_argument("--db", help="SQLite results store to record runs in")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    convert = sub.add_parser("convert", help="Convert raw little-endian blobs to VVL1 volumes")
    convert.add_argument("spec", help="YAML raw spec (raw, out, dims, dtype, spacing)")

    windows = sub.add_parser("windows", help="Generate positive/negative windows per scan")
    windows.add_argument("manifest")
    windows.add_argument("--detector", help="Detector checkpoint used as the proposal source")
    windows.add_argument("--no-proposals", dest="proposals", action="store_false",
                         help="Write only window records")

    train = sub.add_parser("train", help="Train the detector or the segmentation network")
    train.add_argument("kind", choices=("detector", "seg"))
    train.add_argument("manifest")

    infer = sub.add_parser("infer", help="Run the cascade and write predicted label volumes")
    infer.add_argument("manifest")
    infer.add_argument("--detector", required=True, help="Detector checkpoint")
    infer.add_argument("--segnet", required=True, help="Segmentation checkpoint")

    evaluate = sub.add_parser("evaluate", help="Score predictions against ground truth")
    evaluate.add_argument("pred", help="Prediction manifest (label= entries)")
    evaluate.add_argument("truth", help="Ground truth manifest")

    synthetic = sub.add_parser("make-synthetic", help=argparse.SUPPRESS)
    synthetic.add_argument("--count", type=int, default=12)
    synthetic.add_argument("--dims", type=int, nargs=3, default=(64, 64, 64))
    synthetic.add_argument("--radius-min", type=float, default=7.0)
    synthetic.add_argument("--radius-max", type=float, default=12.0)
    synthetic.add_argument("--contrast", type=float, default=1.0)
    synthetic.add_argument("--noise", type=float, default=0.1)
    synthetic.add_argument("--prefix", default="synth")
    return parser


def resolve_config(args) -> RunConfig:
    """Config file, then ``--set`` overrides, then the dedicated flags"""
    config = load_run_config(args.config)
    if args.set:
        config = config_from_mapping(parse_key_values("\n".join(args.set)), config)
    return config.with_overrides(seed=args.seed, deterministic=args.deterministic, jobs=args.jobs)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; returns the process exit code"""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    setup_logging(args.verbose)
    try:
        config = resolve_config(args)
        return COMMANDS[args.command](args, config, Path(args.out))
    except TumorCascadeError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"{IoFailure.__name__}: {e}")
        return IoFailure.exit_code


if __name__ == "__main__":
    sys.exit(main())
