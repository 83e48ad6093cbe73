#!/usr/bin/env python3
"""
horizon-eval CLI – evaluate trackers at several temporal horizons.

Subcommands: eval, curve, compare, synth, profiles. Reports go to stdout or
--out; tables and log messages go to stderr.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence as Seq, Tuple, Union

from rich import box
from rich.table import Table

from horizon_eval import __version__
from horizon_eval.analysis import kendall_matrix, rank_table
from horizon_eval.core.config import get_config, horizon_profile_descriptions, load_horizon_profiles
from horizon_eval.core.errors import ConfigError, ContractError, HorizonEvalError
from horizon_eval.core.log import err_console, setup_logging
from horizon_eval.core.reporting import (
    CURVE_COLUMNS,
    build_report,
    comparison_report,
    curve_rows,
    format_csv,
    format_json,
    format_report,
    generate_markdown_report,
    save_report,
)
from horizon_eval.ingest.sequence import AUTO, IngestConfig
from horizon_eval.metrics.local import Horizon, MetricKind, parse_horizons
from horizon_eval.pipeline import EvalSettings, build_tasks, failed, run_tasks, summarize
from horizon_eval.synth.catalog import fixture_catalog, write_catalog

log = logging.getLogger("horizon_eval.cli")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


class UsageError(HorizonEvalError):
    """Bad command-line input detected after argparse."""


def parse_pred_args(values: Seq[str]) -> Dict[str, Path]:
    """'name=path' pairs; a bare path is named after its file or directory."""
    out: Dict[str, Path] = {}
    for value in values:
        name, sep, path = value.partition("=")
        if not sep:
            path, name = value, Path(value).stem
        if not name or not path:
            raise UsageError(f"--pred expects name=path, got {value!r}")
        if name in out:
            raise UsageError(f"tracker {name!r} given twice")
        out[name] = Path(path)
    return out


def parse_classes(value: Union[str, Seq[int]]) -> Tuple[int, ...]:
    if not isinstance(value, str):
        return tuple(int(v) for v in value)
    try:
        classes = tuple(int(v) for v in value.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"--classes expects comma-separated integers, got {value!r}") from None
    if not classes:
        raise UsageError("--classes needs at least one class")
    return classes


def parse_score_threshold(value: Union[str, float, int, Dict]) -> Union[float, str, Dict[int, float]]:
    """A number, 'auto', per-class 'class:value' pairs or a class table from the config."""
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, dict):
        try:
            return {int(c): float(v) for c, v in value.items()}
        except ValueError:
            raise UsageError(f"score threshold table needs integer class keys, got {value!r}") from None
    value = str(value).strip()
    if value.lower() == AUTO:
        return AUTO
    try:
        if ":" in value:
            pairs = (item.split(":", 1) for item in value.split(",") if item.strip())
            return {int(c): float(v) for c, v in pairs}
        return float(value)
    except ValueError:
        raise UsageError(f"--score-thresh expects a number, 'auto' or class:value pairs, got {value!r}") from None


def resolve_horizons(spec: Union[str, Seq[str]]) -> List[Horizon]:
    """Profile name from horizons.yaml or an explicit comma list."""
    profiles = load_horizon_profiles()
    if isinstance(spec, str) and spec.strip() in profiles:
        return parse_horizons(profiles[spec.strip()])
    return parse_horizons(spec)


def settings_from_args(args, config) -> EvalSettings:
    evaluation = config["evaluation"]
    iou = args.iou_thresh if args.iou_thresh is not None else evaluation["iou_threshold"]
    classes = parse_classes(args.classes if args.classes is not None else evaluation["gt_classes"])
    threshold = parse_score_threshold(
        args.score_thresh if args.score_thresh is not None else evaluation["score_threshold"]
    )
    ingest = IngestConfig(
        iou_threshold=float(iou),
        gt_classes=frozenset(classes),
        min_visibility=float(evaluation["min_visibility"]),
        score_threshold=threshold,
        fps_override=args.fps,
        filter_pred_classes=bool(evaluation["filter_pred_classes"]),
    )
    return EvalSettings(
        horizons=tuple(resolve_horizons(args.horizons or evaluation["horizons"])),
        ingest=ingest,
        classes=classes,
        default_fps=float(evaluation["fps"]),
        decompose=bool(getattr(args, "decompose", False)),
    )


def run_config(args, settings: EvalSettings) -> Dict:
    """Run parameters recorded in the report. Parallelism is left out so reports do not depend on it."""
    threshold = settings.ingest.score_threshold
    return {
        "gt": str(args.gt),
        "pred": {name: str(path) for name, path in sorted(parse_pred_args(args.pred).items())},
        "horizons": [h.label for h in settings.horizons],
        "iou_threshold": settings.ingest.iou_threshold,
        "classes": list(settings.classes),
        "score_threshold": dict(threshold) if isinstance(threshold, dict) else threshold,
        "fps": args.fps,
        "default_fps": settings.default_fps,
        "decompose": settings.decompose,
    }


def _evaluate(args, config):
    if not args.pred:
        raise UsageError("at least one --pred NAME=PATH is required")
    settings = settings_from_args(args, config)
    tasks = build_tasks(Path(args.gt), parse_pred_args(args.pred), settings)
    jobs = args.jobs if args.jobs is not None else config["runtime"]["jobs"]
    log.info("evaluating %d tasks with %d worker(s)", len(tasks), jobs)
    results = run_tasks(tasks, settings, jobs=jobs)
    return settings, results, summarize(results, settings)


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.3f}"


def print_summary(summaries, settings: EvalSettings) -> None:
    table = Table(title="Combined", show_header=True, header_style="bold", box=box.ROUNDED)
    table.add_column("Tracker", style="cyan")
    for name in ("DetF1", "IDF1", "ATA", "ATA~", "MOTA", "IDSw/TP"):
        table.add_column(name, justify="right")
    for h in settings.horizons:
        table.add_column(f"ALTA {h.label}", justify="right", style="green")
    for tracker, s in summaries.items():
        alta = [_fmt(p.value) for p in s.curves[MetricKind.ALTA]]
        table.add_row(
            tracker, _fmt(s.det_f1.value()), _fmt(s.idf1.value()), _fmt(s.ata.value()),
            _fmt(s.approx_ata.value()), _fmt(s.mota), _fmt(s.normalized_id_switches), *alta,
        )
    err_console.print(table)


def print_sequences(results) -> None:
    table = Table(title="Per sequence", show_header=True, header_style="bold", box=box.SIMPLE)
    table.add_column("Tracker", style="cyan")
    table.add_column("Sequence")
    for name in ("T", "DetF1", "IDF1", "ATA", "MOTA"):
        table.add_column(name, justify="right")
    for r in results:
        if not r.ok:
            table.add_row(r.tracker, r.sequence, f"[red]{r.error}[/red]", "", "", "", "")
            continue
        s = r.strict
        table.add_row(r.tracker, r.sequence, str(r.num_frames), _fmt(s.det_f1), _fmt(s.idf1), _fmt(s.ata), _fmt(s.mota))
    err_console.print(table)


def print_decomposition(summaries) -> None:
    table = Table(title="Error decomposition (share of total error)", header_style="bold", box=box.ROUNDED)
    for name in ("Tracker", "Horizon", "FN", "FP", "Split", "Merge", "Total", "ALTA~"):
        table.add_column(name, justify="right" if name not in ("Tracker", "Horizon") else "left")
    for tracker, s in summaries.items():
        for label, overall in s.decompositions.items():
            f = overall.fractions
            table.add_row(tracker, label, _fmt(f["det_fn"]), _fmt(f["det_fp"]), _fmt(f["split"]),
                          _fmt(f["merge"]), _fmt(overall.total_error), _fmt(s.approx_alta[label].value()))
    err_console.print(table)


def _emit(content: str, out: Optional[str]) -> None:
    path = save_report(content, Path(out) if out else None)
    if path is None:
        sys.stdout.write(content)
    else:
        log.info("report saved to %s", path)


def cmd_eval(args, config) -> int:
    settings, results, summaries = _evaluate(args, config)
    decimals = config["output"]["decimals"]
    fmt = args.format or config["output"]["format"]
    report = build_report(results, summaries, run_config(args, settings), decimals, detail=args.per_sequence)
    if not args.quiet:
        if args.per_sequence:
            print_sequences(results)
        if summaries:
            print_summary(summaries, settings)
        if settings.decompose and summaries:
            print_decomposition(summaries)
    _emit(format_report(report, fmt), args.out)
    return EXIT_FAILED if failed(results) else EXIT_OK


def cmd_curve(args, config) -> int:
    settings, results, summaries = _evaluate(args, config)
    rows = curve_rows(results, summaries, args.per_sequence, config["output"]["decimals"])
    _emit(format_csv(rows, CURVE_COLUMNS), args.out)
    return EXIT_FAILED if failed(results) else EXIT_OK


def _load_scores(path: Path) -> Dict[str, Dict[str, float]]:
    with open(path, "r") as f:
        data = json.load(f)
    if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
        raise UsageError(f"{path}: expected a JSON object mapping tracker -> metric -> value")
    return {str(t): {str(m): float(v) for m, v in metrics.items() if v is not None} for t, metrics in data.items()}


def cmd_compare(args, config) -> int:
    status = EXIT_OK
    if args.scores:
        scores = _load_scores(Path(args.scores))
    else:
        if not (args.gt and args.pred):
            raise UsageError("compare needs --scores, or --gt with at least one --pred")
        _, results, summaries = _evaluate(args, config)
        scores = {tracker: s.scores() for tracker, s in summaries.items()}
        status = EXIT_FAILED if failed(results) else EXIT_OK
    if not scores:
        raise UsageError("nothing to compare")

    table = rank_table(scores, args.sort_key)
    metrics = args.metrics.split(",") if args.metrics else None
    kendall = kendall_matrix(scores, metrics) if len(scores) >= 2 else {}
    decimals = config["output"]["decimals"]

    if not args.quiet:
        view = Table(title=f"Ranking by {table.sort_key}", header_style="bold", box=box.ROUNDED)
        view.add_column("Tracker", style="cyan")
        for m in table.metrics:
            view.add_column(m, justify="right")
        for row in table.rows:
            view.add_row(row.tracker, *[
                "-" if row.scores[m] is None else f"{row.scores[m]:.3f} ({row.ranks[m]})" for m in table.metrics
            ])
        err_console.print(view)

    if args.format == "markdown":
        content = generate_markdown_report(table, kendall, decimals)
    else:
        content = format_json(comparison_report(table, kendall, decimals))
    _emit(content, args.out)
    return status


def cmd_synth(args, config) -> int:
    fixtures = fixture_catalog(seed=args.seed)
    out = Path(args.out)
    gt_root, pred_dir = write_catalog(fixtures, out, tracker=args.tracker)
    expected = {
        name: {
            "description": f.description,
            "dominant_error": f.dominant,
            "expected": {k: float(v) for k, v in f.expected.items()},
            "oracle": f.oracle,
        }
        for name, f in fixtures.items()
    }
    save_report(format_json(expected), out / "expected.json")
    if not args.quiet:
        table = Table(title="Fixtures", header_style="bold", box=box.SIMPLE)
        for name in ("Name", "T", "GT", "Pred", "Description"):
            table.add_column(name)
        for name, f in fixtures.items():
            seq = f.sequence
            table.add_row(name, str(seq.num_frames), str(len(seq.gt)), str(len(seq.pred)), f.description)
        err_console.print(table)
        err_console.print(f"[green]ground truth:[/green] {gt_root}\n[green]predictions:[/green] {pred_dir}")
    return EXIT_OK


def cmd_profiles(args, config) -> int:
    descriptions = horizon_profile_descriptions()
    table = Table(title="Horizon profiles", header_style="bold", box=box.ROUNDED)
    table.add_column("Profile", style="cyan")
    table.add_column("Horizons", style="green")
    table.add_column("Description")
    for name, horizons in load_horizon_profiles().items():
        table.add_row(name, ", ".join(horizons), descriptions.get(name, ""))
    err_console.print(table)
    return EXIT_OK


def _add_eval_inputs(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--gt", required=required, help="Ground-truth file or MOTChallenge directory")
    p.add_argument("--pred", action="append", default=[], metavar="NAME=PATH",
                   help="Tracker predictions (file or directory of <seq>.txt); repeatable")
    p.add_argument("--horizons", help="Profile name or comma list, e.g. 0,5f,1s,strict")
    p.add_argument("--fps", type=float, help="Frame rate for all sequences (overrides seqinfo.ini)")
    p.add_argument("--iou-thresh", type=float, help="IOU threshold for a match (default 0.5)")
    p.add_argument("--classes", help="Ground-truth classes, comma separated; several are evaluated separately")
    p.add_argument("--score-thresh", help="Prediction score threshold: a number, 'auto' or class:value pairs")
    p.add_argument("--jobs", "-j", type=int, help="Worker threads")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="horizon-eval", description="Temporally local tracking metrics")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--verbose", "-v", action="count", default=0, help="More log output (repeatable)")
    common.add_argument("--quiet", "-q", action="store_true", help="Only errors; no tables")
    common.add_argument("--out", "-o", help="Write the report here instead of stdout")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[common], help="Evaluate trackers against ground truth")
    _add_eval_inputs(p)
    p.add_argument("--decompose", action="store_true", help="Decompose tracking error by type")
    p.add_argument("--per-sequence", action="store_true", help="Per-sequence table and per-track detail")
    p.add_argument("--format", "-f", choices=["json", "csv"], help="Report format")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("curve", parents=[common], help="Horizon curves as CSV for plotting")
    _add_eval_inputs(p)
    p.add_argument("--per-sequence", action="store_true", help="Also emit one curve per sequence")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("compare", parents=[common], help="Rank trackers and correlate metrics")
    _add_eval_inputs(p, required=False)
    p.add_argument("--scores", help="JSON file: tracker -> metric -> value")
    p.add_argument("--sort-key", default="mean_alta", help="Metric to sort by (default mean_alta)")
    p.add_argument("--metrics", help="Metrics for the Kendall matrix, comma separated")
    p.add_argument("--format", "-f", choices=["json", "markdown"], default="json")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", parents=[common], help="Write the synthetic fixture catalog")
    p.add_argument("--seed", type=int, help="Override the seed of every fixture")
    p.add_argument("--tracker", default="synth", help="Tracker name for the prediction directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("profiles", parents=[common], help="List horizon profiles")
    p.set_defaults(func=cmd_profiles)
    return parser


def main(argv: Optional[Seq[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "synth" and not args.out:
        parser.error("synth requires --out DIR")

    try:
        config = get_config(Path(args.config) if args.config else None)
    except ConfigError as e:
        err_console.print(f"[red]Error: {e}[/red]")
        return EXIT_USAGE
    setup_logging(config["runtime"]["log_level"], args.verbose, args.quiet)

    try:
        return args.func(args, config)
    except (UsageError, ConfigError, ContractError) as e:
        err_console.print(f"[red]Error: {e}[/red]")
        return EXIT_USAGE
    except (HorizonEvalError, OSError) as e:
        err_console.print(f"[red]Error: {e}[/red]")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
