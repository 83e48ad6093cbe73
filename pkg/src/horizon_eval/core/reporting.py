"""
Report generation for evaluation results.
Supports JSON (canonical), CSV (one row per value) and Markdown formats.

Reports carry no timestamps: identical inputs give byte-identical files.
"""

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence as Seq

from horizon_eval import __version__
from horizon_eval.analysis import RankTable
from horizon_eval.core.model import MetricAccumulator
from horizon_eval.metrics.decompose import DecompositionReport, OverallDecomposition
from horizon_eval.metrics.local import ROUNDING_RULE
from horizon_eval.metrics.strict import association_fraction

CSV_COLUMNS = ("tracker", "sequence", "metric", "horizon", "value", "numerator", "denominator")
COMBINED = "COMBINED"


def _round(value: Optional[float], decimals: int) -> Optional[float]:
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return None
    return round(float(value), decimals)


def _acc(acc: MetricAccumulator, decimals: int) -> Dict[str, float]:
    return acc.to_dict(decimals)


def _plain(value: float, decimals: int) -> Dict[str, Optional[float]]:
    return {"value": _round(value, decimals)}


def _overall(overall: OverallDecomposition, decimals: int) -> Dict[str, Any]:
    return {
        "raw": {k: _acc(acc, decimals) for k, acc in overall.accumulators.items()},
        "fractions": {k: _round(v, decimals) for k, v in overall.fractions.items()},
        "total_error": _round(overall.total_error, decimals),
        "no_error": overall.no_error,
    }


def _decomposition(report: DecompositionReport, decimals: int, detail: bool) -> Dict[str, Any]:
    entry: Dict[str, Any] = {
        "horizon": report.horizon.label,
        "frames": report.frames,
        "approx_alta": _acc(report.approx_acc, decimals),
        "approx_atr": _round(report.approx_atr, decimals),
        "approx_atp": _round(report.approx_atp, decimals),
        "overall": _overall(report.overall, decimals),
    }
    if detail:
        entry["recall"] = [
            {"track_id": m.track_id, "approx_tiou": _round(m.approx_tiou, decimals),
             **{f: _round(getattr(m, f), decimals) for f in ("fn", "split", "merge", "union_fp", "union_merge")}}
            for m in report.recall
        ]
        entry["precision"] = [
            {"track_id": m.track_id, "approx_tiou": _round(m.approx_tiou, decimals),
             **{f: _round(getattr(m, f), decimals) for f in ("fp", "merge", "split", "union_fn", "union_split")}}
            for m in report.precision
        ]
        entry["timeline"] = [
            {"frame": w.frame, "det_fn": _round(w.det_fn, decimals), "det_fp": _round(w.det_fp, decimals),
             "split": _round(w.split, decimals), "merge": _round(w.merge, decimals),
             "approx_track_tp": _round(w.approx_track_tp, decimals), "num_tracks": w.num_tracks}
            for w in report.timeline
        ]
    return entry


def sequence_entry(result, decimals: int = 6, detail: bool = False) -> Dict[str, Any]:
    """One per-sequence result as a JSON-ready dict."""
    entry: Dict[str, Any] = {
        "tracker": result.tracker,
        "sequence": result.sequence,
        "class": result.class_id,
    }
    if not result.ok:
        entry["error"] = result.error
        return entry
    s = result.strict
    det = s.det_f1_acc.value()
    entry.update({
        "num_frames": result.num_frames,
        "fps": result.fps,
        "score_threshold": result.score_threshold,
        "metrics": {
            "det_f1": _acc(s.det_f1_acc, decimals),
            "idf1": _acc(s.idf1_acc, decimals),
            "idr": _plain(s.idr, decimals),
            "idp": _plain(s.idp, decimals),
            "ata": _acc(s.ata_acc, decimals),
            "atr": _plain(s.atr, decimals),
            "atp": _plain(s.atp, decimals),
            "approx_ata": _acc(result.approx_ata, decimals),
            "mota": _plain(s.mota, decimals),
            "mota_error": _acc(s.mota_error_acc, decimals),
        },
        "counts": {
            "id_switches": s.id_switches,
            "det_tp": s.det_tp,
            "det_fn": s.det_fn,
            "det_fp": s.det_fp,
            "gt_tracks": s.num_gt_tracks,
            "pred_tracks": s.num_pred_tracks,
            "gt_boxes": s.num_gt_boxes,
            "pred_boxes": s.num_pred_boxes,
        },
        "association": {
            "idf1": _round(association_fraction(s.idf1, det), decimals),
            "ata": _round(association_fraction(s.ata, det), decimals),
        },
        "curves": {
            kind.value: [
                {"horizon": p.horizon.label, "frames": p.frames, **_acc(p.accumulator, decimals),
                 "association": _round(association_fraction(p.value, det), decimals)}
                for p in curve.points
            ]
            for kind, curve in result.curves.items()
        },
    })
    if result.decompositions:
        entry["decomposition"] = [_decomposition(d, decimals, detail) for d in result.decompositions]
    return entry


def tracker_entry(summary, decimals: int = 6) -> Dict[str, Any]:
    det = summary.det_f1.value()
    return {
        "num_sequences": summary.num_sequences,
        "metrics": {
            "det_f1": _acc(summary.det_f1, decimals),
            "idf1": _acc(summary.idf1, decimals),
            "ata": _acc(summary.ata, decimals),
            "approx_ata": _acc(summary.approx_ata, decimals),
            "mota": _plain(summary.mota, decimals),
            "mota_error": _acc(summary.mota_error, decimals),
            "mean_alta": _plain(summary.mean_alta, decimals) if summary.mean_alta is not None else None,
            "norm_id_switches": _plain(summary.normalized_id_switches, decimals),
        },
        "counts": {"id_switches": summary.id_switches, "det_tp": summary.det_tp},
        "association": {
            "idf1": _round(association_fraction(summary.idf1.value(), det), decimals),
            "ata": _round(association_fraction(summary.ata.value(), det), decimals),
        },
    }


def build_report(
    results: Seq,
    summaries: Mapping[str, Any],
    run_config: Mapping[str, Any],
    decimals: int = 6,
    detail: bool = False,
) -> Dict[str, Any]:
    """Assemble the canonical report dict; input order is already deterministic."""
    curves: List[Dict[str, Any]] = []
    decomposition: Dict[str, Dict[str, Any]] = {}
    for tracker, summary in summaries.items():
        for kind, points in summary.curves.items():
            for p in points:
                curves.append({
                    "tracker": tracker,
                    "metric": kind.value,
                    "horizon": p.horizon.label,
                    **_acc(p.accumulator, decimals),
                    "association": _round(p.association_fraction, decimals),
                })
        if summary.decompositions:
            decomposition[tracker] = {
                label: {**_overall(overall, decimals), "approx_alta": _acc(summary.approx_alta[label], decimals)}
                for label, overall in summary.decompositions.items()
            }
    return {
        "config": dict(run_config),
        "per_sequence": [sequence_entry(r, decimals, detail) for r in results],
        "combined": {tracker: tracker_entry(s, decimals) for tracker, s in summaries.items()},
        "curves": curves,
        "decomposition": decomposition,
        "metadata": {
            "version": __version__,
            "rounding_rule": ROUNDING_RULE,
            "horizon_resolution": {
                f"{r.tracker}/{r.sequence}": r.horizon_resolution for r in results if r.ok
            },
            "failed": [f"{r.tracker}/{r.sequence}" for r in results if not r.ok],
        },
    }


def _metric_rows(tracker: str, sequence: str, metrics: Mapping[str, Any]) -> Iterator[Dict[str, Any]]:
    for name, cell in metrics.items():
        if cell is None:
            continue
        yield {"tracker": tracker, "sequence": sequence, "metric": name, "horizon": "",
               "value": cell.get("value"), "numerator": cell.get("numerator", ""),
               "denominator": cell.get("denominator", "")}


def report_records(report: Mapping[str, Any]) -> Iterator[Dict[str, Any]]:
    """Long-format rows derived from the report dict, so CSV and JSON agree."""
    for entry in report["per_sequence"]:
        if "error" in entry:
            continue
        tracker, sequence = entry["tracker"], entry["sequence"]
        yield from _metric_rows(tracker, sequence, entry["metrics"])
        for kind, points in entry["curves"].items():
            for p in points:
                yield {"tracker": tracker, "sequence": sequence, "metric": kind, "horizon": p["horizon"],
                       "value": p["value"], "numerator": p["numerator"], "denominator": p["denominator"]}
        for d in entry.get("decomposition", ()):
            for name, cell in d["overall"]["raw"].items():
                yield {"tracker": tracker, "sequence": sequence, "metric": f"error_{name}",
                       "horizon": d["horizon"], **cell}
    for tracker, entry in report["combined"].items():
        yield from _metric_rows(tracker, COMBINED, entry["metrics"])
    for c in report["curves"]:
        yield {"tracker": c["tracker"], "sequence": COMBINED, "metric": c["metric"], "horizon": c["horizon"],
               "value": c["value"], "numerator": c["numerator"], "denominator": c["denominator"]}
    for tracker, by_horizon in report["decomposition"].items():
        for label, overall in by_horizon.items():
            for name, cell in overall["raw"].items():
                yield {"tracker": tracker, "sequence": COMBINED, "metric": f"error_{name}", "horizon": label, **cell}


def format_json(report: Mapping[str, Any]) -> str:
    return json.dumps(report, indent=2) + "\n"


def format_csv(rows: Iterator[Mapping[str, Any]], columns: Seq[str] = CSV_COLUMNS) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


def format_report(report: Mapping[str, Any], fmt: str) -> str:
    if fmt == "json":
        return format_json(report)
    if fmt == "csv":
        return format_csv(report_records(report))
    raise ValueError(f"unknown report format {fmt!r}")


CURVE_COLUMNS = ("tracker", "sequence", "metric", "horizon", "frames", "value", "numerator", "denominator")


def curve_rows(results: Seq, summaries: Mapping[str, Any], per_sequence: bool, decimals: int = 6) -> Iterator[Dict[str, Any]]:
    """Horizon-curve rows for plotting: combined per tracker, optionally per sequence."""
    for tracker, summary in summaries.items():
        for kind, points in summary.curves.items():
            for p in points:
                yield {"tracker": tracker, "sequence": COMBINED, "metric": kind.value,
                       "horizon": p.horizon.label, "frames": "", **_acc(p.accumulator, decimals)}
    if not per_sequence:
        return
    for r in results:
        if not r.ok:
            continue
        for kind, curve in r.curves.items():
            for p in curve.points:
                yield {"tracker": r.tracker, "sequence": r.sequence, "metric": kind.value,
                       "horizon": p.horizon.label, "frames": "" if p.frames is None else p.frames,
                       **_acc(p.accumulator, decimals)}


def _cell(value: Optional[float], rank: Optional[int], decimals: int) -> str:
    if value is None:
        return "-"
    return f"{value:.{min(decimals, 3)}f} ({rank})"


def generate_markdown_report(table: RankTable, kendall: Mapping[str, Mapping[str, float]], decimals: int = 6) -> str:
    """Markdown rank table and Kendall tau-b matrix for `compare`."""
    lines = ["# Tracker comparison", ""]
    lines.append(f"Sorted by **{table.sort_key}**; dense rank in parentheses.")
    lines.append("")
    lines.append("| Tracker | " + " | ".join(table.metrics) + " |")
    lines.append("|---" * (len(table.metrics) + 1) + "|")
    for row in table.rows:
        cells = [_cell(row.scores[m], row.ranks[m], decimals) for m in table.metrics]
        lines.append(f"| {row.tracker} | " + " | ".join(cells) + " |")
    lines.append("")
    lines.append("## Kendall tau-b between metrics")
    lines.append("")
    names = list(kendall)
    lines.append("| | " + " | ".join(names) + " |")
    lines.append("|---" * (len(names) + 1) + "|")
    for x in names:
        cells = ["n/a" if math.isnan(kendall[x][y]) else f"{kendall[x][y]:.3f}" for y in names]
        lines.append(f"| {x} | " + " | ".join(cells) + " |")
    lines.append("")
    return "\n".join(lines)


def comparison_report(table: RankTable, kendall: Mapping[str, Mapping[str, float]], decimals: int = 6) -> Dict[str, Any]:
    return {
        "sort_key": table.sort_key,
        "rows": [
            {"tracker": row.tracker,
             "scores": {m: _round(v, decimals) for m, v in row.scores.items()},
             "ranks": dict(row.ranks)}
            for row in table.rows
        ],
        "kendall": {x: {y: _round(v, decimals) for y, v in row.items()} for x, row in kendall.items()},
        "metadata": {"version": __version__, "ranking": "dense", "tau": "b"},
    }


def save_report(content: str, path: Optional[Path]) -> Optional[Path]:
    """Write to `path` (parents created); None means stdout, handled by the caller."""
    if path is None:
        return None
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(content)
    return path
