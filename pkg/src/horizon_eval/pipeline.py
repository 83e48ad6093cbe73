"""
Evaluation pipeline: one task per (tracker, sequence, class), run in a
thread pool, gathered in a fixed order and combined per tracker.
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence as Seq, Tuple

from horizon_eval.analysis import normalized_id_switches
from horizon_eval.core.errors import ContractError, HorizonEvalError
from horizon_eval.core.model import MetricAccumulator, Sequence
from horizon_eval.ingest.layout import discover_gt, discover_predictions
from horizon_eval.ingest.mot import SeqInfo, read_mot_file
from horizon_eval.ingest.sequence import (
    AUTO,
    IngestConfig,
    build_sequence,
    select_dataset_threshold,
    select_score_threshold,
)
from horizon_eval.metrics.decompose import (
    DecompositionReport,
    OverallDecomposition,
    approx_ata,
    combine_decompositions,
    decompose_at_horizon,
    frame_correspondence,
)
from horizon_eval.metrics.local import Horizon, HorizonCurve, MetricKind, combine, horizon_curve, mean_over_horizons
from horizon_eval.metrics.overlap import build_overlap_series
from horizon_eval.metrics.strict import StrictMetrics, association_fraction, evaluate_strict

log = logging.getLogger(__name__)

SUMMARY_HORIZONS = ("1s", "5s", "strict")


@dataclass(frozen=True)
class EvalSettings:
    horizons: Tuple[Horizon, ...]
    ingest: IngestConfig = IngestConfig()
    classes: Tuple[int, ...] = (1,)
    default_fps: float = 30.0
    decompose: bool = False
    summary_horizons: Tuple[Horizon, ...] = tuple(Horizon.parse(h) for h in SUMMARY_HORIZONS)

    def __post_init__(self):
        if not self.horizons:
            raise ContractError("at least one horizon is required")
        if not self.classes:
            raise ContractError("at least one class is required")

    @property
    def per_class(self) -> bool:
        return len(self.classes) > 1


@dataclass(frozen=True)
class EvalTask:
    tracker: str
    sequence: str
    class_id: int
    gt_path: Optional[Path] = None
    pred_path: Optional[Path] = None
    seqinfo: Optional[SeqInfo] = None
    # already-built sequence, e.g. a synthetic fixture
    preloaded: Optional[Sequence] = None
    # known failure, reported without running
    error: Optional[str] = None
    label: str = ""
    # dataset-wide threshold chosen in "auto" mode
    score_threshold: Optional[float] = None

    def __post_init__(self):
        if not self.label:
            object.__setattr__(self, "label", self.sequence)


@dataclass(frozen=True)
class SequenceEvaluation:
    tracker: str
    sequence: str
    class_id: Optional[int]
    num_frames: int = 0
    fps: float = 0.0
    score_threshold: Optional[float] = None
    strict: Optional[StrictMetrics] = None
    curves: Dict[MetricKind, HorizonCurve] = field(default_factory=dict)
    approx_ata: Optional[MetricAccumulator] = None
    decompositions: Tuple[DecompositionReport, ...] = ()
    # horizon label -> radius in frames (None = whole sequence)
    horizon_resolution: Dict[str, Optional[int]] = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class CurveSummary:
    horizon: Horizon
    accumulator: MetricAccumulator
    association_fraction: Optional[float]

    @property
    def value(self) -> float:
        return self.accumulator.value()


@dataclass(frozen=True)
class TrackerSummary:
    """Accumulators of one tracker summed over sequences (and classes)."""

    tracker: str
    num_sequences: int
    det_f1: MetricAccumulator
    idf1: MetricAccumulator
    ata: MetricAccumulator
    approx_ata: MetricAccumulator
    mota_error: MetricAccumulator
    id_switches: int
    det_tp: int
    curves: Dict[MetricKind, Tuple[CurveSummary, ...]]
    decompositions: Dict[str, OverallDecomposition]
    approx_alta: Dict[str, MetricAccumulator]
    mean_alta: Optional[float]

    @property
    def mota(self) -> float:
        if self.mota_error.denominator <= 0:
            return 0.0
        return 1.0 - self.mota_error.value()

    @property
    def normalized_id_switches(self) -> float:
        return normalized_id_switches(self.id_switches, self.det_tp)

    def scores(self) -> Dict[str, float]:
        """Flat metric -> value map used for rank tables and correlation."""
        det = self.det_f1.value()
        out = {
            "det_f1": det,
            "idf1": self.idf1.value(),
            "ata": self.ata.value(),
            "mota": self.mota,
            "norm_id_switches": self.normalized_id_switches,
        }
        for kind, points in self.curves.items():
            for p in points:
                out[f"{kind.value}@{p.horizon.label}"] = p.value
        if self.mean_alta is not None:
            out["mean_alta"] = self.mean_alta
        return out


def resolve_horizons(horizons: Seq[Horizon], fps: float) -> Dict[str, Optional[int]]:
    return {h.label: h.resolve(fps) for h in horizons}


def evaluate_sequence(
    seq: Sequence,
    settings: EvalSettings,
    tracker: str = "",
    class_id: Optional[int] = None,
    score_threshold: Optional[float] = None,
) -> SequenceEvaluation:
    """Every metric of one sequence. Pure; safe to call from worker threads."""
    series = build_overlap_series(seq, settings.ingest.iou_threshold)
    strict = evaluate_strict(series, seq)
    curves = {kind: horizon_curve(series, seq, settings.horizons, kind) for kind in MetricKind}
    approx = approx_ata(frame_correspondence(series, seq), seq)
    decompositions: Tuple[DecompositionReport, ...] = ()
    if settings.decompose:
        decompositions = tuple(decompose_at_horizon(series, seq, h) for h in settings.horizons)
    return SequenceEvaluation(
        tracker=tracker,
        sequence=seq.name,
        class_id=class_id,
        num_frames=seq.num_frames,
        fps=seq.fps,
        score_threshold=score_threshold,
        strict=strict,
        curves=curves,
        approx_ata=MetricAccumulator(approx.approx_track_tp, (seq.gt.num_tracks + seq.pred.num_tracks) / 2),
        decompositions=decompositions,
        horizon_resolution=resolve_horizons(settings.horizons, seq.fps),
    )


def _task_config(task: EvalTask, settings: EvalSettings) -> IngestConfig:
    cfg = settings.ingest.for_class(task.class_id)
    if settings.per_class:
        # other classes' predictions are not false positives of this one
        cfg = replace(cfg, filter_pred_classes=True)
    return cfg


def _load(task: EvalTask, settings: EvalSettings) -> Tuple[Sequence, Optional[float]]:
    cfg = _task_config(task, settings)
    if task.score_threshold is not None:
        cfg = replace(cfg, score_threshold=task.score_threshold)
    gt_entries = read_mot_file(task.gt_path)
    if task.pred_path is None:
        log.warning("%s/%s: no prediction file, evaluating as empty", task.tracker, task.sequence)
        pred_entries = []
    else:
        pred_entries = read_mot_file(task.pred_path)

    info = task.seqinfo or SeqInfo()
    fps = cfg.fps_override or info.frame_rate or settings.default_fps
    num_frames = info.seq_length
    if num_frames is not None:
        # boxes past seqLength would otherwise be a format error
        last = max((e.frame for e in (*gt_entries, *pred_entries)), default=0)
        if last > num_frames:
            log.warning("%s: boxes up to frame %d exceed seqLength %d", task.sequence, last, num_frames)
            num_frames = last
    if cfg.score_threshold == AUTO:
        cfg = replace(cfg, score_threshold=select_score_threshold(gt_entries, pred_entries, cfg))
        log.info("%s/%s: selected score threshold %.4f", task.tracker, task.label, cfg.score_threshold)
    seq = build_sequence(task.label, gt_entries, pred_entries, cfg, fps, num_frames)
    return seq, float(cfg.score_threshold)


def run_task(task: EvalTask, settings: EvalSettings) -> SequenceEvaluation:
    """Load and evaluate one task; failures become error entries."""
    class_id = task.class_id if settings.per_class else None
    if task.error:
        return SequenceEvaluation(task.tracker, task.label, class_id, error=task.error)
    try:
        if task.preloaded is not None:
            seq, threshold = task.preloaded, None
        else:
            seq, threshold = _load(task, settings)
        return evaluate_sequence(seq, settings, task.tracker, class_id, threshold)
    except (HorizonEvalError, OSError) as e:
        log.error("%s/%s: %s", task.tracker, task.label, e)
        return SequenceEvaluation(task.tracker, task.label, class_id, error=str(e))


def run_tasks(tasks: Seq[EvalTask], settings: EvalSettings, jobs: int = 1) -> List[SequenceEvaluation]:
    """Evaluate in a worker pool; the result order depends only on the tasks."""
    if jobs < 1:
        raise ContractError(f"jobs must be >= 1, got {jobs}")
    tasks = resolve_auto_thresholds(tasks, settings)
    results: List[SequenceEvaluation] = []
    if jobs == 1 or len(tasks) <= 1:
        results = [run_task(task, settings) for task in tasks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            future_to_task = {executor.submit(run_task, task, settings): task for task in tasks}
            for future in as_completed(future_to_task):
                task = future_to_task[future]
                results.append(future.result())
                log.debug("finished %s/%s", task.tracker, task.label)
    return sorted(results, key=lambda r: (r.tracker, r.sequence))


def _reads_files(task: EvalTask) -> bool:
    return task.error is None and task.preloaded is None and task.gt_path is not None


def resolve_auto_thresholds(tasks: Seq[EvalTask], settings: EvalSettings) -> List[EvalTask]:
    """
    In "auto" mode pick one score threshold per (tracker, class), maximising
    DetF1 over all of that tracker's sequences, and attach it to the tasks.
    """
    if settings.ingest.score_threshold != AUTO:
        return list(tasks)
    groups: Dict[Tuple[str, Optional[int]], List[EvalTask]] = {}
    for task in tasks:
        if _reads_files(task):
            groups.setdefault((task.tracker, task.class_id), []).append(task)

    thresholds: Dict[Tuple[str, Optional[int]], float] = {}
    for (tracker, class_id), members in sorted(groups.items()):
        samples = []
        try:
            for task in members:
                pred = read_mot_file(task.pred_path) if task.pred_path is not None else []
                samples.append((read_mot_file(task.gt_path), pred))
        except (HorizonEvalError, OSError) as e:
            # the failing task reports the error itself
            log.warning("%s: no dataset-wide threshold for class %s: %s", tracker, class_id, e)
            continue
        cfg = _task_config(members[0], settings)
        thresholds[(tracker, class_id)] = select_dataset_threshold(samples, cfg)
        log.info("%s: class %s score threshold %.4f", tracker, class_id, thresholds[(tracker, class_id)])

    return [
        replace(task, score_threshold=thresholds[(task.tracker, task.class_id)])
        if _reads_files(task) and (task.tracker, task.class_id) in thresholds
        else task
        for task in tasks
    ]


def build_tasks(
    gt: Path,
    predictions: Mapping[str, Path],
    settings: EvalSettings,
) -> List[EvalTask]:
    """Pair ground-truth sequences with each tracker's prediction files."""
    sources = discover_gt(gt)
    names = [s.name for s in sources]
    tasks: List[EvalTask] = []
    for tracker, pred in sorted(predictions.items()):
        files = discover_predictions(pred, names)
        for source in sources:
            for class_id in settings.classes:
                label = f"{source.name}:{class_id}" if settings.per_class else source.name
                tasks.append(EvalTask(
                    tracker=tracker,
                    sequence=source.name,
                    class_id=class_id,
                    gt_path=source.gt_path,
                    pred_path=files.get(source.name),
                    seqinfo=source.seqinfo,
                    label=label,
                ))
        for orphan in sorted(set(files) - set(names)):
            log.warning("%s: prediction %s has no ground truth", tracker, files[orphan])
            tasks.append(EvalTask(tracker, orphan, settings.classes[0],
                                  error=f"no ground truth for sequence {orphan!r}"))
    return tasks


def fixture_tasks(sequences: Seq[Sequence], settings: EvalSettings, tracker: str = "synth") -> List[EvalTask]:
    return [EvalTask(tracker, seq.name, settings.classes[0], preloaded=seq) for seq in sequences]


def _curve_summaries(results: List[SequenceEvaluation], kind: MetricKind, det: float) -> Tuple[CurveSummary, ...]:
    horizons = [p.horizon for p in results[0].curves[kind].points]
    out = []
    for k, horizon in enumerate(horizons):
        acc = combine((horizon, r.curves[kind].points[k].accumulator) for r in results)
        out.append(CurveSummary(horizon, acc, association_fraction(acc.value(), det)))
    return tuple(out)


def summarize(results: Seq[SequenceEvaluation], settings: EvalSettings) -> Dict[str, TrackerSummary]:
    """Combine successful per-sequence results per tracker; classes count as sequences."""
    by_tracker: Dict[str, List[SequenceEvaluation]] = {}
    for r in results:
        by_tracker.setdefault(r.tracker, [])
        if r.ok:
            by_tracker[r.tracker].append(r)

    summaries: Dict[str, TrackerSummary] = {}
    for tracker, done in sorted(by_tracker.items()):
        if not done:
            log.warning("%s: no sequence was evaluated successfully", tracker)
            continue
        det = MetricAccumulator.total(r.strict.det_f1_acc for r in done)
        curves = {kind: _curve_summaries(done, kind, det.value()) for kind in MetricKind}

        decompositions: Dict[str, OverallDecomposition] = {}
        approx_alta: Dict[str, MetricAccumulator] = {}
        if settings.decompose:
            for k, horizon in enumerate(settings.horizons):
                reports = [r.decompositions[k] for r in done]
                decompositions[horizon.label] = combine_decompositions(reports)
                approx_alta[horizon.label] = MetricAccumulator.total(rep.approx_acc for rep in reports)

        wanted = {h.label for h in settings.summary_horizons}
        summary_points = [p.value for p in curves[MetricKind.ALTA] if p.horizon.label in wanted]
        mean_alta = mean_over_horizons(summary_points) if len(summary_points) == len(wanted) else None

        summaries[tracker] = TrackerSummary(
            tracker=tracker,
            num_sequences=len(done),
            det_f1=det,
            idf1=MetricAccumulator.total(r.strict.idf1_acc for r in done),
            ata=MetricAccumulator.total(r.strict.ata_acc for r in done),
            approx_ata=MetricAccumulator.total(r.approx_ata for r in done),
            mota_error=MetricAccumulator.total(r.strict.mota_error_acc for r in done),
            id_switches=sum(r.strict.id_switches for r in done),
            det_tp=sum(r.strict.det_tp for r in done),
            curves=curves,
            decompositions=decompositions,
            approx_alta=approx_alta,
            mean_alta=mean_alta,
        )
    return summaries


def failed(results: Seq[SequenceEvaluation]) -> List[SequenceEvaluation]:
    return [r for r in results if not r.ok]
