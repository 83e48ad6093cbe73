import pytest

from horizon_eval.core.errors import ContractError
from horizon_eval.ingest.sequence import AUTO, IngestConfig
from horizon_eval.metrics.local import MetricKind, parse_horizons
from horizon_eval.pipeline import (
    EvalSettings,
    EvalTask,
    build_tasks,
    evaluate_sequence,
    failed,
    resolve_auto_thresholds,
    fixture_tasks,
    run_task,
    run_tasks,
    summarize,
)

SUMMARY = tuple(parse_horizons("1s,5s,strict"))


def settings(**kw):
    kw.setdefault("horizons", SUMMARY)
    return EvalSettings(**kw)


def test_evaluate_sequence_on_split_fixture(s1):
    r = evaluate_sequence(s1, settings(horizons=tuple(parse_horizons("1f,strict"))), tracker="t")
    assert r.ok
    assert r.strict.ata == pytest.approx(1 / 3)
    assert r.curves[MetricKind.ALTA].values() == pytest.approx([28 / 33, 1 / 3])
    assert r.curves[MetricKind.LIDF1].values()[-1] == pytest.approx(0.5)
    assert r.approx_ata.value() == pytest.approx(1 / 3)
    assert r.horizon_resolution == {"1f": 1, "strict": None}
    assert r.decompositions == ()


def test_decompositions_follow_horizons(s1):
    r = evaluate_sequence(s1, settings(decompose=True))
    assert [d.horizon.label for d in r.decompositions] == ["1s", "5s", "strict"]


def test_settings_need_horizons_and_classes():
    with pytest.raises(ContractError):
        EvalSettings(horizons=())
    with pytest.raises(ContractError):
        EvalSettings(horizons=SUMMARY, classes=())


def test_summary_combines_sequences(s1, s2, perfect):
    tasks = fixture_tasks([s1, s2, perfect], settings())
    results = run_tasks(tasks, settings())
    assert [r.sequence for r in results] == ["perfect", "s1", "s2"]
    (summary,) = summarize(results, settings()).values()
    assert summary.num_sequences == 3
    assert summary.id_switches == 1
    assert summary.det_tp == 10 + 10 + 19
    assert summary.normalized_id_switches == pytest.approx(1 / 39)
    strict_alta = summary.curves[MetricKind.ALTA][-1]
    assert strict_alta.value == pytest.approx(summary.ata.value())
    assert summary.mean_alta == pytest.approx(sum(p.value for p in summary.curves[MetricKind.ALTA]) / 3)
    scores = summary.scores()
    assert {"det_f1", "idf1", "ata", "mota", "norm_id_switches", "mean_alta", "alta@1s", "lidf1@strict"} <= set(scores)


def test_mean_alta_needs_all_summary_horizons(s1):
    cfg = settings(horizons=tuple(parse_horizons("0,strict")))
    (summary,) = summarize(run_tasks(fixture_tasks([s1], cfg), cfg), cfg).values()
    assert summary.mean_alta is None
    assert "mean_alta" not in summary.scores()


def test_parallel_order_matches_serial(s1, s2, perfect):
    tasks = fixture_tasks([s2, perfect, s1], settings(), tracker="b") + fixture_tasks([s1], settings(), tracker="a")
    serial = run_tasks(tasks, settings(), jobs=1)
    parallel = run_tasks(tasks, settings(), jobs=4)
    assert [(r.tracker, r.sequence) for r in parallel] == [(r.tracker, r.sequence) for r in serial]
    assert [r.strict for r in parallel] == [r.strict for r in serial]
    with pytest.raises(ContractError):
        run_tasks(tasks, settings(), jobs=0)


def test_error_task_is_reported_not_raised():
    r = run_task(EvalTask("t", "ghost", 1, error="no ground truth"), settings())
    assert not r.ok and r.error == "no ground truth"
    assert failed([r]) == [r]
    assert summarize([r], settings()) == {}


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


GT = "".join(f"{f},1,100,100,40,80,1,1,1\n{f},2,400,100,40,80,1,2,1\n" for f in range(1, 11))
PRED = "".join(f"{f},1,100,100,40,80,1,1,1\n" for f in range(1, 11))


def test_missing_prediction_file_is_empty(tmp_path, caplog):
    _write(tmp_path / "gt" / "A" / "gt" / "gt.txt", GT)
    _write(tmp_path / "gt" / "B" / "gt" / "gt.txt", GT)
    _write(tmp_path / "res" / "A.txt", PRED)
    cfg = settings()
    tasks = build_tasks(tmp_path / "gt", {"t": tmp_path / "res"}, cfg)
    results = run_tasks(tasks, cfg)
    assert all(r.ok for r in results)
    by_seq = {r.sequence: r for r in results}
    assert by_seq["A"].strict.det_f1 == 1.0
    assert by_seq["B"].strict.det_f1 == 0.0
    assert "no prediction file" in caplog.text


def test_orphan_prediction_becomes_error(tmp_path):
    _write(tmp_path / "gt" / "A" / "gt" / "gt.txt", GT)
    _write(tmp_path / "res" / "A.txt", GT)
    _write(tmp_path / "res" / "Z.txt", GT)
    cfg = settings()
    results = run_tasks(build_tasks(tmp_path / "gt", {"t": tmp_path / "res"}, cfg), cfg)
    assert [r.sequence for r in failed(results)] == ["Z"]


def test_classes_are_evaluated_separately(tmp_path):
    _write(tmp_path / "gt" / "A" / "gt" / "gt.txt", GT)
    # class 2 prediction missing entirely
    _write(tmp_path / "res" / "A.txt", PRED)
    cfg = settings(classes=(1, 2), ingest=IngestConfig(gt_classes=frozenset({1, 2}), filter_pred_classes=True))
    results = run_tasks(build_tasks(tmp_path / "gt", {"t": tmp_path / "res"}, cfg), cfg)
    assert [(r.sequence, r.class_id) for r in results] == [("A:1", 1), ("A:2", 2)]
    assert [r.strict.det_f1 for r in results] == [1.0, 0.0]


def test_seqinfo_sets_fps_and_length(tmp_path, caplog):
    _write(tmp_path / "gt" / "A" / "gt" / "gt.txt", GT)
    _write(tmp_path / "gt" / "A" / "seqinfo.ini", "[Sequence]\nname=A\nframeRate=5\nseqLength=8\n")
    _write(tmp_path / "res" / "A.txt", GT)
    cfg = settings()
    (r,) = run_tasks(build_tasks(tmp_path / "gt", {"t": tmp_path / "res"}, cfg), cfg)
    assert r.fps == 5.0
    assert r.num_frames == 10
    assert r.horizon_resolution["1s"] == 5
    assert "exceed seqLength" in caplog.text


def test_auto_threshold_recorded(tmp_path):
    _write(tmp_path / "gt" / "A" / "gt" / "gt.txt", GT)
    pred = "".join(f"{f},1,100,100,40,80,0.9\n{f},7,900,900,40,80,0.2\n" for f in range(1, 11))
    _write(tmp_path / "res" / "A.txt", pred)
    cfg = settings(ingest=IngestConfig(gt_classes=frozenset({1}), score_threshold=AUTO))
    (r,) = run_tasks(build_tasks(tmp_path / "gt", {"t": tmp_path / "res"}, cfg), cfg)
    assert r.score_threshold == 0.9
    assert r.strict.det_f1 == 1.0


def test_per_class_ignores_other_class_predictions(tmp_path):
    gt = "".join(f"{f},1,100,100,40,80,1,1,1\n{f},2,400,100,40,80,1,3,1\n" for f in range(1, 11))
    _write(tmp_path / "gt" / "A" / "gt" / "gt.txt", gt)
    _write(tmp_path / "res" / "A.txt", gt)
    cfg = settings(classes=(1, 3), ingest=IngestConfig(gt_classes=frozenset({1, 3})))
    results = run_tasks(build_tasks(tmp_path / "gt", {"t": tmp_path / "res"}, cfg), cfg)
    assert [r.class_id for r in results] == [1, 3]
    for r in results:
        assert r.strict.det_f1 == 1.0
        assert r.strict.ata == 1.0


def test_auto_threshold_is_shared_across_sequences(tmp_path):
    single = "".join(f"{f},1,100,100,40,80,1,1,1\n" for f in range(1, 11))
    for name in ("A", "B"):
        _write(tmp_path / "gt" / name / "gt" / "gt.txt", single)
    # A alone prefers 0.9, B alone 0.5; over both sequences 0.5 wins (DetF1 0.8 vs 2/3)
    _write(tmp_path / "res" / "A.txt",
           "".join(f"{f},1,100,100,40,80,0.9\n{f},2,900,900,40,80,0.5\n" for f in range(1, 11)))
    _write(tmp_path / "res" / "B.txt", "".join(f"{f},1,100,100,40,80,0.5\n" for f in range(1, 11)))
    cfg = settings(ingest=IngestConfig(gt_classes=frozenset({1}), score_threshold=AUTO))
    tasks = build_tasks(tmp_path / "gt", {"t": tmp_path / "res"}, cfg)
    assert [t.score_threshold for t in resolve_auto_thresholds(tasks, cfg)] == [0.5, 0.5]
    by_seq = {r.sequence: r for r in run_tasks(tasks, cfg)}
    assert by_seq["A"].score_threshold == 0.5
    assert by_seq["A"].strict.det_f1 == pytest.approx(2 / 3)
    assert by_seq["B"].strict.det_f1 == 1.0
