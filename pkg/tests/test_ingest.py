import io

import pytest

from horizon_eval.core.errors import ContractError, FormatError, ParseError
from horizon_eval.core.model import Box
from horizon_eval.ingest.layout import discover_gt, discover_predictions
from horizon_eval.ingest.mot import (
    RawEntry,
    SeqInfo,
    format_mot,
    parse_mot_file,
    parse_mot_text,
    read_mot_file,
    read_seqinfo,
    write_seqinfo,
)
from horizon_eval.ingest.sequence import (
    AUTO,
    IngestConfig,
    build_sequence,
    select_dataset_threshold,
    select_score_threshold,
)

GT_TEXT = """\
1,1,100,100,40,80,1,1,1.0
2,1,102,100,40,80,1,1,0.9
1,2,300,50,20,40,1,2,1.0
3,1,104,100,40,80,1,1,0.1
"""


def test_parse_fields_and_defaults():
    rows = parse_mot_text("1,5,10.5,20,30,40\n2.0,5,11,20,30,40,0.75,3,0.5,-1\n")
    assert rows[0] == RawEntry(1, 5, Box(10.5, 20, 30, 40))
    assert rows[1].frame == 2
    assert (rows[1].conf, rows[1].class_id, rows[1].visibility) == (0.75, 3, 0.5)


def test_parse_skips_blank_lines_and_bom():
    rows = parse_mot_file(b"\xef\xbb\xbf1,1,0,0,10,10\n\n\n2,1,0,0,10,10\n", "bom.txt")
    assert [r.frame for r in rows] == [1, 2]


@pytest.mark.parametrize(
    "text,line",
    [
        ("1,1,0,0,10,10\n1,2,0,0,10\n", 2),
        ("1,1,0,0,10,10\nx,2,0,0,10,10\n", 2),
        ("1.5,1,0,0,10,10\n", 1),
        ("0,1,0,0,10,10\n", 1),
        ("1,1,0,0,0,10\n", 1),
        ("1,1,0,0,10,10\n2,1,0,0,inf,10\n", 2),
        ("1,1,nan,0,10,10\n", 1),
        ("1,1,0,0,10,10,-inf\n", 1),
    ],
)
def test_parse_errors_carry_line_number(text, line):
    with pytest.raises(ParseError) as info:
        parse_mot_text(text, "bad.txt")
    assert info.value.line == line
    assert str(info.value).startswith(f"bad.txt:{line}:")


def test_duplicate_frame_and_id_is_a_format_error():
    with pytest.raises(FormatError):
        parse_mot_text("1,1,0,0,10,10\n1,1,5,5,10,10\n")


def test_write_then_parse_is_stable():
    rows = parse_mot_text(GT_TEXT)
    text = format_mot(rows)
    again = parse_mot_text(text)
    assert sorted(again, key=lambda e: (e.frame, e.id)) == sorted(rows, key=lambda e: (e.frame, e.id))
    assert format_mot(again) == text


def test_seqinfo_round_trip(tmp_path):
    path = tmp_path / "seqinfo.ini"
    write_seqinfo(path, SeqInfo("MOT-01", 25.0, 600))
    info = read_seqinfo(path)
    assert (info.name, info.frame_rate, info.seq_length) == ("MOT-01", 25.0, 600)


def test_seqinfo_without_section(tmp_path):
    path = tmp_path / "seqinfo.ini"
    path.write_text("[Other]\nx=1\n")
    with pytest.raises(FormatError):
        read_seqinfo(path)


def test_build_sequence_filters_classes_and_visibility():
    rows = parse_mot_text(GT_TEXT)
    cfg = IngestConfig(gt_classes={1}, min_visibility=0.5)
    seq = build_sequence("s", rows, rows, cfg, fps=30.0)
    assert seq.gt.ids() == (1,)
    assert seq.gt[0].frames == (1, 2)
    # predictions are not class-filtered unless asked
    assert seq.pred.ids() == (1, 2)
    assert seq.num_frames == 3


def test_build_sequence_score_threshold_and_length():
    gt = parse_mot_text("1,1,0,0,10,10\n")
    pred = parse_mot_text("1,1,0,0,10,10,0.9\n1,2,50,50,10,10,0.2\n")
    seq = build_sequence("s", gt, pred, IngestConfig(score_threshold=0.5), fps=30.0, num_frames=20)
    assert seq.pred.ids() == (1,)
    assert seq.num_frames == 20


def test_build_sequence_empty_input_gives_zero_frames(caplog):
    seq = build_sequence("nothing", [], [], IngestConfig(), fps=30.0)
    assert seq.num_frames == 0
    assert "no ground-truth or predicted boxes" in caplog.text


def test_per_class_threshold_mapping():
    cfg = IngestConfig(gt_classes={1, 2}, score_threshold={1: 0.3, 2: 0.7})
    assert cfg.for_class(2).score_threshold == 0.7
    assert cfg.for_class(5).score_threshold == 0.0
    assert cfg.for_class(2).gt_classes == frozenset({2})


def test_invalid_ingest_config():
    with pytest.raises(ContractError):
        IngestConfig(iou_threshold=0.0)
    with pytest.raises(ContractError):
        IngestConfig(score_threshold="best")


def _detections(confs_by_track):
    lines = []
    for track_id, (x, conf) in confs_by_track.items():
        for f in range(1, 5):
            lines.append(f"{f},{track_id},{x},0,10,10,{conf}")
    return parse_mot_text("\n".join(lines) + "\n")


def test_auto_threshold_drops_spurious_low_scores():
    gt = parse_mot_text("".join(f"{f},1,0,0,10,10\n" for f in range(1, 5)))
    pred = _detections({1: (0, 0.9), 2: (500, 0.3)})
    assert select_score_threshold(gt, pred, IngestConfig()) == 0.9


def test_auto_threshold_ties_go_to_larger_value():
    gt = parse_mot_text("".join(f"{f},1,0,0,10,10\n" for f in range(1, 5)))
    pred = _detections({1: (500, 0.2), 2: (900, 0.6)})
    assert select_score_threshold(gt, pred, IngestConfig()) == 0.6


def test_auto_threshold_without_predictions():
    gt = parse_mot_text("1,1,0,0,10,10\n")
    assert select_score_threshold(gt, [], IngestConfig()) == 0.0


def test_dataset_threshold_pools_sequences():
    gt = parse_mot_text("".join(f"{f},1,0,0,10,10\n" for f in range(1, 5)))
    noisy = _detections({1: (0, 0.9), 2: (500, 0.5)})
    quiet = _detections({1: (0, 0.5)})
    assert select_score_threshold(gt, noisy, IngestConfig()) == 0.9
    assert select_score_threshold(gt, quiet, IngestConfig()) == 0.5
    # pooled: 0.5 gives 8 matches over 8 gt and 12 predictions, 0.9 gives 4 over 8 and 4
    assert select_dataset_threshold([(gt, noisy), (gt, quiet)], IngestConfig()) == 0.5
    assert select_dataset_threshold([], IngestConfig()) == 0.0


def test_stricter_filters_never_add_boxes():
    rows = parse_mot_text(GT_TEXT + "4,3,0,0,10,10,0.4,1,0.7\n")
    previous = None
    for visibility in (0.0, 0.5, 0.95, 1.0):
        seq = build_sequence("s", rows, rows, IngestConfig(gt_classes={1, 2}, min_visibility=visibility), fps=30.0)
        if previous is not None:
            assert seq.gt.num_boxes <= previous
        previous = seq.gt.num_boxes
    wide = build_sequence("s", rows, rows, IngestConfig(gt_classes={1, 2}), fps=30.0)
    narrow = build_sequence("s", rows, rows, IngestConfig(gt_classes={2}), fps=30.0)
    assert narrow.gt.num_boxes <= wide.gt.num_boxes
    counts = [
        build_sequence("s", rows, rows, IngestConfig(score_threshold=t), fps=30.0).pred.num_boxes
        for t in (0.0, 0.5, 1.0, 1.5)
    ]
    assert counts == sorted(counts, reverse=True)
    assert counts[0] == 5 and counts[-1] == 0


def test_auto_threshold_in_build_sequence():
    gt = parse_mot_text("".join(f"{f},1,0,0,10,10\n" for f in range(1, 5)))
    pred = _detections({1: (0, 0.9), 2: (500, 0.3)})
    seq = build_sequence("s", gt, pred, IngestConfig(score_threshold=AUTO), fps=30.0)
    assert seq.pred.ids() == (1,)


def _write(path, text=GT_TEXT):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def test_discover_motchallenge_tree(tmp_path):
    _write(tmp_path / "gt" / "B" / "gt" / "gt.txt")
    _write(tmp_path / "gt" / "A" / "gt" / "gt.txt")
    write_seqinfo(tmp_path / "gt" / "A" / "seqinfo.ini", SeqInfo("A", 10.0, 50))
    (tmp_path / "gt" / "notes").mkdir()
    sources = discover_gt(tmp_path / "gt")
    assert [s.name for s in sources] == ["A", "B"]
    assert sources[0].seqinfo.frame_rate == 10.0
    assert sources[1].seqinfo is None


def test_discover_single_gt_file(tmp_path):
    path = _write(tmp_path / "MOT-02" / "gt" / "gt.txt")
    (source,) = discover_gt(path)
    assert source.name == "MOT-02"
    flat = _write(tmp_path / "clip.txt")
    assert discover_gt(flat)[0].name == "clip"


def test_discover_gt_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        discover_gt(tmp_path / "missing")
    (tmp_path / "empty").mkdir()
    with pytest.raises(FormatError):
        discover_gt(tmp_path / "empty")


def test_discover_predictions(tmp_path):
    _write(tmp_path / "res" / "A.txt")
    _write(tmp_path / "res" / "C.txt")
    assert set(discover_predictions(tmp_path / "res", ["A", "B"])) == {"A", "C"}
    single = _write(tmp_path / "whatever.txt")
    assert discover_predictions(single, ["A"]) == {"A": single}


def test_read_mot_file(tmp_path):
    rows = read_mot_file(_write(tmp_path / "x.txt"))
    assert len(rows) == 4
    with pytest.raises(ParseError):
        parse_mot_file(io.BytesIO(b"\xff\xfe\x00bad"), "bin")
