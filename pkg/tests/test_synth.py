from fractions import Fraction

import pytest

from horizon_eval.core.errors import ConfigError, ContractError
from horizon_eval.core.model import Box, Role, Sequence, TrackSet
from horizon_eval.ingest.layout import discover_gt, discover_predictions
from horizon_eval.ingest.mot import read_mot_file, read_seqinfo
from horizon_eval.ingest.sequence import IngestConfig, build_sequence
from horizon_eval.metrics.decompose import decompose_at_horizon
from horizon_eval.metrics.local import Horizon, alta, lidf1
from horizon_eval.metrics.overlap import build_overlap_series
from horizon_eval.metrics.strict import evaluate_strict
from horizon_eval.synth import catalog as catalog_module
from horizon_eval.synth.catalog import fixture_catalog, random_sequence, write_catalog
from horizon_eval.synth.oracle import Oracle, matchings
from horizon_eval.synth.perturb import Perturbation, PerturbationKind, apply

from conftest import track


def gt_set(*tracks):
    return TrackSet(tuple(tracks), Role.GT)


def library_values(seq):
    """Library results keyed like the fixture catalog."""
    s = build_overlap_series(seq)
    m = evaluate_strict(s, seq)
    out = {
        "det_f1": m.det_f1, "idf1": m.idf1, "ata": m.ata, "atr": m.atr, "atp": m.atp,
        "mota": m.mota, "id_switches": m.id_switches,
        "approx_ata": decompose_at_horizon(s, seq, Horizon.strict()).approx_ata,
    }
    for r in (0, 1):
        out[f"alta@{r}f"] = alta(s, seq, Horizon.of_frames(r)).value()
        out[f"lidf1@{r}f"] = lidf1(s, seq, Horizon.of_frames(r)).value()
    return out


@pytest.fixture(scope="module")
def catalog():
    return fixture_catalog()


def test_split_perturbation_reproduces_split_fixture(s1):
    pred = apply(gt_set(track(1, 1, 10)), [Perturbation.split(1, 6)])
    assert pred.role is Role.PRED
    assert pred.ids() == (1, 2)
    assert pred[0].frames == tuple(range(1, 6))
    assert pred[1].frames == tuple(range(6, 11))
    assert pred == s1.pred


def test_split_at_first_frame_leaves_track_whole():
    pred = apply(gt_set(track(1, 1, 10)), [Perturbation.split(1, 1)])
    assert pred.ids() == (1,)


def test_merge_requires_disjoint_tracks():
    pred = apply(gt_set(track(1, 1, 5), track(2, 6, 10)), [Perturbation.merge(1, 2)])
    assert pred.ids() == (1,)
    assert len(pred[0]) == 10
    with pytest.raises(ContractError):
        apply(gt_set(track(1, 1, 6), track(2, 6, 10)), [Perturbation.merge(1, 2)])


def test_unknown_track_id():
    with pytest.raises(ContractError):
        apply(gt_set(track(1, 1, 3)), [Perturbation.split(9, 2)])


def test_drop_whole_track_halves_recall():
    gt = gt_set(track(1, 1, 10), track(2, 1, 10, skip=()))
    pred = apply(gt, [Perturbation.drop(track_ids=[2])])
    assert pred.ids() == (1,)
    seq = Sequence("drop", 10, 30.0, gt, pred)
    assert evaluate_strict(build_overlap_series(seq), seq).atr == 0.5


def test_drop_explicit_frames_and_rate():
    gt = gt_set(track(1, 1, 10))
    assert apply(gt, [Perturbation.drop(frames=[2, 3])])[0].frames == (1, 4, 5, 6, 7, 8, 9, 10)
    assert len(apply(gt, [Perturbation.drop(rate=0.5)], seed=3)[0]) == 5
    with pytest.raises(ContractError):
        Perturbation.drop(rate=1.5)


def test_spurious_tracks_never_overlap_ground_truth():
    gt = gt_set(track(1, 1, 10))
    pred = apply(gt, [Perturbation.spurious(count=2, length=4)], seed=5)
    assert pred.num_tracks == 3
    seq = Sequence("fp", 10, 30.0, gt, pred)
    assert evaluate_strict(build_overlap_series(seq), seq).det_tp == 10


def test_jitter_is_seeded():
    gt = gt_set(track(1, 1, 10))
    p = [Perturbation.jitter(3.0)]
    assert apply(gt, p, seed=1) == apply(gt, p, seed=1)
    assert apply(gt, p, seed=1) != apply(gt, p, seed=2)
    assert apply(gt, [Perturbation.jitter(0.0)]) == apply(gt, [])


def test_small_jitter_keeps_the_overlap_indicator():
    other = Box(400.0, 100.0, 40.0, 80.0)
    gt = gt_set(track(1, 1, 10), track(2, 3, 8, other))
    split = Perturbation.split(1, 6)
    plain = Sequence("plain", 10, 10.0, gt, apply(gt, [split]))
    plain_series = build_overlap_series(plain)
    for seed in range(10):
        # a 2px shift of a 40x80 box keeps IOU above 0.86
        pred = apply(gt, [split, Perturbation.jitter(2.0)], seed=seed)
        jittered = Sequence("jitter", 10, 10.0, gt, pred)
        s = build_overlap_series(jittered)
        assert s.pairs.tolist() == plain_series.pairs.tolist()
        assert (s.overlap_matrix() == plain_series.overlap_matrix()).all()
        assert evaluate_strict(s, jittered) == evaluate_strict(plain_series, plain)
        for r in (0, 1, 3):
            h = Horizon.of_frames(r)
            assert alta(s, jittered, h) == alta(plain_series, plain, h)
            assert lidf1(s, jittered, h) == lidf1(plain_series, plain, h)


def test_from_dict():
    p = Perturbation.from_dict({"kind": "split-at-frame", "track_ids": [1], "frame": 6})
    assert p.kind is PerturbationKind.SPLIT and p.track_ids == (1,)
    with pytest.raises(ContractError):
        Perturbation.from_dict({"kind": "split-at-frame", "when": 6})
    with pytest.raises(ValueError):
        Perturbation.from_dict({"kind": "teleport"})


def test_random_sequence_is_deterministic():
    a = random_sequence(7, 15, 4)
    b = random_sequence(7, 15, 4)
    assert (a.gt, a.pred) == (b.gt, b.pred)
    assert a.num_frames == 15


def test_catalog_contents(catalog):
    assert {"s1_split", "s2_merge", "fn_only", "fp_only", "perfect", "mixed"} <= set(catalog)
    assert catalog["s1_split"].expected["alta@1f"] == Fraction(28, 33)
    assert catalog["fn_only"].dominant == "det_fn"


def test_missing_or_empty_catalog_is_a_config_error(tmp_path, monkeypatch):
    monkeypatch.setattr(catalog_module, "CATALOG_FILE", tmp_path / "gone.yaml")
    with pytest.raises(ConfigError):
        fixture_catalog()
    empty = tmp_path / "empty.yaml"
    empty.write_text("fixtures: {}\n")
    monkeypatch.setattr(catalog_module, "CATALOG_FILE", empty)
    with pytest.raises(ConfigError):
        fixture_catalog()


def test_catalog_expectations_hold(catalog):
    for name, fixture in catalog.items():
        values = library_values(fixture.sequence)
        for key, expected in fixture.expected.items():
            assert values[key] == pytest.approx(float(expected), abs=1e-12), (name, key)


def test_catalog_agrees_with_brute_force(catalog):
    for name, fixture in catalog.items():
        values = library_values(fixture.sequence)
        for key, expected in fixture.oracle.items():
            assert values[key] == pytest.approx(expected, abs=1e-12), (name, key)


def test_dominant_error_type(catalog):
    for name, fixture in catalog.items():
        if not fixture.dominant:
            continue
        seq = fixture.sequence
        rep = decompose_at_horizon(build_overlap_series(seq), seq, Horizon.strict())
        fractions = rep.overall.fractions
        assert max(fractions, key=fractions.get) == fixture.dominant, name


def test_written_catalog_reads_back(catalog, tmp_path):
    gt_root, pred_dir = write_catalog(catalog, tmp_path, tracker="demo")
    assert pred_dir == tmp_path / "trackers" / "demo"
    sources = discover_gt(gt_root)
    assert [s.name for s in sources] == sorted(catalog)
    files = discover_predictions(pred_dir, [s.name for s in sources])
    for source in sources:
        original = catalog[source.name].sequence
        info = read_seqinfo(source.gt_path.parent.parent / "seqinfo.ini")
        assert (info.frame_rate, info.seq_length) == (original.fps, original.num_frames)
        seq = build_sequence(
            source.name, read_mot_file(source.gt_path), read_mot_file(files[source.name]),
            IngestConfig(), info.frame_rate, info.seq_length,
        )
        assert seq.gt.num_boxes == original.gt.num_boxes
        assert seq.pred.num_boxes == original.pred.num_boxes
        assert library_values(seq) == pytest.approx(library_values(original), abs=1e-9)


def test_oracle_enumeration():
    assert len(list(matchings(2, 2))) == 7
    assert len(list(matchings(3, 1))) == 4
    with pytest.raises(ContractError):
        list(matchings(12, 12))


def test_oracle_on_split_fixture(s1):
    o = Oracle(s1)
    assert o.det_tp() == 10
    assert o.idtp() == 5.0
    assert o.local("alta", 1) == pytest.approx(28 / 33)
    assert o.local("alta", None) == pytest.approx(1 / 3)
