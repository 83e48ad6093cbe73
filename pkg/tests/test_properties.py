"""Checks over seeded random sequences; every case is reproducible from its seed."""

import dataclasses

import numpy as np
import pytest

from horizon_eval.core.model import Box, Role, Sequence, Track, TrackSet
from horizon_eval.metrics.decompose import approx_ata, decompose_at_horizon, frame_correspondence
from horizon_eval.metrics.local import Horizon, alta, lidf1
from horizon_eval.metrics.overlap import build_overlap_series
from horizon_eval.metrics.strict import evaluate_strict
from horizon_eval.synth.catalog import random_sequence
from horizon_eval.synth.oracle import Oracle

from conftest import make_sequence, track

TOL = 1e-12
STRICT = Horizon.strict()
ZERO = Horizon.of_frames(0)


def sequence_for(seed, max_frames=50, max_tracks=8):
    return random_sequence(seed, 1 + seed % max_frames, 1 + seed % max_tracks)


@pytest.mark.parametrize("seed", range(200))
def test_horizon_endpoints(seed):
    seq = sequence_for(seed)
    s = build_overlap_series(seq)
    m = evaluate_strict(s, seq)
    assert abs(alta(s, seq, ZERO).value() - m.det_f1) <= TOL
    assert abs(lidf1(s, seq, ZERO).value() - m.det_f1) <= TOL
    assert abs(alta(s, seq, STRICT).value() - m.ata) <= TOL
    assert abs(lidf1(s, seq, STRICT).value() - m.idf1) <= TOL
    for value in (m.det_f1, m.idf1, m.ata):
        assert 0.0 <= value <= 1.0


@pytest.mark.parametrize("seed", range(100))
def test_every_horizon_between_the_endpoints(seed):
    # DetF1 is not an upper bound at intermediate radii: a window weighs its
    # tracks, not its boxes (see DESIGN.md)
    seq = sequence_for(seed, max_frames=25)
    s = build_overlap_series(seq)
    m = evaluate_strict(s, seq)
    for r in range(seq.num_frames + 1):
        h = Horizon.of_frames(r)
        a, l = alta(s, seq, h).value(), lidf1(s, seq, h).value()
        assert -TOL <= a <= 1.0 + TOL
        assert -TOL <= l <= 1.0 + TOL
        if r == 0:
            assert abs(a - m.det_f1) <= TOL and abs(l - m.det_f1) <= TOL
        if r >= seq.num_frames - 1:
            assert abs(a - m.ata) <= TOL and abs(l - m.idf1) <= TOL


@pytest.mark.parametrize("seed", range(200))
def test_decomposition_adds_up(seed):
    seq = sequence_for(seed)
    s = build_overlap_series(seq)
    rep = decompose_at_horizon(s, seq, STRICT)
    for m in (*rep.recall, *rep.precision):
        assert abs(m.total - (1.0 - m.approx_tiou)) <= 1e-9
        assert all(v >= -TOL for v in dataclasses.astuple(m)[1:])
    overall = rep.overall
    if seq.gt.num_tracks + seq.pred.num_tracks:
        assert abs(overall.total_error - (1.0 - rep.approx_ata)) <= 1e-9
    if not overall.no_error:
        assert abs(sum(overall.fractions.values()) - 1.0) <= 1e-9
    assert rep.approx_ata <= evaluate_strict(s, seq).ata + TOL
    assert abs(rep.approx_ata - approx_ata(frame_correspondence(s, seq), seq).approx_ata) <= TOL


@pytest.mark.parametrize("seed", range(50))
def test_windowed_decomposition_adds_up(seed):
    seq = sequence_for(seed, max_frames=30)
    s = build_overlap_series(seq)
    rep = decompose_at_horizon(s, seq, Horizon.of_frames(2))
    assert len(rep.timeline) == seq.num_frames
    if seq.num_frames:
        assert abs(rep.overall.total_error - (1.0 - rep.approx_ata)) <= 1e-9
    assert rep.approx_ata <= alta(s, seq, Horizon.of_frames(2)).value() + TOL


@pytest.mark.parametrize("seed", range(500))
def test_agrees_with_brute_force(seed):
    seq = random_sequence(seed, 1 + seed % 6, 1 + seed % 3)
    expected = Oracle(seq).expectations(radii=tuple(range(seq.num_frames + 1)))
    s = build_overlap_series(seq)
    m = evaluate_strict(s, seq)
    got = {
        "det_f1": m.det_f1,
        "idf1": m.idf1,
        "ata": m.ata,
        "approx_ata": approx_ata(frame_correspondence(s, seq), seq).approx_ata,
    }
    for r in range(seq.num_frames + 1):
        got[f"alta@{r}f"] = alta(s, seq, Horizon.of_frames(r)).value()
        got[f"lidf1@{r}f"] = lidf1(s, seq, Horizon.of_frames(r)).value()
    for key, value in expected.items():
        assert abs(got[key] - value) <= TOL, key


@pytest.mark.parametrize("seed", range(100))
def test_symmetric_under_role_swap(seed):
    seq = sequence_for(seed, max_frames=30)
    swapped = seq.swapped()
    s, t = build_overlap_series(seq), build_overlap_series(swapped)
    a, b = evaluate_strict(s, seq), evaluate_strict(t, swapped)
    assert abs(a.det_f1 - b.det_f1) <= TOL
    assert abs(a.idf1 - b.idf1) <= TOL
    assert abs(a.ata - b.ata) <= TOL
    assert abs(a.idr - b.idp) <= TOL and abs(a.idp - b.idr) <= TOL
    assert abs(a.atr - b.atp) <= TOL and abs(a.atp - b.atr) <= TOL
    assert (a.det_fn, a.det_fp, a.det_tp) == (b.det_fp, b.det_fn, b.det_tp)
    for r in (1, 3):
        h = Horizon.of_frames(r)
        assert abs(alta(s, seq, h).value() - alta(t, swapped, h).value()) <= TOL
        assert abs(lidf1(s, seq, h).value() - lidf1(t, swapped, h).value()) <= TOL


EXCHANGED = {"det_fn": "det_fp", "det_fp": "det_fn", "split": "merge", "merge": "split"}


@pytest.mark.parametrize("horizon", [STRICT, Horizon.of_frames(1), Horizon.of_frames(2), Horizon.of_frames(6)])
def test_role_swap_exchanges_error_types(horizon):
    # every gt box overlaps at most one prediction per frame, so matchings are unique
    far, farther = Box(400.0, 100.0, 40.0, 80.0), Box(700.0, 100.0, 40.0, 80.0)
    seq = make_sequence(
        [track(1, 1, 10), track(2, 1, 10, far), track(3, 2, 6, farther)],
        [track(5, 1, 10), track(6, 1, 4, far), track(7, 5, 10, far), track(8, 8, 10, farther)],
    )
    swapped = seq.swapped()
    rep = decompose_at_horizon(build_overlap_series(seq), seq, horizon)
    other = decompose_at_horizon(build_overlap_series(swapped), swapped, horizon)
    assert rep.overall.raw["split"] > 0 and rep.overall.raw["det_fn"] > 0
    for name, value in rep.overall.raw.items():
        assert abs(value - other.overall.raw[EXCHANGED[name]]) <= 1e-9, name
    assert abs(rep.approx_ata - other.approx_ata) <= 1e-9
    assert abs(rep.approx_atr - other.approx_atp) <= 1e-9
    for w, v in zip(rep.timeline, other.timeline):
        assert abs(w.split - v.merge) <= 1e-9 and abs(w.merge - v.split) <= 1e-9
        assert abs(w.det_fn - v.det_fp) <= 1e-9 and abs(w.det_fp - v.det_fn) <= 1e-9


def _permuted(seq, order):
    """Same boxes with frame f moved to order[f - 1]."""
    def remap(tracks, role):
        return TrackSet(
            tuple(Track(tr.external_id, {int(order[f - 1]): b for f, b in tr.boxes.items()}) for tr in tracks),
            role,
        )
    return Sequence(seq.name, seq.num_frames, seq.fps, remap(seq.gt, Role.GT), remap(seq.pred, Role.PRED))


@pytest.mark.parametrize("seed", range(100))
def test_strict_metrics_ignore_frame_order(seed):
    seq = sequence_for(seed, max_frames=30)
    order = np.random.default_rng(seed).permutation(seq.num_frames) + 1
    other = _permuted(seq, order)
    a = evaluate_strict(build_overlap_series(seq), seq)
    b = evaluate_strict(build_overlap_series(other), other)
    assert abs(a.det_f1 - b.det_f1) <= TOL
    assert abs(a.idf1 - b.idf1) <= TOL
    assert abs(a.ata - b.ata) <= TOL
