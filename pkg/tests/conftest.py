import logging

import pytest

from horizon_eval.core.config import reset_config
from horizon_eval.core.model import Box, Role, Sequence, Track, TrackSet
from horizon_eval.metrics.overlap import build_overlap_series

BOX = Box(100.0, 100.0, 40.0, 80.0)


def track(track_id, first, last, box=BOX, skip=()):
    return Track(track_id, {f: box for f in range(first, last + 1) if f not in skip})


def make_sequence(gt_tracks, pred_tracks, num_frames=None, fps=30.0, name="seq"):
    gt = TrackSet(tuple(gt_tracks), Role.GT)
    pred = TrackSet(tuple(pred_tracks), Role.PRED)
    T = num_frames if num_frames is not None else max(gt.max_frame, pred.max_frame)
    return Sequence(name, T, fps, gt, pred)


@pytest.fixture(autouse=True)
def isolated_runtime(tmp_path, monkeypatch):
    """No user config file, no cached config, log records reach caplog."""
    monkeypatch.setenv("HORIZON_EVAL_CONFIG", str(tmp_path / "no-config.toml"))
    reset_config()
    logger = logging.getLogger("horizon_eval")
    logger.handlers.clear()
    logger.propagate = True
    logger.setLevel(logging.NOTSET)
    yield
    reset_config()


@pytest.fixture
def s1():
    """One gt track over frames 1-10; the prediction switches identity at frame 6."""
    return make_sequence([track(1, 1, 10)], [track(1, 1, 5), track(2, 6, 10)], fps=10.0, name="s1")


@pytest.fixture
def s2():
    """Mirror of s1: two gt tracks, one prediction covering both."""
    return make_sequence([track(1, 1, 5), track(2, 6, 10)], [track(1, 1, 10)], fps=10.0, name="s2")


@pytest.fixture
def perfect():
    other = Box(300.0, 120.0, 30.0, 60.0)
    tracks = [track(1, 1, 12), track(2, 3, 9, other)]
    return make_sequence(tracks, tracks, name="perfect")


@pytest.fixture
def series():
    def build(seq, threshold=0.5):
        return build_overlap_series(seq, threshold)
    return build
