import time

import numpy as np
import pytest

from horizon_eval.core.model import Sequence
from horizon_eval.metrics.local import parse_horizons
from horizon_eval.pipeline import EvalSettings, evaluate_sequence
from horizon_eval.synth.catalog import random_gt
from horizon_eval.synth.perturb import Perturbation, apply


@pytest.mark.slow
def test_long_sequence_many_tracks_and_horizons():
    rng = np.random.default_rng(1000)
    gt = random_gt(rng, 1000, 50, area=2000.0)
    splits = [Perturbation.split(t.external_id, (t.first_frame + t.last_frame) // 2 + 1) for t in gt if len(t) > 1]
    pred = apply(gt, [*splits[:25], Perturbation.drop(rate=0.1), Perturbation.jitter(2.0)], seed=3, num_frames=1000)
    seq = Sequence("long", 1000, 30.0, gt, pred)
    settings = EvalSettings(horizons=tuple(parse_horizons("0,1f,2f,4f,8f,16f,1s,2s,5s,strict")))
    assert len(settings.horizons) == 10

    start = time.perf_counter()
    result = evaluate_sequence(seq, settings)
    elapsed = time.perf_counter() - start

    assert result.ok
    assert elapsed < 10.0, f"evaluation took {elapsed:.1f}s"
