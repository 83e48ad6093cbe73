"""
Named synthetic fixtures with their expected metric values.

Fixtures are described in catalog.yaml. Hand-derived expectations are stored
as exact fractions; every fixture also gets brute-force expectations from
the oracle.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from horizon_eval.core.errors import ConfigError, ContractError
from horizon_eval.core.model import Box, Role, Sequence, Track, TrackSet
from horizon_eval.ingest.mot import RawEntry, SeqInfo, write_mot_file, write_seqinfo
from horizon_eval.synth.oracle import Oracle
from horizon_eval.synth.perturb import Perturbation, apply

log = logging.getLogger(__name__)

CATALOG_FILE = Path(__file__).parent / "catalog.yaml"


@dataclass(frozen=True)
class Fixture:
    name: str
    description: str
    sequence: Sequence
    # hand-derived values, exact
    expected: Dict[str, Fraction]
    # brute-force values for every fixture
    oracle: Dict[str, float] = field(default_factory=dict)
    dominant: Optional[str] = None


def load_catalog() -> Dict[str, Dict[str, Any]]:
    try:
        with open(CATALOG_FILE, "r") as f:
            data = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read fixture catalog {CATALOG_FILE}: {e}") from e
    fixtures = data.get("fixtures") if isinstance(data, dict) else None
    if not isinstance(fixtures, dict) or not fixtures:
        raise ConfigError(f"{CATALOG_FILE} defines no fixtures")
    return fixtures


def _gt_from_spec(tracks: List[Dict[str, Any]]) -> TrackSet:
    out = []
    for spec in tracks:
        first, last = spec["frames"]
        box = Box(*map(float, spec["box"]))
        out.append(Track(int(spec["id"]), {f: box for f in range(first, last + 1)}))
    return TrackSet(tuple(out), Role.GT)


def random_gt(rng: np.random.Generator, num_frames: int, num_tracks: int, area: float = 60.0) -> TrackSet:
    """Tracks with random lifetimes drifting inside a small area, so they cross each other."""
    tracks = []
    for k in range(num_tracks):
        first = int(rng.integers(1, num_frames + 1))
        last = int(rng.integers(first, num_frames + 1))
        w, h = (float(v) for v in rng.uniform(10.0, 20.0, size=2))
        x, y = (float(v) for v in rng.uniform(0.0, area, size=2))
        boxes = {}
        for f in range(first, last + 1):
            boxes[f] = Box(x, y, w, h)
            dx, dy = rng.normal(0.0, 2.0, size=2)
            x, y = x + float(dx), y + float(dy)
        tracks.append(Track(k + 1, boxes))
    return TrackSet(tuple(tracks), Role.GT)


def random_perturbations(rng: np.random.Generator, gt: TrackSet, num_frames: int) -> List[Perturbation]:
    """A random mix of every error kind that applies to `gt`."""
    out: List[Perturbation] = []
    for track in gt:
        if len(track) > 1 and rng.random() < 0.4:
            cut = int(rng.integers(track.first_frame + 1, track.last_frame + 1))
            out.append(Perturbation.split(track.external_id, cut))
    disjoint = [
        (a.external_id, b.external_id)
        for a in gt for b in gt
        if a.external_id < b.external_id and not set(a.frames) & set(b.frames)
    ]
    if disjoint and rng.random() < 0.5:
        out.append(Perturbation.merge(*disjoint[int(rng.integers(len(disjoint)))]))
    out.append(Perturbation.drop(rate=float(rng.uniform(0.0, 0.3))))
    if rng.random() < 0.5:
        out.append(Perturbation.spurious(int(rng.integers(1, 3)), int(rng.integers(1, num_frames + 1))))
    out.append(Perturbation.jitter(float(rng.uniform(0.0, 4.0))))
    return out


def random_sequence(seed: int, num_frames: int, num_tracks: int, fps: float = 10.0, name: Optional[str] = None) -> Sequence:
    """Seeded random sequence; the prediction is a perturbed copy of the ground truth."""
    rng = np.random.default_rng(seed)
    gt = random_gt(rng, num_frames, num_tracks)
    perturbations = random_perturbations(rng, gt, num_frames)
    pred = apply(gt, perturbations, seed=int(rng.integers(2**31)), num_frames=num_frames)
    return Sequence(name or f"random-{seed}", num_frames, fps, gt, pred)


def _parse_expected(raw: Dict[str, Any]) -> Dict[str, Fraction]:
    return {key: Fraction(str(value)) for key, value in (raw or {}).items()}


def build_fixture(name: str, spec: Dict[str, Any], seed: Optional[int] = None) -> Fixture:
    seed = int(spec.get("seed", 0) if seed is None else seed)
    fps = float(spec.get("fps", 30.0))
    if "random" in spec:
        params = spec["random"]
        sequence = random_sequence(seed, int(params["num_frames"]), int(params["num_tracks"]), fps, name)
    else:
        gt = _gt_from_spec(spec["gt"])
        T = int(spec.get("num_frames", gt.max_frame))
        perturbations = [Perturbation.from_dict(p) for p in spec.get("perturbations") or []]
        pred = apply(gt, perturbations, seed=seed, num_frames=T)
        sequence = Sequence(name, T, fps, gt, pred)
    return Fixture(
        name=name,
        description=spec.get("desc", ""),
        sequence=sequence,
        expected=_parse_expected(spec.get("expected")),
        oracle=Oracle(sequence).expectations(),
        dominant=spec.get("dominant"),
    )


def fixture_catalog(seed: Optional[int] = None) -> Dict[str, Fixture]:
    """All fixtures by name. `seed` overrides the seed of every fixture."""
    fixtures = {name: build_fixture(name, spec, seed) for name, spec in load_catalog().items()}
    log.debug("built %d fixtures", len(fixtures))
    return fixtures


def _entries(tracks: TrackSet) -> List[RawEntry]:
    return [RawEntry(f, t.external_id, box) for t in tracks for f, box in t.boxes.items()]


def write_fixture(fixture: Fixture, gt_root: Path, pred_dir: Path) -> Tuple[Path, Path]:
    """Write <gt_root>/<name>/gt/gt.txt, its seqinfo.ini and <pred_dir>/<name>.txt."""
    seq = fixture.sequence
    seq_dir = Path(gt_root) / fixture.name
    (seq_dir / "gt").mkdir(parents=True, exist_ok=True)
    Path(pred_dir).mkdir(parents=True, exist_ok=True)
    gt_path = seq_dir / "gt" / "gt.txt"
    pred_path = Path(pred_dir) / f"{fixture.name}.txt"
    with open(gt_path, "w") as f:
        write_mot_file(_entries(seq.gt), f)
    with open(pred_path, "w") as f:
        write_mot_file(_entries(seq.pred), f)
    write_seqinfo(seq_dir / "seqinfo.ini", SeqInfo(fixture.name, seq.fps, seq.num_frames))
    return gt_path, pred_path


def write_catalog(fixtures: Dict[str, Fixture], out_dir: Path, tracker: str = "synth") -> Tuple[Path, Path]:
    """MOTChallenge layout: <out>/gt/<seq>/... and <out>/trackers/<tracker>/<seq>.txt."""
    gt_root = Path(out_dir) / "gt"
    pred_dir = Path(out_dir) / "trackers" / tracker
    for fixture in fixtures.values():
        write_fixture(fixture, gt_root, pred_dir)
    log.info("wrote %d fixtures to %s", len(fixtures), out_dir)
    return gt_root, pred_dir
