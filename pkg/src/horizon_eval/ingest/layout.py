"""
Discovery of MOTChallenge directory trees.

Ground truth: a single file, or <root>/<seq>/gt/gt.txt with an optional
<root>/<seq>/seqinfo.ini. Predictions: a single file, or a directory of
<seq>.txt files.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

from horizon_eval.core.errors import FormatError
from horizon_eval.ingest.mot import SeqInfo, read_seqinfo

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SequenceSource:
    name: str
    gt_path: Path
    seqinfo: Optional[SeqInfo] = None


def _seqinfo_near(directory: Path) -> Optional[SeqInfo]:
    ini = directory / "seqinfo.ini"
    return read_seqinfo(ini) if ini.is_file() else None


def discover_gt(path: Path) -> List[SequenceSource]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"ground truth not found: {path}")
    if path.is_file():
        if path.name == "gt.txt" and path.parent.name == "gt":
            root = path.parent.parent
            return [SequenceSource(root.name, path, _seqinfo_near(root))]
        return [SequenceSource(path.stem, path, _seqinfo_near(path.parent))]

    sources = []
    for sub in sorted(path.iterdir()):
        if sub.is_dir() and (sub / "gt" / "gt.txt").is_file():
            sources.append(SequenceSource(sub.name, sub / "gt" / "gt.txt", _seqinfo_near(sub)))
        elif sub.is_file() and sub.suffix == ".txt":
            sources.append(SequenceSource(sub.stem, sub, None))
    if not sources:
        raise FormatError(f"no ground-truth sequences found under {path}")
    log.info("found %d ground-truth sequences under %s", len(sources), path)
    return sources


def discover_predictions(path: Path, gt_names: List[str]) -> Dict[str, Path]:
    """Map sequence name -> prediction file. A lone file pairs with a lone gt sequence."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"predictions not found: {path}")
    if path.is_file():
        if len(gt_names) == 1:
            return {gt_names[0]: path}
        return {path.stem: path}
    return {p.stem: p for p in sorted(path.glob("*.txt"))}
