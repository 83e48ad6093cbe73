"""
MOTChallenge text format.

One box per line: frame, id, bb_left, bb_top, bb_width, bb_height
[, conf [, class [, visibility]]]. Fields past the ninth are ignored.
Also reads and writes the seqinfo.ini sidecar.
"""

import configparser
import math
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, List, Optional, TextIO, Union

from horizon_eval.core.errors import ContractError, FormatError, ParseError
from horizon_eval.core.model import Box

log = logging.getLogger(__name__)

MIN_FIELDS = 6


@dataclass(frozen=True)
class RawEntry:
    frame: int
    id: int
    box: Box
    conf: float = 1.0
    class_id: int = 1
    visibility: float = 1.0


@dataclass(frozen=True)
class SeqInfo:
    name: Optional[str] = None
    frame_rate: Optional[float] = None
    seq_length: Optional[int] = None


def _as_int(token: str, what: str, line: int, source: Optional[str]) -> int:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"{what} is not numeric: {token!r}", line, source) from None
    if not value.is_integer():
        raise ParseError(f"{what} must be an integer: {token!r}", line, source)
    return int(value)


def _as_float(token: str, what: str, line: int, source: Optional[str]) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"{what} is not numeric: {token!r}", line, source) from None
    if not math.isfinite(value):
        raise ParseError(f"{what} must be finite: {token!r}", line, source)
    return value


def parse_mot_text(text: str, source: Optional[str] = None) -> List[RawEntry]:
    entries: List[RawEntry] = []
    seen = {}
    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) < MIN_FIELDS:
            raise ParseError(f"expected at least {MIN_FIELDS} fields, got {len(fields)}", number, source)
        frame = _as_int(fields[0], "frame", number, source)
        track_id = _as_int(fields[1], "id", number, source)
        left, top, width, height = (
            _as_float(v, name, number, source)
            for v, name in zip(fields[2:6], ("bb_left", "bb_top", "bb_width", "bb_height"))
        )
        if frame < 1:
            raise ParseError(f"frame must be >= 1, got {frame}", number, source)
        if not (width > 0 and height > 0):
            raise ParseError(f"non-positive box size {width}x{height}", number, source)
        conf = _as_float(fields[6], "conf", number, source) if len(fields) > 6 and fields[6] else 1.0
        class_id = _as_int(fields[7], "class", number, source) if len(fields) > 7 and fields[7] else 1
        visibility = _as_float(fields[8], "visibility", number, source) if len(fields) > 8 and fields[8] else 1.0

        key = (frame, track_id)
        if key in seen:
            where = f"{source}:" if source else ""
            raise FormatError(
                f"{where}{number}: duplicate row for frame {frame}, id {track_id} (first at line {seen[key]})"
            )
        seen[key] = number
        entries.append(RawEntry(frame, track_id, Box(left, top, width, height), conf, class_id, visibility))
    return entries


def parse_mot_file(source: Union[BinaryIO, bytes], name: Optional[str] = None) -> List[RawEntry]:
    """Parse a MOTChallenge byte stream into RawEntry rows, one per line."""
    data = source if isinstance(source, (bytes, bytearray)) else source.read()
    try:
        text = bytes(data).decode("utf-8-sig")
    except UnicodeDecodeError as e:
        raise ParseError(f"not UTF-8 text: {e}", None, name) from None
    return parse_mot_text(text, name)


def read_mot_file(path: Union[str, Path]) -> List[RawEntry]:
    path = Path(path)
    with open(path, "rb") as f:
        entries = parse_mot_file(f, str(path))
    log.debug("read %d rows from %s", len(entries), path)
    return entries


def _fmt(value: float) -> str:
    return repr(float(value)) if not float(value).is_integer() else str(int(value))


def write_mot_file(entries: Iterable[RawEntry], stream: TextIO) -> None:
    """Serialise rows (sorted by frame, then id) in the 9-field layout."""
    for e in sorted(entries, key=lambda e: (e.frame, e.id)):
        fields = [
            str(e.frame), str(e.id),
            _fmt(e.box.left), _fmt(e.box.top), _fmt(e.box.width), _fmt(e.box.height),
            _fmt(e.conf), str(e.class_id), _fmt(e.visibility),
        ]
        stream.write(",".join(fields) + "\n")


def format_mot(entries: Iterable[RawEntry]) -> str:
    buffer = io.StringIO()
    write_mot_file(entries, buffer)
    return buffer.getvalue()


def read_seqinfo(path: Union[str, Path]) -> SeqInfo:
    """frameRate and seqLength from the [Sequence] section of seqinfo.ini."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        with open(path, "r") as f:
            parser.read_file(f)
    except configparser.Error as e:
        raise FormatError(f"{path}: malformed seqinfo.ini: {e}") from None
    if not parser.has_section("Sequence"):
        raise FormatError(f"{path}: missing [Sequence] section")
    section = parser["Sequence"]
    try:
        frame_rate = float(section["frameRate"]) if "frameRate" in section else None
        seq_length = int(section["seqLength"]) if "seqLength" in section else None
    except ValueError as e:
        raise FormatError(f"{path}: {e}") from None
    if frame_rate is not None and frame_rate <= 0:
        raise FormatError(f"{path}: frameRate must be positive")
    return SeqInfo(section.get("name"), frame_rate, seq_length)


def write_seqinfo(path: Union[str, Path], info: SeqInfo) -> None:
    if info.frame_rate is None or info.seq_length is None:
        raise ContractError("seqinfo needs frame_rate and seq_length")
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser["Sequence"] = {
        "name": info.name or Path(path).parent.name,
        "frameRate": _fmt(info.frame_rate),
        "seqLength": str(info.seq_length),
    }
    with open(path, "w") as f:
        parser.write(f)
