"""Line-oriented text formats for detections, ground truth, and signals.

Detection log records, space-separated, `#` comments and blank lines
ignored:

    <frame_id> <source_id> <class> <confidence> <x1> <y1> <x2> <y2>
    <frame_id> gt <class> <x1> <y1> <x2> <y2>
    <frame_id> ensemble <class> <confidence> <x1> <y1> <x2> <y2> <n_sources> <n_members>

Floats render at 6 decimals; round-trips are exact at that precision.
"""

from __future__ import annotations

from typing import Sequence, Union

from .fusion import ENSEMBLE_SOURCE, Detection, FusedDetection
from .geometry import BBox
from .metrics import GroundTruthObject

GT_SOURCE = "gt"

Record = Union[Detection, FusedDetection, GroundTruthObject]


class LogParseError(ValueError):
    """Raised with the offending line number for malformed log lines."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def _floats(parts: Sequence[str], lineno: int) -> list[float]:
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise LogParseError(lineno, f"bad number in {' '.join(parts)!r}") from None


def parse_detection_line(line: str, lineno: int = 0) -> Record:
    parts = line.split()
    if len(parts) < 2:
        raise LogParseError(lineno, f"too few fields: {line!r}")
    try:
        frame_id = int(parts[0])
    except ValueError:
        raise LogParseError(lineno, f"bad frame_id {parts[0]!r}") from None
    source = parts[1]
    try:
        if source == GT_SOURCE:
            if len(parts) != 7:
                raise LogParseError(lineno, f"ground-truth record needs 7 fields: {line!r}")
            x1, y1, x2, y2 = _floats(parts[3:7], lineno)
            return GroundTruthObject(frame_id, parts[2], BBox(x1, y1, x2, y2))
        if source == ENSEMBLE_SOURCE:
            if len(parts) != 10:
                raise LogParseError(lineno, f"fused record needs 10 fields: {line!r}")
            conf, x1, y1, x2, y2 = _floats(parts[3:8], lineno)
            n_sources, n_members = int(parts[8]), int(parts[9])
            # source identities are not recorded in the log; keep cardinality
            sources = frozenset(f"src{i}" for i in range(n_sources))
            return FusedDetection(frame_id, parts[2], conf, BBox(x1, y1, x2, y2),
                                  sources, n_members)
        if len(parts) != 8:
            raise LogParseError(lineno, f"detection record needs 8 fields: {line!r}")
        conf, x1, y1, x2, y2 = _floats(parts[3:8], lineno)
        return Detection(frame_id, source, parts[2], conf, BBox(x1, y1, x2, y2))
    except LogParseError:
        raise
    except ValueError as exc:
        raise LogParseError(lineno, str(exc)) from None


def parse_detection_log(text: str) -> list[Record]:
    records: list[Record] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        records.append(parse_detection_line(line, lineno))
    return records


def load_detection_log(path) -> list[Record]:
    with open(path, encoding="ascii") as fh:
        return parse_detection_log(fh.read())


def render_record(rec: Record) -> str:
    b = rec.box
    coords = f"{b.x1:.6f} {b.y1:.6f} {b.x2:.6f} {b.y2:.6f}"
    if isinstance(rec, GroundTruthObject):
        return f"{rec.frame_id} {GT_SOURCE} {rec.class_label} {coords}"
    if isinstance(rec, FusedDetection):
        return (f"{rec.frame_id} {ENSEMBLE_SOURCE} {rec.class_label} "
                f"{rec.confidence:.6f} {coords} "
                f"{len(rec.contributing_sources)} {rec.cluster_size}")
    return (f"{rec.frame_id} {rec.source_id} {rec.class_label} "
            f"{rec.confidence:.6f} {coords}")


def save_detection_log(records: Sequence[Record], path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for rec in records:
            fh.write(render_record(rec) + "\n")


def parse_signals(text: str) -> list[tuple[int, float, float]]:
    """Parse `tick score_cam1 score_cam2` lines; ticks must be consecutive."""
    rows: list[tuple[int, float, float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise LogParseError(lineno, f"signal record needs 3 fields: {line!r}")
        try:
            tick = int(parts[0])
            s1, s2 = float(parts[1]), float(parts[2])
        except ValueError:
            raise LogParseError(lineno, f"bad number in {line!r}") from None
        if rows and tick != rows[-1][0] + 1:
            raise LogParseError(lineno, f"tick gap: {rows[-1][0]} -> {tick}")
        rows.append((tick, s1, s2))
    return rows


def load_signals(path) -> list[tuple[int, float, float]]:
    with open(path, encoding="ascii") as fh:
        return parse_signals(fh.read())


def save_signals(rows: Sequence[tuple[int, float, float]], path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for tick, s1, s2 in rows:
            fh.write(f"{tick} {s1:.6f} {s2:.6f}\n")
