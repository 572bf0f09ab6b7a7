"""Binary netpbm codecs and frame-sequence access.

Only binary PGM (P5) and PPM (P6) with maxval 255 are handled in-core;
datasets shipped as JPEG or PNG are expected to be converted externally
(any bulk converter will do, e.g. ImageMagick's ``mogrify -format ppm``).
Keeping the codec this narrow makes round trips bit-exact and the
package dependency-free on the image side.

Sequence directories follow the ``in<NNNNNN>.ppm`` / ``gt<NNNNNN>.pgm``
naming with six-digit zero padding by default; the patterns are
configurable.  Ground-truth gray levels map to categories as 0
background, 50 shadow, 85 outside the region of interest, 170 unknown,
255 foreground.
"""

from __future__ import annotations

import enum
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .errors import CodecError, SequenceError
from .pipeline import FrameBuffer, SegmentationMask

__all__ = [
    "GtLabel",
    "GroundTruthFrame",
    "SequenceSpec",
    "decode_pnm",
    "encode_pnm",
    "read_pnm",
    "write_pnm",
    "read_groundtruth",
    "decode_groundtruth",
    "open_sequence",
]


class GtLabel(enum.IntEnum):
    """Ground-truth pixel categories; values equal the file gray levels."""

    BACKGROUND = 0
    SHADOW = 50
    OUTSIDE_ROI = 85
    UNKNOWN = 170
    FOREGROUND = 255


_GT_VALUES = np.array([int(v) for v in GtLabel], dtype=np.uint8)


@dataclass
class GroundTruthFrame:
    """Per-pixel categorical labels of one annotated frame."""

    width: int
    height: int
    labels: np.ndarray  # uint8 of GtLabel values, row-major


@dataclass(frozen=True)
class SequenceSpec:
    """Where a frame sequence lives and which frames carry ground truth.

    ``eval_range`` is the inclusive (first, last) index window in which
    ground truth is attached.
    """

    input_dir: Path
    groundtruth_dir: Optional[Path] = None
    eval_range: Optional[tuple[int, int]] = None
    frame_pattern: str = "in%06d.ppm"
    gt_pattern: str = "gt%06d.pgm"

    def __post_init__(self):
        if self.eval_range is not None and self.eval_range[0] > self.eval_range[1]:
            raise SequenceError(
                f"empty evaluation range {self.eval_range[0]}..{self.eval_range[1]}"
            )

    def in_eval_range(self, index: int) -> bool:
        if self.eval_range is None:
            return self.groundtruth_dir is not None
        return self.eval_range[0] <= index <= self.eval_range[1]


def _parse_header(blob: bytes, path) -> tuple[bytes, int, int, int]:
    """Magic, width, height and payload offset of a binary netpbm file."""
    magic = blob[:2]
    if magic not in (b"P5", b"P6"):
        raise CodecError(f"{path}: unsupported magic number {magic!r}")
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise CodecError(f"{path}: truncated header")
        try:
            fields.append(int(blob[start:pos]))
        except ValueError as exc:
            raise CodecError(f"{path}: malformed header field {blob[start:pos]!r}") from exc
    width, height, maxval = fields
    if maxval != 255:
        raise CodecError(f"{path}: only maxval 255 is supported, got {maxval}")
    if width < 1 or height < 1:
        raise CodecError(f"{path}: bad dimensions {width}x{height}")
    # Exactly one whitespace byte separates the header from the payload.
    return magic, width, height, pos + 1


def decode_pnm(blob: bytes, path="<bytes>") -> FrameBuffer:
    """Decode binary PGM/PPM bytes into a [0, 1]-scaled frame.

    Interleaved RGB payloads are rearranged into channel-planar order.
    """
    magic, width, height, offset = _parse_header(blob, path)
    channels = 1 if magic == b"P5" else 3
    count = width * height * channels
    payload = blob[offset : offset + count]
    if len(payload) < count:
        raise CodecError(
            f"{path}: truncated payload ({len(payload)} of {count} bytes)"
        )
    raw = np.frombuffer(payload, dtype=np.uint8)
    if channels == 3:
        raw = raw.reshape(height * width, 3).T.reshape(-1)
    data = raw.astype(np.float64) / 255.0
    return FrameBuffer(width, height, channels, data)


def read_pnm(path) -> FrameBuffer:
    with open(path, "rb") as fh:
        return decode_pnm(fh.read(), path)


def _quantize(values: np.ndarray) -> np.ndarray:
    clamped = np.clip(values, 0.0, 1.0)
    return np.floor(clamped * 255.0 + 0.5).astype(np.uint8)  # round half up


def encode_pnm(image: FrameBuffer | SegmentationMask) -> bytes:
    """Encode a frame (P5/P6) or a mask (P5, foreground=255) to bytes."""
    if isinstance(image, SegmentationMask):
        header = f"P5\n{image.width} {image.height}\n255\n".encode()
        payload = np.where(image.labels != 0, 255, 0).astype(np.uint8)
        return header + payload.tobytes()
    if image.channels == 1:
        header = f"P5\n{image.width} {image.height}\n255\n".encode()
        return header + _quantize(image.data).tobytes()
    header = f"P6\n{image.width} {image.height}\n255\n".encode()
    planar = _quantize(image.data).reshape(3, image.height * image.width)
    return header + planar.T.reshape(-1).tobytes()


def write_pnm(image: FrameBuffer | SegmentationMask, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pnm(image))


def decode_groundtruth(blob: bytes, path="<bytes>") -> GroundTruthFrame:
    magic, width, height, offset = _parse_header(blob, path)
    if magic != b"P5":
        raise CodecError(f"{path}: ground truth must be single-channel (P5)")
    count = width * height
    payload = blob[offset : offset + count]
    if len(payload) < count:
        raise CodecError(f"{path}: truncated payload ({len(payload)} of {count} bytes)")
    labels = np.frombuffer(payload, dtype=np.uint8)
    unknown_values = np.setdiff1d(np.unique(labels), _GT_VALUES)
    if unknown_values.size:
        raise CodecError(
            f"{path}: unexpected ground-truth gray values {unknown_values.tolist()}"
        )
    return GroundTruthFrame(width, height, labels.copy())


def read_groundtruth(path) -> GroundTruthFrame:
    with open(path, "rb") as fh:
        return decode_groundtruth(fh.read(), path)


def _pattern_regex(pattern: str) -> re.Pattern:
    match = re.fullmatch(r"(.*)%0(\d+)d(.*)", pattern)
    if match is None:
        raise SequenceError(
            f"frame pattern {pattern!r} must contain one zero-padded %0Nd field"
        )
    prefix, digits, suffix = match.groups()
    return re.compile(re.escape(prefix) + rf"(\d{{{int(digits)}}})" + re.escape(suffix))


def sequence_indices(spec: SequenceSpec) -> list[int]:
    """Sorted frame indices present in the sequence's input directory."""
    input_dir = Path(spec.input_dir)
    if not input_dir.is_dir():
        raise SequenceError(f"input directory {input_dir} does not exist")
    regex = _pattern_regex(spec.frame_pattern)
    return sorted(
        int(m.group(1)) for name in os.listdir(input_dir) if (m := regex.fullmatch(name))
    )


def open_sequence(
    spec: SequenceSpec,
) -> Iterator[tuple[int, FrameBuffer, Optional[GroundTruthFrame]]]:
    """Stream (index, frame, ground truth) in increasing index order.

    Frame indices are discovered from the directory listing; only one
    decoded frame is held in memory at a time.  Ground truth is attached
    only inside the evaluation range and requires ``groundtruth_dir``.
    A frame missing inside the declared evaluation range is an error.
    """
    input_dir = Path(spec.input_dir)
    indices = sequence_indices(spec)
    if not indices:
        raise SequenceError(
            f"no frames matching {spec.frame_pattern!r} in {input_dir}"
        )
    if spec.eval_range is not None:
        missing = sorted(set(range(spec.eval_range[0], spec.eval_range[1] + 1)) - set(indices))
        if missing:
            raise SequenceError(
                f"frames missing inside evaluation range: {missing[:5]}"
                + ("..." if len(missing) > 5 else "")
            )

    for index in indices:
        frame = read_pnm(input_dir / (spec.frame_pattern % index))
        gt = None
        if spec.groundtruth_dir is not None and spec.in_eval_range(index):
            gt_path = Path(spec.groundtruth_dir) / (spec.gt_pattern % index)
            if gt_path.exists():
                gt = read_groundtruth(gt_path)
            elif spec.eval_range is not None:
                # A declared range promises annotations; outside of one,
                # missing files just mean an unannotated frame.
                raise SequenceError(f"ground-truth file {gt_path} is missing")
        yield index, frame, gt
