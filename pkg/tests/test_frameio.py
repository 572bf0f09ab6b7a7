import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prost.errors import CodecError, SequenceError
from prost.frameio import (
    GtLabel,
    SequenceSpec,
    decode_pnm,
    encode_pnm,
    open_sequence,
    read_groundtruth,
    read_pnm,
    sequence_indices,
    write_pnm,
)
from prost.pipeline import FrameBuffer, SegmentationMask


def test_single_pixel_pgm():
    frame = decode_pnm(b"P5\n1 1\n255\n\xff")
    assert frame.channels == 1
    assert frame.data[0] == 1.0


def test_ppm_layout_is_channel_planar():
    payload = bytes([255, 0, 0, 0, 0, 255])
    frame = decode_pnm(b"P6\n2 1\n255\n" + payload)
    np.testing.assert_array_equal(frame.data, [1, 0, 0, 0, 0, 1])


def test_header_tolerates_any_whitespace():
    frame = decode_pnm(b"P5  2\t1\n255 \x01\x02")
    assert frame.width == 2 and frame.height == 1
    np.testing.assert_allclose(frame.data, [1 / 255, 2 / 255])


def test_rejects_unknown_magic():
    with pytest.raises(CodecError, match="magic"):
        decode_pnm(b"P3\n1 1\n255\n0")


def test_rejects_wide_maxval():
    with pytest.raises(CodecError, match="maxval"):
        decode_pnm(b"P5\n1 1\n65535\n\x00\x00")


def test_rejects_truncated_payload():
    with pytest.raises(CodecError, match="truncated"):
        decode_pnm(b"P5\n4 4\n255\n\x00\x00")


def test_mask_serialization():
    mask = SegmentationMask(2, 2, np.array([1, 0, 0, 1], dtype=np.uint8))
    blob = encode_pnm(mask)
    assert blob == b"P5\n2 2\n255\n\xff\x00\x00\xff"


def test_half_intensity_rounds_up():
    frame = FrameBuffer(1, 1, 1, np.array([0.5]))
    assert encode_pnm(frame)[-1] == 128


def test_values_clamped_on_write():
    frame = FrameBuffer(2, 1, 1, np.array([-0.3, 1.7]))
    assert encode_pnm(frame)[-2:] == b"\x00\xff"


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.sampled_from([1, 3]), st.integers(0, 2**32 - 1))
def test_round_trip_bit_exact(width, height, channels, seed):
    rng = np.random.default_rng(seed)
    bytes_in = rng.integers(0, 256, size=width * height * channels, dtype=np.uint8)
    if channels == 3:
        planar = bytes_in.reshape(height * width, 3).T.reshape(-1)
        frame = FrameBuffer(width, height, 3, planar.astype(float) / 255.0)
    else:
        frame = FrameBuffer(width, height, 1, bytes_in.astype(float) / 255.0)
    decoded = decode_pnm(encode_pnm(frame))
    np.testing.assert_array_equal(decoded.data, frame.data)
    assert encode_pnm(decoded) == encode_pnm(frame)


def test_file_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    frame = FrameBuffer(5, 4, 3, rng.integers(0, 256, size=60).astype(float) / 255.0)
    path = tmp_path / "frame.ppm"
    write_pnm(frame, path)
    back = read_pnm(path)
    np.testing.assert_array_equal(back.data, frame.data)


def test_groundtruth_categories(tmp_path):
    values = np.array([0, 50, 85, 170, 255], dtype=np.uint8)
    path = tmp_path / "gt.pgm"
    path.write_bytes(b"P5\n5 1\n255\n" + values.tobytes())
    gt = read_groundtruth(path)
    assert [GtLabel(v) for v in gt.labels] == [
        GtLabel.BACKGROUND,
        GtLabel.SHADOW,
        GtLabel.OUTSIDE_ROI,
        GtLabel.UNKNOWN,
        GtLabel.FOREGROUND,
    ]


def test_groundtruth_histogram_matches_bytes(tmp_path):
    rng = np.random.default_rng(2)
    values = rng.choice([0, 50, 85, 170, 255], size=64).astype(np.uint8)
    path = tmp_path / "gt.pgm"
    path.write_bytes(b"P5\n8 8\n255\n" + values.tobytes())
    gt = read_groundtruth(path)
    for value in (0, 50, 85, 170, 255):
        assert np.sum(gt.labels == value) == np.sum(values == value)


def test_groundtruth_rejects_unknown_gray(tmp_path):
    path = tmp_path / "gt.pgm"
    path.write_bytes(b"P5\n2 1\n255\n\x00\x7b")
    with pytest.raises(CodecError, match="unexpected"):
        read_groundtruth(path)


def _write_frames(directory, indices, width=2, height=2):
    directory.mkdir(parents=True, exist_ok=True)
    for index in indices:
        frame = FrameBuffer(width, height, 1, np.full(width * height, 0.5))
        write_pnm(frame, directory / f"in{index:06d}.pgm")


def test_sequence_yields_in_order(tmp_path):
    _write_frames(tmp_path / "frames", [3, 1, 2])
    spec = SequenceSpec(input_dir=tmp_path / "frames", frame_pattern="in%06d.pgm")
    out = list(open_sequence(spec))
    assert [index for index, _, _ in out] == [1, 2, 3]
    assert all(gt is None for _, _, gt in out)


def test_sequence_is_streaming(tmp_path):
    _write_frames(tmp_path / "frames", [1, 2])
    spec = SequenceSpec(input_dir=tmp_path / "frames", frame_pattern="in%06d.pgm")
    iterator = open_sequence(spec)
    index, _, _ = next(iterator)
    assert index == 1


def test_empty_eval_range_rejected(tmp_path):
    with pytest.raises(SequenceError):
        SequenceSpec(input_dir=tmp_path, eval_range=(5, 4))


def test_missing_frame_inside_range(tmp_path):
    _write_frames(tmp_path / "frames", [1, 3])
    spec = SequenceSpec(
        input_dir=tmp_path / "frames", frame_pattern="in%06d.pgm", eval_range=(1, 3)
    )
    with pytest.raises(SequenceError, match="missing"):
        list(open_sequence(spec))


def test_missing_input_dir(tmp_path):
    spec = SequenceSpec(input_dir=tmp_path / "nope", frame_pattern="in%06d.pgm")
    with pytest.raises(SequenceError, match="does not exist"):
        list(open_sequence(spec))


def test_bad_pattern_rejected(tmp_path):
    spec = SequenceSpec(input_dir=tmp_path, frame_pattern="in*.pgm")
    with pytest.raises(SequenceError, match="pattern"):
        sequence_indices(spec)


def test_groundtruth_attached_in_range(tmp_path, toy_sequence):
    spec = SequenceSpec(
        input_dir=toy_sequence / "input",
        groundtruth_dir=toy_sequence / "groundtruth",
        eval_range=(21, 30),
    )
    records = list(open_sequence(spec))
    assert len(records) == 30
    assert all(gt is None for index, _, gt in records if index <= 20)
    assert all(gt is not None for index, _, gt in records if index > 20)
