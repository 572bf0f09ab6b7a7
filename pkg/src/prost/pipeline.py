"""Image-side plumbing around the tracker.

Frames are vectorized in channel-planar order (all red values, then all
green, then all blue; each plane row-major), matching the stacked layout
the subspace model is trained on.  Pixel intensities are on the [0, 1]
scale throughout; 8-bit sources are divided by 255 at decode time.

Preprocessing follows the running-statistics scheme used during stream
bootstrap: a per-coordinate running mean collected over an
initialization window, plus a single standard deviation pooled over
every pixel of that window.  Once frozen, normalization is a fixed
affine map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError

__all__ = [
    "FrameBuffer",
    "PreprocStats",
    "SegmentationMask",
    "resample",
    "segment",
    "median3x3",
    "foreground_weights_from_mask",
    "upsample_mask",
]

STD_FLOOR = 1e-6


@dataclass
class FrameBuffer:
    """A vectorized 1- or 3-channel image on the [0, 1] intensity scale.

    ``data`` has length ``width * height * channels``, channel-planar.
    """

    width: int
    height: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise DimensionError(f"channels must be 1 or 3, got {self.channels}")
        if self.width < 1 or self.height < 1:
            raise DimensionError(f"bad dimensions {self.width}x{self.height}")
        expected = self.width * self.height * self.channels
        if self.data.shape != (expected,):
            raise DimensionError(
                f"data length {self.data.shape} does not match "
                f"{self.width}x{self.height}x{self.channels}"
            )

    @property
    def pixels(self) -> int:
        return self.width * self.height

    def planes(self) -> np.ndarray:
        """View of the data as (channels, height, width)."""
        return self.data.reshape(self.channels, self.height, self.width)

    def to_gray(self) -> "FrameBuffer":
        """Collapse color to a single channel by averaging the planes."""
        if self.channels == 1:
            return self
        gray = self.planes().mean(axis=0)
        return FrameBuffer(self.width, self.height, 1, gray.reshape(-1))


@dataclass
class SegmentationMask:
    """Per-pixel binary labels: 0 background, 1 foreground (row-major)."""

    width: int
    height: int
    labels: np.ndarray

    def __post_init__(self):
        if self.labels.shape != (self.width * self.height,):
            raise DimensionError(
                f"labels length {self.labels.shape} does not match "
                f"{self.width}x{self.height}"
            )

    def grid(self) -> np.ndarray:
        return self.labels.reshape(self.height, self.width)

    def foreground_fraction(self) -> float:
        return float(np.mean(self.labels != 0))


@dataclass
class PreprocStats:
    """Running mean per coordinate and one pooled standard deviation.

    ``update`` may only be called before ``freeze``; ``apply`` only
    after.  ``apply_running`` normalizes with the statistics gathered so
    far and is what the pipeline uses while the window is still open.
    """

    mean: np.ndarray
    frames_seen: int = 0
    frozen: bool = False
    std: float = 0.0
    value_sum: float = 0.0
    value_sumsq: float = 0.0
    value_count: int = 0

    @classmethod
    def empty(cls, length: int) -> "PreprocStats":
        return cls(mean=np.zeros(length))

    def update(self, frame: np.ndarray) -> None:
        """Fold one frame into the running mean and pooled-std accumulators."""
        if self.frozen:
            raise ConfigError("statistics are frozen; no further updates allowed")
        if frame.shape != self.mean.shape:
            raise DimensionError(
                f"frame length {frame.shape} does not match stats {self.mean.shape}"
            )
        self.frames_seen += 1
        self.mean += (frame - self.mean) / self.frames_seen
        self.value_sum += float(np.sum(frame))
        self.value_sumsq += float(np.sum(frame * frame))
        self.value_count += frame.size

    def _current_std(self) -> float:
        if self.value_count < 2:
            return STD_FLOOR
        var = (self.value_sumsq - self.value_sum**2 / self.value_count) / (
            self.value_count - 1
        )
        return max(float(np.sqrt(max(var, 0.0))), STD_FLOOR)

    def freeze(self) -> None:
        if self.frames_seen < 1:
            raise ConfigError("cannot freeze before seeing any frame")
        self.std = self._current_std()
        self.frozen = True

    def apply(self, frame: np.ndarray) -> np.ndarray:
        """Normalize a frame vector with the frozen statistics."""
        if not self.frozen:
            raise ConfigError("statistics must be frozen before applying them")
        return (frame - self.mean) / self.std

    def apply_running(self, frame: np.ndarray) -> np.ndarray:
        """Normalize with the statistics collected so far (pre-freeze)."""
        return (frame - self.mean) / self._current_std()

    def invert(self, normalized: np.ndarray) -> np.ndarray:
        """Map a normalized vector back to the intensity scale."""
        scale = self.std if self.frozen else self._current_std()
        return normalized * scale + self.mean


def resample(frame: FrameBuffer, out_w: int, out_h: int) -> FrameBuffer:
    """Bilinear resampling per channel (half-pixel-center alignment).

    Identity dimensions return the frame data unchanged; a constant
    image stays exactly constant at any size.
    """
    if out_w < 1 or out_h < 1:
        raise DimensionError(f"bad target dimensions {out_w}x{out_h}")
    if out_w == frame.width and out_h == frame.height:
        return frame

    def axis_coords(n_out: int, n_in: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1.0)
        lo = np.floor(src).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    x0, x1, wx = axis_coords(out_w, frame.width)
    y0, y1, wy = axis_coords(out_h, frame.height)
    wx = wx[np.newaxis, :]
    wy = wy[:, np.newaxis]

    out_planes = []
    for plane in frame.planes():
        top = (1.0 - wx) * plane[np.ix_(y0, x0)] + wx * plane[np.ix_(y0, x1)]
        bottom = (1.0 - wx) * plane[np.ix_(y1, x0)] + wx * plane[np.ix_(y1, x1)]
        out_planes.append((1.0 - wy) * top + wy * bottom)
    data = np.concatenate([p.reshape(-1) for p in out_planes])
    return FrameBuffer(out_w, out_h, frame.channels, data)


def segment(
    residual: np.ndarray, dims: tuple[int, int, int], delta: float
) -> SegmentationMask:
    """Threshold a reconstruction residual into a foreground mask.

    A pixel is foreground when the largest absolute residual over its
    channels reaches ``delta``; the boundary value itself counts as
    foreground.
    """
    w, h, channels = dims
    if residual.shape != (w * h * channels,):
        raise DimensionError(
            f"residual length {residual.shape} does not match {w}x{h}x{channels}"
        )
    per_channel = np.abs(residual.reshape(channels, h * w))
    labels = (per_channel.max(axis=0) >= delta).astype(np.uint8)
    return SegmentationMask(w, h, labels)


def median3x3(mask: SegmentationMask) -> SegmentationMask:
    """3x3 median filter on a binary mask (majority vote of 9).

    Borders replicate the edge pixel, so foreground touching the frame
    edge is not eroded.  Fills single-pixel holes and removes
    single-pixel speckles.
    """
    grid = mask.grid().astype(np.int32)
    padded = np.pad(grid, 1, mode="edge")
    votes = np.zeros_like(grid)
    for dy in range(3):
        for dx in range(3):
            votes += padded[dy : dy + mask.height, dx : dx + mask.width]
    return SegmentationMask(mask.width, mask.height, (votes >= 5).astype(np.uint8).reshape(-1))


def foreground_weights_from_mask(
    mask: SegmentationMask, channels: int, omega: float
) -> np.ndarray:
    """Expand per-pixel labels into per-coordinate fit weights.

    Every channel coordinate of a foreground pixel gets ``omega``;
    background coordinates get 1.
    """
    if not (0.0 < omega <= 1.0):
        raise ConfigError(f"omega must be in (0, 1], got {omega}")
    per_pixel = np.where(mask.labels != 0, omega, 1.0)
    return np.tile(per_pixel, channels)


def upsample_mask(mask: SegmentationMask, out_w: int, out_h: int) -> SegmentationMask:
    """Nearest-neighbor upsampling of categorical labels."""
    if out_w < 1 or out_h < 1:
        raise DimensionError(f"bad target dimensions {out_w}x{out_h}")
    if out_w == mask.width and out_h == mask.height:
        return mask
    xs = np.minimum(
        ((np.arange(out_w) + 0.5) * (mask.width / out_w)).astype(int), mask.width - 1
    )
    ys = np.minimum(
        ((np.arange(out_h) + 0.5) * (mask.height / out_h)).astype(int), mask.height - 1
    )
    grid = mask.grid()[np.ix_(ys, xs)]
    return SegmentationMask(out_w, out_h, grid.reshape(-1))
