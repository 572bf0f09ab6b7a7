"""Shared fixtures: toy annotated sequences written as netpbm files."""

from __future__ import annotations

import numpy as np
import pytest

from prost.frameio import write_pnm
from prost.pipeline import FrameBuffer

WIDTH, HEIGHT = 32, 24


def make_sequence(
    root,
    n_frames: int = 30,
    fg_after: int = 20,
    noise: float = 0.0,
    channels: int = 3,
    seed: int = 0,
    roi_labels: bool = False,
):
    """Write a changedetection-style sequence under ``root``.

    A fixed random background plus a bright 6x6 square moving left to
    right after frame ``fg_after``.  Ground truth marks the square; with
    ``roi_labels`` the top row is marked outside the region of interest
    and one column unknown, to exercise scoring exclusions.
    """
    rng = np.random.default_rng(seed)
    (root / "input").mkdir(parents=True)
    (root / "groundtruth").mkdir()
    base = rng.uniform(0.2, 0.6, size=(channels, HEIGHT, WIDTH))
    for i in range(1, n_frames + 1):
        img = base.copy()
        if noise:
            img = np.clip(img + rng.normal(0.0, noise, size=img.shape), 0.0, 1.0)
        gt = np.zeros((HEIGHT, WIDTH), dtype=np.uint8)
        if i > fg_after:
            x0 = (i * 2) % (WIDTH - 6)
            img[:, 8:14, x0 : x0 + 6] = 1.0
            gt[8:14, x0 : x0 + 6] = 255
        if roi_labels:
            gt[0, :] = 85
            gt[:, 0] = np.where(gt[:, 0] == 255, 255, 170)
        ext = "ppm" if channels == 3 else "pgm"
        frame = FrameBuffer(WIDTH, HEIGHT, channels, img.reshape(-1))
        write_pnm(frame, root / "input" / f"in{i:06d}.{ext}")
        header = f"P5\n{WIDTH} {HEIGHT}\n255\n".encode()
        (root / "groundtruth" / f"gt{i:06d}.pgm").write_bytes(header + gt.tobytes())
    (root / "temporalROI.txt").write_text(f"{fg_after + 1} {n_frames}\n")
    return root


@pytest.fixture
def toy_sequence(tmp_path):
    return make_sequence(tmp_path / "toyseq")


@pytest.fixture
def noisy_sequence(tmp_path):
    return make_sequence(tmp_path / "noisyseq", noise=0.02)


@pytest.fixture
def gray_sequence(tmp_path):
    return make_sequence(tmp_path / "grayseq", channels=1)
