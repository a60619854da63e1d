"""Shared fixtures: synthetic recordings built by rotation matrices."""

from __future__ import annotations

import numpy as np
import pytest

from romkit.landmarks import LandmarkFrame, Recording

from oracles import raised_cosine_profile, rotation_matrix

BASE_POINT = np.array([0.12, 0.95, 0.04])
SEGMENT_LENGTH = 0.45
SEGMENT_DIR = np.array([0.0, 1.0, 0.0])
ROTATION_AXIS = np.array([0.0, 0.0, 1.0])


def make_rotation_recording(
    amplitude_deg: float,
    n_frames: int = 61,
    rate: float = 15.0,
    visibility: np.ndarray | None = None,
    noise_sd: float = 0.0,
    rng: np.random.Generator | None = None,
    movement: str = "Back Flexion and Extension",
    subject: str = "S01",
    repetition: int = 1,
    spike_deg: dict[int, float] | None = None,
    angles_deg: np.ndarray | None = None,
) -> Recording:
    """A rigid two-landmark segment swept through a smooth angle profile.

    The hip landmark stays fixed; the shoulder landmark rotates about the
    z-axis following a raised-cosine profile, so the true ROM equals
    ``amplitude_deg`` exactly at the middle frame. ``angles_deg`` replaces
    the profile outright; ``spike_deg`` injects extra rotation at chosen
    frames (tracking-glitch simulation); ``noise_sd`` adds isotropic
    Gaussian noise, in units of segment length, to both endpoints.
    """
    if angles_deg is not None:
        angles = np.asarray(angles_deg, dtype=float).copy()
        n_frames = len(angles)
    else:
        angles = raised_cosine_profile(amplitude_deg, n_frames)
    if spike_deg:
        for idx, extra in spike_deg.items():
            angles[idx] += extra
    frames = []
    for i, theta in enumerate(np.radians(angles)):
        rot = rotation_matrix(ROTATION_AXIS, theta)
        hip = BASE_POINT.copy()
        sho = BASE_POINT + SEGMENT_LENGTH * (rot @ SEGMENT_DIR)
        if noise_sd > 0.0:
            assert rng is not None
            hip = hip + rng.normal(0.0, noise_sd * SEGMENT_LENGTH, 3)
            sho = sho + rng.normal(0.0, noise_sd * SEGMENT_LENGTH, 3)
        vis = 1.0 if visibility is None else float(visibility[i])
        frames.append(LandmarkFrame(
            t=i / rate,
            positions={"LHIP": tuple(map(float, hip)),
                       "LSHO": tuple(map(float, sho))},
            visibility={"LHIP": vis, "LSHO": vis},
        ))
    return Recording(frames=tuple(frames), source="webcam-pose",
                     nominal_rate=rate, movement=movement, subject=subject,
                     repetition=repetition)


@pytest.fixture
def rotation_recording():
    return make_rotation_recording


@pytest.fixture
def rng():
    return np.random.default_rng(20230815)
