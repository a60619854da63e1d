"""Landmark topologies, recordings, and the movement registry.

Two landmark topologies are supported: the 33-point webcam pose topology
and the 39-marker optical motion-capture topology. Movements are defined
by the body segment they measure: two endpoints per source, each endpoint
either a single landmark or the midpoint of a landmark pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import (
    MissingLandmarkError,
    UnknownLandmarkError,
    UnknownMovementError,
    UnusableRecordingError,
)

SOURCE_WEBCAM = "webcam-pose"
SOURCE_MOCAP = "mocap"

TOPOLOGY_WEBCAM = "webcam-33"
TOPOLOGY_MOCAP = "mocap-39"

ORIENT_SAGITTAL = "lateral-sagittal"
ORIENT_CORONAL = "anterior-coronal"

# Webcam pose topology: 33 landmarks (face, torso, limbs, hands, feet).
WEBCAM_LANDMARKS = frozenset({
    "NOSE",
    "LEYI", "LEYE", "LEYO", "REYI", "REYE", "REYO",
    "LEAR", "REAR",
    "LMTH", "RMTH",
    "LSHO", "RSHO",
    "LELB", "RELB",
    "LWRI", "RWRI",
    "LPNK", "RPNK",
    "LIDX", "RIDX",
    "LTHM", "RTHM",
    "LHIP", "RHIP",
    "LKNE", "RKNE",
    "LANK", "RANK",
    "LHEE", "RHEE",
    "LTOE", "RTOE",
})

# Full-body mocap marker set: 39 markers.
MOCAP_LANDMARKS = frozenset({
    "LFHD", "RFHD", "LBHD", "RBHD",
    "C7", "T10", "CLAV", "STRN", "RBAK",
    "LSHO", "RSHO",
    "LUPA", "RUPA",
    "LELB", "RELB",
    "LFRM", "RFRM",
    "LWRA", "RWRA", "LWRB", "RWRB",
    "LFIN", "RFIN",
    "LASI", "RASI", "LPSI", "RPSI",
    "LTHI", "RTHI",
    "LKNE", "RKNE",
    "LTIB", "RTIB",
    "LANK", "RANK",
    "LHEE", "RHEE",
    "LTOE", "RTOE",
})

TOPOLOGIES = {
    TOPOLOGY_WEBCAM: WEBCAM_LANDMARKS,
    TOPOLOGY_MOCAP: MOCAP_LANDMARKS,
}

SOURCE_TOPOLOGY = {
    SOURCE_WEBCAM: TOPOLOGY_WEBCAM,
    SOURCE_MOCAP: TOPOLOGY_MOCAP,
}

DEFAULT_VISIBILITY_THRESHOLD = 0.5
MIN_VALID_FRAMES = 10


def validate_landmark(name: str, topology: str) -> str:
    """Return ``name`` if it belongs to ``topology``, else raise."""
    try:
        members = TOPOLOGIES[topology]
    except KeyError:
        raise UnknownLandmarkError(f"unknown topology {topology!r}") from None
    if name not in members:
        raise UnknownLandmarkError(f"landmark {name!r} not in topology {topology}")
    return name


@dataclass(frozen=True)
class LandmarkFrame:
    """One timestamped sample of named 3D landmarks with visibility.

    Positions are unit-agnostic right-handed coordinates. Visibility is a
    confidence in [0, 1]; mocap sources report 1.0, or 0.0 for dropouts.
    """

    t: float
    positions: dict[str, tuple[float, float, float]]
    visibility: dict[str, float]

    def __post_init__(self):
        if not (math.isfinite(self.t) and self.t >= 0):
            raise ValueError(f"frame timestamp must be finite and >= 0, got {self.t}")
        for name, pos in self.positions.items():
            if len(pos) != 3 or not all(math.isfinite(c) for c in pos):
                raise ValueError(f"non-finite position for {name!r} at t={self.t}")
            vis = self.visibility.get(name, 1.0)
            if not (math.isfinite(vis) and 0.0 <= vis <= 1.0):
                raise ValueError(f"visibility for {name!r} must be in [0,1], got {vis}")

    def vis(self, name: str) -> float:
        """Visibility of ``name``; 0.0 when the landmark is absent."""
        if name not in self.positions:
            return 0.0
        return self.visibility.get(name, 1.0)


@dataclass(frozen=True)
class Recording:
    """An ordered sequence of frames for one movement repetition."""

    frames: tuple[LandmarkFrame, ...]
    source: str
    nominal_rate: float
    movement: str
    subject: str
    repetition: int
    side: str | None = None
    phase: str | None = None

    def __post_init__(self):
        if self.source not in SOURCE_TOPOLOGY:
            raise ValueError(f"unknown source {self.source!r}")
        topo = self.topology
        last_t = -math.inf
        for frame in self.frames:
            if frame.t <= last_t:
                raise ValueError(
                    f"frame timestamps must be strictly increasing "
                    f"(t={frame.t} after t={last_t})"
                )
            last_t = frame.t
            for name in frame.positions:
                validate_landmark(name, topo)

    @property
    def topology(self) -> str:
        return SOURCE_TOPOLOGY[self.source]

    def __len__(self) -> int:
        return len(self.frames)

    def effective_rate(self) -> float:
        """Frames per second over the recorded span; nominal_rate if unknowable."""
        if len(self.frames) < 2:
            return self.nominal_rate
        span = self.frames[-1].t - self.frames[0].t
        if span <= 0:
            return self.nominal_rate
        return (len(self.frames) - 1) / span


@dataclass(frozen=True)
class SegmentSpec:
    """Two segment endpoints, each a landmark or a midpoint of a pair."""

    endpoint1: str | tuple[str, str]
    endpoint2: str | tuple[str, str]

    def landmark_names(self) -> frozenset[str]:
        names = []
        for ep in (self.endpoint1, self.endpoint2):
            names.extend([ep] if isinstance(ep, str) else ep)
        return frozenset(names)

    def validate(self, topology: str) -> None:
        for name in self.landmark_names():
            validate_landmark(name, topology)


@dataclass(frozen=True)
class MovementDefinition:
    """One movement-registry row resolved for a concrete side (if sided)."""

    name: str
    orientation: str
    webcam_segment: SegmentSpec
    mocap_segment: SegmentSpec
    side: str | None = None

    def segment_for(self, source: str) -> SegmentSpec:
        return self.webcam_segment if source == SOURCE_WEBCAM else self.mocap_segment


def _mid(a: str, b: str) -> tuple[str, str]:
    return (a, b)


def _sided(template: str, side: str) -> str:
    # slash notation: "LSHO/RSHO" -> LSHO for left, RSHO for right
    left, right = template.split("/")
    return left if side == "left" else right


@dataclass(frozen=True)
class _RegistryRow:
    name: str
    orientation: str
    sided: bool
    webcam: tuple  # endpoint templates; strings may carry slash notation
    mocap: tuple


# The built-in movement registry. Slash notation marks side-dependent
# markers; 2-tuples are midpoint pairs. Distal joints (wrist, ankle) are
# deliberately not registered.
_REGISTRY_ROWS = (
    _RegistryRow("Back Flexion and Extension", ORIENT_SAGITTAL, False,
                 ("LHIP", "LSHO"), ("LPSI", "C7")),
    _RegistryRow("Back Lateral Flexion", ORIENT_CORONAL, False,
                 ("LHIP", "LSHO"), ("LPSI", "C7")),
    _RegistryRow("Trunk Rotation", ORIENT_CORONAL, False,
                 ("LSHO", "RSHO"), ("LSHO", "RSHO")),
    _RegistryRow("Neck Flexion and Extension", ORIENT_SAGITTAL, False,
                 (_mid("LSHO", "RSHO"), "NOSE"),
                 (_mid("LSHO", "RSHO"), _mid("LFHD", "LBHD"))),
    _RegistryRow("Neck Lateral Bending", ORIENT_SAGITTAL, False,
                 (_mid("LSHO", "RSHO"), "NOSE"),
                 (_mid("LSHO", "RSHO"), _mid("LFHD", "LBHD"))),
    _RegistryRow("Neck Rotation", ORIENT_CORONAL, False,
                 ("LEAR", "REAR"),
                 (_mid("LFHD", "LBHD"), _mid("RFHD", "RBHD"))),
    _RegistryRow("Shoulder Adduction and Abduction", ORIENT_CORONAL, True,
                 ("LSHO/RSHO", "LELB/RELB"), ("LSHO/RSHO", "LELB/RELB")),
    _RegistryRow("Shoulder Flexion and Extension", ORIENT_CORONAL, True,
                 ("LSHO/RSHO", "LELB/RELB"), ("LSHO/RSHO", "LELB/RELB")),
    # Published source prints "LLEB/RELB" for the first webcam marker; the
    # left elbow landmark is LELB, so LLEB is treated as a typo.
    _RegistryRow("Elbow Flexion", ORIENT_SAGITTAL, True,
                 ("LELB/RELB", "LWRI/RWRI"),
                 ("LELB/RELB", (_mid("LWRA", "LWRB"), _mid("RWRA", "RWRB")))),
    _RegistryRow("Hip Flexion and Extension", ORIENT_SAGITTAL, True,
                 ("LHIP/RHIP", "LKNE/RKNE"), ("LASI/RASI", "LKNE/RKNE")),
    _RegistryRow("Hip Adduction and Abduction", ORIENT_CORONAL, True,
                 ("LHIP/RHIP", "LKNE/RKNE"), ("LASI/RASI", "LKNE/RKNE")),
)

MOVEMENT_NAMES = tuple(row.name for row in _REGISTRY_ROWS)
SIDED_MOVEMENTS = frozenset(row.name for row in _REGISTRY_ROWS if row.sided)

ORIENTATION_HINTS = {
    ORIENT_SAGITTAL: "Stand side-on to the camera (lateral sagittal view).",
    ORIENT_CORONAL: "Face the camera straight on (anterior coronal view).",
}


def _resolve_endpoint(template, side: str | None):
    if isinstance(template, str):
        if "/" in template:
            return _sided(template, side)
        return template
    # midpoint pair, possibly a sided pair of pairs
    a, b = template
    if isinstance(a, tuple):
        # ((LWRA,LWRB),(RWRA,RWRB)): pick the pair for the side
        return a if side == "left" else b
    if "/" in a or "/" in b:
        return (_sided(a, side), _sided(b, side))
    return (a, b)


def _resolve_segment_spec(templates: tuple, side: str | None) -> SegmentSpec:
    e1 = _resolve_endpoint(templates[0], side)
    e2 = _resolve_endpoint(templates[1], side)
    return SegmentSpec(e1, e2)


def _endpoint_from_config(obj) -> str | tuple[str, str]:
    if isinstance(obj, str):
        return obj
    if isinstance(obj, (list, tuple)) and len(obj) == 2:
        return (str(obj[0]), str(obj[1]))
    raise UnknownMovementError(
        f"bad endpoint override {obj!r}: use a landmark name or a [a, b] "
        f"midpoint pair")


def _override_segment(overrides: dict, source_key: str,
                      side: str | None) -> SegmentSpec | None:
    # sided overrides use e.g. "webcam_left"; unsided just "webcam"
    for key in ((f"{source_key}_{side}",) if side else ()) + (source_key,):
        if key in overrides:
            ep = overrides[key]
            if not isinstance(ep, (list, tuple)) or len(ep) != 2:
                raise UnknownMovementError(
                    f"override {key!r} must be a two-endpoint list")
            return SegmentSpec(_endpoint_from_config(ep[0]),
                               _endpoint_from_config(ep[1]))
    return None


def registry_lookup(
    name: str,
    side: str | None = None,
    overrides: dict | None = None,
) -> MovementDefinition:
    """Look up a movement definition, resolving side-dependent markers.

    ``overrides`` (from the config file) may replace a movement's
    orientation or segment endpoints per source. Raises
    UnknownMovementError for unregistered movements, for sided movements
    queried without a side, and for sides passed to movements that take
    none.
    """
    row = next((r for r in _REGISTRY_ROWS if r.name == name), None)
    if row is None:
        raise UnknownMovementError(
            f"unknown movement {name!r}; registered movements: "
            + ", ".join(MOVEMENT_NAMES)
        )
    if row.sided:
        if side not in ("left", "right"):
            raise UnknownMovementError(
                f"movement {name!r} requires side 'left' or 'right', got {side!r}"
            )
    elif side is not None:
        raise UnknownMovementError(f"movement {name!r} does not take a side")
    orientation = row.orientation
    webcam = _resolve_segment_spec(row.webcam, side)
    mocap = _resolve_segment_spec(row.mocap, side)
    entry = (overrides or {}).get(name)
    if entry:
        orientation = entry.get("orientation", orientation)
        if orientation not in (ORIENT_SAGITTAL, ORIENT_CORONAL):
            raise UnknownMovementError(
                f"override orientation {orientation!r} must be "
                f"{ORIENT_SAGITTAL!r} or {ORIENT_CORONAL!r}")
        webcam = _override_segment(entry, "webcam", side) or webcam
        mocap = _override_segment(entry, "mocap", side) or mocap
    definition = MovementDefinition(
        name=row.name,
        orientation=orientation,
        webcam_segment=webcam,
        mocap_segment=mocap,
        side=side,
    )
    definition.webcam_segment.validate(TOPOLOGY_WEBCAM)
    definition.mocap_segment.validate(TOPOLOGY_MOCAP)
    return definition


def list_movements() -> list[dict]:
    """Registry summary used by the service and CLI."""
    out = []
    for row in _REGISTRY_ROWS:
        out.append({
            "name": row.name,
            "sided": row.sided,
            "orientation": row.orientation,
            "orientation_hint": ORIENTATION_HINTS[row.orientation],
        })
    return out


@dataclass(frozen=True)
class VisibilityFilterResult:
    """Filtered recording plus what was dropped and why."""

    recording: Recording
    dropped_count: int
    dropped_timestamps: tuple[float, ...]
    input_count: int


def filter_visibility(
    recording: Recording,
    required: frozenset[str] | set[str],
    threshold: float = DEFAULT_VISIBILITY_THRESHOLD,
    min_valid_frames: int = MIN_VALID_FRAMES,
) -> VisibilityFilterResult:
    """Drop whole frames whose required landmarks fall below ``threshold``.

    Removal is strict less-than: a visibility exactly at the threshold is
    kept. A frame missing a required landmark counts as visibility 0.
    """
    kept: list[LandmarkFrame] = []
    dropped: list[float] = []
    for frame in recording.frames:
        if all(frame.vis(name) >= threshold for name in required):
            kept.append(frame)
        else:
            dropped.append(frame.t)
    if len(kept) < min_valid_frames:
        raise UnusableRecordingError(
            f"movement {recording.movement!r} subject {recording.subject!r} "
            f"rep {recording.repetition}: only {len(kept)} of "
            f"{len(recording.frames)} frames pass the visibility gate "
            f"(threshold {threshold}, {len(dropped)} dropped, "
            f"minimum {min_valid_frames})"
        )
    filtered = replace(recording, frames=tuple(kept))
    return VisibilityFilterResult(
        recording=filtered,
        dropped_count=len(dropped),
        dropped_timestamps=tuple(dropped),
        input_count=len(recording.frames),
    )


def resolve_segment(
    frame: LandmarkFrame, spec: SegmentSpec
) -> tuple[tuple[float, float, float], tuple[float, float, float]]:
    """Resolve the two segment endpoints for one frame.

    Single-marker endpoints return that landmark's position; midpoint
    endpoints the component-wise mean of the pair.
    """

    def point(ep):
        if isinstance(ep, str):
            if ep not in frame.positions:
                raise MissingLandmarkError(ep, frame.t)
            return frame.positions[ep]
        a, b = ep
        for name in (a, b):
            if name not in frame.positions:
                raise MissingLandmarkError(name, frame.t)
        pa, pb = frame.positions[a], frame.positions[b]
        return tuple((ca + cb) / 2.0 for ca, cb in zip(pa, pb))

    return point(spec.endpoint1), point(spec.endpoint2)
