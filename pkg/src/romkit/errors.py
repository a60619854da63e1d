"""Exception types shared across the toolkit."""


class RomKitError(Exception):
    """Base class for all toolkit errors."""


class UnknownLandmarkError(RomKitError):
    """A landmark name does not belong to the declared topology."""


class UnknownMovementError(RomKitError):
    """Movement registry lookup failed; message lists valid names."""


class MissingLandmarkError(RomKitError):
    """A segment endpoint references a landmark absent from a frame."""

    def __init__(self, landmark: str, t: float):
        super().__init__(f"landmark {landmark!r} missing from frame at t={t:.6f}s")
        self.landmark = landmark
        self.t = t


class DegenerateSegmentError(RomKitError):
    """Segment endpoints coincide; no direction can be derived."""

    def __init__(self, t: float):
        super().__init__(f"degenerate segment (endpoints coincide) at t={t:.6f}s")
        self.t = t


class UnusableRecordingError(RomKitError):
    """Too few usable frames remain to evaluate the movement."""


class DecompositionInfeasibleError(RomKitError):
    """Series too short for the requested decomposition period."""


class InsufficientDataError(RomKitError):
    """Not enough subjects or measurements for the requested statistic."""


class UndefinedIccError(RomKitError):
    """ICC undefined (no variance anywhere in the table)."""


class DegenerateRegressionError(RomKitError):
    """Predictor has zero variance; no slope can be fit."""


class ParseError(RomKitError):
    """A file violated its format contract."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        loc = ""
        if path is not None:
            loc += f"{path}"
        if line is not None:
            loc += f":{line}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line


class SchemaError(RomKitError):
    """A tabular file is missing required columns or markers."""


class ManifestError(RomKitError):
    """Cohort manifest is malformed or inconsistent."""


class RecordingStateError(RomKitError):
    """Live-session operation attempted in an invalid recording state."""


class UnknownSessionError(RomKitError):
    """Session or recording id not found."""
