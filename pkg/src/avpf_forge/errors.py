"""Exception hierarchy shared across the toolkit."""


class AvpfError(Exception):
    """Base class for all toolkit errors."""


class FormatError(AvpfError):
    """On-disk data does not match the documented layout or schema."""


class AlignmentError(AvpfError):
    """Audio and video durations disagree beyond one frame period."""


class ValidationError(AvpfError):
    """An in-memory value violates a type invariant or operation contract."""


class RangeError(AvpfError):
    """An index, shift, or length falls outside its permitted range."""


class DegenerateHullError(AvpfError):
    """Landmark points are collinear; no convex hull polygon exists."""


class InfeasibleError(AvpfError):
    """No candidate satisfies the splice offset constraints."""


class IoError(AvpfError):
    """Reading or writing an artifact failed."""


class ConfigError(AvpfError):
    """Pipeline configuration is missing, malformed, or inconsistent."""


class SkippedClipError(AvpfError):
    """Every enabled strategy failed for a clip; recorded as nonfatal."""
