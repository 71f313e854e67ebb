"""Audio-visual pseudo-fake sample generation and diagnostics toolkit."""

__version__ = "0.1.0"

from avpf_forge.errors import (
    AlignmentError,
    AvpfError,
    ConfigError,
    DegenerateHullError,
    FormatError,
    InfeasibleError,
    IoError,
    RangeError,
    SkippedClipError,
    ValidationError,
)
from avpf_forge.media import AudioTrack, Clip, LandmarkTrack, load_clip, load_landmarks, save_clip
from avpf_forge.manifest import Manifest, read_manifest, write_manifest

__all__ = [
    "AlignmentError",
    "AudioTrack",
    "AvpfError",
    "Clip",
    "ConfigError",
    "DegenerateHullError",
    "FormatError",
    "InfeasibleError",
    "IoError",
    "LandmarkTrack",
    "Manifest",
    "RangeError",
    "SkippedClipError",
    "ValidationError",
    "load_clip",
    "load_landmarks",
    "read_manifest",
    "save_clip",
    "write_manifest",
    "__version__",
]
