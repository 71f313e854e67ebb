"""Ground-truth manifest for generated samples.

One manifest per output clip records exactly which perturbation was
applied: the strategy, the seed that drove it, and the strategy-specific
parameters (shift, windows, splice indices). Reading back a manifest
reproduces the written one field for field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from avpf_forge.errors import FormatError, IoError

STRATEGIES = ("VSB", "ASB", "AVSS", "NONE")


def _check_windows(windows: list[tuple[int, int]], what: str) -> None:
    prev_end = None
    for start, end in sorted(windows):
        if not (0 <= start < end):
            raise FormatError(f"{what} window [{start}, {end}) is not a valid interval")
        if prev_end is not None and start < prev_end:
            raise FormatError(f"{what} windows overlap")
        prev_end = end


@dataclass(frozen=True)
class VsbRecord:
    shift_frames: int
    windows: tuple[tuple[int, int], ...]
    alpha_peak: tuple[float, ...]

    def validate(self) -> None:
        if self.shift_frames == 0:
            raise FormatError("vsb shift_frames must be nonzero")
        _check_windows(list(self.windows), "vsb")
        if len(self.alpha_peak) != len(self.windows):
            raise FormatError("vsb alpha_peak must have one entry per window")
        if any(not (0.0 < p <= 1.0) for p in self.alpha_peak):
            raise FormatError("vsb alpha_peak entries must lie in (0, 1]")


@dataclass(frozen=True)
class AsbRecord:
    shift_seconds: float
    windows: tuple[tuple[int, int], ...]
    beta_peak: tuple[float, ...]

    def validate(self) -> None:
        if self.shift_seconds == 0.0:
            raise FormatError("asb shift_seconds must be nonzero")
        _check_windows(list(self.windows), "asb")
        if len(self.beta_peak) != len(self.windows):
            raise FormatError("asb beta_peak must have one entry per window")
        if any(not (0.0 < p <= 1.0) for p in self.beta_peak):
            raise FormatError("asb beta_peak entries must lie in (0, 1]")


@dataclass(frozen=True)
class AvssRecord:
    dest_start: int
    source_start: int
    length: int
    fps: float
    offset_range_s: tuple[float, float]
    candidate_scores: tuple[float, ...] | None = None

    def validate(self) -> None:
        if self.length < 1:
            raise FormatError("avss length must be >= 1")
        if self.dest_start < 0 or self.source_start < 0:
            raise FormatError("avss indices must be non-negative")
        if self.dest_start == self.source_start:
            raise FormatError("avss source must differ from destination")
        if self.fps <= 0:
            raise FormatError("avss fps must be positive")
        lo, hi = self.offset_range_s
        if not (0 < lo <= hi):
            raise FormatError("avss offset_range_s must satisfy 0 < lo <= hi")
        offset_s = abs(self.dest_start - self.source_start) / self.fps
        if not (lo - 1e-9 <= offset_s <= hi + 1e-9):
            raise FormatError(
                f"avss offset {offset_s:.4f}s outside configured range [{lo}, {hi}]s"
            )


@dataclass(frozen=True)
class Manifest:
    clip_id: str
    strategy: str
    seed: int
    tool_version: str
    vsb: VsbRecord | None = None
    asb: AsbRecord | None = None
    avss: AvssRecord | None = None
    fallback_from: tuple[str, ...] = ()

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise FormatError(f"unknown strategy {self.strategy!r}")
        populated = {
            "VSB": self.vsb is not None,
            "ASB": self.asb is not None,
            "AVSS": self.avss is not None,
        }
        for name, present in populated.items():
            expected = self.strategy == name
            if present != expected:
                raise FormatError(
                    f"strategy {self.strategy} requires exactly its own record; "
                    f"{name.lower()} record {'present' if present else 'missing'}"
                )
        for record in (self.vsb, self.asb, self.avss):
            if record is not None:
                record.validate()
        if any(s not in STRATEGIES for s in self.fallback_from):
            raise FormatError("fallback_from contains an unknown strategy")

    def to_dict(self) -> dict:
        doc: dict = {
            "clip_id": self.clip_id,
            "strategy": self.strategy,
            "seed": self.seed,
            "tool_version": self.tool_version,
        }
        if self.vsb is not None:
            doc["vsb"] = {
                "shift_frames": self.vsb.shift_frames,
                "windows": [list(w) for w in self.vsb.windows],
                "alpha_peak": list(self.vsb.alpha_peak),
            }
        if self.asb is not None:
            doc["asb"] = {
                "shift_seconds": self.asb.shift_seconds,
                "windows": [list(w) for w in self.asb.windows],
                "beta_peak": list(self.asb.beta_peak),
            }
        if self.avss is not None:
            doc["avss"] = {
                "dest_start": self.avss.dest_start,
                "source_start": self.avss.source_start,
                "length": self.avss.length,
                "fps": self.avss.fps,
                "offset_range_s": list(self.avss.offset_range_s),
            }
            if self.avss.candidate_scores is not None:
                doc["avss"]["candidate_scores"] = list(self.avss.candidate_scores)
        if self.fallback_from:
            doc["fallback_from"] = list(self.fallback_from)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Manifest":
        try:
            vsb = asb = avss = None
            if "vsb" in doc:
                d = doc["vsb"]
                vsb = VsbRecord(
                    shift_frames=int(d["shift_frames"]),
                    windows=tuple((int(s), int(e)) for s, e in d["windows"]),
                    alpha_peak=tuple(float(p) for p in d["alpha_peak"]),
                )
            if "asb" in doc:
                d = doc["asb"]
                asb = AsbRecord(
                    shift_seconds=float(d["shift_seconds"]),
                    windows=tuple((int(s), int(e)) for s, e in d["windows"]),
                    beta_peak=tuple(float(p) for p in d["beta_peak"]),
                )
            if "avss" in doc:
                d = doc["avss"]
                scores = d.get("candidate_scores")
                avss = AvssRecord(
                    dest_start=int(d["dest_start"]),
                    source_start=int(d["source_start"]),
                    length=int(d["length"]),
                    fps=float(d["fps"]),
                    offset_range_s=(float(d["offset_range_s"][0]), float(d["offset_range_s"][1])),
                    candidate_scores=None if scores is None else tuple(float(s) for s in scores),
                )
            manifest = cls(
                clip_id=str(doc["clip_id"]),
                strategy=str(doc["strategy"]),
                seed=int(doc["seed"]),
                tool_version=str(doc["tool_version"]),
                vsb=vsb,
                asb=asb,
                avss=avss,
                fallback_from=tuple(str(s) for s in doc.get("fallback_from", [])),
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise FormatError(f"manifest schema violation: {exc}") from exc
        manifest.validate()
        return manifest


def write_manifest(manifest: Manifest, path: Path | str) -> None:
    manifest.validate()
    try:
        Path(path).write_text(json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n")
    except OSError as exc:
        raise IoError(f"could not write manifest to {path}: {exc}") from exc


def read_manifest(path: Path | str) -> Manifest:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"could not read manifest from {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError("manifest must be a JSON object")
    return Manifest.from_dict(doc)
