"""Pipeline configuration: parsing, validation, and canonical hashing.

Config files are TOML or JSON. The canonical TOML layout:

    input_root = "clips/"
    output_root = "out/"
    master_seed = 1234
    workers = 2

    [strategies]
    vsb = 1.0
    asb = 1.0
    avss = 1.0

    [windows]
    window_count = 1
    window_len_s = [0.5, 1.5]
    ramp_fraction = 0.2
    peak = 1.0

    [mask]
    elastic_grid = 4
    elastic_max_disp_frac = 0.05
    mask_sigma_px = 3.0
    fallback_inset_frac = 0.15

    [vsb]
    shift_frames = 2
    boundary_policy = "clamp"

    [asb]
    shift_s_range = [0.02, 0.05]
    mel_bins = 80
    gl_iterations = 32

    [asb.stft]
    n_fft = 512
    win = 400
    hop = 160

    [avss]
    len_frames = 1
    range_s = [0.5, 1.0]
    crossfade_ms = 2.0
    max_retries = 8

Every key is optional except input_root and output_root; omitted keys
take the defaults above. Unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from avpf_forge.audio import AsbParams, StftParams
from avpf_forge.errors import ConfigError, ValidationError
from avpf_forge.masks import MaskParams
from avpf_forge.splice import AvssParams
from avpf_forge.visual import VsbParams

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib


@dataclass(frozen=True)
class WindowParams:
    """Temporal window configuration shared by both blend strategies."""

    window_count: int = 1
    window_len_s: tuple[float, float] = (0.5, 1.5)
    ramp_fraction: float = 0.2
    peak: float = 1.0

    def validate(self) -> None:
        if self.window_count < 1:
            raise ValidationError("window_count must be >= 1 (a zero-window blend is a no-op)")
        lo, hi = self.window_len_s
        if not (0 < lo <= hi):
            raise ValidationError("window_len_s must satisfy 0 < lo <= hi")
        if not (0.0 <= self.ramp_fraction <= 0.5):
            raise ValidationError("ramp_fraction must lie in [0, 0.5]")
        if not (0.0 < self.peak <= 1.0):
            raise ValidationError("peak must lie in (0, 1]")


@dataclass(frozen=True)
class PipelineConfig:
    input_root: Path
    output_root: Path
    master_seed: int = 0
    workers: int = 1
    strategies: dict[str, float] = field(
        default_factory=lambda: {"vsb": 1.0, "asb": 1.0, "avss": 1.0}
    )
    windows: WindowParams = field(default_factory=WindowParams)
    mask: MaskParams = field(default_factory=MaskParams)
    vsb: VsbParams = field(default_factory=VsbParams)
    asb: AsbParams = field(default_factory=AsbParams)
    avss: AvssParams = field(default_factory=AvssParams)

    def validate(self) -> None:
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if set(self.strategies) - {"vsb", "asb", "avss"}:
            raise ConfigError(f"unknown strategy keys: {sorted(set(self.strategies) - {'vsb', 'asb', 'avss'})}")
        if any(w < 0 for w in self.strategies.values()):
            raise ConfigError("strategy weights must be non-negative")
        if sum(self.strategies.values()) <= 0:
            raise ConfigError("strategy weights must sum to a positive value")
        try:
            self.windows.validate()
            self.mask.validate()
            self.vsb.validate()
            self.asb.validate()
            self.avss.validate()
        except ValidationError as exc:
            raise ConfigError(str(exc)) from exc
        if self.asb.stft.sample_rate % self.asb.stft.hop != 0:
            raise ConfigError(
                "stft hop must divide the sample rate so Mel steps land on a whole-number rate"
            )

    def to_canonical_dict(self) -> dict:
        return {
            "input_root": str(self.input_root),
            "output_root": str(self.output_root),
            "master_seed": self.master_seed,
            "workers": self.workers,
            "strategies": dict(sorted(self.strategies.items())),
            "windows": {
                "window_count": self.windows.window_count,
                "window_len_s": list(self.windows.window_len_s),
                "ramp_fraction": self.windows.ramp_fraction,
                "peak": self.windows.peak,
            },
            "mask": {
                "elastic_grid": self.mask.elastic_grid,
                "elastic_max_disp_frac": self.mask.elastic_max_disp_frac,
                "mask_sigma_px": self.mask.mask_sigma_px,
                "sigma_ref_px": self.mask.sigma_ref_px,
                "fallback_inset_frac": self.mask.fallback_inset_frac,
                "per_frame_field": self.mask.per_frame_field,
            },
            "vsb": {
                "shift_frames": self.vsb.shift_frames,
                "shift_range": None if self.vsb.shift_range is None else list(self.vsb.shift_range),
                "boundary_policy": self.vsb.boundary_policy,
            },
            "asb": {
                "shift_s_range": list(self.asb.shift_s_range),
                "mel_bins": self.asb.mel_bins,
                "gl_iterations": self.asb.gl_iterations,
                "stft": {
                    "n_fft": self.asb.stft.n_fft,
                    "hop": self.asb.stft.hop,
                    "win": self.asb.stft.win,
                    "window_fn": self.asb.stft.window_fn,
                    "sample_rate": self.asb.stft.sample_rate,
                },
            },
            "avss": {
                "len_frames": self.avss.len_frames,
                "range_s": list(self.avss.range_s),
                "crossfade_ms": self.avss.crossfade_ms,
                "max_retries": self.avss.max_retries,
            },
        }


def config_hash(config: PipelineConfig) -> str:
    """Stable hash of the effective configuration, for provenance."""
    canonical = json.dumps(config.to_canonical_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _take(table: dict, key: str, default):
    return table.pop(key) if key in table else default


def _pair(value, what: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{what} must be a two-element array")
    return float(value[0]), float(value[1])


def _reject_unknown(table: dict, where: str) -> None:
    if table:
        raise ConfigError(f"unknown keys in {where}: {sorted(table)}")


def parse_config(doc: dict, base_dir: Path | None = None) -> PipelineConfig:
    """Build a validated PipelineConfig from a parsed TOML/JSON document.

    Relative input/output roots resolve against ``base_dir`` (the config
    file's directory) when given.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a table/object")
    doc = {k: (dict(v) if isinstance(v, dict) else v) for k, v in doc.items()}

    try:
        input_root = Path(str(doc.pop("input_root")))
        output_root = Path(str(doc.pop("output_root")))
    except KeyError as exc:
        raise ConfigError(f"config is missing required key {exc}") from exc
    if base_dir is not None:
        if not input_root.is_absolute():
            input_root = base_dir / input_root
        if not output_root.is_absolute():
            output_root = base_dir / output_root

    master_seed = int(_take(doc, "master_seed", 0))
    workers = int(_take(doc, "workers", 1))

    strategies_tbl = _take(doc, "strategies", {})
    strategies = {"vsb": 1.0, "asb": 1.0, "avss": 1.0}
    for key, value in dict(strategies_tbl).items():
        if key not in strategies:
            raise ConfigError(f"unknown strategy {key!r} in [strategies]")
        strategies[key] = float(value)

    w = _take(doc, "windows", {})
    windows = WindowParams(
        window_count=int(_take(w, "window_count", 1)),
        window_len_s=_pair(_take(w, "window_len_s", [0.5, 1.5]), "windows.window_len_s"),
        ramp_fraction=float(_take(w, "ramp_fraction", 0.2)),
        peak=float(_take(w, "peak", 1.0)),
    )
    _reject_unknown(w, "[windows]")

    m = _take(doc, "mask", {})
    mask = MaskParams(
        elastic_grid=int(_take(m, "elastic_grid", 4)),
        elastic_max_disp_frac=float(_take(m, "elastic_max_disp_frac", 0.05)),
        mask_sigma_px=float(_take(m, "mask_sigma_px", 3.0)),
        sigma_ref_px=int(_take(m, "sigma_ref_px", 96)),
        fallback_inset_frac=float(_take(m, "fallback_inset_frac", 0.15)),
        per_frame_field=bool(_take(m, "per_frame_field", False)),
    )
    _reject_unknown(m, "[mask]")

    v = _take(doc, "vsb", {})
    shift_range = _take(v, "shift_range", None)
    vsb = VsbParams(
        shift_frames=int(_take(v, "shift_frames", 2)),
        shift_range=None if shift_range is None else (int(shift_range[0]), int(shift_range[1])),
        boundary_policy=str(_take(v, "boundary_policy", "clamp")),
    )
    _reject_unknown(v, "[vsb]")

    a = _take(doc, "asb", {})
    stft_tbl = _take(a, "stft", {})
    try:
        stft_params = StftParams(
            n_fft=int(_take(stft_tbl, "n_fft", 512)),
            hop=int(_take(stft_tbl, "hop", 160)),
            win=int(_take(stft_tbl, "win", 400)),
            window_fn=str(_take(stft_tbl, "window_fn", "hann")),
            sample_rate=int(_take(stft_tbl, "sample_rate", 16000)),
        )
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    _reject_unknown(stft_tbl, "[asb.stft]")
    asb = AsbParams(
        shift_s_range=_pair(_take(a, "shift_s_range", [0.02, 0.05]), "asb.shift_s_range"),
        stft=stft_params,
        mel_bins=int(_take(a, "mel_bins", 80)),
        gl_iterations=int(_take(a, "gl_iterations", 32)),
    )
    _reject_unknown(a, "[asb]")

    s = _take(doc, "avss", {})
    avss = AvssParams(
        len_frames=int(_take(s, "len_frames", 1)),
        range_s=_pair(_take(s, "range_s", [0.5, 1.0]), "avss.range_s"),
        crossfade_ms=float(_take(s, "crossfade_ms", 2.0)),
        max_retries=int(_take(s, "max_retries", 8)),
    )
    _reject_unknown(s, "[avss]")
    _reject_unknown(doc, "config root")

    try:
        config = PipelineConfig(
            input_root=input_root,
            output_root=output_root,
            master_seed=master_seed,
            workers=workers,
            strategies=strategies,
            windows=windows,
            mask=mask,
            vsb=vsb,
            asb=asb,
            avss=avss,
        )
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    config.validate()
    return config


def load_config(path: Path | str) -> PipelineConfig:
    """Parse and validate a TOML or JSON config file."""
    path = Path(path)
    try:
        if path.suffix.lower() == ".json":
            doc = json.loads(path.read_text())
        else:
            with path.open("rb") as fh:
                doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"could not read config {path}: {exc}") from exc
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"could not parse config {path}: {exc}") from exc
    return parse_config(doc, base_dir=path.parent)
