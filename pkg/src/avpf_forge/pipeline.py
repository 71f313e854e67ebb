"""Batch generation: per-clip seeding, strategy selection, and reporting.

Every clip gets its own seed derived from the master seed and the clip
id, so outputs do not depend on processing order or worker count. One
strategy is applied per sample; when a strategy fails for structural
reasons (degenerate landmarks, no feasible splice) the remaining
strategies are tried in descending weight order and the fallback chain
is recorded in the manifest.
"""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

import avpf_forge
from avpf_forge.audio import audio_self_blend
from avpf_forge.config import PipelineConfig, config_hash
from avpf_forge.errors import (
    ConfigError,
    DegenerateHullError,
    InfeasibleError,
    RangeError,
    SkippedClipError,
    ValidationError,
)
from avpf_forge.manifest import Manifest, write_manifest
from avpf_forge.masks import inset_rectangle_track
from avpf_forge.media import Clip, load_clip, load_landmarks, save_clip
from avpf_forge.splice import plan_splice, splice
from avpf_forge.visual import visual_self_blend

STRATEGY_ORDER = ("VSB", "ASB", "AVSS")

# Strategy failures that mean "try the next strategy", not "abort the clip".
_FALLBACK_ERRORS = (InfeasibleError, DegenerateHullError, RangeError)


def derive_seed(master_seed: int, clip_id: str) -> int:
    """Stable 64-bit per-clip seed: BLAKE2b of the clip id keyed by the
    master seed. Identical across platforms and processing orders."""
    key = (master_seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    digest = hashlib.blake2b(clip_id.encode("utf-8"), key=key, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def choose_strategy(weights: dict[str, float], rng: np.random.Generator) -> str:
    """Weighted draw over the enabled strategies, in fixed enum order."""
    names = [s for s in STRATEGY_ORDER if weights.get(s.lower(), 0.0) > 0.0]
    if not names:
        raise ConfigError("no strategy has positive weight")
    values = np.array([weights[s.lower()] for s in names])
    cumulative = np.cumsum(values / values.sum())
    draw = rng.random()
    return names[int(np.searchsorted(cumulative, draw, side="right").clip(0, len(names) - 1))]


def fallback_order(weights: dict[str, float], first: str) -> list[str]:
    """Remaining enabled strategies by descending weight, then enum order."""
    rest = [s for s in STRATEGY_ORDER if s != first and weights.get(s.lower(), 0.0) > 0.0]
    return sorted(rest, key=lambda s: (-weights[s.lower()], STRATEGY_ORDER.index(s)))


@dataclass
class ClipResult:
    clip_id: str
    status: str  # ok | skipped | error
    strategy: str | None = None
    out_dir: Path | None = None
    error: str | None = None


def _landmarks_for(clip: Clip, clip_dir: Path, inset_frac: float):
    sidecar = clip_dir / "landmarks.json"
    if sidecar.exists():
        track = load_landmarks(sidecar)
        if track.n_frames < clip.n_frames:
            raise ValidationError(
                f"landmarks cover {track.n_frames} frames but clip has {clip.n_frames}"
            )
        track.check_bounds(clip.width, clip.height)
        return track
    return inset_rectangle_track(clip.width, clip.height, clip.n_frames, inset_frac)


def _apply_strategy(
    strategy: str, clip: Clip, clip_dir: Path, cfg: PipelineConfig, rng: np.random.Generator
):
    w = cfg.windows
    if strategy == "VSB":
        landmarks = _landmarks_for(clip, clip_dir, cfg.mask.fallback_inset_frac)
        out, record = visual_self_blend(
            clip,
            landmarks,
            cfg.vsb,
            w.window_count,
            w.window_len_s,
            w.ramp_fraction,
            w.peak,
            cfg.mask,
            rng,
        )
        return out, {"vsb": record}
    if strategy == "ASB":
        sps = cfg.asb.stft.steps_per_second
        if abs(sps / clip.fps - round(sps / clip.fps)) > 1e-9:
            raise ConfigError(
                f"Mel step rate {sps:.1f}/s is not an integer multiple of clip fps {clip.fps}"
            )
        out, record = audio_self_blend(
            clip, cfg.asb, w.window_count, w.window_len_s, w.ramp_fraction, w.peak, rng
        )
        return out, {"asb": record}
    if strategy == "AVSS":
        last_error: Exception | None = None
        for _ in range(cfg.avss.max_retries + 1):
            try:
                spec = plan_splice(clip, cfg.avss, rng)
                out, record = splice(clip, spec, cfg.avss.crossfade_ms)
                return out, {"avss": record}
            except InfeasibleError as exc:
                last_error = exc
        raise last_error
    raise ConfigError(f"unknown strategy {strategy!r}")


def generate_one(clip_dir: Path | str, cfg: PipelineConfig) -> ClipResult:
    """Generate one perturbed sample for a clip and write it plus its manifest.

    Raises SkippedClipError when every enabled strategy fails for
    structural reasons; other exceptions propagate.
    """
    clip_dir = Path(clip_dir)
    clip = load_clip(clip_dir)
    seed = derive_seed(cfg.master_seed, clip.id)
    rng = np.random.default_rng(seed)

    first = choose_strategy(cfg.strategies, rng)
    order = [first] + fallback_order(cfg.strategies, first)
    attempted: list[str] = []
    for strategy in order:
        try:
            out_clip, records = _apply_strategy(strategy, clip, clip_dir, cfg, rng)
        except _FALLBACK_ERRORS:
            attempted.append(strategy)
            continue
        out_dir = Path(cfg.output_root) / clip.id
        save_clip(out_clip, out_dir)
        manifest = Manifest(
            clip_id=clip.id,
            strategy=strategy,
            seed=seed,
            tool_version=avpf_forge.__version__,
            fallback_from=tuple(attempted),
            **records,
        )
        write_manifest(manifest, out_dir / "manifest.json")
        return ClipResult(clip_id=clip.id, status="ok", strategy=strategy, out_dir=out_dir)
    raise SkippedClipError(
        f"all strategies failed for clip {clip.id!r} (tried {', '.join(attempted)})"
    )


def find_clip_dirs(input_root: Path | str) -> list[Path]:
    """Clip directories under a root, in stable name order."""
    root = Path(input_root)
    if not root.is_dir():
        raise ConfigError(f"input_root {root} is not a directory")
    return sorted(d for d in root.iterdir() if d.is_dir() and (d / "meta.json").exists())


def generate_batch(cfg: PipelineConfig) -> dict:
    """Process every clip under input_root with clip-level parallelism.

    The returned report lists per-clip status in clip order plus strategy
    counts; outputs are independent of worker count because each clip's
    randomness comes only from its derived seed.
    """
    cfg.validate()
    clip_dirs = find_clip_dirs(cfg.input_root)
    if not clip_dirs:
        raise ConfigError(f"no clips found under {cfg.input_root}")
    Path(cfg.output_root).mkdir(parents=True, exist_ok=True)

    started = time.perf_counter()

    def work(clip_dir: Path) -> ClipResult:
        try:
            return generate_one(clip_dir, cfg)
        except SkippedClipError as exc:
            return ClipResult(clip_id=clip_dir.name, status="skipped", error=str(exc))
        except Exception as exc:  # recorded per clip; batch keeps going
            return ClipResult(clip_id=clip_dir.name, status="error", error=str(exc))

    if cfg.workers == 1:
        results = [work(d) for d in clip_dirs]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(work, clip_dirs))
    results.sort(key=lambda r: r.clip_id)

    counts: dict[str, int] = {}
    for r in results:
        if r.strategy:
            counts[r.strategy] = counts.get(r.strategy, 0) + 1
    return {
        "tool_version": avpf_forge.__version__,
        "config_hash": config_hash(cfg),
        "master_seed": cfg.master_seed,
        "clips_total": len(results),
        "clips_ok": sum(r.status == "ok" for r in results),
        "clips_skipped": sum(r.status == "skipped" for r in results),
        "clips_error": sum(r.status == "error" for r in results),
        "strategy_counts": dict(sorted(counts.items())),
        "clips": [
            {
                "clip_id": r.clip_id,
                "status": r.status,
                "strategy": r.strategy,
                "error": r.error,
            }
            for r in results
        ],
        "wall_time_s": round(time.perf_counter() - started, 3),
    }
