"""Command-line interface.

    avpf-forge generate --config cfg.toml [--seed N] [--workers K]
    avpf-forge ingest --decoder-cmd TEMPLATE --fps FPS IN OUT
    avpf-forge diagnose --vis FEATS --aud FEATS --out DIR
    avpf-forge validate CLIP_DIR

The AVPF_SEED environment variable overrides --seed, which in turn
overrides the master_seed in the config file.
"""

from __future__ import annotations

import dataclasses
import json
import os
import shlex
import subprocess
import sys
from pathlib import Path

import click

import avpf_forge
from avpf_forge.config import load_config
from avpf_forge.errors import AvpfError, ConfigError, FormatError
from avpf_forge.manifest import read_manifest
from avpf_forge.media import load_clip, load_landmarks
from avpf_forge.pipeline import generate_batch
from avpf_forge.similarity import avsd, lavsm, load_feature_track, render_diagnostics


@click.group()
@click.version_option(version=avpf_forge.__version__)
def main() -> None:
    """Generate audio-visual pseudo-fake samples and diagnostics."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--seed", type=int, default=None, help="Override the config master_seed.")
@click.option("--workers", type=int, default=None, help="Override the config worker count.")
@click.option(
    "--report",
    "report_path",
    type=click.Path(path_type=Path),
    default=None,
    help="Where to write the run report (default: <output_root>/run_report.json).",
)
def generate(config_path: Path, seed: int | None, workers: int | None, report_path: Path | None):
    """Run batch generation over every clip under the configured input root."""
    try:
        cfg = load_config(config_path)
        env_seed = os.environ.get("AVPF_SEED")
        if env_seed is not None:
            seed = int(env_seed)
        if seed is not None:
            cfg = dataclasses.replace(cfg, master_seed=seed)
        if workers is not None:
            cfg = dataclasses.replace(cfg, workers=workers)
        report = generate_batch(cfg)
    except (AvpfError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc
    if report_path is None:
        report_path = Path(cfg.output_root) / "run_report.json"
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    click.echo(
        f"{report['clips_ok']}/{report['clips_total']} clips ok "
        f"({report['clips_skipped']} skipped, {report['clips_error']} errors) "
        f"in {report['wall_time_s']}s; report: {report_path}"
    )
    if report["clips_total"] == 0:
        sys.exit(1)


@main.command()
@click.option(
    "--decoder-cmd",
    required=True,
    help=(
        "Decoder command template; placeholders {input}, {output}, "
        "{frames_dir}, {audio_path}, {fps} are substituted per token."
    ),
)
@click.option("--fps", type=float, required=True, help="Frame rate to record in meta.json.")
@click.option("--id", "clip_id", default=None, help="Clip id (default: input stem).")
@click.argument("input_path", type=click.Path(exists=True, path_type=Path))
@click.argument("output_dir", type=click.Path(path_type=Path))
def ingest(decoder_cmd: str, fps: float, clip_id: str | None, input_path: Path, output_dir: Path):
    """Convert a container file into the canonical clip layout.

    The decoder command is user-supplied (e.g. an ffmpeg invocation) and
    must produce frames/%06d.png and audio.wav under the output
    directory; this command prepares the directories, runs the decoder,
    writes meta.json, and validates the result.
    """
    clip_id = clip_id or input_path.stem
    frames_dir = output_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    substitutions = {
        "{input}": str(input_path),
        "{output}": str(output_dir),
        "{frames_dir}": str(frames_dir),
        "{audio_path}": str(output_dir / "audio.wav"),
        "{fps}": str(fps),
    }
    argv = []
    for token in shlex.split(decoder_cmd):
        for placeholder, value in substitutions.items():
            token = token.replace(placeholder, value)
        argv.append(token)
    result = subprocess.run(argv, capture_output=True, text=True)
    if result.returncode != 0:
        raise click.ClickException(
            f"decoder exited with {result.returncode}: {result.stderr.strip()[-500:]}"
        )
    meta_path = output_dir / "meta.json"
    if not meta_path.exists():
        meta_path.write_text(json.dumps({"fps": fps, "id": clip_id}, sort_keys=True, indent=2) + "\n")
    try:
        clip = load_clip(output_dir)
    except AvpfError as exc:
        raise click.ClickException(f"decoder output is not a valid clip: {exc}") from exc
    click.echo(
        f"ingested {clip.id}: {clip.n_frames} frames @ {clip.fps} fps, "
        f"{clip.audio.duration_s:.2f}s audio"
    )


@main.command()
@click.option("--vis", "vis_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--aud", "aud_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--vis-rate", type=float, default=None, help="Step rate for bare .npy input.")
@click.option("--aud-rate", type=float, default=None, help="Step rate for bare .npy input.")
def diagnose(vis_path: Path, aud_path: Path, out_dir: Path, vis_rate, aud_rate):
    """Compute the similarity matrix and its diagonal; write CSVs and plots."""
    try:
        vis = load_feature_track(vis_path, "visual", vis_rate)
        aud = load_feature_track(aud_path, "audio", aud_rate)
        matrix = lavsm(vis, aud)
        paths = render_diagnostics(matrix, avsd(matrix), out_dir)
    except AvpfError as exc:
        raise click.ClickException(str(exc)) from exc
    for name, path in paths.items():
        click.echo(f"{name}: {path}")


@main.command()
@click.argument("clip_dir", type=click.Path(exists=True, path_type=Path))
def validate(clip_dir: Path):
    """Check clip-layout invariants; exit 0 when everything holds."""
    failures = []
    clip = None
    try:
        clip = load_clip(clip_dir)
        click.echo(
            f"clip ok: id={clip.id!r} {clip.n_frames} frames "
            f"{clip.width}x{clip.height} @ {clip.fps} fps, "
            f"audio {clip.audio.duration_s:.3f}s @ {clip.audio.sample_rate} Hz"
        )
    except AvpfError as exc:
        failures.append(f"clip: {exc}")

    landmarks_path = clip_dir / "landmarks.json"
    if landmarks_path.exists():
        try:
            track = load_landmarks(landmarks_path)
            if clip is not None:
                if track.n_frames != clip.n_frames:
                    raise FormatError(
                        f"landmarks cover {track.n_frames} frames, clip has {clip.n_frames}"
                    )
                track.check_bounds(clip.width, clip.height)
            click.echo(f"landmarks ok: {track.points_per_frame} points per frame")
        except AvpfError as exc:
            failures.append(f"landmarks: {exc}")

    manifest_path = clip_dir / "manifest.json"
    if manifest_path.exists():
        try:
            manifest = read_manifest(manifest_path)
            click.echo(f"manifest ok: strategy={manifest.strategy}")
        except AvpfError as exc:
            failures.append(f"manifest: {exc}")

    for failure in failures:
        click.echo(f"INVALID {failure}", err=True)
    sys.exit(1 if failures else 0)


if __name__ == "__main__":
    main()
