"""Cross-modal similarity diagnostics.

Given per-step feature tracks for the visual and audio streams, the
local audio-visual similarity matrix (LAVSM) holds the cosine similarity
between every visual step and every audio step; its main diagonal (AVSD)
measures direct temporal alignment. Aligned content shows a bright
diagonal; temporally shifted content lights up an off-diagonal band.

Features come from outside (any per-step embedding); this module only
compares them and renders the results as CSV files and figures.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from avpf_forge.errors import FormatError, IoError, ValidationError

MODALITIES = ("visual", "audio")


@dataclass(frozen=True)
class FeatureTrack:
    """T x D feature matrix sampled at ``step_rate`` steps per second."""

    matrix: np.ndarray
    modality: str
    step_rate: float

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=np.float64).copy()
        if matrix.ndim != 2 or matrix.shape[1] < 1:
            raise ValidationError(f"feature matrix must be (T, D) with D >= 1, got {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValidationError("feature matrix contains NaN or Inf")
        if self.modality not in MODALITIES:
            raise ValidationError(f"modality must be one of {MODALITIES}")
        if self.step_rate <= 0:
            raise ValidationError("step_rate must be positive")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def n_steps(self) -> int:
        return self.matrix.shape[0]

    @property
    def zero_rows(self) -> np.ndarray:
        """Indices of rows with zero norm (flagged, compared as zeros)."""
        return np.nonzero(np.linalg.norm(self.matrix, axis=1) == 0.0)[0]


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    out = np.zeros_like(matrix)
    nonzero = norms[:, 0] > 0.0
    out[nonzero] = matrix[nonzero] / norms[nonzero]
    return out


def _resample_to_common(vis: FeatureTrack, aud: FeatureTrack) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-step resampling onto the slower track's rate, truncated to
    the shorter duration."""
    rate = min(vis.step_rate, aud.step_rate)
    duration = min(vis.n_steps / vis.step_rate, aud.n_steps / aud.step_rate)
    n = int(np.floor(duration * rate + 1e-9))
    if n == 0:
        raise ValidationError("tracks share no overlapping steps after resampling")
    t = np.arange(n)

    def pick(track: FeatureTrack) -> np.ndarray:
        idx = np.clip(np.rint(t * track.step_rate / rate).astype(int), 0, track.n_steps - 1)
        return track.matrix[idx]

    return pick(vis), pick(aud)


def lavsm(vis: FeatureTrack, aud: FeatureTrack) -> np.ndarray:
    """T x T matrix of cosine similarities: entry (t, u) compares visual
    step t against audio step u. Zero-norm rows compare as 0."""
    v, a = _resample_to_common(vis, aud)
    matrix = _unit_rows(v) @ _unit_rows(a).T
    return np.clip(matrix, -1.0, 1.0)


def avsd(matrix: np.ndarray) -> np.ndarray:
    """Main diagonal of a square similarity matrix, in step order."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {matrix.shape}")
    return np.diagonal(matrix).copy()


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{x:.9g}" if isinstance(x, float) else x for x in row])


def render_diagnostics(
    matrix: np.ndarray, vector: np.ndarray, out_dir: Path | str
) -> dict[str, Path]:
    """Write lavsm.csv / avsd.csv plus a heatmap and a line plot.

    CSV layout: lavsm.csv has a header ``t,a0,...,a{T-1}`` and one row
    per visual step; avsd.csv has a header ``t,cosine`` and one row per
    step. Values are written with '.' as the decimal separator regardless
    of locale.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    vector = np.asarray(vector, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValidationError("matrix must be 2-D")
    if vector.ndim != 1:
        raise ValidationError("vector must be 1-D")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "lavsm_csv": out_dir / "lavsm.csv",
            "avsd_csv": out_dir / "avsd.csv",
            "lavsm_png": out_dir / "lavsm.png",
            "avsd_png": out_dir / "avsd.png",
        }
        _write_csv(
            paths["lavsm_csv"],
            ["t"] + [f"a{u}" for u in range(matrix.shape[1])],
            ([t] + [float(x) for x in matrix[t]] for t in range(matrix.shape[0])),
        )
        _write_csv(
            paths["avsd_csv"],
            ["t", "cosine"],
            ([t, float(vector[t])] for t in range(vector.shape[0])),
        )

        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 5))
        im = ax.imshow(matrix, aspect="auto", cmap="viridis", vmin=-1.0, vmax=1.0)
        ax.set_xlabel("audio step")
        ax.set_ylabel("visual step")
        ax.set_title("local audio-visual similarity")
        fig.colorbar(im, ax=ax, shrink=0.85)
        fig.tight_layout()
        fig.savefig(paths["lavsm_png"], dpi=150)
        plt.close(fig)

        fig, ax = plt.subplots(figsize=(7, 3))
        ax.plot(np.arange(vector.size), vector, lw=1.2)
        ax.set_xlabel("step")
        ax.set_ylabel("cosine")
        ax.set_ylim(-1.05, 1.05)
        ax.set_title("frame-wise audio-visual similarity")
        ax.grid(alpha=0.3)
        fig.tight_layout()
        fig.savefig(paths["avsd_png"], dpi=150)
        plt.close(fig)
    except OSError as exc:
        raise IoError(f"could not write diagnostics to {out_dir}: {exc}") from exc
    return paths


def load_feature_track(
    path: Path | str, modality: str, step_rate: float | None = None
) -> FeatureTrack:
    """Read a feature track from .npz, .npy, or .csv.

    ``.npz`` files carry arrays ``features`` (T x D) and ``rate``; bare
    ``.npy`` matrices need an explicit ``step_rate``. CSV files start
    with a one-line header ``steps,dim,rate`` followed by one row of
    ``dim`` values per step.
    """
    path = Path(path)
    suffix = path.suffix.lower()
    try:
        if suffix == ".npz":
            data = np.load(path)
            if "features" not in data or "rate" not in data:
                raise FormatError(f"{path} must contain 'features' and 'rate' arrays")
            return FeatureTrack(
                matrix=data["features"], modality=modality, step_rate=float(data["rate"])
            )
        if suffix == ".npy":
            if step_rate is None:
                raise FormatError(f"{path}: .npy input needs an explicit step rate")
            return FeatureTrack(matrix=np.load(path), modality=modality, step_rate=step_rate)
        if suffix == ".csv":
            with path.open() as fh:
                reader = csv.reader(fh)
                header = next(reader, None)
                if header is None or len(header) != 3:
                    raise FormatError(f"{path}: expected header 'steps,dim,rate'")
                steps, dim, rate = int(header[0]), int(header[1]), float(header[2])
                rows = [[float(x) for x in row] for row in reader if row]
            matrix = np.asarray(rows, dtype=np.float64)
            if matrix.shape != (steps, dim):
                raise FormatError(
                    f"{path}: header declares {steps}x{dim}, found {matrix.shape}"
                )
            return FeatureTrack(matrix=matrix, modality=modality, step_rate=rate)
    except (OSError, ValueError) as exc:
        raise FormatError(f"could not read feature track from {path}: {exc}") from exc
    raise FormatError(f"unsupported feature track format: {path.suffix}")


def save_feature_track(track: FeatureTrack, path: Path | str) -> None:
    """Write a track in the format implied by the file suffix."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".npz":
        np.savez(path, features=track.matrix, rate=track.step_rate)
    elif suffix == ".npy":
        np.save(path, track.matrix)
    elif suffix == ".csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([track.n_steps, track.matrix.shape[1], f"{track.step_rate:.9g}"])
            for row in track.matrix:
                writer.writerow([f"{x:.9g}" for x in row])
    else:
        raise FormatError(f"unsupported feature track format: {path.suffix}")
