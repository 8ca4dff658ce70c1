"""File formats and dataset manifests.

Spectra travel as UTF-8 CSV with a ``wavenumber`` first column and values
formatted to 17 significant digits, so write-then-read is bit-exact.  A
dataset directory holds four batch files per split (noisy / clean / pure /
fluor) plus a JSON manifest tying every example to its seed, targets and
dark-statistics reference.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from . import classical
from .core import (
    ExternalToolError,
    Spectrum,
    SpectrumGrid,
    ValidationError,
)
from .noisemodel import DarkStats
from .synth import (
    LabeledExample,
    PEAK_AMPLITUDE_RANGE,
    PEAK_COUNT_RANGE,
    PEAK_FWHM_RANGE,
    POLY_COEFF_RANGE,
    POLY_ORDER_RANGE,
    TargetRanges,
)

SCHEMA_VERSION = 1
GRID_READ_TOL = 1e-9  # relative to spacing; 17-digit round trips are exact


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _parse_float(token: str, path, lineno: int, what: str) -> float:
    try:
        return float(token)
    except ValueError as e:
        raise ValidationError(f"{path}: line {lineno}: bad {what} value {token!r}") from e


def _grid_from_wavenumbers(wn: np.ndarray, path) -> SpectrumGrid:
    if wn.size < 2:
        raise ValidationError(f"{path}: need at least 2 grid points")
    if np.any(np.diff(wn) <= 0):
        raise ValidationError(f"{path}: wavenumber column must be strictly increasing")
    grid = SpectrumGrid(float(wn[0]), float(wn[-1]), int(wn.size))
    if np.abs(wn - grid.wavenumbers).max() > GRID_READ_TOL * grid.spacing:
        raise ValidationError(f"{path}: wavenumber column is not uniformly spaced")
    return grid


# ---------------------------------------------------------------------------
# Spectrum and batch CSV


def write_spectrum(path, spectrum: Spectrum) -> None:
    path = Path(path)
    wn = spectrum.grid.wavenumbers
    lines = ["wavenumber,intensity"]
    lines += [f"{_fmt(w)},{_fmt(v)}" for w, v in zip(wn, spectrum.values)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_spectrum(path) -> Spectrum:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "wavenumber,intensity":
        raise ValidationError(f"{path}: expected header 'wavenumber,intensity'")
    wn, values = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ValidationError(f"{path}: line {lineno}: expected 2 columns, got {len(parts)}")
        wn.append(_parse_float(parts[0], path, lineno, "wavenumber"))
        values.append(_parse_float(parts[1], path, lineno, "intensity"))
    grid = _grid_from_wavenumbers(np.asarray(wn), path)
    return Spectrum(grid, np.asarray(values))


def write_batch(path, grid: SpectrumGrid, values: np.ndarray) -> None:
    """Write spectra (rows of ``values``) as columns sharing the grid."""
    path = Path(path)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != grid.n_points:
        raise ValidationError(f"batch shape {values.shape} does not match grid ({grid.n_points})")
    if values.shape[0] < 1:
        raise ValidationError("a batch needs at least one spectrum")
    header = "wavenumber," + ",".join(f"spec_{j}" for j in range(values.shape[0]))
    wn = grid.wavenumbers
    rows = [header]
    for i in range(grid.n_points):
        rows.append(",".join([_fmt(wn[i])] + [_fmt(values[j, i]) for j in range(values.shape[0])]))
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_batch(path) -> tuple[SpectrumGrid, np.ndarray]:
    """Read a batch file; returns the grid and spectra as rows."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValidationError(f"{path}: empty batch file")
    header = lines[0].split(",")
    if header[0] != "wavenumber" or len(header) < 2:
        raise ValidationError(f"{path}: expected header 'wavenumber,spec_0,...'")
    n_spec = len(header) - 1
    wn, columns = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != n_spec + 1:
            raise ValidationError(
                f"{path}: line {lineno}: expected {n_spec + 1} columns, got {len(parts)}"
            )
        wn.append(_parse_float(parts[0], path, lineno, "wavenumber"))
        columns.append([_parse_float(p, path, lineno, "intensity") for p in parts[1:]])
    grid = _grid_from_wavenumbers(np.asarray(wn), path)
    return grid, np.asarray(columns).T.copy()


# ---------------------------------------------------------------------------
# Dark statistics JSON


def _grid_to_json(grid: SpectrumGrid) -> dict:
    return {"start_wn": grid.start_wn, "end_wn": grid.end_wn, "n_points": grid.n_points}


def _grid_from_json(obj: dict, where: str) -> SpectrumGrid:
    try:
        return SpectrumGrid(float(obj["start_wn"]), float(obj["end_wn"]), int(obj["n_points"]))
    except (KeyError, TypeError) as e:
        raise ValidationError(f"{where}: malformed grid object: {e}") from e


def write_dark_stats(path, stats: DarkStats) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "dark_stats",
        "grid": _grid_to_json(stats.grid),
        "integration_time": stats.integration_time,
        "n_frames": stats.n_frames,
        "mean": [float(v) for v in stats.mean],
        "variance": [float(v) for v in stats.variance],
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def read_dark_stats(path) -> DarkStats:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: invalid JSON: {e}") from e
    if doc.get("kind") != "dark_stats":
        raise ValidationError(f"{path}: not a dark_stats file")
    grid = _grid_from_json(doc.get("grid", {}), str(path))
    try:
        return DarkStats(
            grid=grid,
            mean=np.asarray(doc["mean"], dtype=np.float64),
            variance=np.asarray(doc["variance"], dtype=np.float64),
            integration_time=float(doc["integration_time"]),
            n_frames=int(doc["n_frames"]),
        )
    except KeyError as e:
        raise ValidationError(f"{path}: missing field {e}") from e


# ---------------------------------------------------------------------------
# Dataset manifest

SPLIT_NAMES = ("train", "val", "test")
# Stream-index namespaces keep splits, skin sets and evaluation sweeps on
# non-overlapping substreams of the same root seed.
STREAM_BASES = {"train": 0, "val": 1 << 32, "test": 2 << 32}
SKIN_STREAM_OFFSET = 8 << 32
SNRI_STREAM_BASE = 16 << 32

MANIFEST_NAME = "manifest.json"


def default_params(target_ranges: TargetRanges, mode: str, kind: str) -> dict:
    return {
        "kind": kind,
        "mode": mode,
        "r2f_range": list(target_ranges.r2f),
        "snr_range": list(target_ranges.snr),
        "peak_count_range": list(PEAK_COUNT_RANGE),
        "fwhm_range": list(PEAK_FWHM_RANGE),
        "amplitude_range": list(PEAK_AMPLITUDE_RANGE),
        "mix_range": [0.0, 1.0],
        "poly_order_range": list(POLY_ORDER_RANGE),
        "poly_coeff_range": list(POLY_COEFF_RANGE),
    }


def split_files(split: str) -> dict:
    return {part: f"{part}_{split}.csv" for part in ("noisy", "clean", "pure", "fluor")}


def write_split(
    out_dir,
    split: str,
    examples: Sequence[LabeledExample],
    grid: SpectrumGrid,
    root_seed: int,
    stream_base: int,
    dark_refs: list[dict],
    params: dict,
) -> dict:
    """Write one split's batch files and merge it into the directory manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = split_files(split)
    parts = {
        "noisy": np.stack([e.noisy.values for e in examples]),
        "clean": np.stack([e.clean_with_baseline.values for e in examples]),
        "pure": np.stack([e.pure_raman.values for e in examples]),
        "fluor": np.stack([e.fluorescence.values for e in examples]),
    }
    for part, fname in files.items():
        write_batch(out_dir / fname, grid, parts[part])

    records = []
    for col, e in enumerate(examples):
        records.append(
            {
                "id": f"{split}-{col:06d}",
                "seed_index": e.seed[1],
                "r2f": e.targets.r2f,
                "snr": e.targets.snr,
                "dark_id": e.dark_id,
                "column": col,
            }
        )

    manifest_path = out_dir / MANIFEST_NAME
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        if manifest.get("grid") != _grid_to_json(grid) or manifest.get("root_seed") != root_seed:
            raise ValidationError(
                f"{manifest_path}: existing manifest disagrees on grid or root_seed"
            )
    else:
        manifest = {
            "schema_version": SCHEMA_VERSION,
            "kind": "dataset_manifest",
            "grid": _grid_to_json(grid),
            "root_seed": root_seed,
            "dark_stats": dark_refs,
            "params": params,
            "splits": {},
        }
    manifest["splits"][split] = {
        "count": len(examples),
        "stream_base": stream_base,
        "files": files,
        "examples": records,
    }
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def read_manifest(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: invalid JSON: {e}") from e
    if manifest.get("kind") != "dataset_manifest":
        raise ValidationError(f"{path}: not a dataset manifest")
    manifest["_base_dir"] = str(path.parent)
    return manifest


def validate_manifest(manifest: dict) -> None:
    """Check every reference the manifest makes; diagnostics name the culprit."""
    base = Path(manifest.get("_base_dir", "."))
    for field in ("grid", "root_seed", "splits", "dark_stats", "params"):
        if field not in manifest:
            raise ValidationError(f"manifest: missing field {field!r}")
    grid = _grid_from_json(manifest["grid"], "manifest.grid")

    dark_ids = set()
    for ref in manifest["dark_stats"]:
        if "id" not in ref or "file" not in ref:
            raise ValidationError("manifest.dark_stats: entries need 'id' and 'file'")
        dark_path = base / ref["file"]
        if not dark_path.exists():
            raise ValidationError(f"manifest.dark_stats: missing file {dark_path}")
        stats = read_dark_stats(dark_path)
        if stats.grid != grid:
            raise ValidationError(f"manifest.dark_stats: {dark_path} grid differs from manifest grid")
        dark_ids.add(str(ref["id"]))

    for split, info in manifest["splits"].items():
        for field in ("count", "files", "examples"):
            if field not in info:
                raise ValidationError(f"manifest.splits.{split}: missing field {field!r}")
        counts = {}
        for part, fname in info["files"].items():
            fpath = base / fname
            if not fpath.exists():
                raise ValidationError(f"manifest.splits.{split}: missing file {fpath}")
            fgrid, values = read_batch(fpath)
            if fgrid != grid:
                raise ValidationError(f"manifest.splits.{split}: {fpath} grid differs")
            counts[part] = values.shape[0]
        if len(set(counts.values())) > 1:
            raise ValidationError(f"manifest.splits.{split}: batch files disagree on count {counts}")
        n = next(iter(counts.values()))
        if n != info["count"] or len(info["examples"]) != info["count"]:
            raise ValidationError(
                f"manifest.splits.{split}: count {info['count']} does not match "
                f"files ({n}) or example records ({len(info['examples'])})"
            )
        for rec in info["examples"]:
            if str(rec.get("dark_id")) not in dark_ids:
                raise ValidationError(
                    f"manifest.splits.{split}: example {rec.get('id')} references "
                    f"unknown dark_id {rec.get('dark_id')!r}"
                )
            if not 0 <= int(rec.get("column", -1)) < n:
                raise ValidationError(
                    f"manifest.splits.{split}: example {rec.get('id')} column out of range"
                )


def load_manifest_dark_sets(manifest: dict) -> tuple[list[DarkStats], list[str]]:
    base = Path(manifest.get("_base_dir", "."))
    stats, ids = [], []
    for ref in manifest["dark_stats"]:
        stats.append(read_dark_stats(base / ref["file"]))
        ids.append(str(ref["id"]))
    return stats, ids


# ---------------------------------------------------------------------------
# Denoiser construction (in-process methods and the external-tool contract)


class _ClassicalDenoiser:
    def __init__(self, fn):
        self._fn = fn

    def __call__(self, s: Spectrum) -> Spectrum:
        return s.with_values(self._fn(s.values[None, :])[0])

    def denoise_batch(self, matrix: np.ndarray, grid: SpectrumGrid) -> np.ndarray:
        return self._fn(matrix)


class _ModPolyDenoiser:
    def __init__(self, cfg: classical.ModPolyConfig):
        self._cfg = cfg

    def __call__(self, s: Spectrum) -> Spectrum:
        return classical.modpoly_baseline(s, self._cfg)[1]

    def denoise_batch(self, matrix: np.ndarray, grid: SpectrumGrid) -> np.ndarray:
        s = grid
        x = 2.0 * (s.wavenumbers - s.start_wn) / (s.end_wn - s.start_wn) - 1.0
        out = np.empty_like(np.asarray(matrix, dtype=np.float64))
        for i, row in enumerate(matrix):
            out[i] = classical.modpoly_baseline_values(row, x, self._cfg)[1]
        return out


class ExternalDenoiser:
    """Adapter around the ``<command> --in <csv> --out <csv>`` plug-in contract."""

    def __init__(self, command: str | Sequence[str]):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.command:
            raise ValidationError("external denoiser command is empty")

    def denoise_batch(self, matrix: np.ndarray, grid: SpectrumGrid) -> np.ndarray:
        with tempfile.TemporaryDirectory(prefix="ramanforge-ext-") as tmp:
            in_path = Path(tmp) / "in.csv"
            out_path = Path(tmp) / "out.csv"
            write_batch(in_path, grid, np.asarray(matrix, dtype=np.float64))
            argv = self.command + ["--in", str(in_path), "--out", str(out_path)]
            proc = subprocess.run(argv, capture_output=True, text=True)
            if proc.returncode != 0:
                tail = proc.stderr.strip().splitlines()[-5:]
                raise ExternalToolError(
                    f"external denoiser exited with {proc.returncode}: "
                    + " | ".join(tail)
                )
            if not out_path.exists():
                raise ExternalToolError(f"external denoiser wrote no output file {out_path}")
            try:
                out_grid, out = read_batch(out_path)
            except ValidationError as e:
                raise ExternalToolError(f"external denoiser output unreadable: {e}") from e
            if out_grid != grid or out.shape != np.shape(matrix):
                raise ExternalToolError(
                    f"external denoiser output {out_path} has shape {out.shape} on grid "
                    f"{out_grid}, expected {np.shape(matrix)} on the input grid"
                )
            return out

    def __call__(self, s: Spectrum) -> Spectrum:
        return s.with_values(self.denoise_batch(s.values[None, :], s.grid)[0])


def _parse_kwargs(text: str) -> dict:
    out = {}
    for item in text.split(","):
        if not item:
            continue
        if "=" not in item:
            raise ValidationError(f"bad denoiser option {item!r}, expected key=value")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def make_denoiser(spec: str):
    """Build a denoiser from a CLI spec string.

    Examples: ``identity``, ``oracle``, ``sg:half_window=2,degree=2``,
    ``wavelet:family=db4,levels=4,rule=soft,scale=1.0``,
    ``modpoly:low=3,high=6``, ``external:mytool --checkpoint ck.json``.
    """
    from .evalkit import IdentityDenoiser, OracleDenoiser

    method, _, rest = spec.partition(":")
    method = method.strip()
    if method == "identity":
        return IdentityDenoiser()
    if method == "oracle":
        return OracleDenoiser()
    if method == "external":
        return ExternalDenoiser(rest)
    opts = _parse_kwargs(rest)
    try:
        if method == "sg":
            cfg = classical.SGConfig(
                half_window=int(opts.pop("half_window", 5)),
                degree=int(opts.pop("degree", 3)),
            )
            if opts:
                raise ValidationError(f"unknown sg options {sorted(opts)}")
            return _ClassicalDenoiser(lambda m: classical.sg_filter_values(m, cfg))
        if method == "wavelet":
            cfg = classical.WaveletConfig(
                family=opts.pop("family", "db4"),
                levels=int(opts.pop("levels", 4)),
                threshold_rule=opts.pop("rule", "soft"),
                threshold_scale=float(opts.pop("scale", 1.0)),
            )
            if opts:
                raise ValidationError(f"unknown wavelet options {sorted(opts)}")
            return _ClassicalDenoiser(lambda m: classical.wavelet_denoise_values(m, cfg))
        if method == "modpoly":
            cfg = classical.ModPolyConfig(
                order_range=(int(opts.pop("low", 3)), int(opts.pop("high", 6))),
                max_iters=int(opts.pop("max_iters", 100)),
                tol=float(opts.pop("tol", 1e-6)),
            )
            if opts:
                raise ValidationError(f"unknown modpoly options {sorted(opts)}")
            return _ModPolyDenoiser(cfg)
    except ValueError as e:
        raise ValidationError(f"bad option value in denoiser spec {spec!r}: {e}") from e
    raise ValidationError(f"unknown denoiser method {method!r}")
