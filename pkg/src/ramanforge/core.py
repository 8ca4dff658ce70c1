"""Spectrum containers, the uniform wavenumber grid, and deterministic RNG streams.

Everything downstream trades in :class:`Spectrum` objects on a shared
:class:`SpectrumGrid`; randomness is always drawn through an explicit
:class:`RngStream` so that dataset generation is reproducible item by item,
in any execution order.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np

DEFAULT_START_WN = 600.0
DEFAULT_END_WN = 1790.0
DEFAULT_N_POINTS = 693

_MASK64 = (1 << 64) - 1


class ValidationError(ValueError):
    """Invalid input data or violated precondition (CLI exit code 1)."""


class GridMismatchError(ValidationError):
    """Operands live on different wavenumber grids."""


class ZeroAreaError(ValidationError):
    """Spectrum has no usable area under the curve."""


class InsufficientFramesError(ValidationError):
    """Fewer frames than the statistic requires."""


class FlatRamanError(ValidationError):
    """Raman signal has no positive peak, so amplitude scaling is undefined."""


class ConvergenceError(ValidationError):
    """Iterative solver hit its iteration cap without meeting its tolerance."""


class ExternalToolError(RuntimeError):
    """External denoiser executable failed or returned malformed output (exit code 3)."""


def worker_count() -> int:
    """Worker cap for parallel loops; respects the RAMANFORGE_THREADS env var."""
    env = os.environ.get("RAMANFORGE_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as e:
            raise ValidationError(f"RAMANFORGE_THREADS must be an integer, got {env!r}") from e
        if n < 1:
            raise ValidationError("RAMANFORGE_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class SpectrumGrid:
    """Uniformly spaced wavenumber axis in cm^-1."""

    start_wn: float
    end_wn: float
    n_points: int

    def __post_init__(self):
        if not np.isfinite(self.start_wn) or not np.isfinite(self.end_wn):
            raise ValidationError("grid endpoints must be finite")
        if not self.start_wn < self.end_wn:
            raise ValidationError(
                f"start_wn must be < end_wn, got [{self.start_wn}, {self.end_wn}]"
            )
        if self.n_points < 2:
            raise ValidationError(f"n_points must be >= 2, got {self.n_points}")

    @property
    def spacing(self) -> float:
        return (self.end_wn - self.start_wn) / (self.n_points - 1)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        wn = np.linspace(self.start_wn, self.end_wn, self.n_points)
        wn.setflags(write=False)
        return wn


def make_grid(start_wn: float, end_wn: float, n_points: int) -> SpectrumGrid:
    """Build a uniform grid; raises on an empty or reversed range."""
    return SpectrumGrid(float(start_wn), float(end_wn), int(n_points))


def default_grid() -> SpectrumGrid:
    """The 693-point [600, 1790] cm^-1 grid used throughout."""
    return SpectrumGrid(DEFAULT_START_WN, DEFAULT_END_WN, DEFAULT_N_POINTS)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Per-point intensities on a :class:`SpectrumGrid` (calibrated, arbitrary units)."""

    grid: SpectrumGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.shape[0] != self.grid.n_points:
            raise ValidationError(
                f"values length {values.shape} does not match grid n_points {self.grid.n_points}"
            )
        if not np.all(np.isfinite(values)):
            raise ValidationError("spectrum values must all be finite")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray) -> "Spectrum":
        """New spectrum on the same grid."""
        return Spectrum(self.grid, values)


def ensure_same_grid(*objs) -> SpectrumGrid:
    """Return the shared grid of the operands or raise :class:`GridMismatchError`."""
    grid = objs[0].grid
    for other in objs[1:]:
        if other.grid != grid:
            raise GridMismatchError(f"grid mismatch: {grid} vs {other.grid}")
    return grid


class RngStream:
    """Deterministic random stream addressed by (root_seed, stream_index).

    The underlying bit generator is counter-based (Philox keyed on both
    fields), so any two distinct stream indices give statistically
    independent sequences and the mapping does not depend on creation or
    consumption order.  Parallel workloads hand each work item its own
    stream index and remain bit-reproducible.
    """

    def __init__(self, root_seed: int, stream_index: int = 0):
        if stream_index < 0:
            raise ValidationError(f"stream_index must be non-negative, got {stream_index}")
        self.root_seed = int(root_seed) & _MASK64
        self.stream_index = int(stream_index) & _MASK64
        self._generator: np.random.Generator | None = None

    @property
    def generator(self) -> np.random.Generator:
        if self._generator is None:
            key = self.root_seed | (self.stream_index << 64)
            self._generator = np.random.Generator(np.random.Philox(key=key))
        return self._generator

    def reset(self) -> None:
        """Rewind to the start of the stream."""
        self._generator = None

    def substream(self, offset: int) -> "RngStream":
        """Independent stream at ``stream_index + offset`` (fresh state)."""
        if offset < 0:
            raise ValidationError("substream offset must be non-negative")
        return RngStream(self.root_seed, self.stream_index + offset)

    def descriptor(self) -> tuple[int, int]:
        return (self.root_seed, self.stream_index)

    def __repr__(self):
        return f"RngStream(root_seed={self.root_seed}, stream_index={self.stream_index})"


def sample_gaussian(stream: RngStream, mean: float, variance: float) -> float:
    """One draw from N(mean, variance); variance 0 returns the mean exactly."""
    if variance < 0:
        raise ValidationError(f"variance must be >= 0, got {variance}")
    if variance == 0.0:
        return float(mean)
    return float(mean + np.sqrt(variance) * stream.generator.standard_normal())


def sample_poisson(stream: RngStream, rate: float) -> int:
    """One Poisson count at the given rate; rate 0 returns 0."""
    if rate < 0:
        raise ValidationError(f"rate must be >= 0, got {rate}")
    if rate == 0.0:
        return 0
    return int(stream.generator.poisson(rate))


def auc(s: Spectrum) -> float:
    """Trapezoidal area under the curve on the physical wavenumber axis."""
    return float(np.trapezoid(s.values, s.grid.wavenumbers))


def auc_normalize(s: Spectrum) -> Spectrum:
    """Rescale so the trapezoidal AUC equals 1.

    Idempotent and invariant to positive rescaling of the input.
    """
    area = auc(s)
    if area == 0.0:
        raise ZeroAreaError("cannot normalize a spectrum with zero area under the curve")
    return s.with_values(s.values / area)
