"""Sensor signal model: gain calibration, dark-frame statistics, noisy sampling.

The chain mirrors how a fiber-coupled CCD spectrometer is characterized in
practice: a reference source fixes the wavelength-dependent gain, repeated
no-sample acquisitions fix the dark statistics, and a calibrated,
dark-subtracted spectrum S is then distributed as

    S(lambda) ~ N(S_sample(lambda), S_sample(lambda) + 2 * S_dark(lambda))

where S_sample = R + F_sample is the clean photoelectron signal and S_dark
collects component fluorescence, dark current, read noise and offset
variance.  The factor 2 comes from subtracting one dark frame realization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    GridMismatchError,
    RngStream,
    Spectrum,
    SpectrumGrid,
    InsufficientFramesError,
    ValidationError,
    ensure_same_grid,
)

# Expected-count threshold above which Poisson(mu) is treated as N(mu, mu).
POISSON_GAUSSIAN_THRESHOLD = 30.0


@dataclass(frozen=True, eq=False)
class GainCurve:
    """Multiplicative system response g(lambda), unitless.

    Zero or negative entries are representable (a dead reference pixel
    produces gain 0); :func:`calibrate` refuses to divide by them.
    """

    grid: SpectrumGrid
    gain: np.ndarray

    def __post_init__(self):
        gain = np.asarray(self.gain, dtype=np.float64)
        if gain.shape != (self.grid.n_points,):
            raise ValidationError("gain length does not match grid")
        if not np.all(np.isfinite(gain)):
            raise ValidationError("gain values must be finite")
        gain = gain.copy()
        gain.setflags(write=False)
        object.__setattr__(self, "gain", gain)


@dataclass(frozen=True, eq=False)
class DarkStats:
    """Per-wavenumber mean and variance of calibrated dark frames.

    ``variance`` is the S_dark estimate that enters the noise model;
    ``mean`` estimates the deterministic dark pedestal removed by
    :func:`subtract_dark`.
    """

    grid: SpectrumGrid
    mean: np.ndarray
    variance: np.ndarray
    integration_time: float
    n_frames: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        variance = np.asarray(self.variance, dtype=np.float64)
        if mean.shape != (self.grid.n_points,) or variance.shape != (self.grid.n_points,):
            raise ValidationError("dark stats arrays do not match grid length")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(variance))):
            raise ValidationError("dark stats must be finite")
        if np.any(variance < 0):
            raise ValidationError("dark variance must be non-negative everywhere")
        if self.n_frames < 2:
            raise InsufficientFramesError(
                f"dark statistics need >= 2 frames, got {self.n_frames}"
            )
        if self.integration_time <= 0:
            raise ValidationError("integration_time must be positive")
        for name, arr in (("mean", mean), ("variance", variance)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True, eq=False)
class CleanSignal:
    """Noise-free signal split into its Raman and sample-fluorescence parts."""

    raman: Spectrum
    fluorescence: Spectrum

    def __post_init__(self):
        ensure_same_grid(self.raman, self.fluorescence)
        if np.any(self.raman.values < 0) or np.any(self.fluorescence.values < 0):
            raise ValidationError("clean signal components must be non-negative")

    @property
    def grid(self) -> SpectrumGrid:
        return self.raman.grid

    @property
    def total(self) -> np.ndarray:
        """S_sample = Raman + sample fluorescence, pointwise."""
        return self.raman.values + self.fluorescence.values


def estimate_gain(measured_ref: Spectrum, true_radiance: Spectrum) -> GainCurve:
    """Gain curve from a reference measurement: g = measured / true."""
    grid = ensure_same_grid(measured_ref, true_radiance)
    if np.any(true_radiance.values <= 0):
        raise ValidationError("true radiance must be strictly positive everywhere")
    return GainCurve(grid, measured_ref.values / true_radiance.values)


def calibrate(raw: Spectrum, gain: GainCurve) -> Spectrum:
    """Divide the raw counts by the gain curve."""
    ensure_same_grid(raw, gain)
    if np.any(gain.gain <= 0):
        raise ValidationError("gain must be strictly positive to calibrate")
    return raw.with_values(raw.values / gain.gain)


def estimate_dark_stats(frames: list[Spectrum], integration_time: float) -> DarkStats:
    """Per-wavenumber sample mean and unbiased sample variance of dark frames."""
    if len(frames) < 2:
        raise InsufficientFramesError(f"need >= 2 dark frames, got {len(frames)}")
    grid = ensure_same_grid(*frames)
    stack = np.stack([f.values for f in frames])
    return DarkStats(
        grid=grid,
        mean=stack.mean(axis=0),
        variance=stack.var(axis=0, ddof=1),
        integration_time=integration_time,
        n_frames=len(frames),
    )


def subtract_dark(calibrated: Spectrum, dark: DarkStats) -> Spectrum:
    """Remove the mean dark pedestal from a calibrated spectrum."""
    ensure_same_grid(calibrated, dark)
    return calibrated.with_values(calibrated.values - dark.mean)


def sample_noisy_batch(
    clean: CleanSignal,
    dark: DarkStats,
    stream: RngStream,
    n: int,
    mode: str = "gaussian",
) -> np.ndarray:
    """Draw ``n`` noisy realizations of a clean signal, shape (n, n_points).

    ``gaussian`` samples every point from N(S_sample, S_sample + 2*S_dark).
    ``exact`` draws the photoelectron term from Poisson(S_sample) wherever
    the expected count is below 30 (Gaussian above), then adds the
    dark-difference noise N(0, 2*S_dark).  Points with zero total variance
    come back as the clean value exactly.
    """
    if n < 1:
        raise ValidationError(f"need n >= 1 draws, got {n}")
    if mode not in ("gaussian", "exact"):
        raise ValidationError(f"unknown sampling mode {mode!r}")
    if clean.grid != dark.grid:
        raise GridMismatchError("clean signal and dark stats grids differ")

    gen = stream.generator
    s_sample = clean.total
    dark_var = 2.0 * dark.variance

    if mode == "gaussian":
        sigma = np.sqrt(s_sample + dark_var)
        return s_sample + sigma * gen.standard_normal((n, s_sample.size))

    # exact: Poisson below the Gaussian-approximation threshold, then dark noise
    out = np.empty((n, s_sample.size))
    low = s_sample < POISSON_GAUSSIAN_THRESHOLD
    if np.any(low):
        out[:, low] = gen.poisson(s_sample[low], size=(n, int(low.sum()))).astype(np.float64)
    if np.any(~low):
        high = ~low
        mu = s_sample[high]
        out[:, high] = mu + np.sqrt(mu) * gen.standard_normal((n, int(high.sum())))
    out += np.sqrt(dark_var) * gen.standard_normal((n, s_sample.size))
    return out


def sample_noisy_spectrum(
    clean: CleanSignal,
    dark: DarkStats,
    stream: RngStream,
    mode: str = "gaussian",
) -> Spectrum:
    """One noisy realization of a clean signal (see :func:`sample_noisy_batch`)."""
    values = sample_noisy_batch(clean, dark, stream, 1, mode=mode)[0]
    return Spectrum(clean.grid, values)
