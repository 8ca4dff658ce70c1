"""Synthetic spectrum generation: pseudo-Voigt peaks, polynomial fluorescence
baselines, amplitude scaling to (r2f, SNR) targets, and labeled-example assembly.

A labeled example couples one noisy realization with the clean composite it
was drawn from and the pure Raman / fluorescence parts separately, which is
what both the classical comparisons and the learned denoiser train against.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import (
    FlatRamanError,
    RngStream,
    Spectrum,
    SpectrumGrid,
    ValidationError,
    ensure_same_grid,
    worker_count,
)
from .noisemodel import CleanSignal, DarkStats, sample_noisy_batch

# Sampling ranges for randomly generated spectra.
PEAK_COUNT_RANGE = (0, 30)          # inclusive
PEAK_FWHM_RANGE = (10.0, 200.0)     # cm^-1
PEAK_AMPLITUDE_RANGE = (0.0, 1.0)   # sampled on (0, 1]
POLY_ORDER_RANGE = (3, 6)           # inclusive
POLY_COEFF_RANGE = (-1.0, 1.0)
FLUOR_SHIFT_EPS = 1e-6
FLUOR_MAX_ATTEMPTS = 100

# FWHM -> kernel width conversions for the two pseudo-Voigt components.
FWHM_TO_GAMMA = 0.5
FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class PeakParams:
    """One pseudo-Voigt peak: unit-amplitude kernels mixed by ``mix``.

    ``lorentz_width`` is the Lorentzian half-width gamma and ``gauss_width``
    the Gaussian sigma; use :meth:`from_fwhm` to derive both from a single
    full width at half maximum.
    """

    center: float
    lorentz_width: float
    gauss_width: float
    mix: float
    amplitude: float

    def __post_init__(self):
        if self.lorentz_width <= 0 or self.gauss_width <= 0:
            raise ValidationError("peak widths must be positive")
        if not 0.0 <= self.mix <= 1.0:
            raise ValidationError(f"mix must lie in [0, 1], got {self.mix}")
        if not 0.0 < self.amplitude <= 1.0:
            raise ValidationError(f"amplitude must lie in (0, 1], got {self.amplitude}")

    @classmethod
    def from_fwhm(cls, center: float, fwhm: float, mix: float, amplitude: float) -> "PeakParams":
        return cls(
            center=center,
            lorentz_width=fwhm * FWHM_TO_GAMMA,
            gauss_width=fwhm * FWHM_TO_SIGMA,
            mix=mix,
            amplitude=amplitude,
        )


def pseudo_voigt(grid: SpectrumGrid, p: PeakParams) -> Spectrum:
    """Evaluate one peak on the grid.

    Both kernels are normalized to unit summit value, so the spectrum equals
    ``amplitude`` exactly at the peak center.
    """
    if not grid.start_wn <= p.center <= grid.end_wn:
        raise ValidationError(f"peak center {p.center} outside grid range")
    delta = grid.wavenumbers - p.center
    lorentz = p.lorentz_width**2 / (delta**2 + p.lorentz_width**2)
    gauss = np.exp(-(delta**2) / (2.0 * p.gauss_width**2))
    return Spectrum(grid, p.amplitude * (p.mix * lorentz + (1.0 - p.mix) * gauss))


def sample_peak_count(stream: RngStream) -> int:
    """Uniform peak count over 0..30 inclusive."""
    lo, hi = PEAK_COUNT_RANGE
    return int(stream.generator.integers(lo, hi + 1))


def sample_peak(grid: SpectrumGrid, stream: RngStream) -> PeakParams:
    """One random peak: uniform center, FWHM, mix; amplitude uniform on (0, 1]."""
    gen = stream.generator
    center = gen.uniform(grid.start_wn, grid.end_wn)
    fwhm = gen.uniform(*PEAK_FWHM_RANGE)
    mix = gen.uniform(0.0, 1.0)
    amplitude = 1.0 - gen.random()  # (0, 1]: a null peak would be no peak at all
    return PeakParams.from_fwhm(center, fwhm, mix, amplitude)


def gen_pure_raman(grid: SpectrumGrid, stream: RngStream, n_peaks: int | None = None) -> Spectrum:
    """Sum of randomly drawn pseudo-Voigt peaks; ``n_peaks=0`` gives the zero spectrum."""
    if n_peaks is None:
        n_peaks = sample_peak_count(stream)
    total = np.zeros(grid.n_points)
    for _ in range(n_peaks):
        total += pseudo_voigt(grid, sample_peak(grid, stream)).values
    return Spectrum(grid, total)


@dataclass(frozen=True)
class FluorSpec:
    """Random polynomial describing one fluorescence baseline."""

    order: int
    coeffs: tuple[float, ...]  # a_0 .. a_order on the normalized abscissa

    def __post_init__(self):
        lo, hi = POLY_ORDER_RANGE
        if not lo <= self.order <= hi:
            raise ValidationError(f"polynomial order must lie in [{lo}, {hi}]")
        if len(self.coeffs) != self.order + 1:
            raise ValidationError("coefficient count must equal order + 1")
        if any(not POLY_COEFF_RANGE[0] <= a <= POLY_COEFF_RANGE[1] for a in self.coeffs):
            raise ValidationError("coefficients must lie in [-1, 1]")

    def evaluate(self, grid: SpectrumGrid) -> np.ndarray:
        # Abscissa normalized to [0, 1]: raw wavenumbers raised to the sixth
        # power would dwarf any sensible coefficient range.
        t = (grid.wavenumbers - grid.start_wn) / (grid.end_wn - grid.start_wn)
        return np.polynomial.polynomial.polyval(t, np.asarray(self.coeffs))


def sample_fluor_spec(stream: RngStream) -> FluorSpec:
    gen = stream.generator
    order = int(gen.integers(POLY_ORDER_RANGE[0], POLY_ORDER_RANGE[1] + 1))
    coeffs = gen.uniform(*POLY_COEFF_RANGE, size=order + 1)
    return FluorSpec(order, tuple(float(a) for a in coeffs))


def shift_positive(values: np.ndarray, eps: float = FLUOR_SHIFT_EPS) -> np.ndarray:
    """Raise a curve so its minimum sits at ``eps`` exactly."""
    return values - values.min() + eps


def gen_fluorescence(
    grid: SpectrumGrid,
    stream: RngStream,
    max_attempts: int = FLUOR_MAX_ATTEMPTS,
) -> Spectrum:
    """Strictly positive random polynomial baseline.

    Resamples until a draw is positive on its own, up to ``max_attempts``;
    after that the last draw is shifted up to a minimum of 1e-6.
    """
    values = None
    for _ in range(max_attempts):
        values = sample_fluor_spec(stream).evaluate(grid)
        if values.min() > 0.0:
            return Spectrum(grid, values)
    if values is None:  # max_attempts == 0: shift a single forced draw
        values = sample_fluor_spec(stream).evaluate(grid)
    return Spectrum(grid, shift_positive(values))


@dataclass(frozen=True)
class ScaleTargets:
    """Target Raman-to-fluorescence ratio and signal-to-noise ratio for one example."""

    r2f: float
    snr: float

    def __post_init__(self):
        if self.r2f <= 0 or self.snr <= 0:
            raise ValidationError("r2f and snr targets must be positive")


@dataclass(frozen=True)
class TargetRanges:
    """Uniform sampling ranges for per-example scale targets."""

    r2f: tuple[float, float] = (0.1, 0.5)
    snr: tuple[float, float] = (0.01, 20.0)

    def __post_init__(self):
        for name, (lo, hi) in (("r2f", self.r2f), ("snr", self.snr)):
            if not 0 < lo <= hi:
                raise ValidationError(f"invalid {name} range [{lo}, {hi}]")

    def sample(self, stream: RngStream) -> ScaleTargets:
        gen = stream.generator
        return ScaleTargets(float(gen.uniform(*self.r2f)), float(gen.uniform(*self.snr)))


def solve_scale(
    r2f: float, s: float, x_p: float, f_max: float, f_p: float, y: float
) -> tuple[float, float]:
    """Solve for the (m, n) amplitude factors hitting both scale targets.

    With m scaling the Raman signal and n the fluorescence, the r2f
    constraint gives m = r2f * n * f_max / x_p, and substituting into the
    SNR constraint leaves a quadratic in n,

        (r2f * f_max)^2 * n^2 - s^2 * (r2f * f_max + f_p) * n - s^2 * y = 0,

    whose positive root is returned (the linear and constant coefficients
    are non-positive, so exactly one root is non-negative).
    """
    if x_p <= 0:
        raise ValidationError("x_p must be positive: the Raman signal needs a peak")
    if f_max <= 0:
        raise ValidationError("f_max must be positive: the fluorescence cannot be flat zero")
    if s <= 0 or r2f <= 0:
        raise ValidationError("r2f and s targets must be positive")
    if f_p < 0 or y < 0:
        raise ValidationError("f_p and y must be non-negative")

    a = (r2f * f_max) ** 2
    b = -(s * s) * (r2f * f_max + f_p)
    c = -(s * s) * y
    n = (-b + math.sqrt(b * b - 4.0 * a * c)) / (2.0 * a)
    m = r2f * n * f_max / x_p
    return m, n


@dataclass(frozen=True, eq=False)
class LabeledExample:
    """One simulated acquisition: noisy input plus its three clean targets."""

    noisy: Spectrum
    clean_with_baseline: Spectrum
    pure_raman: Spectrum
    fluorescence: Spectrum
    targets: ScaleTargets
    dark_id: str
    seed: tuple[int, int]  # (root_seed, stream_index) that produced the example

    def __post_init__(self):
        recon = self.pure_raman.values + self.fluorescence.values
        scale = max(1.0, float(np.abs(self.clean_with_baseline.values).max()))
        if np.abs(self.clean_with_baseline.values - recon).max() > 1e-12 * scale:
            raise ValidationError("clean_with_baseline must equal pure_raman + fluorescence")


def assemble_example(
    raman: Spectrum,
    fluor: Spectrum,
    targets: ScaleTargets,
    dark: DarkStats,
    stream: RngStream,
    dark_id: str = "0",
    mode: str = "gaussian",
) -> LabeledExample:
    """Scale a clean Raman/fluorescence pair to the targets and add noise.

    The peak location is the argmax of the Raman signal (ties broken toward
    the lowest wavenumber); the dark variance at that point enters the SNR
    constraint as y = 2 * S_dark(lambda_p).
    """
    grid = ensure_same_grid(raman, fluor, dark)
    if np.any(fluor.values <= 0):
        raise ValidationError("fluorescence baseline must be strictly positive")

    ip = int(np.argmax(raman.values))
    x_p = float(raman.values[ip])
    if x_p <= 0:
        raise FlatRamanError("Raman signal has no positive peak to scale")
    f_max = float(fluor.values.max())
    f_p = float(fluor.values[ip])
    y = 2.0 * float(dark.variance[ip])

    m, n = solve_scale(targets.r2f, targets.snr, x_p, f_max, f_p, y)
    pure = raman.values * m
    baseline = fluor.values * n
    clean = CleanSignal(Spectrum(grid, pure), Spectrum(grid, baseline))
    noisy = sample_noisy_batch(clean, dark, stream, 1, mode=mode)[0]

    return LabeledExample(
        noisy=Spectrum(grid, noisy),
        clean_with_baseline=Spectrum(grid, pure + baseline),
        pure_raman=clean.raman,
        fluorescence=clean.fluorescence,
        targets=targets,
        dark_id=dark_id,
        seed=stream.descriptor(),
    )


RamanFactory = Callable[[SpectrumGrid, RngStream], Spectrum]


def _build_item(
    i: int,
    grid: SpectrumGrid,
    dark_sets: Sequence[DarkStats],
    stream: RngStream,
    ranges: TargetRanges,
    raman_factory: RamanFactory,
    mode: str,
    max_retries: int,
) -> LabeledExample:
    item = stream.substream(i)
    targets = ranges.sample(item)
    dark_idx = int(item.generator.integers(0, len(dark_sets)))
    for _ in range(max_retries):
        raman = raman_factory(grid, item)
        fluor = gen_fluorescence(grid, item)
        try:
            return assemble_example(
                raman, fluor, targets, dark_sets[dark_idx], item,
                dark_id=str(dark_idx), mode=mode,
            )
        except FlatRamanError:
            continue  # zero-Raman draw: regenerate from the same item stream
    raise FlatRamanError(f"item {i}: no scalable Raman signal after {max_retries} attempts")


def gen_dataset(
    count: int,
    grid: SpectrumGrid,
    dark_sets: Sequence[DarkStats],
    stream: RngStream,
    target_ranges: TargetRanges | None = None,
    raman_factory: RamanFactory = gen_pure_raman,
    mode: str = "gaussian",
    max_retries: int = 10,
    n_workers: int | None = None,
) -> list[LabeledExample]:
    """Generate ``count`` labeled examples, one independent stream per item.

    Item i draws everything it needs from ``stream.substream(i)``, so
    parallel and sequential generation produce bit-identical results.
    """
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    if not dark_sets:
        raise ValidationError("at least one DarkStats set is required (no implicit S_dark=0)")
    ranges = target_ranges or TargetRanges()

    def build(i: int) -> LabeledExample:
        return _build_item(i, grid, dark_sets, stream, ranges, raman_factory, mode, max_retries)

    workers = n_workers if n_workers is not None else worker_count()
    if workers <= 1 or count == 1:
        return [build(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(build, range(count)))
