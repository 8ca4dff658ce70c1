"""Evaluation protocols for denoisers: SNR-improvement sweep, peak-recovery
metrics, and NNLS concentration analysis.

A denoiser here is any callable mapping a :class:`Spectrum` to a
:class:`Spectrum` on the same grid; objects exposing ``denoise_batch(matrix,
grid)`` are used batch-wise (that is how external executables plug in).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (
    ConvergenceError,
    ExternalToolError,
    RngStream,
    Spectrum,
    SpectrumGrid,
    ValidationError,
    worker_count,
)
from .noisemodel import CleanSignal, DarkStats, sample_noisy_batch
from .synth import TargetRanges, gen_fluorescence, gen_pure_raman, solve_scale

SNR_CAP = 1e6  # keeps the improvement finite for a perfect denoiser
DEFAULT_PROMINENCE_LEVELS = (0.02, 0.05, 0.1, 0.2, 0.4)  # fractions of the max
PEAK_MATCH_TOL_WN = 6.0  # cm^-1


class DenoiserError(RuntimeError):
    """A denoiser failed inside a protocol; message carries pair/signal indices."""


# ---------------------------------------------------------------------------
# Peak detection and matching


def detect_peaks_values(values: np.ndarray, prominence: float = 0.0) -> list[tuple[int, float]]:
    """Strict local maxima with topographic prominence >= ``prominence``.

    The prominence of a maximum is its height above the higher of the two
    lowest points separating it from higher terrain (or from the signal
    boundary when no higher terrain exists on that side).
    """
    if prominence < 0:
        raise ValidationError("prominence must be >= 0")
    v = np.asarray(values, dtype=np.float64)
    peaks = []
    for i in range(1, v.size - 1):
        if not (v[i] > v[i - 1] and v[i] > v[i + 1]):
            continue
        left_base = v[i]
        j = i - 1
        while j >= 0 and v[j] <= v[i]:
            left_base = min(left_base, v[j])
            j -= 1
        right_base = v[i]
        j = i + 1
        while j < v.size and v[j] <= v[i]:
            right_base = min(right_base, v[j])
            j += 1
        if v[i] - max(left_base, right_base) >= prominence:
            peaks.append((i, float(v[i])))
    return peaks


def detect_peaks(s: Spectrum, prominence: float = 0.0) -> list[tuple[int, float]]:
    return detect_peaks_values(s.values, prominence)


def peaks_to_positions(peaks: Sequence[tuple[int, float]], grid: SpectrumGrid) -> list[tuple[float, float]]:
    """Convert (index, amplitude) pairs to (wavenumber, amplitude)."""
    wn = grid.wavenumbers
    return [(float(wn[i]), a) for i, a in peaks]


@dataclass(frozen=True)
class PeakMatchReport:
    """Recovery bookkeeping for one denoised spectrum against its ground truth."""

    missing_ratio: float
    artifact_ratio: float
    value_bias: float
    shift_mean: float
    n_true: int
    n_pred: int
    n_match: int
    match_stats_defined: bool  # False when no peaks matched (bias/shift are 0 by convention)


def match_peaks(
    true_peaks: Sequence[tuple[float, float]],
    pred_peaks: Sequence[tuple[float, float]],
    tol_wn: float = PEAK_MATCH_TOL_WN,
) -> PeakMatchReport:
    """Greedy one-to-one nearest-position matching within ``tol_wn``.

    Candidate pairs are consumed in order of ascending position distance,
    which is optimal for non-crossing matchings on a line and deterministic.
    An artifact ratio with no true peaks is reported as infinity.
    """
    candidates = []
    for ti, (tp, _) in enumerate(true_peaks):
        for pi, (pp, _) in enumerate(pred_peaks):
            dist = abs(tp - pp)
            if dist <= tol_wn:
                candidates.append((dist, ti, pi))
    candidates.sort()

    used_true: set[int] = set()
    used_pred: set[int] = set()
    matches: list[tuple[int, int]] = []
    for _, ti, pi in candidates:
        if ti in used_true or pi in used_pred:
            continue
        used_true.add(ti)
        used_pred.add(pi)
        matches.append((ti, pi))

    n_true, n_pred, n_match = len(true_peaks), len(pred_peaks), len(matches)
    if n_true > 0:
        missing_ratio = (n_true - n_match) / n_true
        artifact_ratio = (n_pred - n_match) / n_true
    else:
        missing_ratio = 0.0
        artifact_ratio = math.inf if n_pred > 0 else 0.0

    if n_match > 0:
        value_bias = float(
            np.mean([abs(pred_peaks[pi][1] - true_peaks[ti][1]) for ti, pi in matches])
        )
        shift_mean = float(
            np.mean([abs(pred_peaks[pi][0] - true_peaks[ti][0]) for ti, pi in matches])
        )
    else:
        value_bias = 0.0
        shift_mean = 0.0

    return PeakMatchReport(
        missing_ratio=missing_ratio,
        artifact_ratio=artifact_ratio,
        value_bias=value_bias,
        shift_mean=shift_mean,
        n_true=n_true,
        n_pred=n_pred,
        n_match=n_match,
        match_stats_defined=n_match > 0,
    )


# ---------------------------------------------------------------------------
# Denoiser plumbing


Denoiser = Callable[[Spectrum], Spectrum]


class IdentityDenoiser:
    """Passthrough; the zero-improvement baseline."""

    def __call__(self, s: Spectrum) -> Spectrum:
        return s

    def denoise_batch(self, matrix: np.ndarray, grid: SpectrumGrid) -> np.ndarray:
        return matrix.copy()


class OracleDenoiser:
    """Protocol-level upper bound that returns the clean signal itself."""


def apply_denoiser(denoiser, matrix: np.ndarray, grid: SpectrumGrid) -> np.ndarray:
    """Run a denoiser over the rows of ``matrix``; validates the output shape."""
    if hasattr(denoiser, "denoise_batch"):
        out = np.asarray(denoiser.denoise_batch(matrix, grid), dtype=np.float64)
    else:
        rows = [denoiser(Spectrum(grid, row)).values for row in matrix]
        out = np.stack(rows)
    if out.shape != matrix.shape:
        raise ValidationError(
            f"denoiser changed the batch shape: {matrix.shape} -> {out.shape}"
        )
    return out


# ---------------------------------------------------------------------------
# SNR-improvement protocol


@dataclass(frozen=True)
class SnriRecord:
    """Averaged SNR improvement for one (r2f, snr) condition."""

    r2f: float
    snr_old: float
    snr_new: float
    snri_db: float


def snri_db(snr_old: float, snr_new: float) -> float:
    """SNR improvement in decibels, 10*log10(snr_new / snr_old)."""
    if snr_old <= 0 or snr_new <= 0:
        raise ValidationError("SNRs must be positive for a dB improvement")
    return 10.0 * math.log10(snr_new / snr_old)


def _capped_snr(amplitude: float, sigma: float) -> float:
    if sigma <= 0:
        return SNR_CAP
    return min(amplitude / sigma, SNR_CAP)


def run_snri_protocol(
    denoiser,
    grid: SpectrumGrid,
    dark_sets: Sequence[DarkStats],
    stream: RngStream,
    n_pairs: int = 500,
    signals_per_pair: int = 5,
    realizations: int = 10,
    target_ranges: TargetRanges | None = None,
    n_workers: int | None = None,
) -> list[SnriRecord]:
    """Sweep random (r2f, snr) conditions and measure the denoiser's SNR gain.

    For each condition, ``signals_per_pair`` clean composites are built, each
    corrupted ``realizations`` times and denoised; the post-denoising noise
    scale is the spread of the outputs at the clean Raman peak position.
    The pre-denoising SNR is measured identically from the noisy inputs, so
    a passthrough denoiser scores exactly 0 dB.  One record per condition,
    averaging the improvement over its clean signals.
    """
    if n_pairs < 1 or signals_per_pair < 1 or realizations < 2:
        raise ValidationError("need n_pairs, signals_per_pair >= 1 and realizations >= 2")
    if not dark_sets:
        raise ValidationError("at least one DarkStats set is required")
    ranges = target_ranges or TargetRanges()

    def run_pair(i: int) -> SnriRecord:
        item = stream.substream(i)
        gen = item.generator
        r2f = float(gen.uniform(*ranges.r2f))
        snr = float(gen.uniform(*ranges.snr))
        dark = dark_sets[int(gen.integers(0, len(dark_sets)))]

        log_old = 0.0
        log_new = 0.0
        for j in range(signals_per_pair):
            raman = gen_pure_raman(grid, item)
            while raman.values.max() <= 0:
                raman = gen_pure_raman(grid, item)
            fluor = gen_fluorescence(grid, item)
            ip = int(np.argmax(raman.values))
            m, n = solve_scale(
                r2f, snr,
                float(raman.values[ip]),
                float(fluor.values.max()),
                float(fluor.values[ip]),
                2.0 * float(dark.variance[ip]),
            )
            clean = CleanSignal(
                Spectrum(grid, m * raman.values), Spectrum(grid, n * fluor.values)
            )
            noisy = sample_noisy_batch(clean, dark, item, realizations)
            if isinstance(denoiser, OracleDenoiser):
                denoised = np.tile(clean.total, (realizations, 1))
            else:
                try:
                    denoised = apply_denoiser(denoiser, noisy, grid)
                except ExternalToolError as e:
                    raise ExternalToolError(f"pair {i}, signal {j}: {e}") from e
                except Exception as e:
                    raise DenoiserError(f"pair {i}, signal {j}: {e}") from e

            amplitude = float(clean.total[ip])
            snr_old = _capped_snr(amplitude, float(np.std(noisy[:, ip], ddof=1)))
            snr_new = _capped_snr(amplitude, float(np.std(denoised[:, ip], ddof=1)))
            log_old += math.log10(snr_old)
            log_new += math.log10(snr_new)

        gm_old = 10.0 ** (log_old / signals_per_pair)
        gm_new = 10.0 ** (log_new / signals_per_pair)
        return SnriRecord(r2f=r2f, snr_old=gm_old, snr_new=gm_new, snri_db=snri_db(gm_old, gm_new))

    workers = n_workers if n_workers is not None else worker_count()
    if workers <= 1 or n_pairs == 1:
        return [run_pair(i) for i in range(n_pairs)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_pair, range(n_pairs)))


# ---------------------------------------------------------------------------
# Peak-recovery sweep


@dataclass(frozen=True)
class PeakSweepRecord:
    """Aggregate peak metrics at one prominence level."""

    prominence: float
    missing_ratio: float
    artifact_ratio: float
    value_bias: float
    shift_mean: float
    n_spectra: int
    n_artifact_defined: int
    n_match_defined: int


def run_peak_protocol(
    true_spectra: Sequence[Spectrum],
    denoised_spectra: Sequence[Spectrum],
    prominence_levels: Sequence[float] = DEFAULT_PROMINENCE_LEVELS,
    tol_wn: float = PEAK_MATCH_TOL_WN,
) -> list[PeakSweepRecord]:
    """Peak metrics averaged over spectrum pairs, per prominence level.

    Prominence is relative: each spectrum is thresholded at
    ``level * max(spectrum)``.  Undefined ratios (no true peaks) and
    undefined bias/shift (no matches) are excluded from their averages and
    counted separately.
    """
    if len(true_spectra) != len(denoised_spectra):
        raise ValidationError("true and denoised spectrum counts differ")
    records = []
    for level in prominence_levels:
        reports = []
        for truth, pred in zip(true_spectra, denoised_spectra):
            grid = truth.grid
            t_prom = level * max(float(truth.values.max()), 0.0)
            p_prom = level * max(float(pred.values.max()), 0.0)
            t_peaks = peaks_to_positions(detect_peaks(truth, t_prom), grid)
            p_peaks = peaks_to_positions(detect_peaks(pred, p_prom), grid)
            reports.append(match_peaks(t_peaks, p_peaks, tol_wn))

        with_true = [r for r in reports if r.n_true > 0]
        matched = [r for r in reports if r.match_stats_defined]
        records.append(
            PeakSweepRecord(
                prominence=float(level),
                missing_ratio=float(np.mean([r.missing_ratio for r in with_true])) if with_true else 0.0,
                artifact_ratio=float(np.mean([r.artifact_ratio for r in with_true])) if with_true else 0.0,
                value_bias=float(np.mean([r.value_bias for r in matched])) if matched else 0.0,
                shift_mean=float(np.mean([r.shift_mean for r in matched])) if matched else 0.0,
                n_spectra=len(reports),
                n_artifact_defined=len(with_true),
                n_match_defined=len(matched),
            )
        )
    return records


# ---------------------------------------------------------------------------
# Non-negative least squares and concentration analysis


def _nnls(a: np.ndarray, b: np.ndarray, max_iter: int) -> tuple[np.ndarray, list[float]]:
    """Lawson-Hanson active-set NNLS; returns the solution and the objective trace."""
    n = a.shape[1]
    passive = np.zeros(n, dtype=bool)
    x = np.zeros(n)
    resid = b.copy()
    w = a.T @ resid
    tol = 10.0 * np.finfo(float).eps * max(a.shape) * max(1.0, float(np.abs(b).max(initial=0.0)))

    def objective() -> float:
        return float(np.dot(resid, resid))

    history = [objective()]
    iters = 0
    while not passive.all() and np.any(w[~passive] > tol):
        j = int(np.flatnonzero(~passive)[np.argmax(w[~passive])])
        passive[j] = True
        while True:
            s = np.zeros(n)
            s[passive], *_ = np.linalg.lstsq(a[:, passive], b, rcond=None)
            if np.all(s[passive] > tol):
                break
            iters += 1
            if iters > max_iter:
                raise ConvergenceError(
                    f"NNLS hit the iteration cap ({max_iter}); basis may be degenerate"
                )
            blocked = passive & (s <= tol)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = x[blocked] / (x[blocked] - s[blocked])
            alpha = float(np.min(ratios))
            x = x + alpha * (s - x)
            passive[passive & (x <= tol)] = False
            x[~passive] = 0.0
        x = s
        resid = b - a @ x
        w = a.T @ resid
        history.append(objective())
    return x, history


def nnls(basis: np.ndarray, target: np.ndarray | Spectrum, max_iter: int | None = None) -> np.ndarray:
    """Weights w >= 0 minimizing ||basis @ w - target||_2 (active-set method).

    At the solution the objective gradient vanishes on the positive weights
    and is non-negative on the clamped ones.
    """
    a = np.asarray(basis, dtype=np.float64)
    b = target.values if isinstance(target, Spectrum) else np.asarray(target, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 1 or a.shape[0] != b.shape[0]:
        raise ValidationError(f"incompatible shapes: basis {a.shape}, target {b.shape}")
    x, _ = _nnls(a, b, max_iter if max_iter is not None else 3 * a.shape[1])
    return x


@dataclass(frozen=True)
class ConcentrationReport:
    """NNLS weights of denoised spectra against the weights of their clean versions."""

    weights_pure: np.ndarray      # (n_spectra, n_components)
    weights_denoised: np.ndarray  # same shape
    slopes: np.ndarray            # per-component OLS slope of denoised vs pure
    intercepts: np.ndarray
    mse: float
    component_names: tuple[str, ...] = field(default=())


def ols_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Ordinary least-squares slope and intercept of y against x."""
    xm, ym = float(np.mean(x)), float(np.mean(y))
    var = float(np.mean((x - xm) ** 2))
    if var == 0.0:
        return 0.0, ym
    slope = float(np.mean((x - xm) * (y - ym))) / var
    return slope, ym - slope * xm


def concentration_analysis(
    pure,
    denoised,
    basis: np.ndarray,
    component_names: tuple[str, ...] = (),
) -> ConcentrationReport:
    """Compare component concentrations recovered from denoised vs clean spectra.

    Accepts single spectra or equal-length sequences.  With several spectra
    the slope/intercept are fit per component across spectra (the Fig.-style
    scatter fit); a single pair falls back to one pooled fit across its
    component pairs.  The MSE runs over every (spectrum, component) cell.
    """
    pure_list = [pure] if isinstance(pure, Spectrum) else list(pure)
    den_list = [denoised] if isinstance(denoised, Spectrum) else list(denoised)
    if len(pure_list) != len(den_list):
        raise ValidationError("pure and denoised spectrum counts differ")
    if not pure_list:
        raise ValidationError("need at least one spectrum pair")

    a = np.asarray(basis, dtype=np.float64)
    wp = np.stack([nnls(a, s) for s in pure_list])
    wd = np.stack([nnls(a, s) for s in den_list])

    k = a.shape[1]
    if len(pure_list) >= 2:
        lines = [ols_line(wp[:, j], wd[:, j]) for j in range(k)]
    else:
        lines = [ols_line(wp[0], wd[0])] * k
    slopes = np.array([sl for sl, _ in lines])
    intercepts = np.array([ic for _, ic in lines])

    return ConcentrationReport(
        weights_pure=wp,
        weights_denoised=wd,
        slopes=slopes,
        intercepts=intercepts,
        mse=float(np.mean((wd - wp) ** 2)),
        component_names=component_names,
    )
