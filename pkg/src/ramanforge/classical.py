"""Classical comparators: Savitzky-Golay smoothing, wavelet threshold
denoising, iterative masked-polynomial baseline removal, and the orthonormal
DCT pair shared with the learned pipeline.

Array-level functions operate along the last axis so batches denoise in one
call; thin wrappers lift them to :class:`Spectrum`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .core import Spectrum, ValidationError


# ---------------------------------------------------------------------------
# Savitzky-Golay


@dataclass(frozen=True)
class SGConfig:
    """Moving least-squares polynomial smoother of window 2*half_window + 1."""

    half_window: int
    degree: int

    def __post_init__(self):
        if self.half_window < 0:
            raise ValidationError("half_window must be >= 0")
        if self.degree < 0:
            raise ValidationError("degree must be >= 0")
        if self.degree >= 2 * self.half_window + 1:
            raise ValidationError(
                f"degree {self.degree} needs a window larger than "
                f"{2 * self.half_window + 1} points"
            )


def _poly_smooth_weights(offsets: np.ndarray, degree: int) -> np.ndarray:
    """Weights w with w.y = value at offset 0 of the degree-d LS fit to y.

    The fit is evaluated in a Legendre basis on offsets scaled to [-1, 1];
    the weights are basis-independent but the plain-power Vandermonde is
    hopelessly conditioned beyond degree ~10.
    """
    offsets = offsets.astype(np.float64)
    center = 0.5 * (offsets.min() + offsets.max())
    half = max(0.5 * (offsets.max() - offsets.min()), 1.0)
    t = (offsets - center) / half
    v = np.polynomial.legendre.legvander(t, degree)
    at_zero = np.polynomial.legendre.legvander(np.array([-center / half]), degree)
    return (at_zero @ np.linalg.pinv(v))[0]


def sg_coefficients(half_window: int, degree: int) -> np.ndarray:
    """Central convolution coefficients for the interior of the signal."""
    cfg = SGConfig(half_window, degree)
    offsets = np.arange(-cfg.half_window, cfg.half_window + 1)
    return _poly_smooth_weights(offsets, cfg.degree)


def sg_filter_values(values: np.ndarray, cfg: SGConfig) -> np.ndarray:
    """Apply the smoother along the last axis.

    Near the boundaries the window is truncated to the available samples and
    the polynomial refitted there, so output length equals input length and
    polynomials up to the configured degree pass through unchanged.
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[-1]
    m = cfg.half_window
    window = 2 * m + 1
    if window > n:
        raise ValidationError(f"window of {window} points exceeds signal length {n}")

    out = np.empty_like(values)
    central = sg_coefficients(m, cfg.degree)
    if m == 0:
        return values.copy()
    sliding = np.lib.stride_tricks.sliding_window_view(values, window, axis=-1)
    out[..., m : n - m] = sliding @ central
    for i in range(m):
        left = _poly_smooth_weights(np.arange(0, i + m + 1) - i, cfg.degree)
        out[..., i] = values[..., : i + m + 1] @ left
        j = n - 1 - i
        right = _poly_smooth_weights(np.arange(j - m, n) - j, cfg.degree)
        out[..., j] = values[..., j - m :] @ right
    return out


def sg_filter(s: Spectrum, cfg: SGConfig) -> Spectrum:
    return s.with_values(sg_filter_values(s.values, cfg))


# ---------------------------------------------------------------------------
# Wavelet denoising

_SQRT3 = math.sqrt(3.0)
_DENOM = 4.0 * math.sqrt(2.0)

# Orthonormal scaling (lowpass analysis) filters.  "db4" is the 8-tap
# Daubechies filter with four vanishing moments.
WAVELET_FAMILIES: dict[str, np.ndarray] = {
    "haar": np.array([1.0, 1.0]) / math.sqrt(2.0),
    "db2": np.array([1.0 + _SQRT3, 3.0 + _SQRT3, 3.0 - _SQRT3, 1.0 - _SQRT3]) / _DENOM,
    "db4": np.array(
        [
            0.23037781330885523,
            0.7148465705525415,
            0.6308807679295904,
            -0.027983769416983849,
            -0.18703481171888114,
            0.030841381835986965,
            0.032883011666982945,
            -0.010597401784997278,
        ]
    ),
}


@dataclass(frozen=True)
class WaveletConfig:
    family: str = "db4"
    levels: int = 4
    threshold_rule: str = "soft"
    threshold_scale: float = 1.0

    def __post_init__(self):
        if self.family not in WAVELET_FAMILIES:
            raise ValidationError(
                f"unknown wavelet family {self.family!r}; choose from {sorted(WAVELET_FAMILIES)}"
            )
        if self.levels < 1:
            raise ValidationError("levels must be >= 1")
        if self.threshold_rule not in ("soft", "hard"):
            raise ValidationError("threshold_rule must be 'soft' or 'hard'")
        if self.threshold_scale < 0:
            raise ValidationError("threshold_scale must be >= 0")


def _highpass(h: np.ndarray) -> np.ndarray:
    g = h[::-1].copy()
    g[1::2] *= -1.0
    return g


def _dwt_level(x: np.ndarray, h: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Circular analysis: a[k] = sum_n h[n] x[(2k+n) mod N].  Orthonormal for
    # even N >= len(h), which the level cap guarantees.
    n = x.shape[-1]
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(len(h))[None, :]) % n
    windows = x[..., idx]
    return windows @ h, windows @ g


def _idwt_level(a: np.ndarray, d: np.ndarray, h: np.ndarray, g: np.ndarray) -> np.ndarray:
    # Transpose of the analysis operator; equals its inverse by orthogonality.
    n = 2 * a.shape[-1]
    y = np.zeros(a.shape[:-1] + (n,))
    base = 2 * np.arange(n // 2)
    for tap in range(len(h)):
        pos = (base + tap) % n
        y[..., pos] += h[tap] * a + g[tap] * d
    return y


def max_wavelet_levels(length: int, family: str = "db4") -> int:
    """Deepest decomposition that keeps every level at least one filter long."""
    flen = len(WAVELET_FAMILIES[family])
    levels = 0
    while length % 2 == 0 and length // 2 >= flen:
        length //= 2
        levels += 1
    return levels


def wavelet_denoise_values(values: np.ndarray, cfg: WaveletConfig) -> np.ndarray:
    """Universal-threshold wavelet shrinkage along the last axis.

    The signal is symmetric-padded to the next power of two, decomposed
    `levels` deep, detail coefficients are thresholded at
    ``threshold_scale * sigma * sqrt(2 ln N)`` with the noise scale sigma
    estimated from the median absolute level-1 detail, and the result is
    reconstructed and cropped back to the original length.
    """
    values = np.asarray(values, dtype=np.float64)
    n0 = values.shape[-1]
    if n0 < 2:
        raise ValidationError("signal too short for wavelet denoising")
    padded_len = 1 << math.ceil(math.log2(n0))
    if cfg.levels > max_wavelet_levels(padded_len, cfg.family):
        raise ValidationError(
            f"levels={cfg.levels} too deep for padded length {padded_len} "
            f"with family {cfg.family!r} (max {max_wavelet_levels(padded_len, cfg.family)})"
        )

    pad = padded_len - n0
    left = pad // 2
    pad_spec = [(0, 0)] * (values.ndim - 1) + [(left, pad - left)]
    x = np.pad(values, pad_spec, mode="symmetric") if pad else values.copy()

    h = WAVELET_FAMILIES[cfg.family]
    g = _highpass(h)
    details = []
    approx = x
    for _ in range(cfg.levels):
        approx, d = _dwt_level(approx, h, g)
        details.append(d)

    sigma = np.median(np.abs(details[0]), axis=-1, keepdims=True) / 0.6745
    tau = cfg.threshold_scale * sigma * math.sqrt(2.0 * math.log(padded_len))
    for i, d in enumerate(details):
        if cfg.threshold_rule == "soft":
            details[i] = np.sign(d) * np.maximum(np.abs(d) - tau, 0.0)
        else:
            details[i] = np.where(np.abs(d) >= tau, d, 0.0)

    for d in reversed(details):
        approx = _idwt_level(approx, d, h, g)
    return approx[..., left : left + n0]


def wavelet_denoise(s: Spectrum, cfg: WaveletConfig) -> Spectrum:
    return s.with_values(wavelet_denoise_values(s.values, cfg))


# ---------------------------------------------------------------------------
# ModPoly baseline removal


@dataclass(frozen=True)
class ModPolyConfig:
    """Iterative masked polynomial baseline fit over a range of orders."""

    order_range: tuple[int, int] = (3, 6)
    max_iters: int = 100
    tol: float = 1e-6

    def __post_init__(self):
        lo, hi = self.order_range
        if not 0 <= lo <= hi:
            raise ValidationError(f"invalid order range [{lo}, {hi}]")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")
        if self.tol <= 0:
            raise ValidationError("tol must be positive")


def _modpoly_single_order(
    values: np.ndarray, x: np.ndarray, order: int, max_iters: int, tol: float
) -> np.ndarray:
    y = values.copy()
    prev_norm = None
    baseline = y
    for _ in range(max_iters):
        coeffs = np.polynomial.polynomial.polyfit(x, y, order)
        baseline = np.polynomial.polynomial.polyval(x, coeffs)
        y = np.minimum(y, baseline)  # clamp peaks so the next fit ignores them
        norm = float(np.linalg.norm(y - baseline))
        if prev_norm is not None and abs(norm - prev_norm) <= tol * max(prev_norm, 1e-300):
            break
        prev_norm = norm
    return baseline


def modpoly_baseline_values(
    values: np.ndarray, x: np.ndarray | None = None, cfg: ModPolyConfig = ModPolyConfig()
) -> tuple[np.ndarray, np.ndarray]:
    """Estimate and remove a smooth baseline from a single signal.

    Each candidate order is fit iteratively, clamping the working signal to
    the fit wherever it pokes above (peaks).  The winning order minimizes
    the RMS residual on the points the signal does not exceed its final
    baseline, so sharp peaks cannot reward an overfit baseline.
    Returns ``(baseline, corrected)``.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ValidationError("modpoly operates on a single spectrum")
    if x is None:
        x = np.linspace(-1.0, 1.0, values.size)

    best_baseline = None
    best_score = math.inf
    for order in range(cfg.order_range[0], cfg.order_range[1] + 1):
        baseline = _modpoly_single_order(values, x, order, cfg.max_iters, cfg.tol)
        off_peak = values <= baseline
        if np.any(off_peak):
            resid = values[off_peak] - baseline[off_peak]
            score = float(np.sqrt(np.mean(resid**2)))
        else:
            score = math.inf
        if score < best_score:
            best_score = score
            best_baseline = baseline
    assert best_baseline is not None
    return best_baseline, values - best_baseline


def modpoly_baseline(s: Spectrum, cfg: ModPolyConfig = ModPolyConfig()) -> tuple[Spectrum, Spectrum]:
    wn = s.grid.wavenumbers
    x = 2.0 * (wn - wn[0]) / (wn[-1] - wn[0]) - 1.0  # [-1, 1] for conditioning
    baseline, corrected = modpoly_baseline_values(s.values, x, cfg)
    return s.with_values(baseline), s.with_values(corrected)


# ---------------------------------------------------------------------------
# DCT pair (orthonormal type-II / type-III)


def dct(values: np.ndarray) -> np.ndarray:
    """Orthonormal DCT-II along the last axis."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-1] == 0:
        raise ValidationError("cannot transform an empty signal")
    return scipy.fft.dct(values, type=2, norm="ortho", axis=-1)


def idct(coefficients: np.ndarray) -> np.ndarray:
    """Inverse of :func:`dct` (orthonormal DCT-III)."""
    coefficients = np.asarray(coefficients, dtype=np.float64)
    if coefficients.shape[-1] == 0:
        raise ValidationError("cannot transform an empty signal")
    return scipy.fft.idct(coefficients, type=2, norm="ortho", axis=-1)
