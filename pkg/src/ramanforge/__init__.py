"""ramanforge: simulate, denoise, and evaluate noisy Raman spectra.

The package covers the full loop: a statistically grounded sensor noise
model, synthetic Raman/fluorescence generation scaled to target (r2f, SNR)
conditions, classical denoisers, and quantitative evaluation protocols, all
driven by a deterministic seeded CLI.
"""

from .core import (
    ConvergenceError,
    ExternalToolError,
    FlatRamanError,
    GridMismatchError,
    InsufficientFramesError,
    RngStream,
    Spectrum,
    SpectrumGrid,
    ValidationError,
    ZeroAreaError,
    auc,
    auc_normalize,
    default_grid,
    make_grid,
    sample_gaussian,
    sample_poisson,
)
from .noisemodel import (
    CleanSignal,
    DarkStats,
    GainCurve,
    calibrate,
    estimate_dark_stats,
    estimate_gain,
    sample_noisy_batch,
    sample_noisy_spectrum,
    subtract_dark,
)
from .synth import (
    FluorSpec,
    LabeledExample,
    PeakParams,
    ScaleTargets,
    TargetRanges,
    assemble_example,
    gen_dataset,
    gen_fluorescence,
    gen_pure_raman,
    pseudo_voigt,
    solve_scale,
)
from .classical import (
    ModPolyConfig,
    SGConfig,
    WaveletConfig,
    dct,
    idct,
    modpoly_baseline,
    sg_filter,
    wavelet_denoise,
)
from .evalkit import (
    ConcentrationReport,
    IdentityDenoiser,
    OracleDenoiser,
    PeakMatchReport,
    SnriRecord,
    concentration_analysis,
    detect_peaks,
    match_peaks,
    nnls,
    run_peak_protocol,
    run_snri_protocol,
)
from .skin import SkinBasis, SkinSample, demo_basis, gen_skin, gen_skin_testset, load_basis

__version__ = "0.1.0"
