"""Simulated human-skin spectra: random non-negative mixtures of seven
area-normalized component spectra.

Real component measurements are user-supplied data; the module ships a
synthetic stand-in basis (distinct pseudo-Voigt signatures per component) so
the whole pipeline runs out of the box.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import (
    RngStream,
    Spectrum,
    SpectrumGrid,
    ValidationError,
    ZeroAreaError,
    auc,
    auc_normalize,
    default_grid,
)
from .noisemodel import DarkStats
from .synth import LabeledExample, PeakParams, TargetRanges, gen_dataset, pseudo_voigt

COMPONENT_NAMES = ("water", "ceramide", "keratin", "nucleus", "triolein", "elastin", "collagen")

AUC_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SkinBasis:
    """Seven named, AUC-normalized component spectra on a shared grid."""

    grid: SpectrumGrid
    names: tuple[str, ...]
    components: tuple[Spectrum, ...]

    def __post_init__(self):
        if len(self.components) != len(COMPONENT_NAMES) or len(self.names) != len(self.components):
            raise ValidationError(f"a skin basis needs exactly {len(COMPONENT_NAMES)} components")
        for name, comp in zip(self.names, self.components):
            if comp.grid != self.grid:
                raise ValidationError(f"component {name!r} is on a different grid")
            if abs(auc(comp) - 1.0) > AUC_TOL:
                raise ValidationError(f"component {name!r} is not AUC-normalized")

    @property
    def matrix(self) -> np.ndarray:
        """(n_points, 7) column matrix of the components."""
        return np.column_stack([c.values for c in self.components])


@dataclass(frozen=True, eq=False)
class SkinSample:
    """One random mixture and the weights that produced it."""

    weights: np.ndarray
    spectrum: Spectrum

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (len(COMPONENT_NAMES),):
            raise ValidationError("weights must be a 7-vector")
        if np.any(w < 0) or np.any(w > 1):
            raise ValidationError("weights must lie in [0, 1]")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def _resample(s: Spectrum, target: SpectrumGrid) -> Spectrum:
    src = s.grid
    if src == target:
        return s
    if src.start_wn > target.start_wn or src.end_wn < target.end_wn:
        raise ValidationError(
            f"component grid [{src.start_wn}, {src.end_wn}] does not cover the "
            f"target range [{target.start_wn}, {target.end_wn}]"
        )
    values = np.interp(target.wavenumbers, src.wavenumbers, s.values)
    return Spectrum(target, values)


def load_basis(
    files: Mapping[str, str | Path] | str | Path,
    target_grid: SpectrumGrid | None = None,
) -> SkinBasis:
    """Load the seven component spectra and AUC-normalize them.

    ``files`` is either a name->path mapping or a directory containing
    ``<name>.csv`` for every component.  Components on differing grids are
    linearly resampled onto the default 693-point grid (or ``target_grid``).
    """
    from . import dataio  # deferred: dataio imports skin types for the CLI

    if isinstance(files, (str, Path)):
        root = Path(files)
        files = {name: root / f"{name}.csv" for name in COMPONENT_NAMES}
    missing = [name for name in COMPONENT_NAMES if name not in files]
    if missing:
        raise ValidationError(f"missing skin components: {', '.join(missing)}")

    raw: dict[str, Spectrum] = {}
    for name in COMPONENT_NAMES:
        path = Path(files[name])
        if not path.exists():
            raise ValidationError(f"missing skin component file: {path}")
        raw[name] = dataio.read_spectrum(path)

    grids = {s.grid for s in raw.values()}
    if len(grids) == 1 and target_grid is None:
        grid = next(iter(grids))
    else:
        grid = target_grid or default_grid()
        raw = {name: _resample(s, grid) for name, s in raw.items()}

    components = []
    for name in COMPONENT_NAMES:
        if auc(raw[name]) <= 0:
            raise ZeroAreaError(f"component {name!r} has zero or negative area")
        components.append(auc_normalize(raw[name]))
    return SkinBasis(grid=grid, names=COMPONENT_NAMES, components=tuple(components))


def mix_components(basis: SkinBasis, weights: Sequence[float]) -> Spectrum:
    """Deterministic weighted mixture of the basis components."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (len(COMPONENT_NAMES),):
        raise ValidationError("weights must be a 7-vector")
    return Spectrum(basis.grid, basis.matrix @ w)


def gen_skin(basis: SkinBasis, stream: RngStream) -> SkinSample:
    """Mixture with seven i.i.d. U(0, 1) weights."""
    weights = stream.generator.random(len(COMPONENT_NAMES))
    return SkinSample(weights=weights, spectrum=mix_components(basis, weights))


def gen_skin_testset(
    basis: SkinBasis,
    count: int,
    stream: RngStream,
    dark_sets: Sequence[DarkStats],
    target_ranges: TargetRanges | None = None,
    mode: str = "gaussian",
    n_workers: int | None = None,
) -> list[LabeledExample]:
    """Labeled examples whose clean Raman signal is a random skin mixture."""

    def factory(grid: SpectrumGrid, item: RngStream) -> Spectrum:
        return gen_skin(basis, item).spectrum

    return gen_dataset(
        count,
        basis.grid,
        dark_sets,
        stream,
        target_ranges=target_ranges,
        raman_factory=factory,
        mode=mode,
        n_workers=n_workers,
    )


# Stand-in component signatures: (center cm^-1, FWHM cm^-1, mix, amplitude).
# Band positions are generic literature values for the respective tissue
# constituents; they exist to give the pipeline seven smooth, linearly
# independent shapes, not to reproduce any measured dataset.
_DEMO_SIGNATURES: dict[str, tuple[tuple[float, float, float, float], ...]] = {
    "water": ((1640.0, 180.0, 0.2, 1.0),),
    "ceramide": ((1062.0, 18.0, 0.6, 0.7), (1130.0, 20.0, 0.5, 0.6), (1296.0, 22.0, 0.6, 1.0), (1440.0, 40.0, 0.4, 0.9)),
    "keratin": ((1003.0, 12.0, 0.8, 0.8), (1250.0, 60.0, 0.3, 0.7), (1450.0, 45.0, 0.4, 0.9), (1655.0, 50.0, 0.4, 1.0)),
    "nucleus": ((785.0, 20.0, 0.7, 0.9), (1090.0, 28.0, 0.5, 0.8), (1375.0, 35.0, 0.5, 0.5), (1575.0, 30.0, 0.6, 0.7)),
    "triolein": ((1078.0, 24.0, 0.5, 0.6), (1267.0, 24.0, 0.6, 0.7), (1302.0, 20.0, 0.7, 1.0), (1442.0, 32.0, 0.5, 0.95), (1655.0, 28.0, 0.6, 0.65), (1747.0, 26.0, 0.5, 0.55)),
    "elastin": ((1004.0, 14.0, 0.7, 0.5), (1104.0, 30.0, 0.4, 0.6), (1254.0, 45.0, 0.4, 0.75), (1450.0, 42.0, 0.45, 0.85), (1664.0, 46.0, 0.4, 0.9)),
    "collagen": ((856.0, 18.0, 0.7, 0.85), (938.0, 20.0, 0.6, 0.8), (1246.0, 40.0, 0.45, 0.9), (1270.0, 26.0, 0.55, 0.7), (1448.0, 38.0, 0.45, 0.8), (1668.0, 42.0, 0.45, 1.0)),
}


def demo_basis(grid: SpectrumGrid | None = None) -> SkinBasis:
    """Deterministic synthetic basis standing in for measured component spectra."""
    grid = grid or default_grid()
    components = []
    for name in COMPONENT_NAMES:
        total = np.zeros(grid.n_points)
        for center, fwhm, mix, amplitude in _DEMO_SIGNATURES[name]:
            peak = PeakParams.from_fwhm(center, fwhm, mix, amplitude)
            total += pseudo_voigt(grid, peak).values
        components.append(auc_normalize(Spectrum(grid, total)))
    return SkinBasis(grid=grid, names=COMPONENT_NAMES, components=tuple(components))
