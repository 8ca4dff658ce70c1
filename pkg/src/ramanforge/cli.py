"""Command-line interface: calibration, simulation, denoising, evaluation,
and plot-data emission.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 external-tool
error.  Every stochastic command takes ``--seed``; worker counts respect the
``RAMANFORGE_THREADS`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import dataio, evalkit, skin as skinmod, synth
from .core import (
    ExternalToolError,
    RngStream,
    Spectrum,
    ValidationError,
    make_grid,
)
from .evalkit import IdentityDenoiser, OracleDenoiser
from .noisemodel import estimate_dark_stats


def _load_dark_sets(paths, grid):
    stats = []
    for p in paths:
        s = dataio.read_dark_stats(p)
        if s.grid != grid:
            raise ValidationError(f"{p}: dark stats grid does not match the dataset grid")
        stats.append(s)
    return stats


def _dark_refs(paths, stats, out_dir):
    refs = []
    for i, (p, s) in enumerate(zip(paths, stats)):
        rel = os.path.relpath(os.path.abspath(p), os.path.abspath(out_dir))
        refs.append({"id": str(i), "file": rel, "integration_time": s.integration_time})
    return refs


def cmd_dark_stats(args) -> int:
    grid, frames = dataio.read_batch(args.frames)
    spectra = [Spectrum(grid, row) for row in frames]
    stats = estimate_dark_stats(spectra, args.itime)
    dataio.write_dark_stats(args.out, stats)
    print(f"wrote {args.out}: {stats.n_frames} frames at {stats.integration_time} s")
    return 0


def _simulate_common(args, kind: str, raman_factory=None, basis_dir: str | None = None) -> int:
    grid = make_grid(*args.grid)
    if not args.dark:
        raise ValidationError("at least one --dark stats file is required (no S_dark=0 fallback)")
    dark_sets = _load_dark_sets(args.dark, grid)
    ranges = synth.TargetRanges(r2f=tuple(args.r2f), snr=tuple(args.snr))

    base = dataio.STREAM_BASES[args.split]
    if kind == "skin":
        base += dataio.SKIN_STREAM_OFFSET
    stream = RngStream(args.seed, base)

    kwargs = {}
    if raman_factory is not None:
        kwargs["raman_factory"] = raman_factory
    examples = synth.gen_dataset(
        args.count, grid, dark_sets, stream,
        target_ranges=ranges, mode=args.mode, **kwargs,
    )

    params = dataio.default_params(ranges, args.mode, kind)
    if basis_dir is not None:
        params["basis_dir"] = basis_dir
    dataio.write_split(
        args.out, args.split, examples, grid,
        root_seed=args.seed, stream_base=base,
        dark_refs=_dark_refs(args.dark, dark_sets, args.out),
        params=params,
    )
    print(f"wrote {args.count} {args.split} examples to {args.out}")
    return 0


def cmd_simulate(args) -> int:
    return _simulate_common(args, kind="raman")


def cmd_simulate_skin(args) -> int:
    grid = make_grid(*args.grid)
    basis = skinmod.load_basis(args.basis, target_grid=grid)
    if basis.grid != grid:
        raise ValidationError("skin basis grid does not match the dataset grid")

    def factory(g, item):
        return skinmod.gen_skin(basis, item).spectrum

    return _simulate_common(args, kind="skin", raman_factory=factory, basis_dir=args.basis)


def cmd_make_basis(args) -> int:
    grid = make_grid(*args.grid)
    basis = skinmod.demo_basis(grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, comp in zip(basis.names, basis.components):
        dataio.write_spectrum(out / f"{name}.csv", comp)
    print(f"wrote {len(basis.names)} component spectra to {out}")
    return 0


def _denoiser_spec_from_args(args) -> str:
    if args.method == "sg":
        return f"sg:half_window={args.half_window},degree={args.degree}"
    if args.method == "wavelet":
        return (
            f"wavelet:family={args.family},levels={args.levels},"
            f"rule={args.rule},scale={args.scale}"
        )
    if args.method == "modpoly":
        return f"modpoly:low={args.order_low},high={args.order_high}"
    if args.method == "external":
        if not args.cmd:
            raise ValidationError("--method external requires --cmd")
        return f"external:{args.cmd}"
    raise ValidationError(f"unknown method {args.method!r}")


def cmd_denoise(args) -> int:
    grid, batch = dataio.read_batch(getattr(args, "in"))
    denoiser = dataio.make_denoiser(_denoiser_spec_from_args(args))
    out = evalkit.apply_denoiser(denoiser, batch, grid)
    dataio.write_batch(args.out, grid, out)
    print(f"denoised {batch.shape[0]} spectra -> {args.out}")
    return 0


def _write_report(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _pick_split(manifest: dict, requested: str | None) -> str:
    splits = manifest["splits"]
    if requested:
        if requested not in splits:
            raise ValidationError(f"manifest has no split {requested!r}")
        return requested
    if "test" in splits:
        return "test"
    if len(splits) == 1:
        return next(iter(splits))
    raise ValidationError(f"choose a split with --split (available: {sorted(splits)})")


def _denoise_split(manifest: dict, split: str, spec: str) -> tuple:
    base = Path(manifest["_base_dir"])
    info = manifest["splits"][split]
    grid, noisy = dataio.read_batch(base / info["files"]["noisy"])
    _, pure = dataio.read_batch(base / info["files"]["pure"])
    denoiser = dataio.make_denoiser(spec)
    if isinstance(denoiser, OracleDenoiser):
        denoised = pure.copy()
    else:
        denoised = evalkit.apply_denoiser(denoiser, noisy, grid)
    return grid, info, noisy, pure, denoised


def cmd_eval_snri(args) -> int:
    manifest = dataio.read_manifest(args.manifest)
    dataio.validate_manifest(manifest)
    grid = dataio._grid_from_json(manifest["grid"], "manifest.grid")
    dark_sets, _ = dataio.load_manifest_dark_sets(manifest)
    seed = args.seed if args.seed is not None else manifest["root_seed"]
    stream = RngStream(seed, dataio.SNRI_STREAM_BASE)
    params = manifest.get("params", {})
    ranges = synth.TargetRanges(
        r2f=tuple(params.get("r2f_range", (0.1, 0.5))),
        snr=tuple(params.get("snr_range", (0.01, 20.0))),
    )
    records = evalkit.run_snri_protocol(
        dataio.make_denoiser(args.denoiser), grid, dark_sets, stream,
        n_pairs=args.pairs, signals_per_pair=args.signals,
        realizations=args.realizations, target_ranges=ranges,
    )
    _write_report(
        args.out,
        {
            "kind": "report",
            "protocol": "snri",
            "denoiser": args.denoiser,
            "pairs": args.pairs,
            "signals_per_pair": args.signals,
            "realizations": args.realizations,
            "seed": seed,
            "records": [
                {"r2f": r.r2f, "snr_old": r.snr_old, "snr_new": r.snr_new, "snri_db": r.snri_db}
                for r in records
            ],
        },
    )
    mean_db = float(np.mean([r.snri_db for r in records]))
    print(f"snri: {len(records)} pairs, mean improvement {mean_db:+.2f} dB -> {args.out}")
    return 0


def cmd_eval_peaks(args) -> int:
    manifest = dataio.read_manifest(args.manifest)
    dataio.validate_manifest(manifest)
    split = _pick_split(manifest, args.split)
    grid, info, noisy, pure, denoised = _denoise_split(manifest, split, args.denoiser)
    levels = [float(p) for p in args.prominences.split(",") if p]
    true_spectra = [Spectrum(grid, row) for row in pure]
    den_spectra = [Spectrum(grid, row) for row in denoised]
    records = evalkit.run_peak_protocol(true_spectra, den_spectra, levels, tol_wn=args.tol_wn)
    _write_report(
        args.out,
        {
            "kind": "report",
            "protocol": "peaks",
            "denoiser": args.denoiser,
            "split": split,
            "tol_wn": args.tol_wn,
            "records": [
                {
                    "prominence": r.prominence,
                    "missing_ratio": r.missing_ratio,
                    "artifact_ratio": r.artifact_ratio,
                    "value_bias": r.value_bias,
                    "shift_mean": r.shift_mean,
                    "n_spectra": r.n_spectra,
                    "n_artifact_defined": r.n_artifact_defined,
                    "n_match_defined": r.n_match_defined,
                }
                for r in records
            ],
        },
    )
    print(f"peaks: {len(records)} prominence levels over {len(true_spectra)} spectra -> {args.out}")
    return 0


def _area_normalize_rows(matrix: np.ndarray, wn: np.ndarray) -> np.ndarray:
    """AUC-normalize each row; rows without positive area stay at raw scale.

    The simulation scales each example by an arbitrary amplitude factor, so
    concentration comparisons are only meaningful after removing it.
    """
    out = np.array(matrix, dtype=np.float64)
    for i, row in enumerate(out):
        area = float(np.trapezoid(row, wn))
        if area > 0:
            out[i] = row / area
    return out


def _band_stats(wp: np.ndarray, wd: np.ndarray, idx: np.ndarray, names) -> dict:
    if idx.sum() == 0:
        return {"count": 0, "mse": None, "slopes": None, "intercepts": None}
    sub_p, sub_d = wp[idx], wd[idx]
    slopes, intercepts = [], []
    for j in range(sub_p.shape[1]):
        sl, ic = evalkit.ols_line(sub_p[:, j], sub_d[:, j])
        slopes.append(sl)
        intercepts.append(ic)
    return {
        "count": int(idx.sum()),
        "mse": float(np.mean((sub_d - sub_p) ** 2)),
        "slopes": slopes,
        "intercepts": intercepts,
    }


def cmd_eval_skin(args) -> int:
    manifest = dataio.read_manifest(args.manifest)
    dataio.validate_manifest(manifest)
    split = _pick_split(manifest, args.split)
    basis_dir = args.basis or manifest.get("params", {}).get("basis_dir")
    if not basis_dir:
        raise ValidationError("no skin basis: pass --basis or use a simulate-skin manifest")
    grid, info, noisy, pure, denoised = _denoise_split(manifest, split, args.denoiser)
    basis = skinmod.load_basis(basis_dir, target_grid=grid)

    matrix = basis.matrix
    wn = grid.wavenumbers
    pure_n = _area_normalize_rows(pure, wn)
    den_n = _area_normalize_rows(denoised, wn)
    wp = np.stack([evalkit.nnls(matrix, row) for row in pure_n])
    wd = np.stack([evalkit.nnls(matrix, row) for row in den_n])
    snr = np.array([rec["snr"] for rec in info["examples"]])

    names = list(basis.names)
    bands = {
        "all": _band_stats(wp, wd, np.ones(len(snr), dtype=bool), names),
        "low": _band_stats(wp, wd, snr <= 7.0, names),
        "high": _band_stats(wp, wd, (snr > 7.0) & (snr <= 20.0), names),
    }
    points = []
    for i in range(wp.shape[0]):
        for j, name in enumerate(names):
            points.append(
                {
                    "component": name,
                    "snr": float(snr[i]),
                    "pure": float(wp[i, j]),
                    "denoised": float(wd[i, j]),
                }
            )
    _write_report(
        args.out,
        {
            "kind": "report",
            "protocol": "skin",
            "denoiser": args.denoiser,
            "split": split,
            "components": names,
            "mse": bands["all"]["mse"],
            "bands": bands,
            "points": points,
        },
    )
    print(f"skin: global MSE {bands['all']['mse']:.6f} over {wp.shape[0]} spectra -> {args.out}")
    return 0


def _plot_csv(report: dict, out: Path) -> None:
    rows: list[str] = []
    if report["protocol"] == "snri":
        rows.append("r2f,snr_old,snr_new,snri_db")
        for r in report["records"]:
            rows.append(f"{r['r2f']},{r['snr_old']},{r['snr_new']},{r['snri_db']}")
    elif report["protocol"] == "peaks":
        rows.append("prominence,missing_ratio,artifact_ratio,value_bias,shift_mean")
        for r in report["records"]:
            rows.append(
                f"{r['prominence']},{r['missing_ratio']},{r['artifact_ratio']},"
                f"{r['value_bias']},{r['shift_mean']}"
            )
    elif report["protocol"] == "skin":
        slopes = dict(zip(report["components"], report["bands"]["all"]["slopes"]))
        icpts = dict(zip(report["components"], report["bands"]["all"]["intercepts"]))
        rows.append("component,snr,pure,denoised,fit_slope,fit_intercept")
        for p in report["points"]:
            c = p["component"]
            rows.append(f"{c},{p['snr']},{p['pure']},{p['denoised']},{slopes[c]},{icpts[c]}")
    else:
        raise ValidationError(f"cannot plot protocol {report['protocol']!r}")
    out.write_text("\n".join(rows) + "\n", encoding="utf-8")


def _plot_svg(report: dict, out: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if report["protocol"] == "snri":
        recs = report["records"]
        fig, ax = plt.subplots(figsize=(6, 4.5))
        sc = ax.scatter(
            [r["r2f"] for r in recs],
            [r["snr_old"] for r in recs],
            c=[r["snri_db"] for r in recs],
            cmap="viridis",
            s=14,
        )
        ax.set_xlabel("r2f")
        ax.set_ylabel("SNR before denoising")
        ax.set_yscale("log")
        fig.colorbar(sc, label="SNR improvement (dB)")
        ax.set_title(f"SNR improvement: {report['denoiser']}")
    elif report["protocol"] == "peaks":
        recs = report["records"]
        prom = [r["prominence"] for r in recs]
        fig, axes = plt.subplots(1, 2, figsize=(9, 4))
        axes[0].plot(prom, [r["missing_ratio"] for r in recs], "o-", label="missing")
        axes[0].plot(prom, [r["artifact_ratio"] for r in recs], "s-", label="artifact")
        axes[0].set_xlabel("prominence (fraction of max)")
        axes[0].set_ylabel("ratio")
        axes[0].legend()
        axes[1].plot(prom, [r["value_bias"] for r in recs], "o-", label="value bias")
        axes[1].plot(prom, [r["shift_mean"] for r in recs], "s-", label="shift (cm$^{-1}$)")
        axes[1].set_xlabel("prominence (fraction of max)")
        axes[1].legend()
        fig.suptitle(f"Peak recovery: {report['denoiser']}")
    elif report["protocol"] == "skin":
        names = report["components"]
        fig, axes = plt.subplots(1, len(names), figsize=(3 * len(names), 3), sharey=True)
        slopes = report["bands"]["all"]["slopes"]
        icpts = report["bands"]["all"]["intercepts"]
        for j, (ax, name) in enumerate(zip(np.atleast_1d(axes), names)):
            xs = [p["pure"] for p in report["points"] if p["component"] == name]
            ys = [p["denoised"] for p in report["points"] if p["component"] == name]
            ax.scatter(xs, ys, s=6, alpha=0.5)
            lim = max(xs + ys + [1e-9])
            ax.plot([0, lim], [0, lim], "k--", lw=0.8)
            ax.plot([0, lim], [icpts[j], icpts[j] + slopes[j] * lim], "r-", lw=1.0)
            ax.set_title(name, fontsize=9)
            ax.set_xlabel("from clean")
        np.atleast_1d(axes)[0].set_ylabel("from denoised")
        fig.suptitle(f"Concentrations: {report['denoiser']} (MSE={report['mse']:.4g})")
    else:
        raise ValidationError(f"cannot plot protocol {report['protocol']!r}")
    fig.tight_layout()
    fig.savefig(out, format="svg")
    plt.close(fig)


def cmd_plot(args) -> int:
    path = Path(args.report)
    try:
        report = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: invalid JSON: {e}") from e
    if report.get("kind") != "report" or "protocol" not in report:
        raise ValidationError(f"{path}: not an evaluation report")
    out = Path(args.out)
    if out.suffix.lower() == ".csv":
        _plot_csv(report, out)
    elif out.suffix.lower() == ".svg":
        _plot_svg(report, out)
    else:
        raise ValidationError(f"unsupported plot output {out.suffix!r}; use .csv or .svg")
    print(f"wrote {out}")
    return 0


def _add_grid_args(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--grid",
        nargs=3,
        type=float,
        default=[600.0, 1790.0, 693],
        metavar=("START", "END", "N"),
        help="wavenumber grid (default: 600 1790 693)",
    )


def _add_simulate_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--split", choices=dataio.SPLIT_NAMES, required=True)
    p.add_argument("--dark", action="append", default=[], help="dark stats JSON (repeatable)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--r2f", nargs=2, type=float, default=[0.1, 0.5], metavar=("LO", "HI"))
    p.add_argument("--snr", nargs=2, type=float, default=[0.01, 20.0], metavar=("LO", "HI"))
    p.add_argument("--mode", choices=["gaussian", "exact"], default="gaussian")
    _add_grid_args(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ramanforge",
        description="Simulate, denoise and evaluate noisy Raman spectra.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dark-stats", help="summarize dark frames into mean/variance stats")
    p.add_argument("--frames", required=True, help="batch CSV of dark frames")
    p.add_argument("--itime", type=float, required=True, help="integration time in seconds")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dark_stats)

    p = sub.add_parser("simulate", help="generate a labeled synthetic dataset split")
    _add_simulate_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("simulate-skin", help="generate a skin-mixture dataset split")
    _add_simulate_args(p)
    p.add_argument("--basis", required=True, help="directory of component spectra CSVs")
    p.set_defaults(func=cmd_simulate_skin)

    p = sub.add_parser("make-basis", help="write the synthetic demo skin basis")
    p.add_argument("--out", required=True)
    _add_grid_args(p)
    p.set_defaults(func=cmd_make_basis)

    p = sub.add_parser("denoise", help="denoise a batch CSV")
    p.add_argument("--method", choices=["sg", "wavelet", "modpoly", "external"], required=True)
    p.add_argument("--in", dest="in", required=True, metavar="BATCH")
    p.add_argument("--out", required=True)
    p.add_argument("--half-window", type=int, default=5)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--family", default="db4")
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--rule", choices=["soft", "hard"], default="soft")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--order-low", type=int, default=3)
    p.add_argument("--order-high", type=int, default=6)
    p.add_argument("--cmd", default=None, help="external tool command line")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("eval", help="run an evaluation protocol")
    esub = p.add_subparsers(dest="protocol", required=True)

    e = esub.add_parser("snri", help="SNR-improvement sweep")
    e.add_argument("--manifest", required=True)
    e.add_argument("--denoiser", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--pairs", type=int, default=500)
    e.add_argument("--signals", type=int, default=5)
    e.add_argument("--realizations", type=int, default=10)
    e.add_argument("--seed", type=int, default=None)
    e.set_defaults(func=cmd_eval_snri)

    e = esub.add_parser("peaks", help="peak-recovery metrics vs prominence")
    e.add_argument("--manifest", required=True)
    e.add_argument("--denoiser", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--split", default=None)
    e.add_argument("--prominences", default="0.02,0.05,0.1,0.2,0.4")
    e.add_argument("--tol-wn", type=float, default=6.0)
    e.set_defaults(func=cmd_eval_peaks)

    e = esub.add_parser("skin", help="NNLS concentration recovery")
    e.add_argument("--manifest", required=True)
    e.add_argument("--denoiser", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--split", default=None)
    e.add_argument("--basis", default=None, help="override the manifest basis directory")
    e.set_defaults(func=cmd_eval_skin)

    p = sub.add_parser("plot", help="emit plot data (CSV) or a static SVG from a report")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ExternalToolError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except evalkit.DenoiserError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
