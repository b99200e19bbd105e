"""Command-line front end: analyze records, synthesize test data, and emit
theory curves. All outputs are CSV plus a manifest for reproducibility.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import (alpha_for_unit_kappa, equivalent_filters,
                       flat_spectrum_gamma, kappa_bounds, kappa_mu)
from .datagen import SyntheticSpec, gen_synthetic
from .dbmt_em import DbmtConfig, dbmt_spectrogram
from .logdbmt_em import logdbmt_spectrogram
from .lgss import StateSpaceModel
from .mtm import MtConfig, mt_spectrogram
from .spectrogram import Spectrogram
from .tapers import compute_dpss

__all__ = ["main"]

_FMT = "%.17g"


class InputError(Exception):
    pass


def _write_csv(path: Path, arr, header: str = "") -> None:
    arr = np.atleast_2d(np.asarray(arr))
    np.savetxt(path, arr, fmt=_FMT, delimiter=",",
               header=header, comments="")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _write_manifest(outdir: Path, inputs, method, config, seed, t0) -> None:
    artifacts = {
        p.name: _sha256(p) for p in sorted(outdir.iterdir())
        if p.name != "manifest.json"
    }
    manifest = {
        "inputs": [str(p) for p in inputs],
        "method": method,
        "config": config,
        "seed": seed,
        "artifacts": artifacts,
        "versions": {
            "dbmt": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "wall_clock_sec": time.time() - t0,
    }
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n"
    )


def _read_record(path: Path):
    if not path.exists():
        raise InputError(f"input file not found: {path}")
    t, y = [], []
    with open(path) as fh:
        header = fh.readline()
        if header.strip().replace(" ", "") != "t,y":
            raise InputError(f"{path}:1: expected header 't,y'")
        for ln, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise InputError(f"{path}:{ln}: expected two fields")
            try:
                t.append(float(parts[0]))
                y.append(float(parts[1]))
            except ValueError:
                raise InputError(f"{path}:{ln}: non-numeric value")
    if len(y) < 2:
        raise InputError(f"{path}: record needs at least two samples")
    t = np.asarray(t)
    dt = np.diff(t)
    if dt.min() <= 0 or (dt.max() - dt.min()) > 1e-6 * dt.mean():
        raise InputError(f"{path}: sampling is not uniform")
    return 1.0 / dt.mean(), np.asarray(y)


def _emit_spectrogram(outdir: Path, spg: Spectrogram, db: bool) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(outdir / "spectrogram.csv", spg.power)
    _write_csv(outdir / "ci_lo.csv", spg.ci_lo)
    _write_csv(outdir / "ci_hi.csv", spg.ci_hi)
    _write_csv(outdir / "freqs.csv", spg.freqs_hz.reshape(1, -1))
    _write_csv(outdir / "times.csv", spg.times.reshape(1, -1))
    if db:
        _write_csv(outdir / "spectrogram_db.csv",
                   10.0 * np.log10(np.maximum(spg.power, 1e-300)))


def cmd_analyze(args) -> int:
    t0 = time.time()
    fs, y = _read_record(Path(args.input))
    W = int(round(args.window_sec * fs))
    B = args.time_bandwidth / W
    J = args.grid if args.grid else W
    if args.method in ("dbmt", "logdbmt") and args.overlap is not None:
        raise InputError("--overlap applies only to --method mt")
    if args.method == "dbmt" and args.sigma2 is None:
        raise InputError("--sigma2 is required for --method dbmt")
    outdir = Path(args.out)
    if args.method == "mt":
        cfg = MtConfig(W=W, B=B, K=args.tapers, J=J,
                       overlap=0.5 if args.overlap is None else args.overlap,
                       ci_level=args.ci)
        spg = mt_spectrogram(y, cfg, sample_rate=fs)
        config = vars(cfg).copy()
    else:
        cfg = DbmtConfig(
            W=W, B=B, K=args.tapers, J=J,
            sigma2=args.sigma2 if args.sigma2 is not None else 1.0,
            tol=args.tol, L_max=args.max_iter, ci_level=args.ci,
            rng_seed=args.seed,
        )
        if args.method == "dbmt":
            spg = dbmt_spectrogram(y, fs, cfg)
        else:
            spg = logdbmt_spectrogram(y, fs, cfg)
        config = vars(cfg).copy()
    _emit_spectrogram(outdir, spg, args.db)
    _write_manifest(outdir, [Path(args.input)], args.method, config,
                    args.seed, t0)
    return 0


def cmd_synth(args) -> int:
    t0 = time.time()
    spec = SyntheticSpec(
        sample_rate=args.sample_rate, duration=args.duration, f0=args.f0,
        ar_center_hz=args.ar_center, ar_radius=args.ar_radius,
        fm_start_hz=args.fm_start, fm_step_hz=args.fm_step,
        step_period_s=args.step_period, arma_radius=args.arma_radius,
        snr_db=args.snr_db, rng_seed=args.seed,
    )
    t, y, gt = gen_synthetic(spec, window_sec=args.window_sec)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(outdir / "synth.csv", np.column_stack([t, y]), header="t,y")
    _write_csv(outdir / "ground_truth.csv", gt.psd)
    _write_csv(outdir / "gt_freqs.csv", gt.freqs_hz.reshape(1, -1))
    _write_csv(outdir / "gt_times.csv", gt.times.reshape(1, -1))
    _write_manifest(outdir, [], "synth",
                    {k: v for k, v in vars(spec).items()}, args.seed, t0)
    return 0


def _parse_grid(text: str, geometric: bool = False) -> np.ndarray:
    parts = text.split(":")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise InputError(f"bad grid spec: {text!r}")
    if len(vals) == 1:
        return np.array(vals)
    if len(vals) == 2:
        lo, hi = vals
        if lo <= 0 and geometric:
            raise InputError("geometric grid needs positive endpoints")
        if not lo < hi:
            raise InputError(f"bad grid spec: {text!r}")
        return np.geomspace(lo, hi, 50) if geometric else np.linspace(lo, hi, 50)
    if len(vals) == 3:
        lo, hi, step = vals
        if step <= 0 or not lo <= hi:
            raise InputError(f"bad grid spec: {text!r}")
        return np.arange(lo, hi + 0.5 * step, step)
    raise InputError(f"bad grid spec: {text!r}")


def cmd_theory(args) -> int:
    t0 = time.time()
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    N, n, W = args.N, args.n, args.W

    def curve_rows(params, values):
        return np.column_stack([params, values])

    if args.curve in ("kappa", "mu", "bounds"):
        alphas = _parse_grid(args.alpha_grid)
        alphas = alphas[(alphas > 0) & (alphas < 1)]
        ks, ms, los, his = [], [], [], []
        for a in alphas:
            _, g, _ = flat_spectrum_gamma(a, args.q_over_sigma2, W)
            k, m = kappa_mu(g, a, n, N)
            ks.append(k)
            ms.append(m)
            if args.curve == "bounds":
                lo, hi = kappa_bounds(g, a, n, N)
                los.append(lo)
                his.append(hi)
        if args.curve == "kappa":
            _write_csv(outdir / "kappa.csv", curve_rows(alphas, ks),
                       header="param,value")
        elif args.curve == "mu":
            _write_csv(outdir / "mu.csv", curve_rows(alphas, ms),
                       header="param,value")
        else:
            _write_csv(outdir / "kappa.csv", curve_rows(alphas, ks),
                       header="param,value")
            _write_csv(outdir / "lower.csv", curve_rows(alphas, los),
                       header="param,value")
            _write_csv(outdir / "upper.csv", curve_rows(alphas, his),
                       header="param,value")
    elif args.curve == "alpha-star":
        qs = _parse_grid(args.q_grid, geometric=True)
        stars = [alpha_for_unit_kappa(q, n, N, W)[0] for q in qs]
        _write_csv(outdir / "alpha_star.csv", curve_rows(qs, stars),
                   header="param,value")
    elif args.curve == "filters":
        q = args.q_over_sigma2 * args.sigma2
        model = StateSpaceModel(alpha=args.alpha, q=q, sigma2=args.sigma2,
                                W=W, J=args.grid if args.grid else W)
        taps = compute_dpss(W, args.time_bandwidth / W, args.tapers)
        filt = equivalent_filters(model, taps, n, N)
        # per-(taper, frequency) filter energy profile across windows
        prof = np.abs(filt.reshape(taps.K, model.J, N, W)) ** 2
        gain = prof.sum(axis=3)
        for k in range(taps.K):
            _write_csv(outdir / f"filter_gain_taper{k}.csv", gain[k])
    else:
        raise InputError(f"unknown curve {args.curve!r}")
    _write_manifest(outdir, [], f"theory-{args.curve}",
                    {k: v for k, v in vars(args).items() if k != "func"},
                    0, t0)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dbmt",
        description="dynamic Bayesian multitaper spectral analysis",
    )
    sub = p.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="estimate a spectrogram from a CSV record")
    pa.add_argument("input", help="CSV with header t,y")
    pa.add_argument("--method", choices=["dbmt", "logdbmt", "mt"], required=True)
    pa.add_argument("--window-sec", type=float, default=6.0)
    pa.add_argument("--time-bandwidth", type=float, default=3.0)
    pa.add_argument("--tapers", type=int, default=3)
    pa.add_argument("--grid", type=int, default=None,
                    help="frequency bins J (default: window length)")
    pa.add_argument("--sigma2", type=float, default=None)
    pa.add_argument("--overlap", type=float, default=None)
    pa.add_argument("--tol", type=float, default=1e-6)
    pa.add_argument("--max-iter", type=int, default=50)
    pa.add_argument("--ci", type=float, default=0.95)
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--db", action="store_true",
                    help="also write a 10 log10 display export")
    pa.add_argument("--out", default="analyze_out")
    pa.set_defaults(func=cmd_analyze)

    ps = sub.add_parser("synth", help="generate the synthetic test process")
    ps.add_argument("--sample-rate", type=float, default=50.0)
    ps.add_argument("--duration", type=float, default=600.0)
    ps.add_argument("--f0", type=float, default=0.02)
    ps.add_argument("--ar-center", type=float, default=11.0)
    ps.add_argument("--ar-radius", type=float, default=0.98)
    ps.add_argument("--fm-start", type=float, default=5.0)
    ps.add_argument("--fm-step", type=float, default=0.48)
    ps.add_argument("--step-period", type=float, default=600.0 / 23.0)
    ps.add_argument("--arma-radius", type=float, default=0.98)
    ps.add_argument("--snr-db", type=float, default=30.0)
    ps.add_argument("--window-sec", type=float, default=6.0)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--out", default="synth_out")
    ps.set_defaults(func=cmd_synth)

    pt = sub.add_parser("theory", help="emit steady-state theory curves")
    pt.add_argument("curve",
                    choices=["kappa", "mu", "alpha-star", "filters", "bounds"])
    pt.add_argument("--alpha-grid", default="0.01:0.99:0.01")
    pt.add_argument("--q-grid", default="0.1:100")
    pt.add_argument("--q-over-sigma2", type=float, default=10.0)
    pt.add_argument("--alpha", type=float, default=0.9)
    pt.add_argument("--sigma2", type=float, default=1.0)
    pt.add_argument("--N", type=int, default=100)
    pt.add_argument("--n", type=int, default=50)
    pt.add_argument("--W", type=int, default=1)
    pt.add_argument("--grid", type=int, default=None)
    pt.add_argument("--time-bandwidth", type=float, default=3.0)
    pt.add_argument("--tapers", type=int, default=3)
    pt.add_argument("--out", default="theory_out")
    pt.set_defaults(func=cmd_theory)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
