"""Command-line front end: plot-ready CSV/JSON for every toolkit capability.

Subcommands: ``spectrum``, ``approx``, ``simulate``, ``fit``, ``bessel`` and
the meta-command ``reproduce-figures``.  Every run writes a ``manifest.json``
(settings, library version, PRNG family, wall-clock timing) next to its
artifacts, so any output file can be regenerated exactly.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import traceback

import numpy as np

from . import __version__
from .approx import approx_pdf_from_spec, second_order_density, write_density_csv
from .bessel import (
    BesselFPTSpec,
    bessel_zero,
    integral_approx_density,
    series_density,
    simulate_bessel_em,
)
from .fit import fit_moments
from .models import bessel_like, imitation, ornstein_uhlenbeck, read_rates_csv
from .simulate import (
    PRNG_FAMILY,
    log_binned_pdf,
    sample_bursts,
    sample_inter_bursts,
    threshold_to_state,
    write_durations_csv,
    write_log_binned_csv,
)
from .spectrum import eigenvalues, sqrt_linearity, truncate, write_spectrum_csv

OUTPUT_ENV = "BDFPT_OUTPUT"


class ConfigError(Exception):
    """Bad flags or config file (exit code 2)."""


def _read_config_file(path):
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, val = line.split("=", 1)
                values[key.strip().replace("-", "_")] = val.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return values


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="plain-text config file; flags override it")
    common.add_argument("--output", help=f"output directory (default: ${OUTPUT_ENV} or .)")
    common.add_argument("--seed", type=int, default=0, help="master RNG seed")
    common.add_argument("--n-samples", type=int, default=100000)
    common.add_argument("--bins-per-decade", type=int, default=10)

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument(
        "--model", choices=["bessel-like", "ou", "imitation", "table"], help="process family"
    )
    model.add_argument("--nu", type=float, help="bessel-like index (1/2 + integer)")
    model.add_argument("--epsilon", type=float, help="imitation idiosyncratic rate")
    model.add_argument("--N", type=int, help="number of states (state space 0..N)")
    model.add_argument("--rates", help="rate-table CSV for --model table")
    model.add_argument("--h", type=float, help="threshold in (0,1), mapped to round(h*N)")
    model.add_argument("--state", type=int, help="explicit threshold state (alternative to --h)")

    p = argparse.ArgumentParser(prog="bdfpt", description=__doc__)
    p.add_argument("--version", action="version", version=f"bdfpt {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", parents=[common, model], help="truncated-generator eigenvalues")
    sp.add_argument("--window", help="fit window 'lo,hi' in ranks (default central 20..80%%)")

    ap = sub.add_parser("approx", parents=[common, model], help="closed-form duration density")
    ap.add_argument("--theta-points", type=int, default=400)

    sm = sub.add_parser("simulate", parents=[common, model], help="Monte Carlo durations")
    sm.add_argument("--kind", choices=["inter-burst", "burst"], default="inter-burst")

    ft = sub.add_parser("fit", parents=[common], help="four-moment fit of a duration sample")
    ft.add_argument("--input", required=True, help="duration CSV (simulate output format)")

    bs = sub.add_parser("bessel", parents=[common], help="continuous-Bessel reference solution")
    bs.add_argument("--nu", type=float, default=0.5)
    bs.add_argument("--h", type=float, default=0.7)
    bs.add_argument("--y0", type=float, help="start position (default h - h/100)")
    bs.add_argument("--k-max", type=int, default=2000)
    bs.add_argument("--theta-min", type=float, help="approximation cutoff (default gap time)")
    bs.add_argument("--theta-points", type=int, default=400)
    bs.add_argument("--dt", type=float, help="run Euler-Maruyama at this step and bin durations")

    sub.add_parser(
        "reproduce-figures",
        parents=[common],
        help="regenerate the data behind the model and Bessel figures in one run",
    )
    return p


_INT_KEYS = {"N", "state", "seed", "n_samples", "bins_per_decade", "k_max", "theta_points"}
_FLOAT_KEYS = {"h", "nu", "epsilon", "dt", "theta_min", "y0"}


def _merge_config(args, argv):
    """Apply config-file values underneath explicit flags."""
    if not getattr(args, "config", None):
        return args
    file_vals = _read_config_file(args.config)
    cli_flags = {a[2:].split("=")[0].replace("-", "_") for a in argv if a.startswith("--")}
    for key, raw in file_vals.items():
        if not hasattr(args, key):
            raise ConfigError(f"unknown config key {key!r}")
        if key in cli_flags:
            continue  # explicit flag wins
        try:
            if key in _INT_KEYS:
                setattr(args, key, int(raw))
            elif key in _FLOAT_KEYS:
                setattr(args, key, float(raw))
            else:
                setattr(args, key, raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return args


def _outdir(args):
    out = args.output or os.environ.get(OUTPUT_ENV) or "."
    os.makedirs(out, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out!r} not writable")
    return out


def _build_model(args):
    if args.model is None:
        raise ConfigError("--model is required")
    if args.model == "table":
        if not args.rates:
            raise ConfigError("--model table needs --rates <csv>")
        return read_rates_csv(args.rates)
    if args.N is None:
        raise ConfigError("--N is required for built-in models")
    if args.model == "bessel-like":
        if args.nu is None:
            raise ConfigError("--model bessel-like needs --nu")
        return bessel_like(args.nu, args.N)
    if args.model == "ou":
        return ornstein_uhlenbeck(args.N)
    if args.epsilon is None:
        raise ConfigError("--model imitation needs --epsilon")
    return imitation(args.epsilon, args.N)


def _threshold_state(args, spec):
    if (args.h is None) == (args.state is None):
        raise ConfigError("provide exactly one of --h or --state")
    if args.state is not None:
        n = int(args.state)
        if not 1 <= n <= spec.n_states:
            raise ConfigError(f"--state must be in 1..{spec.n_states}")
        return n
    try:
        return threshold_to_state(args.h, spec.n_states)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _write_manifest(outdir, args, files, t0, extra=None):
    manifest = {
        "command": args.command,
        "config": {
            k: v for k, v in sorted(vars(args).items()) if k != "command" and v is not None
        },
        "library_version": __version__,
        "prng_family": PRNG_FAMILY,
        "wall_clock_seconds": round(time.time() - t0, 3),
        "artifacts": files,
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)
        fh.write("\n")
    return path


def _cmd_spectrum(args, outdir):
    spec = _build_model(args)
    n = _threshold_state(args, spec)
    eig = eigenvalues(truncate(spec, n))
    window = None
    if args.window:
        try:
            lo, hi = args.window.split(",")
            window = (int(lo), int(hi))
        except ValueError as exc:
            raise ConfigError(f"bad --window {args.window!r}: expected 'lo,hi'") from exc
    report = sqrt_linearity(eig, window)
    csv_path = os.path.join(outdir, "spectrum.csv")
    write_spectrum_csv(eig, csv_path)
    json_path = os.path.join(outdir, "spectrum_report.json")
    with open(json_path, "w") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    return [csv_path, json_path], {"threshold_state": n, "spec_label": spec.label}


def _theta_grid(params, points):
    lo = 0.01 / params.lambda_m
    hi = 20.0 / params.lambda1
    return np.geomspace(lo, hi, points)


def _cmd_approx(args, outdir):
    spec = _build_model(args)
    n = _threshold_state(args, spec)
    params = approx_pdf_from_spec(spec, n)
    theta = _theta_grid(params, args.theta_points)
    pdf = second_order_density(theta, params)
    json_path = os.path.join(outdir, "mixture_params.json")
    with open(json_path, "w") as fh:
        json.dump(params.to_dict(), fh, indent=2)
        fh.write("\n")
    csv_path = os.path.join(outdir, "density.csv")
    write_density_csv(theta, pdf, csv_path)
    return [csv_path, json_path], {"threshold_state": n, "spec_label": spec.label}


def _cmd_simulate(args, outdir):
    spec = _build_model(args)
    n = _threshold_state(args, spec)
    sampler = sample_inter_bursts if args.kind == "inter-burst" else sample_bursts
    sample = sampler(spec, n, rng_seed=args.seed, n_samples=args.n_samples)
    csv_path = os.path.join(outdir, "durations.csv")
    write_durations_csv(sample, csv_path)
    files = [csv_path, csv_path + ".json"]
    if len(sample) >= 100:
        binned = log_binned_pdf(sample, args.bins_per_decade)
        pdf_path = os.path.join(outdir, "log_binned_pdf.csv")
        write_log_binned_csv(binned, pdf_path)
        files.append(pdf_path)
    return files, {"threshold_state": n, "spec_label": spec.label}


def _cmd_fit(args, outdir):
    from .simulate import read_durations_csv

    sample = read_durations_csv(args.input)
    result = fit_moments(sample)
    json_path = os.path.join(outdir, "fit_result.json")
    with open(json_path, "w") as fh:
        json.dump(result.to_dict(), fh, indent=2)
        fh.write("\n")
    return [json_path], {"n_durations": len(sample)}


def _cmd_bessel(args, outdir):
    nu, h = args.nu, args.h
    y0 = args.y0 if args.y0 is not None else h - h / 100.0
    spec = BesselFPTSpec(nu, h, y0, k_max=args.k_max)
    theta_min = args.theta_min
    if theta_min is None:
        theta_min = 2.0 * (h - y0) ** 2 / np.pi  # diffusion time of the start gap
    j1 = bessel_zero(nu, 1)
    theta_hi = 20.0 * 2.0 * h * h / j1**2
    theta = np.geomspace(theta_min, theta_hi, args.theta_points)
    series = series_density(spec, theta)
    approx = integral_approx_density(nu, h, theta, theta_min)
    series_path = os.path.join(outdir, "bessel_series.csv")
    from .bessel import series_terms

    rates, weights = series_terms(spec)
    trunc_err = np.abs(weights[-1]) * np.exp(-rates[-1] * theta)
    with open(series_path, "w") as fh:
        fh.write("theta,pdf,truncation_error\n")
        for t, f, e in zip(theta, series, trunc_err):
            fh.write(f"{float(t)!r},{float(f)!r},{float(e)!r}\n")
    approx_path = os.path.join(outdir, "bessel_integral_approx.csv")
    write_density_csv(theta, approx, approx_path)
    files = [series_path, approx_path]
    extra = {"theta_min": theta_min, "y0": y0}
    if args.dt is not None:
        sample = simulate_bessel_em(nu, h, y0, args.dt, args.seed, args.n_samples)
        dur_path = os.path.join(outdir, "bessel_em_durations.csv")
        write_durations_csv(sample, dur_path)
        files += [dur_path, dur_path + ".json"]
        if len(sample) >= 100:
            binned = log_binned_pdf(sample, args.bins_per_decade)
            pdf_path = os.path.join(outdir, "bessel_em_pdf.csv")
            write_log_binned_csv(binned, pdf_path)
            files.append(pdf_path)
    return files, extra


FIGURE_PANELS = {
    # model figures: (model kwargs, inter-burst h, burst h)
    "bessel_like": [
        (dict(nu=0.5), 0.3, 0.7),
        (dict(nu=1.5), 0.2, 0.8),
        (dict(nu=2.5), 0.7, 0.3),
    ],
    "ou": [
        (dict(), 0.45, 0.55),
        (dict(), 0.5, 0.5),
        (dict(), 0.55, 0.45),
    ],
    "imitation": [
        (dict(epsilon=0.5), 0.3, 0.7),
        (dict(epsilon=1.0), 0.2, 0.8),
        (dict(epsilon=1.5), 0.7, 0.3),
    ],
}
FIGURE_SPECTRUM_PANEL = {"bessel_like": 0, "ou": 1, "imitation": 0}
FIGURE_N = 1000


def _cmd_reproduce_figures(args, outdir):
    """Data behind the Bessel-reference figure and the three model figures."""
    files = []
    # continuous-Bessel reference: series + integral approximation per index
    h = 0.7
    for nu in (0.5, 1.5, 2.5):
        sub = os.path.join(outdir, f"bessel_reference/nu_{nu}")
        os.makedirs(sub, exist_ok=True)
        ns = argparse.Namespace(
            nu=nu, h=h, y0=None, k_max=2000, theta_min=None,
            theta_points=300, dt=None, seed=args.seed, n_samples=args.n_samples,
            bins_per_decade=args.bins_per_decade,
        )
        out, _ = _cmd_bessel(ns, sub)
        files += out
    builders = {
        "bessel_like": lambda kw: bessel_like(kw["nu"], FIGURE_N),
        "ou": lambda kw: ornstein_uhlenbeck(FIGURE_N),
        "imitation": lambda kw: imitation(kw["epsilon"], FIGURE_N),
    }
    for model, panels in FIGURE_PANELS.items():
        for i, (kw, h_ib, h_b) in enumerate(panels):
            spec = builders[model](kw)
            sub = os.path.join(outdir, f"{model}/panel_{'abc'[i]}")
            os.makedirs(sub, exist_ok=True)
            n_ib = threshold_to_state(h_ib, FIGURE_N)
            n_b = threshold_to_state(h_b, FIGURE_N)
            ib = sample_inter_bursts(spec, n_ib, rng_seed=args.seed, n_samples=args.n_samples)
            b = sample_bursts(spec, n_b, rng_seed=args.seed + 1, n_samples=args.n_samples)
            for tag, smp in (("inter_burst", ib), ("burst", b)):
                path = os.path.join(sub, f"{tag}_pdf.csv")
                write_log_binned_csv(log_binned_pdf(smp, args.bins_per_decade), path)
                files.append(path)
            params = approx_pdf_from_spec(spec, n_ib)
            theta = _theta_grid(params, 300)
            path = os.path.join(sub, "approx_density.csv")
            write_density_csv(theta, second_order_density(theta, params), path)
            files.append(path)
            with open(os.path.join(sub, "mixture_params.json"), "w") as fh:
                json.dump(params.to_dict(), fh, indent=2)
                fh.write("\n")
            files.append(os.path.join(sub, "mixture_params.json"))
            if i == FIGURE_SPECTRUM_PANEL[model]:
                eig = eigenvalues(truncate(spec, n_ib))
                path = os.path.join(outdir, f"{model}/spectrum_panel_d.csv")
                write_spectrum_csv(eig, path)
                files.append(path)
                report = sqrt_linearity(eig)
                path = os.path.join(outdir, f"{model}/spectrum_report_panel_d.json")
                with open(path, "w") as fh:
                    fh.write(report.to_json())
                    fh.write("\n")
                files.append(path)
    return files, {"n_states": FIGURE_N}


_DISPATCH = {
    "spectrum": _cmd_spectrum,
    "approx": _cmd_approx,
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "bessel": _cmd_bessel,
    "reproduce-figures": _cmd_reproduce_figures,
}


def main(argv=None):
    parser = _build_parser()
    t0 = time.time()
    if argv is None:
        argv = sys.argv[1:]
    try:
        args = parser.parse_args(argv)
        args = _merge_config(args, argv)
        outdir = _outdir(args)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}))
        return 2
    try:
        files, extra = _DISPATCH[args.command](args, outdir)
        manifest = _write_manifest(outdir, args, files, t0, extra)
        print(json.dumps({"status": "ok", "manifest": manifest, "artifacts": files}))
        return 0
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}))
        return 2
    except Exception as exc:  # module errors: machine-readable, exit 1
        print(
            json.dumps(
                {
                    "error": type(exc).__name__,
                    "message": str(exc),
                    "traceback": traceback.format_exc().splitlines()[-3:],
                }
            )
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
