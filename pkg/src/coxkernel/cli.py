"""Command-line front end: simulate, estimate, and batch experiments.

Subcommands
-----------
simulate    draw a rate path and arrivals from a named model
rate        arrival-rate estimate from a timestamp file
acf         raw + bias-corrected ACF over a lag grid
ci          ACF with variance estimates and pointwise intervals
pipeline    rate + ACF + CI + metadata in one pass
experiment  Monte Carlo tables, coverage and bandwidth histograms

Timestamp files are either text (one decimal timestamp per line) or
headerless little-endian float64 binary.  All outputs are CSV plus a
JSON metadata sidecar; nothing here plots.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import acf as _acf
from . import harness as _harness
from . import rate as _rate
from . import simulate as _sim
from . import varci as _varci
from .errors import (
    CoxKernelError,
    EmptyDataError,
    IngestError,
    InvalidDataError,
    ParameterError,
)
from .kernels import Kernel, get_kernel, load_kernel_table

__all__ = ["AnalysisConfig", "ingest", "run_pipeline", "main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

_TS_FORMAT = "%.17g"  # round-trips float64 exactly


@dataclass(frozen=True)
class AnalysisConfig:
    """Everything `pipeline` needs to analyze one timestamp file."""

    input: Path
    out_dir: Path
    fmt: str = "text"
    T: float | None = None
    kernel: str = "epanechnikov"
    kernel_file: Path | None = None
    rho: float = 5.0
    alpha: float = 0.05
    lag_spec: str = "log:40"
    grid_step: float | None = None
    r_max: float | None = None


def ingest(path, fmt: str = "text", T: float | None = None) -> _rate.ArrivalData:
    """Read timestamps from a file into validated ArrivalData.

    Out-of-order timestamps are sorted with a warning; duplicates are
    kept.  T defaults to the largest timestamp; an explicit T that
    exceeds the data range by more than 1% also warns.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"input file not found: {path}")
    if fmt == "text":
        try:
            with warnings.catch_warnings():
                # empty files are reported as EmptyDataError below
                warnings.simplefilter("ignore", UserWarning)
                times = np.loadtxt(path, dtype=float, ndmin=1)
        except ValueError:
            _raise_bad_line(path)
            raise  # unreachable; keeps type checkers honest
        if times.ndim != 1:
            raise IngestError(f"{path}: expected one timestamp per line")
    elif fmt == "binary":
        times = np.fromfile(path, dtype="<f8")
    else:
        raise ParameterError(f"unknown input format {fmt!r}; use 'text' or 'binary'")
    if times.size == 0:
        raise EmptyDataError(f"{path}: no timestamps")
    bad = np.nonzero(~np.isfinite(times) | (times < 0))[0]
    if bad.size:
        i = int(bad[0])
        where = f"line {i + 1}" if fmt == "text" else f"offset {i}"
        raise IngestError(f"{path}: invalid timestamp {times[i]!r} at {where}")
    if np.any(np.diff(times) < 0):
        warnings.warn(f"{path}: timestamps out of order; sorting", stacklevel=2)
        times = np.sort(times)
    t_max = float(times[-1])
    if T is None:
        T = t_max
    elif t_max < 0.99 * T:
        warnings.warn(
            f"{path}: last timestamp {t_max:.6g} is well below the declared "
            f"horizon T = {T:.6g}",
            stacklevel=2,
        )
    return _rate.ArrivalData(times=times, T=float(T))


def _raise_bad_line(path: Path):
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            for tok in stripped.split():
                try:
                    float(tok)
                except ValueError:
                    raise IngestError(
                        f"{path}: cannot parse {tok!r} at line {lineno}"
                    ) from None
    raise IngestError(f"{path}: malformed text timestamp file")


def _resolve_kernel(name: str, kernel_file) -> Kernel:
    if kernel_file is not None:
        return load_kernel_table(kernel_file)
    return get_kernel(name)


def _parse_lags(spec: str, smallest: float, T: float) -> np.ndarray:
    if spec.startswith("log:"):
        try:
            n = int(spec[4:])
        except ValueError:
            raise ParameterError(f"bad lag spec {spec!r}; use 'log:N' or a comma list")
        return _acf.log_lag_grid(T, smallest, n)
    try:
        lags = np.array([float(tok) for tok in spec.split(",") if tok], dtype=float)
    except ValueError:
        raise ParameterError(f"bad lag spec {spec!r}; use 'log:N' or a comma list")
    if lags.size == 0:
        raise ParameterError("empty lag list")
    return lags


def _write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    data = np.column_stack(columns)
    np.savetxt(path, data, delimiter=",", header=",".join(header), comments="", fmt="%.10g")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=_json_default)
        fh.write("\n")


def run_pipeline(config: AnalysisConfig) -> dict:
    """Full analysis of one file: rate, ACF, intervals, metadata.

    Returns the metadata dictionary (also written to metadata.json).
    On static-rate data the ACF is computed at the pilot bandwidth only
    and no interval columns are emitted.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = ingest(config.input, config.fmt, config.T)
    kernel = _resolve_kernel(config.kernel, config.kernel_file)
    mu_hat = _rate.mean_rate(data)
    sel = _rate.optimal_bandwidth(data, kernel, config.rho, grid_step=config.grid_step)

    if sel.static:
        policy = _acf.BandwidthPolicy.single(sel.h_pilot)
    else:
        policy = _acf.bandwidth_policy(data, kernel, config.rho, selection=sel)
    grids = _acf.rate_grids_for_policy(data, kernel, policy, config.grid_step)

    rate_est = grids[policy.h_large]
    _write_csv(out / "rate.csv", ["t", "lambda_hat"], [rate_est.grid, rate_est.values])

    lags = _parse_lags(config.lag_spec, rate_est.grid_step, data.T)
    curve = _acf.estimate_acf_curve(
        data, kernel, lags, config.rho, policy=policy, grids=grids
    )
    scale = curve.corrected[0] if curve.corrected[0] != 0 else 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        log_c = np.log10(np.where(curve.corrected > 0, curve.corrected, np.nan))
        log_t = np.log10(np.where(curve.lags > 0, curve.lags, np.nan))
    header = ["t", "raw", "corrected", "h_used", "corrected_norm", "log10_t", "log10_corrected"]
    cols = [curve.lags, curve.raw, curve.corrected, curve.h_used,
            curve.corrected / scale, log_t, log_c]
    if not sel.static:
        band = _varci.confidence_band(curve, grids, config.alpha, r_max=config.r_max)
        header += ["variance", "lower", "upper", "lower_norm", "upper_norm"]
        cols += [band.variance, band.lower, band.upper, band.lower / scale, band.upper / scale]
    _write_csv(out / "acf.csv", header, cols)

    meta = {
        "input": str(config.input),
        "format": config.fmt,
        "T": data.T,
        "K": data.K,
        "mu_hat": mu_hat,
        "kernel": kernel.name,
        "rho": config.rho,
        "alpha": config.alpha,
        "static_rate": sel.static,
        "h_pilot": sel.h_pilot,
        "cprime0_hat": sel.cprime0,
        "h_opt": sel.h_opt,
        "rate_bandwidth": policy.h_large,
        "grid_steps": {str(h): est.grid_step for h, est in grids.items()},
        "lag_spec": config.lag_spec,
        "lags_rounded_to_grid": True,
        "r_max": config.r_max,
        "outputs": {"rate": str(out / "rate.csv"), "acf": str(out / "acf.csv")},
    }
    _write_json(out / "metadata.json", meta)
    return meta


# ---------------------------------------------------------------------------
# subcommands

def _cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.model == "two-state":
        model = _sim.TwoStateModel(k1=args.k1, k2=args.k2, lam_a=args.lam_a, lam_b=args.lam_b)
        T = args.T if args.T is not None else 500.0
    elif args.model == "log-gaussian":
        model = _sim.LogGaussianModel(M=args.M, a=args.a, H=args.H, eps=args.eps)
        T = args.T if args.T is not None else 1500.0
    else:
        model = _sim.ConstantModel(rate=args.rate)
        T = args.T if args.T is not None else 500.0
    path_seed, arrival_seed = np.random.SeedSequence(args.seed).spawn(2)
    path = _sim.simulate_path(model, T, path_seed)
    data = _sim.simulate_arrivals(path, arrival_seed)
    if args.format == "text":
        ts_file = out / "arrivals.txt"
        np.savetxt(ts_file, data.times, fmt=_TS_FORMAT)
    else:
        ts_file = out / "arrivals.bin"
        data.times.astype("<f8").tofile(ts_file)
    meta = {
        "T": T,
        "K": data.K,
        "seed": args.seed,
        "format": args.format,
        "timestamps": str(ts_file),
        **_sim.model_metadata(model),
    }
    if args.emit_path:
        _write_csv(out / "path.csv", ["breakpoint", "value"], [path.breakpoints, path.values])
        meta["path"] = str(out / "path.csv")
    _write_json(out / "metadata.json", meta)
    print(f"wrote {data.K} arrivals to {ts_file}")
    return EXIT_OK


def _cmd_rate(args) -> int:
    data = ingest(args.input, args.format, args.T)
    kernel = _resolve_kernel(args.kernel, args.kernel_file)
    if args.h is not None:
        h = args.h
    else:
        sel = _rate.optimal_bandwidth(data, kernel, args.rho, grid_step=args.grid_step)
        if sel.static:
            warnings.warn("no detectable rate fluctuation; using the pilot bandwidth")
            h = sel.h_pilot
        else:
            h = sel.h_opt
        print(f"selected bandwidth h = {h:.6g}")
    est = _rate.estimate_rate(data, kernel, h, args.grid_step)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "rate.csv", ["t", "lambda_hat"], [est.grid, est.values])
    print(f"wrote {out / 'rate.csv'}")
    return EXIT_OK


def _acf_common(args, with_ci: bool) -> int:
    data = ingest(args.input, args.format, args.T)
    kernel = _resolve_kernel(args.kernel, args.kernel_file)
    sel = _rate.optimal_bandwidth(data, kernel, args.rho, grid_step=args.grid_step)
    if sel.static:
        warnings.warn(
            "no detectable rate fluctuation; ACF computed at the pilot "
            "bandwidth, interval columns omitted"
        )
        policy = _acf.BandwidthPolicy.single(sel.h_pilot)
    else:
        policy = _acf.bandwidth_policy(data, kernel, args.rho, selection=sel)
    grids = _acf.rate_grids_for_policy(data, kernel, policy, args.grid_step)
    lags = _parse_lags(args.lags, grids[policy.h_large].grid_step, data.T)
    curve = _acf.estimate_acf_curve(data, kernel, lags, args.rho, policy=policy, grids=grids)
    scale = curve.corrected[0] if curve.corrected[0] != 0 else 1.0
    header = ["t", "raw", "corrected", "h_used", "corrected_norm"]
    cols = [curve.lags, curve.raw, curve.corrected, curve.h_used, curve.corrected / scale]
    if with_ci and not sel.static:
        band = _varci.confidence_band(curve, grids, args.alpha, r_max=args.r_max)
        header += ["variance", "lower", "upper", "lower_norm", "upper_norm"]
        cols += [band.variance, band.lower, band.upper, band.lower / scale, band.upper / scale]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = "ci.csv" if with_ci else "acf.csv"
    _write_csv(out / name, header, cols)
    print(f"wrote {out / name}")
    return EXIT_OK


def _cmd_acf(args) -> int:
    return _acf_common(args, with_ci=False)


def _cmd_ci(args) -> int:
    return _acf_common(args, with_ci=True)


def _cmd_pipeline(args) -> int:
    config = AnalysisConfig(
        input=Path(args.input),
        out_dir=Path(args.out),
        fmt=args.format,
        T=args.T,
        kernel=args.kernel,
        kernel_file=args.kernel_file,
        rho=args.rho,
        alpha=args.alpha,
        lag_spec=args.lags,
        grid_step=args.grid_step,
        r_max=args.r_max,
    )
    meta = run_pipeline(config)
    flag = " (static rate)" if meta["static_rate"] else ""
    print(f"pipeline complete{flag}: mu_hat = {meta['mu_hat']:.6g}, outputs in {args.out}")
    return EXIT_OK


def _cmd_experiment(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kw = dict(replications=args.reps, seed=args.seed, scale=args.scale,
              full=args.full, workers=args.workers)
    if args.hist_hopt:
        config = _harness.coverage_config(args.model, **kw)
        report = _harness.run_hopt_histogram(config)
        _write_csv(out / "hopt_samples.csv", ["h_opt_hat"], [report.hopt_samples])
    elif args.table == 1:
        report = _harness.run_table1(_harness.table1_config(**kw))
    elif args.table == 2:
        report = _harness.run_table2(_harness.table2_config(**kw))
    elif args.table == 3:
        config = _harness.coverage_config(args.model, **kw)
        report = _harness.run_coverage(config)
    else:
        raise ParameterError("choose --table {1,2,3} or --hist-hopt")

    _write_json(out / "report.json", report.to_dict())
    if report.kernel_rows:
        rows = report.to_dict()["rows"]
        keys = list(rows[0].keys())
        with open(out / "report.csv", "w") as fh:
            fh.write(",".join(keys) + "\n")
            for row in rows:
                fh.write(",".join(str(row[k]) for k in keys) + "\n")
    elif report.coverage is not None:
        cov = report.coverage
        _write_csv(
            out / "report.csv",
            ["t", "coverage", "std_error"],
            [np.array(cov.lags), np.array(cov.coverage), np.array(cov.std_error)],
        )
    print(f"wrote {out / 'report.json'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_io_options(p, with_lags=False, with_alpha=False):
    p.add_argument("input", help="timestamp file")
    p.add_argument("--format", choices=["text", "binary"], default="text")
    p.add_argument("--T", type=float, default=None, help="horizon override (default: max timestamp)")
    p.add_argument("--kernel", default="epanechnikov",
                   choices=["uniform", "epanechnikov", "triangular", "quartic"])
    p.add_argument("--kernel-file", type=Path, default=None,
                   help="two-column (u, f(u)) table defining a custom kernel")
    p.add_argument("--rho", type=float, default=5.0,
                   help="mean events under the pilot bandwidth (default 5)")
    p.add_argument("--grid-step", type=float, default=None,
                   help="evaluation grid step (default h/10)")
    p.add_argument("--out", default=".", help="output directory")
    if with_lags:
        p.add_argument("--lags", default="log:40",
                       help="comma list of lags or 'log:N' (default log:40)")
    if with_alpha:
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--r-max", type=float, default=None,
                       help="explicit cap on the variance r-integration")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coxkernel",
                     description="Kernel inference for Cox process arrival data")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a model path and its arrivals")
    p.add_argument("--model", choices=["two-state", "log-gaussian", "constant"],
                   default="two-state")
    p.add_argument("--k1", type=float, default=2.0)
    p.add_argument("--k2", type=float, default=5.0)
    p.add_argument("--lam-a", type=float, default=1000.0)
    p.add_argument("--lam-b", type=float, default=400.0)
    p.add_argument("--M", type=float, default=1000.0)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--H", type=float, default=6.0)
    p.add_argument("--eps", type=float, default=None, help="skeleton step (default: auto)")
    p.add_argument("--rate", type=float, default=500.0)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["text", "binary"], default="text")
    p.add_argument("--emit-path", action="store_true", help="also write the true path CSV")
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("rate", help="arrival-rate estimate")
    _add_io_options(p)
    p.add_argument("--h", type=float, default=None, help="bandwidth (default: plug-in)")
    p.set_defaults(func=_cmd_rate)

    p = sub.add_parser("acf", help="autocorrelation estimate")
    _add_io_options(p, with_lags=True)
    p.set_defaults(func=_cmd_acf)

    p = sub.add_parser("ci", help="ACF with confidence intervals")
    _add_io_options(p, with_lags=True, with_alpha=True)
    p.set_defaults(func=_cmd_ci)

    p = sub.add_parser("pipeline", help="rate + ACF + CI + metadata")
    _add_io_options(p, with_lags=True, with_alpha=True)
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("experiment", help="Monte Carlo studies")
    p.add_argument("--table", type=int, choices=[1, 2, 3], default=None)
    p.add_argument("--hist-hopt", action="store_true")
    p.add_argument("--model", default="two-state",
                   choices=["two-state", "log-gaussian", "log-gaussian-long-range", "constant"],
                   help="model for --table 3 / --hist-hopt")
    p.add_argument("--scale", type=float, default=None,
                   help="fraction of the full-scale replication count")
    p.add_argument("--full", action="store_true", help="full-scale replication counts")
    p.add_argument("--reps", type=int, default=None, help="explicit replication count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"coxkernel: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IngestError, EmptyDataError, InvalidDataError) as exc:
        print(f"coxkernel: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (CoxKernelError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"coxkernel: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
