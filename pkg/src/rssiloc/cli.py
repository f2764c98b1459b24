"""Command-line entry point.

Exit codes: 0 success, 2 bad input data, 3 numerically degenerate input,
64 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from typing import Sequence

import numpy as np

from . import trace_io
from .errors import DegenerateFitError, FormatError, SingularInnovationError, UnknownBeaconError
from .kalman import KalmanParams, RssiSmoother
from .metrics import ZONES, accuracy, confusion_build, error_2d, error_3d, mean_pointwise_error, zone_metrics
from .particle import PfConfig
from .pathloss import fit_path_loss
from .proximity import Mode, ProximityPipeline, prox_step
from .simulator import default_deployment, generate_trace, localize_trace, run_sweep
from .world import NoiseSpec, Trajectory

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_USAGE = 0, 2, 3, 64

log = logging.getLogger("rssiloc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _out(path):
    return sys.stdout if path in (None, "-") else path


def _kalman_from_args(args) -> KalmanParams:
    return KalmanParams(dt=args.dt, q=np.eye(2) * args.q, r=args.r, p0=np.eye(2) * args.p0)


def _add_kalman_flags(p):
    g = p.add_argument_group("kalman")
    g.add_argument("--dt", type=float, default=0.2, help="rate coupling in the transition matrix (default 0.2)")
    g.add_argument("--q", type=float, default=0.001, help="process noise, per diagonal entry")
    g.add_argument("--r", type=float, default=0.10, help="measurement noise variance")
    g.add_argument("--p0", type=float, default=100.0, help="initial covariance, per diagonal entry")


def cmd_fit(args) -> int:
    points = trace_io.read_calibration(args.calibration)
    if not points:
        raise FormatError("calibration file has no data rows")
    model = fit_path_loss(points, d0=args.d0)
    if args.output:
        trace_io.write_model(model, args.output)
    print(model.to_record())
    return EXIT_OK


def cmd_smooth(args) -> int:
    params = _kalman_from_args(args)
    smoothers: dict[str, RssiSmoother] = {}
    with trace_io._writer(_out(args.output)) as fh:
        fh.write(f"# format_version: {trace_io.FORMAT_VERSION}\n")
        fh.write("t_ms,beacon_id,rssi_dbm,rssi_filtered_dbm\n")
        for s in trace_io.read_trace(args.trace):
            sm = smoothers.setdefault(s.beacon_id, RssiSmoother(params))
            fh.write(f"{s.t_ms},{s.beacon_id},{trace_io.fmt(s.rssi)},{trace_io.fmt(sm(s.rssi))}\n")
    return EXIT_OK


def cmd_classify(args) -> int:
    model = trace_io.read_model(args.model)
    kalman = _kalman_from_args(args)
    pipes: dict[str, ProximityPipeline] = {}
    with trace_io._writer(_out(args.output)) as fh:
        fh.write(f"# format_version: {trace_io.FORMAT_VERSION}\n")
        fh.write("t_ms,beacon_id,inst_zone,decided_zone,est_distance_m\n")
        for s in trace_io.read_trace(args.trace):
            pipe = pipes.setdefault(s.beacon_id, ProximityPipeline(Mode(args.mode), model, kalman))
            d = prox_step(pipe, s.rssi)
            fh.write(f"{s.t_ms},{s.beacon_id},{d.instantaneous_zone},{d.decided_zone},{trace_io.fmt(d.est_distance)}\n")
    return EXIT_OK


def cmd_localize(args) -> int:
    dep = trace_io.read_deployment(args.deployment)
    trace = trace_io.read_trace(args.trace)
    config = PfConfig(
        bounds=dep.bounds,
        n_particles=args.particles,
        motion_sigma=args.motion_sigma,
        likelihood_sigma=args.likelihood_sigma,
        ess_threshold=args.ess_threshold,
        seed=args.seed,
    )
    est = localize_trace(trace, dep, config, cascade=args.mode == "kfpf", kalman=_kalman_from_args(args))
    trace_io.write_estimates(est, _out(args.output), dep.dim)
    return EXIT_OK


def _parse_point(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise FormatError(f"bad point {text!r}; expected x,y[,z]") from None


def cmd_simulate(args) -> int:
    dep = trace_io.read_deployment(args.deployment) if args.deployment else default_deployment(args.dim)
    if args.beacons:
        dep = dep.first(args.beacons)
    if args.trajectory:
        waypoints = []
        for item in args.trajectory:
            t, _, pos = item.partition(":")
            waypoints.append((int(t), _parse_point(pos)))
        traj = Trajectory(tuple(waypoints))
    elif args.target:
        traj = Trajectory.stationary(_parse_point(args.target), args.duration_ms)
    else:
        raise UsageError("one of --target or --waypoint is required")
    noise = NoiseSpec(sigma=args.sigma, dropout_p=args.dropout, seed=args.seed)
    trace = generate_trace(dep, traj, noise, args.period_ms)
    trace_io.write_trace(trace, _out(args.output))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    out = _out(args.output)
    if args.kind == "zones":
        actual = trace_io.read_zones(args.actual, args.actual_column)
        predicted = trace_io.read_zones(args.predicted, args.predicted_column)
        cm = confusion_build(actual, predicted)
        cols = [(args.label, zone_metrics(cm, z)) for z in ZONES]
        trace_io.write_zone_report(cols, out, args.format, accuracy={args.label: accuracy(cm)})
        return EXIT_OK

    actual = trace_io.read_positions(args.actual)
    est = trace_io.read_positions(args.predicted)
    dim = 2 if args.kind == "position2d" else 3
    if actual.shape[1] < dim or est.shape[1] < dim:
        raise FormatError(f"{args.kind} needs {dim} coordinate columns")
    actual, est = actual[:, :dim], est[:, :dim]
    rows = [(f"e{dim}d_m", (error_2d if dim == 2 else error_3d)(actual, est))]
    if len(actual) == len(est):
        rows.append(("mean_pointwise_m", mean_pointwise_error(actual, est)))
    with trace_io._writer(out) as fh:
        fh.write("metric,value\n")
        for name, value in rows:
            fh.write(f"{name},{trace_io.fmt(value)}\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = trace_io.read_scenario(args.scenario)
    if args.seed is not None:
        spec = dataclasses.replace(spec, noise=dataclasses.replace(spec.noise, seed=args.seed))
    result = run_sweep(spec, jobs=args.jobs)
    trace_io.write_report(result, _out(args.output), args.format)
    log.info("aggregate: pf %.4f m, kfpf %.4f m, improvement %.2f%%",
             result.pf_mean, result.kfpf_mean, 100 * result.improvement)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rssiloc", description="RSSI ranging, smoothing, proximity and localization tools")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("fit", help="fit a log-distance path-loss model to calibration data")
    s.add_argument("calibration", help="CSV with header distance_m,rssi_dbm")
    s.add_argument("--d0", type=float, default=1.0, help="reference distance in meters")
    s.add_argument("-o", "--output", help="write the model record here")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("smooth", help="Kalman-smooth each beacon's RSSI stream")
    s.add_argument("trace")
    s.add_argument("-o", "--output")
    _add_kalman_flags(s)
    s.set_defaults(func=cmd_smooth)

    s = sub.add_parser("classify", help="per-beacon proximity zones")
    s.add_argument("trace")
    s.add_argument("--mode", choices=[m.value for m in Mode], default="skf")
    s.add_argument("--model", required=True, help="model record written by `fit`")
    s.add_argument("-o", "--output")
    _add_kalman_flags(s)
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("localize", help="particle-filter position estimates from a trace")
    s.add_argument("trace")
    s.add_argument("--deployment", required=True)
    s.add_argument("--mode", choices=["pf", "kfpf"], default="kfpf")
    s.add_argument("--particles", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--motion-sigma", type=float, default=0.25)
    s.add_argument("--likelihood-sigma", type=float, default=1.0)
    s.add_argument("--ess-threshold", type=float, default=0.5)
    s.add_argument("-o", "--output")
    _add_kalman_flags(s)
    s.set_defaults(func=cmd_localize)

    s = sub.add_parser("simulate", help="synthesize an RSSI trace")
    s.add_argument("--deployment", help="deployment JSON (default: built-in 8-beacon room)")
    s.add_argument("--dim", type=int, choices=[2, 3], default=2, help="dimension of the built-in room")
    s.add_argument("--beacons", type=int, help="use only the first N beacons")
    s.add_argument("--target", help="stationary target x,y[,z]")
    s.add_argument("--waypoint", dest="trajectory", action="append", metavar="T_MS:X,Y[,Z]")
    s.add_argument("--duration-ms", type=int, default=3900)
    s.add_argument("--period-ms", type=int, default=100)
    s.add_argument("--sigma", type=float, default=3.0, help="RSSI noise std in dB")
    s.add_argument("--dropout", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("evaluate", help="confusion-matrix or localization-error metrics")
    s.add_argument("actual")
    s.add_argument("predicted")
    s.add_argument("--kind", choices=["zones", "position2d", "position3d"], default="zones")
    s.add_argument("--format", choices=["csv", "markdown"], default="csv")
    s.add_argument("--label", default="predicted", help="method name used in the report header")
    s.add_argument("--actual-column")
    s.add_argument("--predicted-column")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", help="PF vs KFPF over beacon and particle counts")
    s.add_argument("scenario", help="scenario JSON")
    s.add_argument("-o", "--output")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--seed", type=int, help="override the scenario's master seed")
    s.add_argument("--format", choices=["csv", "markdown"], default="csv")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"rssiloc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DegenerateFitError, SingularInnovationError) as exc:
        print(f"rssiloc: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, UnknownBeaconError, ValueError, OSError) as exc:
        print(f"rssiloc: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
