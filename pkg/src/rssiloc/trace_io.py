"""Readers and writers for traces, calibration data, deployments and reports.

CSV files may start with a ``# format_version: 1`` comment line; readers skip
leading ``#`` lines. Floats are written with at most six decimals (trailing
zeros stripped), so values already at that precision round-trip exactly.
"""

from __future__ import annotations

import contextlib
import csv
import io
import json
import math
import os
import warnings
from typing import IO, Iterable, Sequence, Union

import numpy as np

from .errors import FormatError
from .kalman import KalmanParams
from .metrics import ZoneMetrics
from .particle import Bounds
from .pathloss import CalibrationPoint, PathLossModel, ProximityZone
from .simulator import ScenarioResult, SweepSpec, default_deployment
from .world import Beacon, Deployment, NoiseSpec, RssiSample

FORMAT_VERSION = 1
TRACE_HEADER = ("t_ms", "beacon_id", "rssi_dbm")
CALIBRATION_HEADER = ("distance_m", "rssi_dbm")
SWEEP_HEADER = ("particles", "beacons", "pf_mean", "pf_std", "kfpf_mean", "kfpf_std", "improvement_pct")
UNDEFINED = "undefined"

Source = Union[str, os.PathLike, IO[str]]


class TraceWarning(UserWarning):
    pass


def fmt(value: float) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return UNDEFINED
    text = f"{float(value):.6f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


@contextlib.contextmanager
def _reader(source: Source):
    if hasattr(source, "read"):
        yield source
    else:
        with open(source, "r", encoding="utf-8", newline="") as fh:
            yield fh


@contextlib.contextmanager
def _writer(sink: Source):
    if hasattr(sink, "write"):
        yield sink
    else:
        with open(sink, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _csv_rows(source: Source, header: Sequence[str] | None = None):
    """Yield (line_number, header, row) triples. Line numbers are 1-based file lines."""
    with _reader(source) as fh:
        text = fh.read()
    lines = text.splitlines()
    found = None
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or (found is None and stripped.startswith("#")):
            continue
        row = next(csv.reader([line]))
        row = [c.strip() for c in row]
        if found is None:
            found = tuple(row)
            if header is not None and found[: len(header)] != tuple(header):
                raise FormatError(f"expected header {','.join(header)}, got {','.join(found)}", lineno)
            continue
        yield lineno, found, row
    if found is None:
        raise FormatError("missing header line", 1)


def _float(text: str, lineno: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise FormatError(f"not a number: {text!r}", lineno, column) from None
    if not math.isfinite(value):
        raise FormatError(f"non-finite value {text!r}", lineno, column)
    return value


# --- traces ----------------------------------------------------------------

def read_trace(source: Source) -> list[RssiSample]:
    samples = []
    last_t: dict[str, int] = {}
    for lineno, _, row in _csv_rows(source, TRACE_HEADER):
        if len(row) != 3:
            raise FormatError(f"expected 3 fields, got {len(row)}", lineno)
        t_raw, bid, r_raw = row
        try:
            t = int(t_raw)
        except ValueError:
            raise FormatError(f"not an integer: {t_raw!r}", lineno, "t_ms") from None
        if t < 0:
            raise FormatError("t_ms must be >= 0", lineno, "t_ms")
        if not bid:
            raise FormatError("empty beacon id", lineno, "beacon_id")
        rssi = _float(r_raw, lineno, "rssi_dbm")
        if rssi == 0:
            raise FormatError("rssi 0 is the stream-end sentinel and not a valid sample", lineno, "rssi_dbm")
        if bid in last_t and t < last_t[bid]:
            warnings.warn(f"row {lineno}: t_ms goes backwards for beacon {bid!r}", TraceWarning, stacklevel=2)
        last_t[bid] = t
        samples.append(RssiSample(t, bid, rssi))
    return samples


def write_trace(samples: Iterable[RssiSample], sink: Source) -> None:
    with _writer(sink) as fh:
        fh.write(f"# format_version: {FORMAT_VERSION}\n")
        fh.write(",".join(TRACE_HEADER) + "\n")
        for s in samples:
            fh.write(f"{s.t_ms},{s.beacon_id},{fmt(s.rssi)}\n")


# --- calibration + model ---------------------------------------------------

def read_calibration(source: Source) -> list[CalibrationPoint]:
    points = []
    for lineno, _, row in _csv_rows(source, CALIBRATION_HEADER):
        if len(row) != 2:
            raise FormatError(f"expected 2 fields, got {len(row)}", lineno)
        d = _float(row[0], lineno, "distance_m")
        r = _float(row[1], lineno, "rssi_dbm")
        if d <= 0:
            raise FormatError("distance must be > 0 (use 0.0001 for the touching position)", lineno, "distance_m")
        points.append(CalibrationPoint(d, r))
    return points


def write_calibration(points: Iterable[CalibrationPoint], sink: Source) -> None:
    with _writer(sink) as fh:
        fh.write(f"# format_version: {FORMAT_VERSION}\n")
        fh.write(",".join(CALIBRATION_HEADER) + "\n")
        for p in points:
            fh.write(f"{fmt(p.distance)},{fmt(p.mean_rssi)}\n")


def read_model(source: Source) -> PathLossModel:
    with _reader(source) as fh:
        text = fh.read()
    try:
        return PathLossModel.from_record(text)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def write_model(model: PathLossModel, sink: Source) -> None:
    with _writer(sink) as fh:
        fh.write(f"# format_version: {FORMAT_VERSION}\n")
        fh.write(model.to_record() + "\n")


# --- JSON configs ----------------------------------------------------------

def _load_json(source: Source) -> dict:
    with _reader(source) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", f"line {exc.lineno}") from None
    if not isinstance(doc, dict):
        raise FormatError("top level must be an object", "$")
    return doc


def _req(obj: dict, key: str, path: str):
    if not isinstance(obj, dict):
        raise FormatError("expected an object", path)
    if key not in obj:
        raise FormatError("missing field", f"{path}.{key}")
    return obj[key]


def _num(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise FormatError(f"expected a finite number, got {value!r}", path)
    return float(value)


def deployment_from_dict(doc: dict, path: str = "$") -> Deployment:
    b = _req(doc, "bounds", path)
    lo = [_num(v, f"{path}.bounds.min[{i}]") for i, v in enumerate(_req(b, "min", f"{path}.bounds"))]
    hi = [_num(v, f"{path}.bounds.max[{i}]") for i, v in enumerate(_req(b, "max", f"{path}.bounds"))]
    try:
        bounds = Bounds(tuple(lo), tuple(hi))
    except ValueError as exc:
        raise FormatError(str(exc), f"{path}.bounds") from None

    beacons_doc = _req(doc, "beacons", path)
    if not isinstance(beacons_doc, list) or not beacons_doc:
        raise FormatError("expected a non-empty array", f"{path}.beacons")
    beacons = []
    seen = set()
    for i, bd in enumerate(beacons_doc):
        bp = f"{path}.beacons[{i}]"
        bid = str(_req(bd, "id", bp))
        if bid in seen:
            raise FormatError(f"duplicate beacon id {bid!r}", f"{bp}.id")
        seen.add(bid)
        axes = ("x", "y", "z")[: bounds.dim]
        pos = tuple(_num(_req(bd, a, bp), f"{bp}.{a}") for a in axes)
        if not bounds.contains(pos):
            raise FormatError(f"position {pos} outside bounds", bp)
        try:
            model = PathLossModel(
                n=_num(_req(bd, "n", bp), f"{bp}.n"),
                c=_num(_req(bd, "c", bp), f"{bp}.c"),
                d0=_num(bd.get("d0", 1.0), f"{bp}.d0"),
            )
        except ValueError as exc:
            raise FormatError(str(exc), bp) from None
        beacons.append(Beacon(bid, pos, model))
    return Deployment(tuple(beacons), bounds)


def deployment_to_dict(dep: Deployment) -> dict:
    axes = ("x", "y", "z")[: dep.dim]
    return {
        "format_version": FORMAT_VERSION,
        "bounds": {"min": list(dep.bounds.lo), "max": list(dep.bounds.hi)},
        "beacons": [
            {"id": b.beacon_id, **dict(zip(axes, b.position)), "n": b.model.n, "c": b.model.c, "d0": b.model.d0}
            for b in dep.beacons
        ],
    }


def read_deployment(source: Source) -> Deployment:
    return deployment_from_dict(_load_json(source))


def write_deployment(dep: Deployment, sink: Source) -> None:
    with _writer(sink) as fh:
        json.dump(deployment_to_dict(dep), fh, indent=2)
        fh.write("\n")


def read_scenario(source: Source) -> SweepSpec:
    """Parse a sweep scenario.

    ``deployment`` is either a full deployment object or
    ``{"default": {"dim": 2 | 3}}`` for the built-in 8-beacon room.
    """
    doc = _load_json(source)
    dep_doc = _req(doc, "deployment", "$")
    if isinstance(dep_doc, dict) and "default" in dep_doc:
        dim = dep_doc["default"].get("dim", 2) if isinstance(dep_doc["default"], dict) else None
        if dim not in (2, 3):
            raise FormatError("dim must be 2 or 3", "$.deployment.default.dim")
        dep = default_deployment(dim)
    else:
        dep = deployment_from_dict(dep_doc, "$.deployment")

    nd = doc.get("noise", {})
    sd = _req(doc, "sweep", "$")
    fd = doc.get("filter", {})
    kd = doc.get("kalman", {})
    try:
        noise = NoiseSpec(
            sigma=_num(nd.get("sigma", 3.0), "$.noise.sigma"),
            dropout_p=_num(nd.get("dropout_p", 0.0), "$.noise.dropout_p"),
            seed=int(nd.get("seed", 0)),
            crowding_threshold=nd.get("crowding_threshold"),
            crowding_multiplier=_num(nd.get("crowding_multiplier", 1.0), "$.noise.crowding_multiplier"),
        )
        kalman = KalmanParams(
            dt=_num(kd.get("dt", 0.2), "$.kalman.dt"),
            q=np.asarray(kd.get("q", [[0.001, 0.0], [0.0, 0.001]]), dtype=float),
            r=_num(kd.get("r", 0.1), "$.kalman.r"),
            p0=np.asarray(kd.get("p0", [[100.0, 0.0], [0.0, 100.0]]), dtype=float),
        )
        pcs = _req(sd, "particle_counts", "$.sweep")
        if not isinstance(pcs, list) or not pcs:
            raise FormatError("expected a non-empty array", "$.sweep.particle_counts")
        spec = SweepSpec(
            deployment=dep,
            particle_counts=tuple(int(_num(p, f"$.sweep.particle_counts[{i}]")) for i, p in enumerate(pcs)),
            beacon_counts=tuple(int(b) for b in sd.get("beacon_counts", [3, 4, 5, 6, 7, 8])),
            noise=noise,
            repetitions=int(sd.get("repetitions", 10)),
            steps=int(sd.get("steps", 40)),
            eval_samples=int(sd.get("eval_samples", 10)),
            period_ms=int(sd.get("period_ms", 100)),
            motion_sigma=_num(fd.get("motion_sigma", 0.25), "$.filter.motion_sigma"),
            likelihood_sigma=_num(fd.get("likelihood_sigma", 1.0), "$.filter.likelihood_sigma"),
            ess_threshold=_num(fd.get("ess_threshold", 0.5), "$.filter.ess_threshold"),
            kalman=kalman,
        )
    except FormatError:
        raise
    except (ValueError, TypeError) as exc:
        raise FormatError(str(exc), "$") from None
    return spec


def scenario_to_dict(spec: SweepSpec) -> dict:
    n = spec.noise
    k = spec.kalman
    return {
        "format_version": FORMAT_VERSION,
        "deployment": deployment_to_dict(spec.deployment),
        "noise": {
            "sigma": n.sigma,
            "dropout_p": n.dropout_p,
            "seed": n.seed,
            "crowding_threshold": n.crowding_threshold,
            "crowding_multiplier": n.crowding_multiplier,
        },
        "sweep": {
            "beacon_counts": list(spec.beacon_counts),
            "particle_counts": list(spec.particle_counts),
            "repetitions": spec.repetitions,
            "steps": spec.steps,
            "eval_samples": spec.eval_samples,
            "period_ms": spec.period_ms,
        },
        "filter": {
            "motion_sigma": spec.motion_sigma,
            "likelihood_sigma": spec.likelihood_sigma,
            "ess_threshold": spec.ess_threshold,
        },
        "kalman": {"dt": k.dt, "q": k.q.tolist(), "r": k.r, "p0": k.p0.tolist()},
    }


# --- reports ---------------------------------------------------------------

def _markdown(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    line = lambda cells: "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"
    out = [line(header), "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
    out += [line(r) for r in rows]
    return "\n".join(out) + "\n"


def sweep_rows(result: ScenarioResult) -> list[list[str]]:
    rows = []
    for c in result.cells:
        imp = c.improvement
        rows.append([
            str(c.particles), str(c.beacons),
            fmt(c.pf_mean), fmt(c.pf_std), fmt(c.kfpf_mean), fmt(c.kfpf_std),
            fmt(None if imp is None else 100.0 * imp),
        ])
    return rows


def write_report(result: ScenarioResult, sink: Source, format: str = "csv") -> None:
    """Sweep table, one row per (particles, beacons) cell.

    Columns: particles, beacons, pf_mean, pf_std, kfpf_mean, kfpf_std,
    improvement_pct = 100 * (pf_mean - kfpf_mean) / pf_mean.
    """
    rows = sweep_rows(result)
    with _writer(sink) as fh:
        if format == "csv":
            fh.write(f"# format_version: {FORMAT_VERSION}\n")
            fh.write(",".join(SWEEP_HEADER) + "\n")
            for r in rows:
                fh.write(",".join(r) + "\n")
        elif format == "markdown":
            fh.write(f"<!-- format_version: {FORMAT_VERSION}; error metric: E{result.dim}D (m) -->\n")
            fh.write(_markdown(SWEEP_HEADER, rows))
        else:
            raise ValueError(f"unknown report format {format!r}")


def read_report(source: Source) -> list[dict]:
    out = []
    for lineno, _, row in _csv_rows(source, SWEEP_HEADER):
        rec = {"particles": int(row[0]), "beacons": int(row[1])}
        for key, val in zip(SWEEP_HEADER[2:], row[2:]):
            rec[key] = None if val == UNDEFINED else _float(val, lineno, key)
        out.append(rec)
    return out


METRIC_ROWS = (
    ("True Positive", "tp"),
    ("True Negative", "tn"),
    ("False Positive", "fp"),
    ("False Negative", "fn"),
    ("Precision", "precision"),
    ("Sensitivity", "sensitivity"),
    ("Specificity", "specificity"),
    ("Fall out", "fallout"),
    ("FDR", "fdr"),
    ("False Negative Rate", "fnr"),
)


def _metric_cell(m: ZoneMetrics, attr: str) -> str:
    v = getattr(m, attr)
    if v is None:
        return UNDEFINED
    return str(v) if isinstance(v, int) else f"{v:.3f}"


def write_zone_report(columns: Sequence[tuple[str, ZoneMetrics]], sink: Source, format: str = "csv",
                      accuracy: dict[str, float] | None = None) -> None:
    """Metric table laid out with one column per (zone, method) and one row per metric."""
    header = ["metric"] + [f"{m.zone.value}/{label}" for label, m in columns]
    rows = [[name] + [_metric_cell(m, attr) for _, m in columns] for name, attr in METRIC_ROWS]
    with _writer(sink) as fh:
        if format == "csv":
            fh.write(f"# format_version: {FORMAT_VERSION}\n")
            fh.write(",".join(header) + "\n")
            for r in rows:
                fh.write(",".join(r) + "\n")
        elif format == "markdown":
            fh.write(_markdown(header, rows))
        else:
            raise ValueError(f"unknown report format {format!r}")
        if accuracy:
            for label, acc in accuracy.items():
                fh.write(f"# accuracy {label}: {acc:.4f}\n" if format == "csv" else f"\naccuracy {label}: {acc:.4f}\n")


# --- estimates and zone labels ---------------------------------------------

def write_estimates(rows: Iterable[tuple[int, Sequence[float]]], sink: Source, dim: int) -> None:
    header = ["t_ms", "x_m", "y_m", "z_m"][: dim + 1]
    with _writer(sink) as fh:
        fh.write(f"# format_version: {FORMAT_VERSION}\n")
        fh.write(",".join(header) + "\n")
        for t, pos in rows:
            fh.write(",".join([str(int(t))] + [fmt(v) for v in pos]) + "\n")


def read_positions(source: Source) -> np.ndarray:
    """Read ``t_ms,x_m,y_m[,z_m]`` (t_ms optional) into an (N, dim) array."""
    pts = []
    header = None
    for lineno, header, row in _csv_rows(source):
        cols = [c for c in ("x_m", "y_m", "z_m") if c in header]
        if len(cols) < 2:
            raise FormatError("position files need x_m and y_m columns", 1)
        if len(row) != len(header):
            raise FormatError(f"expected {len(header)} fields, got {len(row)}", lineno)
        rec = dict(zip(header, row))
        pts.append([_float(rec[c], lineno, c) for c in cols])
    return np.array(pts, dtype=float)


def read_zones(source: Source, column: str | None = None) -> list[ProximityZone]:
    """Read zone labels from a CSV column (``zone``, else ``decided_zone``)."""
    out = []
    for lineno, header, row in _csv_rows(source):
        col = column or ("zone" if "zone" in header else "decided_zone")
        if col not in header:
            raise FormatError(f"no {col!r} column", 1)
        if len(row) != len(header):
            raise FormatError(f"expected {len(header)} fields, got {len(row)}", lineno)
        try:
            out.append(ProximityZone.parse(row[header.index(col)]))
        except ValueError as exc:
            raise FormatError(str(exc), lineno, col) from None
    return out


def to_string(writer, *args, **kwargs) -> str:
    buf = io.StringIO()
    writer(*args, buf, **kwargs)
    return buf.getvalue()
