"""Log-distance path-loss model: fitting, forward evaluation, inversion, zones.

    RSSI(d) = -10 * n * log10(d / d0) + C
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateFitError, DomainError


@dataclass(frozen=True)
class PathLossModel:
    n: float
    c: float
    d0: float = 1.0
    r2: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.n) and self.n > 0):
            raise DomainError(f"path-loss exponent must be > 0, got {self.n}")
        if not (math.isfinite(self.d0) and self.d0 > 0):
            raise DomainError(f"reference distance must be > 0, got {self.d0}")
        if not math.isfinite(self.c):
            raise DomainError(f"reference RSSI must be finite, got {self.c}")

    def to_record(self) -> str:
        parts = [f"n={self.n!r}", f"c={self.c!r}", f"d0={self.d0!r}"]
        if self.r2 is not None:
            parts.append(f"r2={self.r2!r}")
        return ", ".join(parts)

    @classmethod
    def from_record(cls, text: str) -> "PathLossModel":
        """Parse the ``n=…, c=…, d0=…, r2=…`` record produced by :meth:`to_record`."""
        fields = {}
        for chunk in text.replace("\n", ",").split(","):
            chunk = chunk.strip()
            if not chunk or chunk.startswith("#"):
                continue
            key, sep, value = chunk.partition("=")
            if not sep:
                raise ValueError(f"expected key=value, got {chunk!r}")
            fields[key.strip()] = float(value)
        missing = {"n", "c"} - fields.keys()
        if missing:
            raise ValueError(f"model record missing {sorted(missing)}")
        return cls(n=fields["n"], c=fields["c"], d0=fields.get("d0", 1.0), r2=fields.get("r2"))


# Fitted constants for the two measured rooms.
ENV1_MODEL = PathLossModel(n=0.9116, c=-62.78, d0=1.0)
ENV2_MODEL = PathLossModel(n=1.246, c=-60.95, d0=1.0)


@dataclass(frozen=True)
class CalibrationPoint:
    distance: float
    mean_rssi: float

    def __post_init__(self):
        if not self.distance > 0:
            raise DomainError(f"calibration distance must be > 0, got {self.distance}")
        if not math.isfinite(self.mean_rssi):
            raise DomainError(f"calibration RSSI must be finite, got {self.mean_rssi}")


class ProximityZone(enum.Enum):
    IMMEDIATE = "immediate"
    NEAR = "near"
    FAR = "far"
    UNKNOWN = "unknown"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "ProximityZone":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown proximity zone {text!r}") from None


# Zone thresholds in meters; Near is closed on both ends.
IMMEDIATE_LIMIT = 1.0
NEAR_LIMIT = 3.0


def fit_path_loss(points: Sequence[CalibrationPoint], d0: float = 1.0) -> PathLossModel:
    """Least-squares fit of mean RSSI against log10(d / d0).

    The model is linear in (n, C), so ordinary least squares on the
    log-distance axis gives the exact minimizer of the squared RSSI residuals.
    The returned model carries R^2 = 1 - SSE/SST.
    """
    if not d0 > 0:
        raise DomainError(f"reference distance must be > 0, got {d0}")
    dist = np.array([p.distance for p in points], dtype=float)
    rssi = np.array([p.mean_rssi for p in points], dtype=float)
    if np.any(dist <= 0):
        raise DomainError("calibration distances must be > 0")
    if len(np.unique(dist)) < 2:
        raise DegenerateFitError("need at least two distinct calibration distances")

    x = np.log10(dist / d0)
    xm, ym = x.mean(), rssi.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = np.sum((x - xm) * (rssi - ym)) / sxx
    intercept = ym - slope * xm
    n = -slope / 10.0
    if not n > 0:
        raise DegenerateFitError(f"fitted exponent {n:.4g} is not positive (RSSI does not fall with distance)")

    resid = rssi - (slope * x + intercept)
    sst = np.sum((rssi - ym) ** 2)
    r2 = 1.0 - float(resid @ resid) / float(sst) if sst > 0 else 1.0
    return PathLossModel(n=float(n), c=float(intercept), d0=float(d0), r2=r2)


def predict_rssi(model: PathLossModel, d):
    """Expected RSSI (dBm) at distance ``d`` meters. Accepts scalars or arrays."""
    arr = np.asarray(d, dtype=float)
    if np.any(arr <= 0):
        raise DomainError(f"distance must be > 0, got {d}")
    out = -10.0 * model.n * np.log10(arr / model.d0) + model.c
    return float(out) if out.ndim == 0 else out


def invert_rssi(model: PathLossModel, rssi):
    """Distance (m) whose expected RSSI equals ``rssi``; exact inverse of predict_rssi."""
    arr = np.asarray(rssi, dtype=float)
    out = model.d0 * np.power(10.0, (model.c - arr) / (10.0 * model.n))
    return float(out) if out.ndim == 0 else out


def classify_zone(d: float | None) -> ProximityZone:
    """Map a distance to its proximity zone; ``None`` means not ranged."""
    if d is None or (isinstance(d, float) and math.isnan(d)):
        return ProximityZone.UNKNOWN
    if d < 0:
        raise DomainError(f"distance must be >= 0, got {d}")
    if d < IMMEDIATE_LIMIT:
        return ProximityZone.IMMEDIATE
    if d <= NEAR_LIMIT:
        return ProximityZone.NEAR
    return ProximityZone.FAR


def calibration_points(rows: Iterable[tuple[float, float]]) -> list[CalibrationPoint]:
    return [CalibrationPoint(float(d), float(r)) for d, r in rows]
