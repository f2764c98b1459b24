"""Three-zone confusion matrices and localization error metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .pathloss import ProximityZone

ZONES = (ProximityZone.IMMEDIATE, ProximityZone.NEAR, ProximityZone.FAR)
_INDEX = {z: i for i, z in enumerate(ZONES)}


@dataclass(frozen=True)
class ConfusionMatrix3:
    """Rows are the actual zone, columns the predicted zone (Immediate, Near, Far)."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64).reshape(3, 3)
        if np.any(c < 0):
            raise ValueError("confusion counts must be >= 0")
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix3") -> "ConfusionMatrix3":
        return ConfusionMatrix3(self.counts + other.counts)


@dataclass(frozen=True)
class ZoneMetrics:
    """One-vs-rest statistics for one zone. Ratios with a zero denominator are None."""

    zone: ProximityZone
    tp: int
    tn: int
    fp: int
    fn: int
    precision: float | None
    sensitivity: float | None
    specificity: float | None
    fallout: float | None
    fdr: float | None
    fnr: float | None


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def confusion_build(actual: Sequence[ProximityZone], predicted: Sequence[ProximityZone]) -> ConfusionMatrix3:
    if len(actual) != len(predicted):
        raise ValueError(f"length mismatch: {len(actual)} actual vs {len(predicted)} predicted")
    counts = np.zeros((3, 3), dtype=np.int64)
    for i, (a, p) in enumerate(zip(actual, predicted)):
        if a not in _INDEX or p not in _INDEX:
            raise ValueError(f"pair {i}: only immediate/near/far are evaluated, got ({a}, {p})")
        counts[_INDEX[a], _INDEX[p]] += 1
    return ConfusionMatrix3(counts)


def metrics_from_counts(zone: ProximityZone, tp: int, tn: int, fp: int, fn: int) -> ZoneMetrics:
    return ZoneMetrics(
        zone=zone,
        tp=tp,
        tn=tn,
        fp=fp,
        fn=fn,
        precision=_ratio(tp, tp + fp),
        sensitivity=_ratio(tp, tp + fn),
        specificity=_ratio(tn, tn + fp),
        fallout=_ratio(fp, fp + tn),
        fdr=_ratio(fp, fp + tp),
        fnr=_ratio(fn, fn + tp),
    )


def zone_metrics(cm: ConfusionMatrix3, zone: ProximityZone) -> ZoneMetrics:
    i = _INDEX[zone]
    c = cm.counts
    tp = int(c[i, i])
    fn = int(c[i, :].sum()) - tp
    fp = int(c[:, i].sum()) - tp
    tn = cm.total - tp - fn - fp
    return metrics_from_counts(zone, tp, tn, fp, fn)


def accuracy(cm: ConfusionMatrix3) -> float:
    if cm.total == 0:
        raise ValueError("accuracy of an empty confusion matrix is undefined")
    return float(np.trace(cm.counts)) / cm.total


def _as_points(points, dim: int, name: str) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    arr = arr.reshape(-1, arr.shape[-1])
    if arr.shape[1] != dim:
        raise ValueError(f"{name} must hold {dim}D points, got shape {arr.shape}")
    return arr


def error_2d(actual, estimates) -> float:
    """Mean horizontal distance from each actual point to the averaged estimate.

    Estimates are collapsed to their component-wise mean first; the error is
    then averaged over the actual points.
    """
    act = _as_points(actual, 2, "actual")
    est = _as_points(estimates, 2, "estimates").mean(axis=0)
    return float(np.mean(np.linalg.norm(act - est, axis=1)))


def error_3d(actual, estimates) -> float:
    """Horizontal error (as :func:`error_2d`) PLUS mean absolute vertical error.

    This is a sum of two means, not a 3D Euclidean distance: a point off by
    (3, 4, 2) scores 5 + 2 = 7, not sqrt(29).
    """
    act = _as_points(actual, 3, "actual")
    est = _as_points(estimates, 3, "estimates").mean(axis=0)
    horizontal = np.mean(np.linalg.norm(act[:, :2] - est[:2], axis=1))
    vertical = np.mean(np.abs(act[:, 2] - est[2]))
    return float(horizontal + vertical)


def mean_pointwise_error(actual, estimates) -> float:
    """Mean Euclidean distance between paired actual/estimate points.

    Reported alongside :func:`error_2d` for comparison; pairs are matched by index.
    """
    act = np.asarray(actual, dtype=float)
    est = np.asarray(estimates, dtype=float)
    if act.size == 0 or est.size == 0:
        raise ValueError("empty input")
    if act.shape != est.shape:
        raise ValueError(f"shape mismatch {act.shape} vs {est.shape}")
    return float(np.mean(np.linalg.norm(act - est, axis=1)))
