"""Streaming proximity-zone classification for a single beacon stream.

Three modes share one pipeline type:

* ``BASELINE``: 10-sample moving average, free-space exponent (n=2) with the
  environment's reference RSSI, zone reported immediately.
* ``SRA``: 10-sample moving average, environment path-loss model, zone
  committed only after three consecutive identical instantaneous zones.
* ``SKF``: per-sample Kalman smoothing instead of the moving average, same
  three-in-a-row commit rule.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .errors import StreamClosed
from .kalman import KalmanParams, RssiSmoother
from .pathloss import PathLossModel, ProximityZone, classify_zone, invert_rssi

WINDOW = 10
DEBOUNCE = 3


class Mode(enum.Enum):
    BASELINE = "baseline"
    SRA = "sra"
    SKF = "skf"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ProximityDecision:
    instantaneous_zone: ProximityZone
    decided_zone: ProximityZone
    est_distance: float
    filtered_rssi: float


@dataclass
class ProximityPipeline:
    mode: Mode
    model: PathLossModel
    kalman: KalmanParams = field(default_factory=KalmanParams)
    window: deque = field(default_factory=lambda: deque(maxlen=WINDOW))
    history: deque = field(default_factory=lambda: deque(maxlen=DEBOUNCE))
    decided: ProximityZone = ProximityZone.UNKNOWN
    closed: bool = False

    def __post_init__(self):
        self.mode = Mode(self.mode)
        self._smoother = RssiSmoother(self.kalman) if self.mode is Mode.SKF else None
        if self.mode is Mode.BASELINE:
            self._ranging = PathLossModel(n=2.0, c=self.model.c, d0=self.model.d0)
        else:
            self._ranging = self.model


def prox_step(pipeline: ProximityPipeline, rssi: float) -> ProximityDecision:
    if pipeline.closed:
        raise StreamClosed("pipeline already closed")
    if rssi == 0:
        pipeline.closed = True
        raise StreamClosed("stream-end sentinel received")

    if pipeline.mode is Mode.SKF:
        filtered = pipeline._smoother(rssi)
    else:
        pipeline.window.append(rssi)
        filtered = sum(pipeline.window) / len(pipeline.window)

    dist = invert_rssi(pipeline._ranging, filtered)
    zone = classify_zone(dist)

    if pipeline.mode is Mode.BASELINE:
        pipeline.decided = zone
    else:
        pipeline.history.append(zone)
        if len(pipeline.history) == DEBOUNCE and all(z is zone for z in pipeline.history):
            pipeline.decided = zone
    return ProximityDecision(zone, pipeline.decided, dist, filtered)


def prox_run(pipeline: ProximityPipeline, series: Iterable[float]) -> list[ProximityDecision]:
    """Fold :func:`prox_step` over ``series``; a 0 sample ends the stream."""
    out = []
    for rssi in series:
        try:
            out.append(prox_step(pipeline, rssi))
        except StreamClosed:
            break
    return out
