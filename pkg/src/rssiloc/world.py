"""Plain value types describing a synthetic or recorded deployment."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .particle import Bounds
from .pathloss import PathLossModel


@dataclass(frozen=True)
class RssiSample:
    t_ms: int
    beacon_id: str
    rssi: float


@dataclass(frozen=True)
class Beacon:
    beacon_id: str
    position: tuple[float, ...]
    model: PathLossModel


@dataclass(frozen=True)
class Deployment:
    beacons: tuple[Beacon, ...]
    bounds: Bounds

    def __post_init__(self):
        object.__setattr__(self, "beacons", tuple(self.beacons))
        seen = set()
        for i, b in enumerate(self.beacons):
            if b.beacon_id in seen:
                raise ValueError(f"beacons[{i}].id: duplicate beacon id {b.beacon_id!r}")
            seen.add(b.beacon_id)
            if len(b.position) != self.bounds.dim:
                raise ValueError(f"beacons[{i}]: position has {len(b.position)} coordinates, bounds are {self.bounds.dim}D")
            if not self.bounds.contains(b.position):
                raise ValueError(f"beacons[{i}]: position {b.position} outside bounds")

    @property
    def dim(self) -> int:
        return self.bounds.dim

    @property
    def positions(self) -> dict[str, tuple[float, ...]]:
        return {b.beacon_id: b.position for b in self.beacons}

    @property
    def models(self) -> dict[str, PathLossModel]:
        return {b.beacon_id: b.model for b in self.beacons}

    def first(self, k: int) -> "Deployment":
        """Deployment restricted to the first ``k`` beacons."""
        if not 1 <= k <= len(self.beacons):
            raise ValueError(f"cannot take {k} of {len(self.beacons)} beacons")
        return Deployment(self.beacons[:k], self.bounds)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian RSSI noise with random sample loss.

    When a deployment holds more than ``crowding_threshold`` beacons, every
    beacon's sigma is multiplied by ``crowding_multiplier`` (a crude stand-in
    for co-channel interference in dense deployments).
    """

    sigma: float = 3.0
    dropout_p: float = 0.0
    seed: int = 0
    crowding_threshold: int | None = None
    crowding_multiplier: float = 1.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not 0.0 <= self.dropout_p <= 1.0:
            raise ValueError("dropout_p must lie in [0, 1]")

    def effective_sigma(self, n_beacons: int) -> float:
        if self.crowding_threshold is not None and n_beacons > self.crowding_threshold:
            return self.sigma * self.crowding_multiplier
        return self.sigma


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear path through ``(t_ms, position)`` waypoints."""

    waypoints: tuple[tuple[int, tuple[float, ...]], ...]

    def __post_init__(self):
        wps = tuple((int(t), tuple(float(v) for v in p)) for t, p in self.waypoints)
        if not wps:
            raise ValueError("trajectory needs at least one waypoint")
        if any(b[0] <= a[0] for a, b in zip(wps, wps[1:])):
            raise ValueError("waypoint times must be strictly increasing")
        if len({len(p) for _, p in wps}) != 1:
            raise ValueError("waypoints must share a dimension")
        object.__setattr__(self, "waypoints", wps)

    @classmethod
    def stationary(cls, position: Sequence[float], duration_ms: int) -> "Trajectory":
        pos = tuple(position)
        if duration_ms <= 0:
            return cls(((0, pos),))
        return cls(((0, pos), (int(duration_ms), pos)))

    @property
    def start_ms(self) -> int:
        return self.waypoints[0][0]

    @property
    def end_ms(self) -> int:
        return self.waypoints[-1][0]

    def position_at(self, t_ms: float) -> np.ndarray:
        times = np.array([t for t, _ in self.waypoints], dtype=float)
        pts = np.array([p for _, p in self.waypoints], dtype=float)
        return np.array([np.interp(t_ms, times, pts[:, k]) for k in range(pts.shape[1])])
