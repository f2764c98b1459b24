"""Linear Kalman smoother for RSSI streams.

State is ``[y, dy]``: the RSSI level and its per-step rate of change.

    x_k = F x_{k-1} + v,   v ~ N(0, Q),   F = [[1, dt], [0, 1]]
    z_k = H x_k + w,       w ~ N(0, R),   H = [1, 0]

Every incoming sample advances the filter by exactly one predict/update
cycle; ``dt`` is a tuning constant rather than wall-clock time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import SingularInnovationError

H = np.array([[1.0, 0.0]])


def _default_q():
    return np.diag([0.001, 0.001])


def _default_p0():
    return np.diag([100.0, 100.0])


@dataclass(frozen=True)
class KalmanParams:
    dt: float = 0.2
    q: np.ndarray = field(default_factory=_default_q)
    r: float = 0.10
    p0: np.ndarray = field(default_factory=_default_p0)

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(2, 2)
        p0 = np.array(self.p0, dtype=float).reshape(2, 2)
        for name, m in (("q", q), ("p0", p0)):
            if not np.allclose(m, m.T):
                raise ValueError(f"{name} must be symmetric")
            if np.min(np.linalg.eigvalsh(m)) < -1e-12:
                raise ValueError(f"{name} must be positive semidefinite")
        if not self.r > 0:
            raise ValueError(f"measurement noise r must be > 0, got {self.r}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p0", p0)

    @property
    def f(self) -> np.ndarray:
        return np.array([[1.0, self.dt], [0.0, 1.0]])


@dataclass(frozen=True)
class KalmanState:
    x: np.ndarray
    p: np.ndarray

    @property
    def y(self) -> float:
        return float(self.x[0])

    @property
    def dy(self) -> float:
        return float(self.x[1])


def kf_new(params: KalmanParams, first_rssi: float) -> KalmanState:
    # anchor on the first sample; p0 already encodes low confidence
    return KalmanState(x=np.array([float(first_rssi), 0.0]), p=params.p0.copy())


def kf_predict(state: KalmanState, params: KalmanParams) -> KalmanState:
    f = params.f
    return KalmanState(x=f @ state.x, p=f @ state.p @ f.T + params.q)


def kf_gain(state: KalmanState, params: KalmanParams) -> np.ndarray:
    s = float(state.p[0, 0]) + params.r  # H P H^T with H = [1, 0]
    if s == 0.0:
        raise SingularInnovationError("innovation covariance is zero")
    return (state.p @ H.T / s).ravel()


def kf_update(state: KalmanState, params: KalmanParams, z: float) -> KalmanState:
    """Measurement update using the plain (I - K H) P covariance form.

    The covariance is re-symmetrized afterwards to absorb round-off.
    """
    k = kf_gain(state, params)
    innovation = float(z) - float(state.x[0])
    x = state.x + k * innovation
    p = (np.eye(2) - np.outer(k, H)) @ state.p
    p = 0.5 * (p + p.T)
    return KalmanState(x=x, p=p)


def kf_step(state: KalmanState, params: KalmanParams, z: float) -> KalmanState:
    return kf_update(kf_predict(state, params), params, z)


def kf_smooth_series(params: KalmanParams, series: Iterable[float]) -> list[float]:
    """Filtered RSSI after each sample; the first output is the first input."""
    out: list[float] = []
    state = None
    for z in series:
        state = kf_new(params, z) if state is None else kf_step(state, params, z)
        out.append(state.y)
    return out


class RssiSmoother:
    """Stateful per-stream wrapper: feed raw RSSI, get filtered RSSI."""

    def __init__(self, params: KalmanParams | None = None):
        self.params = params or KalmanParams()
        self.state: KalmanState | None = None

    def __call__(self, z: float) -> float:
        if self.state is None:
            self.state = kf_new(self.params, z)
        else:
            self.state = kf_step(self.state, self.params, z)
        return self.state.y
