"""Bootstrap (SIR) particle filter over 2D/3D position, plus the KF->PF cascade.

The importance density is the transition prior, so the weight recursion
reduces to ``w <- w * p(z | x)``. Ranges are assumed to carry independent
Gaussian error in the distance domain. Motion is a bounded random walk.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import UnknownBeaconError
from .kalman import KalmanParams, RssiSmoother
from .pathloss import PathLossModel, invert_rssi

log = logging.getLogger(__name__)


class Particle(NamedTuple):
    pos: np.ndarray
    w: float


@dataclass(frozen=True)
class Bounds:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or len(self.lo) not in (2, 3):
            raise ValueError("bounds must be 2D or 3D with matching lo/hi")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"degenerate bounds {self.lo} .. {self.hi}")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, pos, tol: float = 1e-9) -> bool:
        p = np.asarray(pos, dtype=float)
        return bool(np.all(p >= np.asarray(self.lo) - tol) and np.all(p <= np.asarray(self.hi) + tol))

    def clip(self, pos: np.ndarray) -> np.ndarray:
        return np.clip(pos, self.lo, self.hi)


@dataclass(frozen=True)
class PfConfig:
    bounds: Bounds
    n_particles: int = 1000
    motion_sigma: float = 0.25
    likelihood_sigma: float = 1.0
    ess_threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if not (self.motion_sigma > 0 and self.likelihood_sigma > 0):
            raise ValueError("sigmas must be > 0")
        if not 0 < self.ess_threshold <= 1:
            raise ValueError("ess_threshold must lie in (0, 1]")

    @property
    def dim(self) -> int:
        return self.bounds.dim


@dataclass(frozen=True)
class BeaconObservation:
    beacon_id: str
    est_distance: float

    def __post_init__(self):
        if not self.est_distance > 0:
            raise ValueError(f"estimated distance must be > 0, got {self.est_distance}")


@dataclass(frozen=True)
class ParticleSet:
    """Positions (N x dim) and normalized weights (N,).

    ``status`` records what the last operation did: "ok", "no-observations",
    "degenerate-reset" or "resampled".
    """

    positions: np.ndarray
    weights: np.ndarray
    status: str = "ok"

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def __len__(self) -> int:
        return len(self.weights)

    def __iter__(self):
        for pos, w in zip(self.positions, self.weights):
            yield Particle(pos, float(w))


def effective_sample_size(weights: np.ndarray) -> float:
    return 1.0 / float(np.sum(np.square(weights)))


def pf_init(config: PfConfig, rng: np.random.Generator) -> ParticleSet:
    lo, hi = np.asarray(config.bounds.lo), np.asarray(config.bounds.hi)
    pos = rng.uniform(lo, hi, size=(config.n_particles, config.dim))
    w = np.full(config.n_particles, 1.0 / config.n_particles)
    return ParticleSet(pos, w)


def pf_predict(pset: ParticleSet, config: PfConfig, rng: np.random.Generator) -> ParticleSet:
    step = rng.normal(0.0, config.motion_sigma, size=pset.positions.shape)
    return ParticleSet(config.bounds.clip(pset.positions + step), pset.weights.copy())


def pf_update_weights(
    pset: ParticleSet,
    obs: Sequence[BeaconObservation],
    beacons: Mapping[str, Sequence[float]],
    likelihood_sigma: float = 1.0,
) -> ParticleSet:
    if not obs:
        log.warning("weight update with no observations; weights unchanged")
        return replace(pset, status="no-observations")

    log_lik = np.zeros(len(pset))
    for o in obs:
        try:
            anchor = np.asarray(beacons[o.beacon_id], dtype=float)
        except KeyError:
            raise UnknownBeaconError(o.beacon_id) from None
        ranges = np.linalg.norm(pset.positions - anchor[: pset.dim], axis=1)
        log_lik += -0.5 * ((o.est_distance - ranges) / likelihood_sigma) ** 2

    # Normalization constants cancel; raw (unshifted) values are kept so a
    # set far from every plausible position can underflow to all-zero.
    raw = pset.weights * np.exp(log_lik)
    total = raw.sum()
    if not np.isfinite(total) or total <= 0.0:
        n = len(pset)
        return ParticleSet(pset.positions, np.full(n, 1.0 / n), status="degenerate-reset")
    return ParticleSet(pset.positions, raw / total)


def systematic_indices(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = len(weights)
    u = (rng.uniform() + np.arange(n)) / n
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, u, side="right")


def pf_resample(pset: ParticleSet, config: PfConfig, rng: np.random.Generator) -> ParticleSet:
    n = len(pset)
    if effective_sample_size(pset.weights) >= config.ess_threshold * n:
        return pset
    idx = systematic_indices(pset.weights, rng)
    return ParticleSet(pset.positions[idx], np.full(n, 1.0 / n), status="resampled")


def pf_estimate(pset: ParticleSet) -> np.ndarray:
    return pset.weights @ pset.positions


class StepResult(NamedTuple):
    position: np.ndarray
    stale: bool = False
    degenerate: bool = False
    resampled: bool = False


@dataclass
class Localizer:
    """One tracked target: a particle set, its RNG, and per-beacon smoothers.

    ``beacons`` maps beacon id to its position. Smoothers are created lazily
    the first time a beacon is seen and are only used by :func:`kfpf_step`.
    """

    config: PfConfig
    beacons: Mapping[str, Sequence[float]]
    kalman: KalmanParams = field(default_factory=KalmanParams)
    rng: np.random.Generator = None
    particles: ParticleSet = None
    smoothers: dict = field(default_factory=dict)
    estimate: np.ndarray = None

    def __post_init__(self):
        if self.rng is None:
            self.rng = np.random.default_rng(self.config.seed)
        if self.particles is None:
            self.particles = pf_init(self.config, self.rng)
        if self.estimate is None:
            self.estimate = pf_estimate(self.particles)

    def smooth(self, beacon_id: str, rssi: float) -> float:
        if beacon_id not in self.smoothers:
            self.smoothers[beacon_id] = RssiSmoother(self.kalman)
        return self.smoothers[beacon_id](rssi)


def _localize(engine: Localizer, rssi: Mapping[str, float], models: Mapping[str, PathLossModel]) -> StepResult:
    if not rssi:
        return StepResult(engine.estimate.copy(), stale=True)
    # sorted ids make the result independent of snapshot insertion order
    ids = sorted(rssi)
    for bid in ids:
        if bid not in engine.beacons or bid not in models:
            raise UnknownBeaconError(bid)
    obs = [BeaconObservation(bid, invert_rssi(models[bid], rssi[bid])) for bid in ids]

    cfg = engine.config
    pset = pf_predict(engine.particles, cfg, engine.rng)
    pset = pf_update_weights(pset, obs, engine.beacons, cfg.likelihood_sigma)
    degenerate = pset.status == "degenerate-reset"
    pset = pf_resample(pset, cfg, engine.rng)
    engine.particles = pset
    engine.estimate = pf_estimate(pset)
    return StepResult(engine.estimate.copy(), degenerate=degenerate, resampled=pset.status == "resampled")


def pf_step(engine: Localizer, rssi_snapshot: Mapping[str, float], models: Mapping[str, PathLossModel]) -> StepResult:
    """Plain particle-filter step on raw RSSI."""
    return _localize(engine, rssi_snapshot, models)


def kfpf_step(engine: Localizer, rssi_snapshot: Mapping[str, float], models: Mapping[str, PathLossModel]) -> StepResult:
    """Cascade step: per-beacon Kalman smoothing, then the particle-filter step."""
    for bid in rssi_snapshot:
        if bid not in engine.beacons or bid not in models:
            raise UnknownBeaconError(bid)
    filtered = {bid: engine.smooth(bid, rssi_snapshot[bid]) for bid in sorted(rssi_snapshot)}
    return _localize(engine, filtered, models)
