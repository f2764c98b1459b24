"""Seeded synthetic RSSI traces, localization sweeps and proximity experiments.

Seeding scheme
--------------
Everything derives from one master seed through ``numpy.random.SeedSequence``
spawn keys, so each stream is addressed by a fixed tuple rather than by the
order in which it is drawn:

* trace noise:   ``(TRACE, stream, crc32(beacon_id))``
* target draw:   ``(TARGET, repetition)``
* filter RNG:    ``(FILTER, n_beacons, n_particles, repetition)``
* proximity:     ``(PROXIMITY, distance_index)``

Adding a beacon therefore leaves every other beacon's noise untouched, and
PF and KFPF always see the same trace and the same particle RNG.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .kalman import KalmanParams
from .metrics import ConfusionMatrix3, confusion_build, error_2d, error_3d
from .particle import Bounds, Localizer, PfConfig, kfpf_step, pf_step
from .pathloss import ENV1_MODEL, PathLossModel, ProximityZone, classify_zone, predict_rssi
from .proximity import Mode, ProximityPipeline, prox_step
from .world import Beacon, Deployment, NoiseSpec, RssiSample, Trajectory

TRACE, TARGET, FILTER, PROXIMITY = 1, 2, 3, 4

DISTANCE_FLOOR = 0.01
DEFAULT_PERIOD_MS = 100
REFERENCE_DISTANCES = (0.0001, 0.6, 1.8, 2.4, 4.3, 5.5)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def beacon_key(beacon_id: str) -> int:
    return zlib.crc32(beacon_id.encode("utf-8"))


def generate_trace(
    deployment: Deployment,
    trajectory: Trajectory,
    noise: NoiseSpec,
    period_ms: int = DEFAULT_PERIOD_MS,
    stream: int = 0,
) -> list[RssiSample]:
    """Sample every beacon once per tick from the trajectory's start to its end."""
    if period_ms <= 0:
        raise ValueError("period_ms must be > 0")
    ticks = np.arange(trajectory.start_ms, trajectory.end_ms + 1, period_ms, dtype=np.int64)
    targets = np.array([trajectory.position_at(t) for t in ticks])
    if targets.shape[1] != deployment.dim:
        raise ValueError(f"trajectory is {targets.shape[1]}D, deployment is {deployment.dim}D")
    for t, pos in zip(ticks, targets):
        if not deployment.bounds.contains(pos):
            raise ValueError(f"trajectory leaves bounds at t_ms={t}: {tuple(pos)}")

    sigma = noise.effective_sigma(len(deployment.beacons))
    columns = []
    for b in deployment.beacons:
        rng = _rng(noise.seed, TRACE, stream, beacon_key(b.beacon_id))
        eps = rng.normal(0.0, 1.0, size=len(ticks))
        keep = rng.uniform(size=len(ticks)) >= noise.dropout_p
        dist = np.maximum(np.linalg.norm(targets - np.asarray(b.position), axis=1), DISTANCE_FLOOR)
        rssi = np.round(predict_rssi(b.model, dist) + sigma * eps, 6)
        columns.append((b.beacon_id, rssi, keep))

    trace = []
    for i, t in enumerate(ticks):
        for bid, rssi, keep in columns:
            if keep[i] and rssi[i] != 0.0:
                trace.append(RssiSample(int(t), bid, float(rssi[i])))
    return trace


def snapshots(trace: Sequence[RssiSample]) -> list[tuple[int, dict[str, float]]]:
    """Group a trace into per-timestamp ``{beacon_id: rssi}`` snapshots, in time order."""
    grouped: dict[int, dict[str, float]] = {}
    for s in trace:
        grouped.setdefault(s.t_ms, {})[s.beacon_id] = s.rssi
    return sorted(grouped.items())


def localize_trace(
    trace: Sequence[RssiSample],
    deployment: Deployment,
    config: PfConfig,
    cascade: bool,
    kalman: KalmanParams | None = None,
    rng: np.random.Generator | None = None,
) -> list[tuple[int, np.ndarray]]:
    engine = Localizer(config, deployment.positions, kalman or KalmanParams(), rng=rng)
    models = deployment.models
    step = kfpf_step if cascade else pf_step
    return [(t, step(engine, snap, models).position) for t, snap in snapshots(trace)]


# --- default geometry ------------------------------------------------------

def default_deployment(dim: int = 2, model: PathLossModel = ENV1_MODEL) -> Deployment:
    """Eight beacons on the walls of a 7 m x 6 m room (3 m ceiling in 3D).

    Taking the first k beacons yields a reasonable spread for every k >= 3.
    """
    xy = [(0.0, 0.0), (7.0, 6.0), (7.0, 0.0), (0.0, 6.0), (3.5, 0.0), (3.5, 6.0), (0.0, 3.0), (7.0, 3.0)]
    heights = [2.5, 2.5, 0.5, 0.5, 1.5, 1.5, 2.5, 0.5]
    if dim == 2:
        bounds = Bounds((0.0, 0.0), (7.0, 6.0))
        pos = xy
    elif dim == 3:
        bounds = Bounds((0.0, 0.0, 0.0), (7.0, 6.0, 3.0))
        pos = [(x, y, z) for (x, y), z in zip(xy, heights)]
    else:
        raise ValueError("dim must be 2 or 3")
    beacons = tuple(Beacon(f"b{i + 1}", p, model) for i, p in enumerate(pos))
    return Deployment(beacons, bounds)


# --- localization sweep ----------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    deployment: Deployment
    particle_counts: tuple[int, ...]
    beacon_counts: tuple[int, ...] = (3, 4, 5, 6, 7, 8)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    repetitions: int = 10
    steps: int = 40
    eval_samples: int = 10
    period_ms: int = DEFAULT_PERIOD_MS
    motion_sigma: float = 0.25
    likelihood_sigma: float = 1.0
    ess_threshold: float = 0.5
    kalman: KalmanParams = field(default_factory=KalmanParams)
    target_margin: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "particle_counts", tuple(int(p) for p in self.particle_counts))
        object.__setattr__(self, "beacon_counts", tuple(int(b) for b in self.beacon_counts))
        if not self.particle_counts:
            raise ValueError("particle_counts is empty")
        if not self.beacon_counts:
            raise ValueError("beacon_counts is empty")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not 1 <= self.eval_samples <= self.steps:
            raise ValueError("eval_samples must lie in [1, steps]")
        for b in self.beacon_counts:
            if not 1 <= b <= len(self.deployment.beacons):
                raise ValueError(f"beacon count {b} exceeds deployment size {len(self.deployment.beacons)}")

    @property
    def seed(self) -> int:
        return self.noise.seed

    @property
    def cells(self) -> list[tuple[int, int]]:
        """(particles, beacons) pairs in output order: particles outer, beacons inner."""
        return [(p, b) for p in self.particle_counts for b in self.beacon_counts]


@dataclass(frozen=True)
class SweepCell:
    particles: int
    beacons: int
    pf_mean: float
    pf_std: float
    kfpf_mean: float
    kfpf_std: float

    @property
    def improvement(self) -> float | None:
        """Fractional error reduction of KFPF over PF; None when PF error is zero."""
        return (self.pf_mean - self.kfpf_mean) / self.pf_mean if self.pf_mean > 0 else None


@dataclass(frozen=True)
class ScenarioResult:
    dim: int
    cells: tuple[SweepCell, ...]

    @property
    def pf_mean(self) -> float:
        return float(np.mean([c.pf_mean for c in self.cells]))

    @property
    def kfpf_mean(self) -> float:
        return float(np.mean([c.kfpf_mean for c in self.cells]))

    @property
    def improvement(self) -> float:
        return (self.pf_mean - self.kfpf_mean) / self.pf_mean


def draw_target(bounds: Bounds, rng: np.random.Generator, margin: float = 0.0) -> np.ndarray:
    lo = np.asarray(bounds.lo) + margin
    hi = np.asarray(bounds.hi) - margin
    lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
    return rng.uniform(lo, hi)


def paired_errors(
    deployment: Deployment,
    target: Sequence[float],
    noise: NoiseSpec,
    n_particles: int,
    filter_seed: np.random.SeedSequence | int,
    *,
    stream: int = 0,
    steps: int = 40,
    eval_samples: int = 10,
    period_ms: int = DEFAULT_PERIOD_MS,
    motion_sigma: float = 0.25,
    likelihood_sigma: float = 1.0,
    ess_threshold: float = 0.5,
    kalman: KalmanParams | None = None,
) -> tuple[float, float]:
    """Localize one stationary target with PF and with KFPF on the same trace.

    Returns (pf_error, kfpf_error), each computed over the last
    ``eval_samples`` estimates with the 2D or 3D error metric.
    """
    target = np.asarray(target, dtype=float)
    traj = Trajectory.stationary(target, (steps - 1) * period_ms)
    trace = generate_trace(deployment, traj, noise, period_ms, stream=stream)
    config = PfConfig(
        bounds=deployment.bounds,
        n_particles=n_particles,
        motion_sigma=motion_sigma,
        likelihood_sigma=likelihood_sigma,
        ess_threshold=ess_threshold,
    )
    metric = error_2d if deployment.dim == 2 else error_3d
    actual = np.tile(target, (eval_samples, 1))
    out = []
    for cascade in (False, True):
        rng = np.random.default_rng(filter_seed)
        est = localize_trace(trace, deployment, config, cascade, kalman, rng=rng)
        tail = np.array([p for _, p in est[-eval_samples:]])
        out.append(metric(actual, tail))
    return out[0], out[1]


def _sweep_task(args) -> tuple[int, int, float, float]:
    spec, cell_index, rep = args
    particles, n_beacons = spec.cells[cell_index]
    dep = spec.deployment.first(n_beacons)
    target = draw_target(dep.bounds, _rng(spec.seed, TARGET, rep), spec.target_margin)
    pf, kfpf = paired_errors(
        dep,
        target,
        spec.noise,
        particles,
        np.random.SeedSequence(spec.seed, spawn_key=(FILTER, n_beacons, particles, rep)),
        stream=rep,
        steps=spec.steps,
        eval_samples=spec.eval_samples,
        period_ms=spec.period_ms,
        motion_sigma=spec.motion_sigma,
        likelihood_sigma=spec.likelihood_sigma,
        ess_threshold=spec.ess_threshold,
        kalman=spec.kalman,
    )
    return cell_index, rep, pf, kfpf


def run_sweep(spec: SweepSpec, jobs: int = 1) -> ScenarioResult:
    """Run PF and KFPF for every (particles, beacons) cell and repetition.

    Tasks are independent; results are placed by (cell, repetition) index so
    the output does not depend on ``jobs`` or completion order.
    """
    tasks = [(spec, ci, rep) for ci in range(len(spec.cells)) for rep in range(spec.repetitions)]
    pf = np.zeros((len(spec.cells), spec.repetitions))
    kf = np.zeros_like(pf)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_sweep_task(t) for t in tasks]
    for ci, rep, e_pf, e_kf in results:
        pf[ci, rep] = e_pf
        kf[ci, rep] = e_kf

    cells = tuple(
        SweepCell(p, b, float(pf[i].mean()), float(pf[i].std()), float(kf[i].mean()), float(kf[i].std()))
        for i, (p, b) in enumerate(spec.cells)
    )
    return ScenarioResult(spec.deployment.dim, cells)


# --- proximity experiment --------------------------------------------------

@dataclass(frozen=True)
class ProximityExperimentResult:
    matrices: dict[Mode, ConfusionMatrix3]
    unknown: dict[Mode, int]
    decisions: dict[Mode, list[tuple[float, ProximityZone, ProximityZone]]]


def proximity_experiment(
    model: PathLossModel,
    distances: Sequence[float] = REFERENCE_DISTANCES,
    samples_per_distance: int = 20,
    noise: NoiseSpec | None = None,
    warmup: int = 20,
    kalman: KalmanParams | None = None,
    modes: Sequence[Mode] = (Mode.BASELINE, Mode.SRA, Mode.SKF),
) -> ProximityExperimentResult:
    """Classify synthetic streams at fixed distances with each pipeline mode.

    Each distance gets a fresh pipeline per mode. The first ``warmup`` raw
    samples only prime the window/filter and debounce history; the next
    ``samples_per_distance`` decisions are scored against the true zone.
    All modes see the same raw stream. A decided zone still Unknown after
    warm-up cannot enter the 3x3 matrix and is tallied in ``unknown``.
    """
    noise = noise or NoiseSpec(sigma=0.0)
    kalman = kalman or KalmanParams()
    sigma = noise.effective_sigma(1)
    actual: dict[Mode, list] = {m: [] for m in modes}
    predicted: dict[Mode, list] = {m: [] for m in modes}
    unknown = {m: 0 for m in modes}
    decisions: dict[Mode, list] = {m: [] for m in modes}

    for k, d in enumerate(distances):
        if d <= 0:
            raise ValueError("distances must be > 0; use 0.0001 for the touching position")
        truth = classify_zone(d)
        rng = _rng(noise.seed, PROXIMITY, k)
        total = warmup + samples_per_distance
        raw = predict_rssi(model, d) + sigma * rng.normal(size=total)
        keep = rng.uniform(size=total) >= noise.dropout_p
        for mode in modes:
            pipe = ProximityPipeline(mode, model, kalman)
            for i in range(total):
                if not keep[i] or raw[i] == 0.0:
                    continue
                dec = prox_step(pipe, float(raw[i]))
                if i < warmup:
                    continue
                decisions[mode].append((d, dec.instantaneous_zone, dec.decided_zone))
                if dec.decided_zone is ProximityZone.UNKNOWN:
                    unknown[mode] += 1
                    continue
                actual[mode].append(truth)
                predicted[mode].append(dec.decided_zone)

    matrices = {m: confusion_build(actual[m], predicted[m]) for m in modes}
    return ProximityExperimentResult(matrices, unknown, decisions)
