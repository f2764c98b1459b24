import numpy as np
import pytest

from rssiloc.metrics import accuracy
from rssiloc.pathloss import ENV1_MODEL, ProximityZone, predict_rssi
from rssiloc.proximity import Mode
from rssiloc.simulator import (
    default_deployment,
    draw_target,
    generate_trace,
    paired_errors,
    proximity_experiment,
    run_sweep,
    snapshots,
    SweepSpec,
)
from rssiloc.world import Beacon, Deployment, NoiseSpec, Trajectory
from rssiloc.particle import Bounds

ROOM = default_deployment(2)


def one_beacon(pos=(0.0, 0.0)):
    return Deployment((Beacon("b1", pos, ENV1_MODEL),), Bounds((0.0, 0.0), (10.0, 10.0)))


def test_noiseless_one_metre():
    trace = generate_trace(one_beacon(), Trajectory.stationary((1.0, 0.0), 0), NoiseSpec(sigma=0.0))
    assert len(trace) == 1
    assert trace[0].rssi == pytest.approx(-62.78, abs=1e-6)


def test_full_dropout_is_empty():
    traj = Trajectory.stationary((3.0, 3.0), 1000)
    assert generate_trace(ROOM, traj, NoiseSpec(dropout_p=1.0)) == []


def test_tick_layout():
    trace = generate_trace(ROOM, Trajectory.stationary((3.0, 3.0), 900), NoiseSpec())
    assert len(trace) == 10 * len(ROOM.beacons)
    assert [t for t, _ in snapshots(trace)] == list(range(0, 1000, 100))


def test_deterministic():
    traj = Trajectory.stationary((2.0, 4.0), 2000)
    a = generate_trace(ROOM, traj, NoiseSpec(seed=9))
    b = generate_trace(ROOM, traj, NoiseSpec(seed=9))
    c = generate_trace(ROOM, traj, NoiseSpec(seed=10))
    assert a == b
    assert a != c


def test_noise_level():
    traj = Trajectory.stationary((2.0, 0.0), 100 * 9999)
    trace = generate_trace(one_beacon(), traj, NoiseSpec(sigma=3.0, seed=1))
    resid = np.array([s.rssi for s in trace]) - predict_rssi(ENV1_MODEL, 2.0)
    assert len(resid) == 10_000
    assert np.std(resid, ddof=1) == pytest.approx(3.0, rel=0.05)
    assert abs(np.mean(resid)) < 0.1


def test_adding_beacons_keeps_existing_streams():
    traj = Trajectory.stationary((3.0, 2.0), 1500)
    small = generate_trace(ROOM.first(3), traj, NoiseSpec(seed=4))
    large = generate_trace(ROOM, traj, NoiseSpec(seed=4))
    keep = {"b1", "b2", "b3"}
    assert small == [s for s in large if s.beacon_id in keep]


def test_crowding_inflates_sigma():
    spec = NoiseSpec(sigma=2.0, crowding_threshold=5, crowding_multiplier=2.0)
    assert spec.effective_sigma(5) == 2.0
    assert spec.effective_sigma(6) == 4.0


def test_leaving_bounds_raises():
    traj = Trajectory(((0, (1.0, 1.0)), (1000, (12.0, 1.0))))
    with pytest.raises(ValueError, match="bounds"):
        generate_trace(ROOM, traj, NoiseSpec())


def test_moving_target_interpolates():
    traj = Trajectory(((0, (1.0, 0.0)), (1000, (5.0, 0.0))))
    trace = generate_trace(one_beacon(), traj, NoiseSpec(sigma=0.0))
    assert trace[5].rssi == pytest.approx(predict_rssi(ENV1_MODEL, 3.0), abs=1e-6)


def test_default_deployment():
    d3 = default_deployment(3)
    assert len(ROOM.beacons) == len(d3.beacons) == 8
    assert d3.dim == 3
    with pytest.raises(ValueError):
        default_deployment(4)


def test_draw_target_respects_margin():
    rng = np.random.default_rng(0)
    pts = np.array([draw_target(ROOM.bounds, rng, 0.5) for _ in range(200)])
    assert np.all(pts.min(axis=0) >= [0.5, 0.5])
    assert np.all(pts.max(axis=0) <= [6.5, 5.5])


def test_noiseless_localization_is_close():
    pf, kfpf = paired_errors(ROOM.first(6), (2.0, 3.5), NoiseSpec(sigma=0.0), 1000, 1)
    assert pf < 0.3 and kfpf < 0.3


def small_spec(**kw):
    base = dict(
        deployment=ROOM,
        particle_counts=(200, 400),
        beacon_counts=(4, 6),
        noise=NoiseSpec(sigma=3.0, seed=5),
        repetitions=2,
        steps=15,
        eval_samples=5,
    )
    base.update(kw)
    return SweepSpec(**base)


def test_sweep_shape_and_order():
    res = run_sweep(small_spec())
    assert [(c.particles, c.beacons) for c in res.cells] == [(200, 4), (200, 6), (400, 4), (400, 6)]
    assert all(c.pf_mean >= 0 and c.kfpf_std >= 0 for c in res.cells)


def test_sweep_deterministic_and_seed_sensitive():
    a = run_sweep(small_spec())
    assert a == run_sweep(small_spec())
    assert a != run_sweep(small_spec(noise=NoiseSpec(sigma=3.0, seed=6)))


def test_sweep_parallel_matches_serial():
    spec = small_spec(repetitions=3)
    assert run_sweep(spec, jobs=1) == run_sweep(spec, jobs=3)


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        small_spec(beacon_counts=(9,))
    with pytest.raises(ValueError):
        small_spec(particle_counts=())
    with pytest.raises(ValueError):
        small_spec(eval_samples=20)


def test_proximity_experiment_noiseless():
    res = proximity_experiment(ENV1_MODEL)
    for mode in Mode:
        assert res.matrices[mode].total + res.unknown[mode] == 120
        assert len(res.decisions[mode]) == 120
    assert accuracy(res.matrices[Mode.SRA]) == 1.0
    assert accuracy(res.matrices[Mode.SKF]) == 1.0
    assert accuracy(res.matrices[Mode.BASELINE]) == pytest.approx(4 / 6)


def test_proximity_experiment_baseline_errors_are_far_as_near():
    res = proximity_experiment(ENV1_MODEL)
    cm = res.matrices[Mode.BASELINE].counts
    # rows: actual, columns: predicted
    np.testing.assert_array_equal(cm, [[40, 0, 0], [0, 40, 0], [0, 40, 0]])


def test_proximity_experiment_rejects_zero_distance():
    with pytest.raises(ValueError):
        proximity_experiment(ENV1_MODEL, distances=(0.0,))


def test_proximity_experiment_zone_truth():
    res = proximity_experiment(ENV1_MODEL, distances=(0.5,), samples_per_distance=3)
    assert {dec[2] for dec in res.decisions[Mode.SRA]} == {ProximityZone.IMMEDIATE}
