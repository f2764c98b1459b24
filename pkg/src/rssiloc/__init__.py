"""RSSI path-loss ranging, Kalman smoothing, proximity zones and particle-filter localization."""

from .kalman import KalmanParams, KalmanState, kf_new, kf_predict, kf_smooth_series, kf_step, kf_update
from .metrics import ConfusionMatrix3, ZoneMetrics, accuracy, confusion_build, error_2d, error_3d, zone_metrics
from .particle import (
    BeaconObservation,
    Bounds,
    Localizer,
    ParticleSet,
    PfConfig,
    kfpf_step,
    pf_estimate,
    pf_init,
    pf_predict,
    pf_resample,
    pf_step,
    pf_update_weights,
)
from .pathloss import (
    ENV1_MODEL,
    ENV2_MODEL,
    CalibrationPoint,
    PathLossModel,
    ProximityZone,
    calibration_points,
    classify_zone,
    fit_path_loss,
    invert_rssi,
    predict_rssi,
)
from .proximity import Mode, ProximityDecision, ProximityPipeline, prox_run, prox_step
from .world import Beacon, Deployment, NoiseSpec, RssiSample, Trajectory

__version__ = "0.1.0"
