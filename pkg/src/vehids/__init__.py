"""Vehicle DoS intrusion detection testbed.

A desk-scale pipeline: longitudinal vehicle simulator under PWM-scheduled DoS
attacks, monitored by an unscented Kalman filter whose dynamics model is a
small learned network, with alarms raised by a dual-statistic sliding-window
CUSUM detector and benchmarked against a classical Kalman filter.
"""

from .attacks import AttackSchedule, AttackTargets, attack_actuator, attack_sensor, is_active
from .config import ConfigError, RunConfig, load_run_config
from .detector import DetectorConfig, DetectorState, alarm, push_residual, test1, test2
from .estimators import (
    GaussianBelief,
    KalmanFilterBaseline,
    KfModel,
    ProcessModel,
    SigmaSet,
    UnscentedKalmanFilter,
    UpdateResult,
    UtParams,
    kf_step,
    select_sigma_points,
    ukf_predict,
    ukf_update,
)
from .harness import (
    ConfusionMetrics,
    ExperimentResult,
    StepLabel,
    calibrate_threshold_scale,
    run_experiment,
    score,
    sweep_thresholds,
    write_metrics_json,
)
from .learner import (
    MlpModel,
    OnlineAdaptConfig,
    OnlineAdapter,
    TrainConfig,
    TrainingSample,
    adaptive_rate,
    as_process_model,
    forward,
    init_model,
    load_model,
    online_update,
    save_model,
    train_offline,
)
from .vehicle import (
    ControlCommand,
    Measurement,
    RunLog,
    Scenario,
    VehicleParams,
    VehicleState,
    generate_scenario,
    measure,
    run_log,
    step,
    unify_control,
)

__version__ = "0.1.0"
