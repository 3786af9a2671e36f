from .belief import EkfSettings, GaussianBelief, PoseMeasurement
from .ekf import (
    ObstacleTracker,
    confidence_probability,
    constant_velocity_process_noise,
    ekf_predict,
    ekf_update,
    initialize_belief,
    mahalanobis,
    predicted_configuration,
)

__all__ = [
    "EkfSettings",
    "GaussianBelief",
    "ObstacleTracker",
    "PoseMeasurement",
    "confidence_probability",
    "constant_velocity_process_noise",
    "ekf_predict",
    "ekf_update",
    "initialize_belief",
    "mahalanobis",
    "predicted_configuration",
]
