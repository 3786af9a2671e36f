"""Quaternion helpers.

Quaternions are stored scalar-last ``(x, y, z, w)`` like
``scipy.spatial.transform.Rotation`` and kept on the ``w >= 0`` hemisphere.
"""
import numpy as np
from scipy.spatial.transform import Rotation

from .errors import ParameterError

IDENTITY_QUATERNION = np.array([0.0, 0.0, 0.0, 1.0])


def canonical(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (4,):
        raise ParameterError(f"Quaternion must have 4 components, got shape {q.shape}")
    norm = np.linalg.norm(q)
    if not np.isfinite(norm) or norm < 1e-12:
        raise ParameterError("Quaternion has zero or non-finite norm")
    q = q / norm
    return -q if q[3] < 0.0 else q


def matrix(q) -> np.ndarray:
    return Rotation.from_quat(q).as_matrix()


def multiply(q1, q2) -> np.ndarray:
    """Hamilton product ``q1 ⊗ q2``."""
    return canonical((Rotation.from_quat(q1) * Rotation.from_quat(q2)).as_quat())


def exp(rotvec) -> np.ndarray:
    return canonical(Rotation.from_rotvec(np.asarray(rotvec, dtype=float)).as_quat())


def log(q) -> np.ndarray:
    return Rotation.from_quat(q).as_rotvec()


def right_difference(q_from, q_to) -> np.ndarray:
    """Body-frame tangent ``δ`` with ``q_to = q_from ⊗ exp(δ)``."""
    return (Rotation.from_quat(q_from).inv() * Rotation.from_quat(q_to)).as_rotvec()


def rotate_left(q, delta) -> np.ndarray:
    """World-frame perturbation ``exp(δ) ⊗ q``."""
    return canonical((Rotation.from_rotvec(delta) * Rotation.from_quat(q)).as_quat())


def about_z(theta: float) -> np.ndarray:
    return exp([0.0, 0.0, theta])


def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
