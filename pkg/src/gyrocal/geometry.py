"""Attitude algebra: quaternions, DCMs, skew-symmetric operators.

Conventions used throughout the package:

- Navigation frame (n-frame) is NED (north-east-down).
- Body frame (b-frame) is front-right-down of the device.
- Quaternions are scalar-first Hamilton quaternions representing the
  body-to-nav rotation, i.e. ``dcm_from_quat(q) @ v_b`` gives ``v_n``.
- Attitude error convention: an estimate relates to truth through
  ``C_hat = (I - skew(psi)) @ C``.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "skew",
    "quat_multiply",
    "quat_conjugate",
    "quat_normalize",
    "quat_from_rotvec",
    "rotvec_from_quat",
    "dcm_from_quat",
    "quat_from_dcm",
    "quat_from_euler",
    "euler_from_dcm",
    "orthonormalize_rotation",
    "rotation_angle_between",
    "Attitude",
    "apply_attitude_error",
]


def skew(v: ArrayLike) -> NDArray[np.float64]:
    """
    Skew-symmetric (cross-product) matrix of a 3-vector.

    ``skew(v) @ w`` equals ``np.cross(v, w)`` for any 3-vector ``w``.
    """
    x, y, z = np.asarray(v, dtype=float)
    return np.array(
        [
            [0.0, -z, y],
            [z, 0.0, -x],
            [-y, x, 0.0],
        ]
    )


def quat_multiply(p: ArrayLike, q: ArrayLike) -> NDArray[np.float64]:
    """
    Hamilton product ``p * q`` of scalar-first quaternions.

    Composes rotations such that ``dcm(p * q) == dcm(p) @ dcm(q)``.
    Supports broadcasting over leading axes (shape ``(..., 4)``).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pw, px, py, pz = np.moveaxis(p, -1, 0)
    qw, qx, qy, qz = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ],
        axis=-1,
    )


def quat_conjugate(q: ArrayLike) -> NDArray[np.float64]:
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_normalize(q: ArrayLike) -> NDArray[np.float64]:
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=q.ndim > 1)


def quat_from_rotvec(phi: ArrayLike) -> NDArray[np.float64]:
    """
    Quaternion of a rotation vector (axis times angle, rad).

    Broadcasts over leading axes (shape ``(..., 3)``).
    """
    phi = np.asarray(phi, dtype=float)
    angle = np.linalg.norm(phi, axis=-1, keepdims=True)
    half = 0.5 * angle
    # Series for sin(x/2)/x around zero; exact branch elsewhere.
    small = angle < 1e-8
    with np.errstate(invalid="ignore"):
        k = np.where(small, 0.5 - angle**2 / 48.0, np.sin(half) / np.where(angle == 0.0, 1.0, angle))
    w = np.cos(half)
    return np.concatenate([w, k * phi], axis=-1)


def rotvec_from_quat(q: ArrayLike) -> NDArray[np.float64]:
    """Rotation vector (rad) of a unit quaternion; inverse of `quat_from_rotvec`."""
    q = np.asarray(q, dtype=float)
    # Force positive scalar part so the angle lands in [0, pi].
    q = q * np.where(q[..., :1] < 0.0, -1.0, 1.0)
    w = np.clip(q[..., :1], -1.0, 1.0)
    vnorm = np.linalg.norm(q[..., 1:], axis=-1, keepdims=True)
    angle = 2.0 * np.arctan2(vnorm, w)
    small = vnorm < 1e-12
    scale = np.where(small, 2.0, angle / np.where(vnorm == 0.0, 1.0, vnorm))
    return scale * q[..., 1:]


def dcm_from_quat(q: ArrayLike) -> NDArray[np.float64]:
    """Direction cosine matrix (body-to-nav) of a unit quaternion."""
    w, x, y, z = np.asarray(q, dtype=float)
    return np.array(
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    )


def quat_from_dcm(C: ArrayLike) -> NDArray[np.float64]:
    """Unit quaternion of a rotation matrix (Shepperd's method)."""
    C = np.asarray(C, dtype=float)
    tr = np.trace(C)
    choices = [tr, C[0, 0], C[1, 1], C[2, 2]]
    i = int(np.argmax(choices))
    if i == 0:
        s = 2.0 * np.sqrt(1.0 + tr)
        q = np.array(
            [0.25 * s, (C[2, 1] - C[1, 2]) / s, (C[0, 2] - C[2, 0]) / s, (C[1, 0] - C[0, 1]) / s]
        )
    elif i == 1:
        s = 2.0 * np.sqrt(1.0 + 2.0 * C[0, 0] - tr)
        q = np.array(
            [(C[2, 1] - C[1, 2]) / s, 0.25 * s, (C[0, 1] + C[1, 0]) / s, (C[0, 2] + C[2, 0]) / s]
        )
    elif i == 2:
        s = 2.0 * np.sqrt(1.0 + 2.0 * C[1, 1] - tr)
        q = np.array(
            [(C[0, 2] - C[2, 0]) / s, (C[0, 1] + C[1, 0]) / s, 0.25 * s, (C[1, 2] + C[2, 1]) / s]
        )
    else:
        s = 2.0 * np.sqrt(1.0 + 2.0 * C[2, 2] - tr)
        q = np.array(
            [(C[1, 0] - C[0, 1]) / s, (C[0, 2] + C[2, 0]) / s, (C[1, 2] + C[2, 1]) / s, 0.25 * s]
        )
    return quat_normalize(q)


def quat_from_euler(roll: float, pitch: float, yaw: float) -> NDArray[np.float64]:
    """Quaternion from ZYX Euler angles (rad): yaw about z, pitch about y, roll about x."""
    qz = quat_from_rotvec([0.0, 0.0, yaw])
    qy = quat_from_rotvec([0.0, pitch, 0.0])
    qx = quat_from_rotvec([roll, 0.0, 0.0])
    return quat_multiply(qz, quat_multiply(qy, qx))


def euler_from_dcm(C: ArrayLike) -> tuple[float, float, float]:
    """(roll, pitch, yaw) in rad of a body-to-nav DCM, ZYX convention."""
    C = np.asarray(C, dtype=float)
    pitch = -np.arcsin(np.clip(C[2, 0], -1.0, 1.0))
    roll = np.arctan2(C[2, 1], C[2, 2])
    yaw = np.arctan2(C[1, 0], C[0, 0])
    return float(roll), float(pitch), float(yaw)


def orthonormalize_rotation(M: ArrayLike) -> NDArray[np.float64]:
    """
    Nearest rotation matrix in Frobenius norm (polar decomposition via SVD).

    The determinant of the result is forced to +1.
    """
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def rotation_angle_between(q1: ArrayLike, q2: ArrayLike) -> float:
    """Angle (rad) of the relative rotation between two attitude quaternions."""
    dq = quat_multiply(quat_conjugate(q1), q2)
    return float(np.linalg.norm(rotvec_from_quat(dq)))


class Attitude:
    """
    Body-to-nav attitude stored as a unit quaternion with an on-demand DCM view.

    The quaternion is renormalized on construction; the DCM is computed
    lazily and cached.
    """

    __slots__ = ("q", "_dcm")

    def __init__(self, q: ArrayLike):
        q = np.asarray(q, dtype=float)
        if q.shape != (4,):
            raise ValueError(f"quaternion must have shape (4,), got {q.shape}")
        n = np.linalg.norm(q)
        if not np.isfinite(n) or n == 0.0:
            raise ValueError("quaternion must be finite and nonzero")
        self.q = q / n
        self._dcm: NDArray[np.float64] | None = None

    @classmethod
    def identity(cls) -> "Attitude":
        return cls(np.array([1.0, 0.0, 0.0, 0.0]))

    @classmethod
    def from_dcm(cls, C: ArrayLike) -> "Attitude":
        return cls(quat_from_dcm(C))

    @classmethod
    def from_euler(cls, roll: float, pitch: float, yaw: float) -> "Attitude":
        return cls(quat_from_euler(roll, pitch, yaw))

    @classmethod
    def from_rotvec(cls, phi: ArrayLike) -> "Attitude":
        return cls(quat_from_rotvec(phi))

    @property
    def dcm(self) -> NDArray[np.float64]:
        """Body-to-nav DCM view (C_b^n)."""
        if self._dcm is None:
            self._dcm = dcm_from_quat(self.q)
        return self._dcm

    def rotate(self, v_b: ArrayLike) -> NDArray[np.float64]:
        """Rotate a body-frame vector into the nav frame."""
        return self.dcm @ np.asarray(v_b, dtype=float)

    def rotate_back(self, v_n: ArrayLike) -> NDArray[np.float64]:
        """Rotate a nav-frame vector into the body frame."""
        return self.dcm.T @ np.asarray(v_n, dtype=float)

    def euler(self) -> tuple[float, float, float]:
        return euler_from_dcm(self.dcm)

    def __repr__(self) -> str:  # pragma: no cover
        return f"Attitude(q={self.q!r})"


def apply_attitude_error(att_hat: Attitude, psi: ArrayLike) -> Attitude:
    """
    Correct an attitude estimate by a small attitude error ``psi`` (rad).

    Inverse of the error-injection convention ``C_hat = (I - skew(psi)) @ C``:
    returns ``C = (I + skew(psi)) @ C_hat`` to first order, realized as the
    exact rotation ``R(psi) @ C_hat`` so the result stays orthonormal.
    """
    q_corr = quat_from_rotvec(psi)
    return Attitude(quat_multiply(q_corr, att_hat.q))
