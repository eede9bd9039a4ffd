"""SE(3) pose beliefs and their covariance propagation.

Poses are 4x4 homogeneous transforms. Perturbations are 6-vectors
``xi = (rho, phi)`` (translation first, rotation second) injected on the
left::

    T = exp(xi^) @ T_bar,    xi ~ N(0, Sigma)

so that a belief is the pair ``(T_bar, Sigma)``. Covariances are compounded
through the adjoint ``Ad(T) = [[R, t^ R], [0, R]]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

_SMALL_ANGLE = 1e-6
_ORTHO_TOL = 1e-9
_SYM_TOL = 1e-12


@dataclass(frozen=True)
class Twist:
    """Small pose perturbation: translation ``rho`` [m], rotation ``phi`` [rad]."""

    rho: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float).reshape(3)
        phi = np.asarray(self.phi, dtype=float).reshape(3)
        if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(phi))):
            raise ValueError("twist entries must be finite")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def from_vector(cls, xi) -> "Twist":
        xi = np.asarray(xi, dtype=float).reshape(6)
        return cls(xi[:3], xi[3:])

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.rho, self.phi])


TwistLike = Union[Twist, Sequence[float], np.ndarray]


def _as_xi(xi: TwistLike) -> np.ndarray:
    if isinstance(xi, Twist):
        return xi.vector
    return np.asarray(xi, dtype=float).reshape(6)


@dataclass(frozen=True)
class Pose:
    """Rigid transform in SE(3) stored as a 4x4 homogeneous matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"pose matrix must be 4x4, got {m.shape}")
        r = m[:3, :3]
        if np.max(np.abs(r.T @ r - np.eye(3))) > _ORTHO_TOL:
            raise ValueError("rotation block is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation block must have determinant +1")
        if not np.array_equal(m[3], [0.0, 0.0, 0.0, 1.0]):
            raise ValueError("bottom row of a pose must be (0, 0, 0, 1)")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(4))

    @classmethod
    def from_rt(cls, rotation, translation) -> "Pose":
        m = np.eye(4)
        m[:3, :3] = rotation
        m[:3, 3] = translation
        return cls(m)

    @classmethod
    def planar(cls, x: float, y: float, yaw: float, z: float = 0.0) -> "Pose":
        c, s = np.cos(yaw), np.sin(yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return cls.from_rt(rot, [x, y, z])

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:3, 3]

    def inverse(self) -> "Pose":
        r = self.rotation
        return Pose.from_rt(r.T, -r.T @ self.translation)

    def __matmul__(self, other: "Pose") -> "Pose":
        return Pose(_reorthonormalize(self.matrix @ other.matrix))


@dataclass(frozen=True)
class PoseBelief:
    """Gaussian belief over a pose: nominal ``mean`` and 6x6 left-perturbation ``cov``."""

    mean: Pose
    cov: np.ndarray = field(default_factory=lambda: np.zeros((6, 6)))

    def __post_init__(self):
        cov = np.array(self.cov, dtype=float)
        if cov.shape != (6, 6):
            raise ValueError(f"covariance must be 6x6, got {cov.shape}")
        check_covariance(cov)
        cov.setflags(write=False)
        object.__setattr__(self, "cov", cov)


def check_covariance(cov: np.ndarray) -> None:
    """Raise ``ValueError("invalid covariance")`` unless ``cov`` is symmetric PSD."""
    cov = np.asarray(cov, dtype=float)
    if not np.all(np.isfinite(cov)):
        raise ValueError("invalid covariance: non-finite entries")
    if np.max(np.abs(cov - cov.T), initial=0.0) > _SYM_TOL * max(1.0, np.max(np.abs(cov))):
        raise ValueError("invalid covariance: not symmetric")
    if np.linalg.eigvalsh(cov).min() < -_SYM_TOL * max(1.0, np.max(np.abs(cov))):
        raise ValueError("invalid covariance: not positive semidefinite")


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _reorthonormalize(m: np.ndarray) -> np.ndarray:
    # Products of many poses drift off SO(3); project back with an SVD.
    out = np.array(m, dtype=float)
    u, _, vt = np.linalg.svd(out[:3, :3])
    out[:3, :3] = u @ vt
    out[3] = (0.0, 0.0, 0.0, 1.0)
    return out


def skew(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    p1, p2, p3 = phi[..., 0], phi[..., 1], phi[..., 2]
    z = np.zeros_like(p1)
    return np.stack(
        [
            np.stack([z, -p3, p2], axis=-1),
            np.stack([p3, z, -p1], axis=-1),
            np.stack([-p2, p1, z], axis=-1),
        ],
        axis=-2,
    )


def hat(xi: TwistLike) -> np.ndarray:
    """Lie-algebra matrix of a twist: ``[[skew(phi), rho], [0, 0]]``."""
    xi = _as_xi(xi)
    m = np.zeros((4, 4))
    m[:3, :3] = skew(xi[3:])
    m[:3, 3] = xi[:3]
    return m


def vee(m: np.ndarray) -> np.ndarray:
    """Inverse of :func:`hat`; works on stacked ``(..., 4, 4)`` inputs."""
    m = np.asarray(m, dtype=float)
    rho = m[..., :3, 3]
    phi = np.stack([m[..., 2, 1], m[..., 0, 2], m[..., 1, 0]], axis=-1)
    return np.concatenate([rho, phi], axis=-1)


def _so3_coefficients(theta: np.ndarray):
    """Return (sin t / t, (1 - cos t) / t^2, (t - sin t) / t^3) with small-angle series."""
    small = theta < _SMALL_ANGLE
    t = np.where(small, 1.0, theta)
    t2 = t * t
    a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(t) / t)
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(t)) / t2)
    c = np.where(small, 1.0 / 6.0 - theta**2 / 120.0, (t - np.sin(t)) / (t2 * t))
    return a, b, c


def exp_se3_batch(xi: np.ndarray) -> np.ndarray:
    """Closed-form SE(3) exponential of stacked twists ``(N, 6) -> (N, 4, 4)``."""
    xi = np.asarray(xi, dtype=float).reshape(-1, 6)
    rho, phi = xi[:, :3], xi[:, 3:]
    theta = np.linalg.norm(phi, axis=1)
    a, b, c = _so3_coefficients(theta)
    k = skew(phi)
    k2 = k @ k
    eye = np.eye(3)
    rot = eye + a[:, None, None] * k + b[:, None, None] * k2
    left_jac = eye + b[:, None, None] * k + c[:, None, None] * k2
    out = np.zeros((xi.shape[0], 4, 4))
    out[:, :3, :3] = rot
    out[:, :3, 3] = np.einsum("nij,nj->ni", left_jac, rho)
    out[:, 3, 3] = 1.0
    return out


def exp_se3(xi: TwistLike) -> Pose:
    return Pose(exp_se3_batch(_as_xi(xi))[0])


def log_se3_batch(m: np.ndarray) -> np.ndarray:
    """SE(3) logarithm of stacked transforms ``(N, 4, 4) -> (N, 6)``."""
    m = np.asarray(m, dtype=float).reshape(-1, 4, 4)
    rot = m[:, :3, :3]
    t = m[:, :3, 3]
    cos_t = np.clip((np.trace(rot, axis1=1, axis2=2) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos_t)
    w = np.stack(
        [rot[:, 2, 1] - rot[:, 1, 2], rot[:, 0, 2] - rot[:, 2, 0], rot[:, 1, 0] - rot[:, 0, 1]],
        axis=1,
    )
    small = theta < _SMALL_ANGLE
    sin_t = np.sin(theta)
    scale = np.where(small, 0.5 + theta**2 / 12.0, theta / (2.0 * np.where(small, 1.0, sin_t)))
    phi = scale[:, None] * w

    # Near pi the antisymmetric part vanishes; the symmetric part
    # (R + R^T)/2 = cos(t) I + (1 - cos(t)) a a^T still carries the axis.
    near_pi = theta > 2.5
    for i in np.flatnonzero(near_pi):
        b = ((rot[i] + rot[i].T) / 2.0 - cos_t[i] * np.eye(3)) / (1.0 - cos_t[i])
        j = int(np.argmax(np.diag(b)))
        axis = b[:, j] / np.sqrt(b[j, j])
        if axis @ w[i] < 0:
            axis = -axis
        phi[i] = theta[i] * axis

    _, b_coef, _ = _so3_coefficients(theta)
    k = skew(phi)
    # V^-1 = I - K/2 + (1/t^2)(1 - a/(2b)) K^2
    tt = np.where(small, 1.0, theta)
    a_coef = np.where(small, 1.0, np.sin(tt) / tt)
    d = np.where(small, 1.0 / 12.0, (1.0 - a_coef / (2.0 * np.where(small, 1.0, b_coef))) / tt**2)
    inv_jac = np.eye(3) - 0.5 * k + d[:, None, None] * (k @ k)
    rho = np.einsum("nij,nj->ni", inv_jac, t)
    return np.concatenate([rho, phi], axis=1)


def log_se3(pose: Pose) -> np.ndarray:
    return log_se3_batch(pose.matrix)[0]


def adjoint(pose: Pose) -> np.ndarray:
    r = pose.rotation
    ad = np.zeros((6, 6))
    ad[:3, :3] = r
    ad[:3, 3:] = skew(pose.translation) @ r
    ad[3:, 3:] = r
    return ad


def sample_noisy_poses(belief: PoseBelief, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` poses ``exp(xi^) @ mean`` as an ``(n, 4, 4)`` array."""
    vals, vecs = np.linalg.eigh(belief.cov)
    factor = vecs * np.sqrt(np.clip(vals, 0.0, None))
    xi = rng.standard_normal((n, 6)) @ factor.T
    return exp_se3_batch(xi) @ belief.mean.matrix


def sample_noisy_pose(belief: PoseBelief, seed: int) -> Pose:
    check_covariance(belief.cov)
    rng = np.random.default_rng(seed)
    if not np.any(belief.cov):
        return belief.mean
    return Pose(_reorthonormalize(sample_noisy_poses(belief, 1, rng)[0]))


def propagate(belief: PoseBelief, motion_mean: Pose, motion_cov: np.ndarray) -> PoseBelief:
    """Compound a belief with one relative motion ``{T_bar, Sigma}``.

    mean' = C @ T_bar and P' = P + Ad(C) Sigma Ad(C)^T, with Ad evaluated at the
    pose *before* the motion.
    """
    motion_cov = np.asarray(motion_cov, dtype=float)
    check_covariance(motion_cov)
    ad = adjoint(belief.mean)
    cov = symmetrize(belief.cov + ad @ motion_cov @ ad.T)
    return PoseBelief(belief.mean @ motion_mean, cov)


Segment = Tuple[float, np.ndarray, Pose]


def accumulate_path_covariance(p0: np.ndarray, segments: Iterable[Segment]) -> np.ndarray:
    """Terminal covariance after driving ``d_i`` meters over cells with
    per-meter covariance ``sigma_tilde_i`` at nominal pose ``pose_i``."""
    out = np.array(p0, dtype=float)
    for d, sigma_tilde, pose in segments:
        if d < 0:
            raise ValueError(f"segment distance must be nonnegative, got {d}")
        ad = adjoint(pose)
        out = symmetrize(out + d * (ad @ np.asarray(sigma_tilde, dtype=float) @ ad.T))
    return out
