"""SO(3) primitives shared by the plant, the controller and the diagnostics.

Rotations are plain 3x3 ``numpy`` arrays (body -> inertial direction cosine
matrices). Every function here is pure.
"""

import numpy as np

ROTATION_TOL = 1e-9
SKEW_TOL = 1e-9

E3 = np.array([0.0, 0.0, 1.0])


class NonSkewInput(ValueError):
    pass


class DegenerateMatrix(ValueError):
    pass


def hat(v):
    """Skew-symmetric matrix with ``hat(a) @ b == np.cross(a, b)``."""
    x, y, z = float(v[0]), float(v[1]), float(v[2])
    return np.array([[0.0, -z, y],
                     [z, 0.0, -x],
                     [-y, x, 0.0]])


def cross3(a, b):
    """Cross product of two 3-vectors; much cheaper than ``np.cross`` per call."""
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def vee(M):
    """Inverse of :func:`hat`.

    Inputs that are skew only up to roundoff are antisymmetrized first;
    anything further than ``SKEW_TOL`` from so(3) raises ``NonSkewInput``.
    """
    M = np.asarray(M, dtype=float)
    if np.linalg.norm(M + M.T) >= SKEW_TOL:
        raise NonSkewInput("matrix is not skew-symmetric (|M + M^T| = %.3e)"
                           % np.linalg.norm(M + M.T))
    return np.array([M[2, 1] - M[1, 2], M[0, 2] - M[2, 0], M[1, 0] - M[0, 1]]) * 0.5


def vee_antisym(M):
    """``vee`` of the antisymmetric part of an arbitrary 3x3 matrix."""
    return 0.5 * np.array([M[2, 1] - M[1, 2], M[0, 2] - M[2, 0], M[1, 0] - M[0, 1]])


def is_rotation(R, tol=ROTATION_TOL):
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return (np.linalg.norm(R.T @ R - np.eye(3)) <= tol
            and abs(np.linalg.det(R) - 1.0) <= tol)


def rot_axis_angle(axis, angle):
    """Rodrigues' formula for a rotation of ``angle`` about ``axis``."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    K = hat(a)
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def rot_x(angle):
    return rot_axis_angle([1.0, 0.0, 0.0], angle)


def rot_y(angle):
    return rot_axis_angle([0.0, 1.0, 0.0], angle)


def rot_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def expm_so3(w):
    """Matrix exponential of ``hat(w)``."""
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w)
    if theta < 1e-12:
        return np.eye(3) + hat(w)
    return rot_axis_angle(w / theta, theta)


def random_rotation(rng):
    """Haar-uniform rotation drawn from ``rng`` (a ``numpy.random.Generator``)."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def psi_R(R, Rc):
    """Attitude configuration error ``0.5 * tr(I - Rc^T R)``, in [0, 2]."""
    return 0.5 * (3.0 - np.trace(Rc.T @ R))


def attitude_errors(R, Rc, Omega, Omega_c):
    """Attitude and angular-velocity tracking errors.

    Returns
    -------
    e_R : ndarray, shape (3,)
        ``0.5 * vee(Rc^T R - R^T Rc)``
    e_Omega : ndarray, shape (3,)
        ``Omega - R^T Rc Omega_c``
    """
    RcTR = Rc.T @ R
    e_R = vee_antisym(RcTR)
    e_Omega = np.asarray(Omega, dtype=float) - RcTR.T @ np.asarray(Omega_c, dtype=float)
    return e_R, e_Omega


def transport_matrix(R, Rc):
    """Map ``Y`` with ``d/dt e_R = Y e_Omega``; its spectral norm is at most one."""
    RtRc = R.T @ Rc
    return 0.5 * (np.trace(RtRc) * np.eye(3) - RtRc)


def orthonormalize(M):
    """Nearest rotation in the Frobenius sense (polar factor via SVD)."""
    M = np.asarray(M, dtype=float)
    U, s, Vt = np.linalg.svd(M)
    if s[-1] <= 1e-12 * max(s[0], 1.0):
        raise DegenerateMatrix("matrix is rank deficient (singular values %s)" % s)
    R = U @ Vt
    if np.linalg.det(R) <= 0.0:
        raise DegenerateMatrix("polar factor is a reflection (det <= 0)")
    return R
