"""Ground-truth quadrotor plant: rigid-body dynamics with injected disturbances,
a fixed-step RK4 integrator and the rotor actuation chain.

Frames are NED: gravity acts along +e3 and rotor thrust along -R e3.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .geom3 import E3, cross3, hat, orthonormalize

SQRT2 = math.sqrt(2.0)


class NonFiniteState(FloatingPointError):
    pass


@dataclass(frozen=True)
class VehicleParams:
    m: float = 1.5
    J: tuple = (0.02, 0.02, 0.04)
    d: float = 0.225
    g: float = 9.81
    c_T: float = 1.0e-5
    c_M: float = 1.6e-7
    c_T_ref: float = 1.0e-5
    c_M_ref: float = 1.6e-7
    # rotor thrust cap in N; None means 4x the hover share
    T_max: float = None

    def __post_init__(self):
        object.__setattr__(self, "J", tuple(float(j) for j in self.J))
        if self.m <= 0 or self.d <= 0 or min(self.J) <= 0:
            raise ValueError("mass, arm length and inertia must be positive")
        if min(self.c_T, self.c_M, self.c_T_ref, self.c_M_ref) <= 0:
            raise ValueError("rotor coefficients must be positive")
        if len(self.J) != 3:
            raise ValueError("J needs three principal moments")

    @property
    def J_mat(self):
        return np.diag(self.J)

    @property
    def rotor_cap(self):
        if self.T_max is not None:
            return float(self.T_max)
        # 4x the hover share m*g/4
        return self.m * self.g


@dataclass(frozen=True)
class RigidState:
    x: np.ndarray
    v: np.ndarray
    R: np.ndarray
    Omega: np.ndarray

    @classmethod
    def at_rest(cls, x=(0.0, 0.0, 0.0), R=None):
        return cls(np.array(x, dtype=float), np.zeros(3),
                   np.eye(3) if R is None else np.array(R, dtype=float), np.zeros(3))

    def to_vector(self):
        return np.concatenate([self.x, self.v, self.R.ravel(), self.Omega])

    @classmethod
    def from_vector(cls, y):
        return cls(y[0:3].copy(), y[3:6].copy(), y[6:15].reshape(3, 3).copy(), y[15:18].copy())


# -- disturbances -----------------------------------------------------------

@dataclass(frozen=True)
class Constant:
    value: float = 0.0

    def __call__(self, t):
        return self.value

    def bound(self):
        return abs(self.value)


@dataclass(frozen=True)
class Sinusoid:
    amplitude: float
    frequency: float  # rad/s
    phase: float = 0.0

    def __call__(self, t):
        return self.amplitude * math.sin(self.frequency * t + self.phase)

    def bound(self):
        return abs(self.amplitude)


@dataclass(frozen=True)
class Gust:
    """Raised-cosine ramp from 0 to ``amplitude`` over ``[onset, onset + rise]``."""
    amplitude: float
    onset: float = 0.0
    rise: float = 1.0

    def __call__(self, t):
        if t <= self.onset:
            return 0.0
        if self.rise <= 0.0 or t >= self.onset + self.rise:
            return self.amplitude
        return 0.5 * self.amplitude * (1.0 - math.cos(math.pi * (t - self.onset) / self.rise))

    def bound(self):
        return abs(self.amplitude)


@dataclass(frozen=True)
class Sum:
    terms: tuple = ()

    def __call__(self, t):
        return sum(term(t) for term in self.terms)

    def bound(self):
        return sum(term.bound() for term in self.terms)


ZERO = Constant(0.0)


@dataclass(frozen=True)
class DisturbanceModel:
    """Per-axis acceleration-level disturbances.

    ``translational`` terms are in m/s^2 (inertial axes), ``rotational`` in
    rad/s^2 (body axes). ``drag`` adds ``-drag * |v| v`` to the translational
    part and is off by default.
    """
    translational: tuple = (ZERO, ZERO, ZERO)
    rotational: tuple = (ZERO, ZERO, ZERO)
    drag: float = 0.0

    def phi_x(self, t, v=None):
        a = self.translational
        out = np.array([a[0](t), a[1](t), a[2](t)])
        if self.drag and v is not None:
            out -= self.drag * np.linalg.norm(v) * v
        return out

    def phi_R(self, t):
        a = self.rotational
        return np.array([a[0](t), a[1](t), a[2](t)])

    def bounds(self):
        return (np.array([s.bound() for s in self.translational]),
                np.array([s.bound() for s in self.rotational]))


NO_DISTURBANCE = DisturbanceModel()


# -- dynamics ---------------------------------------------------------------

def derivative(s, f, M, dist, t, p):
    """Time derivative of the plant state as a tuple ``(xdot, vdot, Rdot, Omegadot)``.

    The gyroscopic term ``Omega x J Omega`` is always part of the plant.
    """
    J = np.asarray(p.J)
    vdot = -(f / p.m) * (s.R @ E3) + p.g * E3 + dist.phi_x(t, s.v)
    Rdot = s.R @ hat(s.Omega)
    Omegadot = (np.asarray(M, dtype=float) - cross3(s.Omega, J * s.Omega)) / J + dist.phi_R(t)
    return s.v.copy(), vdot, Rdot, Omegadot


def _flat_derivative(y, f, M, dist, t, p, J):
    v = y[3:6]
    R = y[6:15].reshape(3, 3)
    W = y[15:18]
    out = np.empty(18)
    out[0:3] = v
    out[3:6] = -(f / p.m) * R[:, 2] + p.g * E3 + dist.phi_x(t, v)
    out[6:15] = (R @ hat(W)).ravel()
    out[15:18] = (M - cross3(W, J * W)) / J + dist.phi_R(t)
    return out


def step_rk4(s, f, M, dist, t, dt, p):
    """Advance one step of classical RK4 with the wrench held constant.

    The attitude is re-projected onto SO(3) after the step.
    """
    if not 0.0 < dt <= 0.01:
        raise ValueError("dt must lie in (0, 0.01], got %r" % dt)
    J = np.asarray(p.J)
    M = np.asarray(M, dtype=float)
    y = s.to_vector()
    k1 = _flat_derivative(y, f, M, dist, t, p, J)
    k2 = _flat_derivative(y + 0.5 * dt * k1, f, M, dist, t + 0.5 * dt, p, J)
    k3 = _flat_derivative(y + 0.5 * dt * k2, f, M, dist, t + 0.5 * dt, p, J)
    k4 = _flat_derivative(y + dt * k3, f, M, dist, t + dt, p, J)
    y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(y)):
        raise NonFiniteState("non-finite state after step at t=%g" % t)
    out = RigidState.from_vector(y)
    return RigidState(out.x, out.v, orthonormalize(out.R), out.Omega)


# -- actuation chain --------------------------------------------------------

@dataclass(frozen=True)
class ActuationResult:
    f_d: float
    T_d: np.ndarray
    omega: np.ndarray
    f: float
    M: np.ndarray
    delta_f: float
    delta_M: np.ndarray
    clamped: bool = False
    T_d_raw: np.ndarray = field(default=None, repr=False)


def allocation_matrix(p):
    """Maps (f_d, M_d) to the four desired rotor thrusts (X configuration)."""
    a = SQRT2 / p.d
    k = p.c_T_ref / p.c_M_ref
    return 0.25 * np.array([[1.0, a, a, k],
                            [1.0, -a, a, -k],
                            [1.0, -a, -a, k],
                            [1.0, a, -a, -k]])


def wrench_matrix(p):
    """Maps squared rotor speeds to the realized (f, M) with the true coefficients."""
    l = 0.5 * SQRT2 * p.d * p.c_T
    cT, cM = p.c_T, p.c_M
    return np.array([[cT, cT, cT, cT],
                     [l, -l, -l, l],
                     [l, l, -l, -l],
                     [cM, -cM, cM, -cM]])


def allocate(F_d, M_d, R, p):
    """Run the desired wrench through allocation, rotor speeds and the true rotors."""
    F_d = np.asarray(F_d, dtype=float)
    M_d = np.asarray(M_d, dtype=float)
    f_d = -float(F_d @ (R @ E3))
    T_raw = allocation_matrix(p) @ np.array([f_d, M_d[0], M_d[1], M_d[2]])
    cap = p.rotor_cap
    T_d = np.clip(T_raw, 0.0, cap)
    clamped = bool(np.any(T_d != T_raw))
    omega = np.sqrt(T_d / p.c_T_ref)
    fM = wrench_matrix(p) @ (omega * omega)
    f = float(fM[0])
    M = fM[1:].copy()
    return ActuationResult(f_d=f_d, T_d=T_d, omega=omega, f=f, M=M,
                           delta_f=f - f_d, delta_M=M - M_d, clamped=clamped,
                           T_d_raw=T_raw)
