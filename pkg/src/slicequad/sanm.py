"""Sliced adaptive-neuro mapping (SANM) wrench controller on SE(3).

Twelve scalar learners sit next to the geometric PD controller: one mass
estimate and one inertia estimate per axis, and one 2-input RBF network per
axis for the translational and for the rotational disturbance. Each learner
only sees the errors of its own axis, so the slices never share state.

The controller is a pure transition function: :func:`controller_step` takes a
:class:`ControllerState` and returns a new one.
"""

from dataclasses import dataclass, field, replace
import logging
import math

import numpy as np

from .geom3 import attitude_errors, cross3, hat, psi_R, vee_antisym

logger = logging.getLogger(__name__)

B = np.array([0.0, 1.0])


class DegenerateThrust(ValueError):
    pass


class HeadingAligned(ValueError):
    pass


@dataclass(frozen=True)
class KnownJ:
    """Inertia known to the controller: the gyroscopic term is cancelled."""
    J: tuple


@dataclass(frozen=True)
class UnknownJ:
    """Inertia unknown: the gyroscopic term is left for the rotational RBF slices."""


def _vec3(v):
    a = np.array(v, dtype=float).reshape(-1)
    if a.size == 1:
        a = np.repeat(a, 3)
    if a.size != 3:
        raise ValueError("expected 3 components, got %d" % a.size)
    return a


@dataclass(frozen=True)
class Gains:
    k_p: np.ndarray = (16.0, 16.0, 16.0)
    k_d: np.ndarray = (8.0, 8.0, 8.0)
    k_R: float = 250.0
    k_Omega: float = 32.0
    c_R: float = 1.0
    eta_m: float = 2e-4
    eta_J: float = 0.1
    gamma_x: np.ndarray = (2.0e7, 2.0e7, 2.0e7)
    gamma_R: np.ndarray = (10.0, 10.0, 10.0)
    s_m: float = 0.01
    s_J: float = 0.01
    m_min: float = 0.5
    m_max: float = 3.0
    J_min: np.ndarray = (0.005, 0.005, 0.01)
    J_max: np.ndarray = (0.08, 0.08, 0.16)
    # P scales with Q, so a small Q keeps the coupling loss small; the
    # learning rates are scaled up to match
    Q: np.ndarray = ((2e-4, 0.0), (0.0, 2e-5))
    r_w: float = 10.0
    n_neurons: int = 5
    g: float = 9.81
    f_min: float = 1e-3
    eps_align: float = 1e-6
    rate_cutoff: float = 200.0
    # learners hold still while the rotors are clamped, so they never
    # integrate an error the vehicle has no authority to remove
    hold_when_saturated: bool = True

    def __post_init__(self):
        for name in ("k_p", "k_d", "gamma_x", "gamma_R", "J_min", "J_max"):
            object.__setattr__(self, name, _vec3(getattr(self, name)))
        Q = np.array(self.Q, dtype=float)
        if Q.shape == (2, 2):
            Q = np.repeat(Q[None], 3, axis=0)
        if Q.shape != (3, 2, 2):
            raise ValueError("Q must be one 2x2 matrix or three of them")
        object.__setattr__(self, "Q", Q)
        if np.any(self.k_p <= 0) or np.any(self.k_d <= 0):
            raise ValueError("translational PD gains must be positive")
        if min(self.k_R, self.k_Omega, self.c_R, self.eta_m, self.eta_J, self.r_w) <= 0:
            raise ValueError("k_R, k_Omega, c_R, eta_m, eta_J and r_w must be positive")
        # zero learning rates switch the RBF slices off
        if np.any(self.gamma_x < 0) or np.any(self.gamma_R < 0):
            raise ValueError("learning rates must be non-negative")
        if self.s_m < 0 or self.s_J < 0:
            raise ValueError("boundary scaling factors must be non-negative")
        if not 0 < self.m_min < self.m_max:
            raise ValueError("need 0 < m_min < m_max")
        if np.any(self.J_min <= 0) or np.any(self.J_min >= self.J_max):
            raise ValueError("need 0 < J_min < J_max componentwise")
        for q in Q:
            if not np.allclose(q, q.T) or np.linalg.eigvalsh(q).min() <= 0:
                raise ValueError("each Q_j must be symmetric positive definite")

    def learning_off(self):
        """Same gains with every adaptive law frozen (plain geometric PD)."""
        return replace(self, gamma_x=np.zeros(3), gamma_R=np.zeros(3),
                       eta_m=math.inf, eta_J=math.inf)

    def companion(self, j):
        return np.array([[0.0, 1.0], [-self.k_p[j], -self.k_d[j]]])


# -- RBF slices -------------------------------------------------------------

@dataclass(frozen=True)
class RbfSlice:
    centers: np.ndarray   # (l, 2)
    widths: np.ndarray    # (l,)
    weights: np.ndarray   # (l,)
    weight_cap: float

    def __post_init__(self):
        if np.any(np.asarray(self.widths) <= 0):
            raise ValueError("RBF widths must be positive")

    @property
    def l(self):
        return len(self.widths)

    def features(self, x):
        c = self.centers
        d0 = c[:, 0] - float(x[0])
        d1 = c[:, 1] - float(x[1])
        return np.exp(-(d0 * d0 + d1 * d1) / (2.0 * self.widths ** 2))

    def with_weights(self, w):
        return RbfSlice(self.centers, self.widths, w, self.weight_cap)


def rbf_forward(slice_, x):
    """Network output ``W^T h(x)`` with Gaussian activations."""
    return float(slice_.weights @ slice_.features(x))


def grid_slice(half_extent, l=5, weight_cap=10.0):
    """Zero-weight slice with centers spread over ``[-a, a] x [-b, b]``.

    Five neurons sit on the center and the four corners of the box; other
    counts fall back to the box diagonal. Widths are half the spacing
    between neighbouring centers.
    """
    a, b = half_extent
    if l == 5:
        centers = np.array([[-a, -b], [-a, b], [0.0, 0.0], [a, -b], [a, b]])
        spacing = math.hypot(a, b)
    elif l == 1:
        centers = np.zeros((1, 2))
        spacing = 2.0 * math.hypot(a, b)
    else:
        s = np.linspace(-1.0, 1.0, l)
        centers = np.column_stack([a * s, b * s])
        spacing = 2.0 * math.hypot(a, b) / (l - 1)
    return RbfSlice(centers, np.full(l, 0.5 * spacing), np.zeros(l), weight_cap)


TRANSLATIONAL_BOX = (1.0, 2.0)
ROTATIONAL_BOX = (1.0, 4.0)


# -- learner state ----------------------------------------------------------

@dataclass(frozen=True)
class SliceBank:
    m_hat: np.ndarray
    J_hat: np.ndarray
    rbf_x: tuple
    rbf_R: tuple
    P: np.ndarray  # (3, 2, 2)

    @classmethod
    def initial(cls, m_hat, J_hat, gains, P=None):
        from .lyapunov import lyapunov_matrices
        if P is None:
            P = lyapunov_matrices(gains)
        rx = tuple(grid_slice(TRANSLATIONAL_BOX, gains.n_neurons, gains.r_w) for _ in range(3))
        rR = tuple(grid_slice(ROTATIONAL_BOX, gains.n_neurons, gains.r_w) for _ in range(3))
        bank = cls(_vec3(m_hat), _vec3(J_hat), rx, rR, np.asarray(P, dtype=float))
        check_bank(bank, gains)
        return bank

    def weight_norms(self):
        return np.array([np.linalg.norm(s.weights) for s in self.rbf_x + self.rbf_R])


def check_bank(bank, gains, tol=1e-12):
    if np.any(bank.m_hat < gains.m_min - tol) or np.any(bank.m_hat > gains.m_max + tol):
        raise ValueError("mass estimate outside [m_min, m_max]: %s" % bank.m_hat)
    if np.any(bank.J_hat < gains.J_min - tol) or np.any(bank.J_hat > gains.J_max + tol):
        raise ValueError("inertia estimate outside [J_min, J_max]: %s" % bank.J_hat)


# -- desired attitude and rates ---------------------------------------------

def compute_desired_attitude(F_d, b1_d, f_min=1e-3, eps_align=1e-6):
    """Commanded attitude whose third body axis opposes ``F_d`` (NED thrust)."""
    F_d = np.asarray(F_d, dtype=float)
    nF = np.linalg.norm(F_d)
    if nF <= f_min:
        raise DegenerateThrust("|F_d| = %.3g N is below f_min = %.3g N" % (nF, f_min))
    b3 = -F_d / nF
    c = cross3(b3, np.asarray(b1_d, dtype=float))
    nc = np.linalg.norm(c)
    if nc <= eps_align:
        raise HeadingAligned("desired heading is parallel to the thrust axis")
    b2 = c / nc
    b1 = cross3(b2, b3)
    return np.column_stack([b1, b2, b3])


@dataclass(frozen=True)
class RateFilter:
    """Memory for differentiating the commanded attitude.

    Keeps the last two commanded attitudes and the low-pass states of
    ``Omega_c`` and ``dOmega_c/dt``. Both outputs pass through a first-order
    lag at ``cutoff`` rad/s, so a single-tick jump in the command is spread
    out instead of being differentiated twice.
    """
    history: tuple = ()
    Omega_c: np.ndarray = None
    Omega_c_dot: np.ndarray = None

    def update(self, R_c, dt, cutoff=200.0):
        hist = self.history + (R_c,)
        if len(hist) < 3:
            zero = np.zeros(3)
            return zero, zero, RateFilter(hist[-2:], None, None)
        R2, R1, R0 = hist[-3], hist[-2], hist[-1]
        # three-point backward difference
        Rdot = (3.0 * R0 - 4.0 * R1 + R2) / (2.0 * dt)
        raw = vee_antisym(R0.T @ Rdot)
        if self.Omega_c is None:
            return raw, np.zeros(3), RateFilter(hist[-2:], raw, np.zeros(3))
        a = dt * cutoff / (1.0 + dt * cutoff)
        Omega_c = self.Omega_c + a * (raw - self.Omega_c)
        raw_dot = (Omega_c - self.Omega_c) / dt
        Omega_c_dot = self.Omega_c_dot + a * (raw_dot - self.Omega_c_dot)
        return Omega_c, Omega_c_dot, RateFilter(hist[-2:], Omega_c, Omega_c_dot)


def desired_angular_rates(R_c_history, dt, cutoff=200.0):
    """Commanded body rates and their filtered derivative for a whole sequence.

    Returns arrays of shape ``(n, 3)``; the first two rows are zero.
    """
    f = RateFilter()
    Om, Omd = [], []
    for R_c in R_c_history:
        w, wd, f = f.update(np.asarray(R_c, dtype=float), dt, cutoff)
        Om.append(w)
        Omd.append(wd)
    return np.array(Om), np.array(Omd)


# -- wrench -----------------------------------------------------------------

def translational_wrench(E, acc_d, bank, gains):
    """Per-axis desired force.

    ``E`` is a (3, 2) array whose row j is (e_x[j], e_v[j]). Returns
    ``(F_d, phi_bar_x)``.
    """
    E = np.asarray(E, dtype=float)
    phi_bar = np.array([rbf_forward(bank.rbf_x[j], E[j]) for j in range(3)])
    pd = gains.k_p * E[:, 0] + gains.k_d * E[:, 1]
    F_d = bank.m_hat * (-pd + np.asarray(acc_d, dtype=float) - gains.g * np.array([0.0, 0.0, 1.0]) - phi_bar)
    return F_d, phi_bar


def rotational_wrench(e_R, e_Omega, R, R_c, Omega, Omega_c, Omega_c_dot, bank, gains, scenario):
    """Per-axis desired moment. Returns ``(M_d, phi_bar_R)``."""
    phi_bar = np.array([rbf_forward(bank.rbf_R[j], (e_R[j], e_Omega[j])) for j in range(3)])
    RtRc = R.T @ R_c
    u = (-gains.k_R * e_R - gains.k_Omega * e_Omega
         - hat(Omega) @ (RtRc @ Omega_c) + RtRc @ Omega_c_dot - phi_bar)
    if isinstance(scenario, KnownJ):
        J = np.asarray(scenario.J, dtype=float)
        u = u + cross3(Omega, J * Omega) / J
    return bank.J_hat * u, phi_bar


# -- adaptive laws ----------------------------------------------------------

def mass_rate(m_hat, sigma, gains):
    """Right-hand side of the per-axis mass law.

    The first two branches share one expression, so they are merged: the
    gradient term applies whenever ``sigma > 0`` or the estimate is below
    ``m_max``; otherwise the estimate decays.
    """
    if sigma > 0.0 or m_hat < gains.m_max:
        return -(m_hat * m_hat / gains.eta_m) * sigma
    return -gains.s_m * m_hat * m_hat / gains.eta_m


def inertia_rate(J_hat, sigma, J_max, gains):
    if sigma > 0.0 or J_hat < J_max:
        return -(J_hat * J_hat / gains.eta_J) * sigma
    return -gains.s_J * J_hat * J_hat / gains.eta_J


def mass_drive(E_j, P_j, F_dj):
    """``E_j^T P_j B F_d[j]``."""
    return float(E_j @ P_j[:, 1]) * F_dj


def update_mass(j, bank, E_j, F_dj, gains, dt):
    sigma = mass_drive(np.asarray(E_j, dtype=float), bank.P[j], F_dj)
    m = bank.m_hat[j] + dt * mass_rate(bank.m_hat[j], sigma, gains)
    return min(max(m, gains.m_min), gains.m_max)


def update_inertia(j, bank, e_Rj, e_Omegaj, M_dj, gains, dt):
    sigma = (e_Omegaj + gains.c_R * e_Rj) * M_dj
    Jn = bank.J_hat[j] + dt * inertia_rate(bank.J_hat[j], sigma, gains.J_max[j], gains)
    return min(max(Jn, gains.J_min[j]), gains.J_max[j])


def _project(w, cap):
    n = math.sqrt(w @ w)
    if n > cap:
        return w * (cap / n)
    return w


def update_weights_x(j, slice_, E_j, P_j, gamma, dt):
    E_j = np.asarray(E_j, dtype=float)
    drive = float(E_j @ P_j[:, 1])
    w = slice_.weights + dt * gamma * drive * slice_.features(E_j)
    return _project(w, slice_.weight_cap)


def update_weights_R(j, slice_, e_Rj, e_Omegaj, c_R, gamma, dt):
    drive = e_Omegaj + c_R * e_Rj
    w = slice_.weights + dt * gamma * drive * slice_.features((e_Rj, e_Omegaj))
    return _project(w, slice_.weight_cap)


# -- orchestration ----------------------------------------------------------

@dataclass(frozen=True)
class ControllerState:
    bank: SliceBank
    rates: RateFilter = field(default_factory=RateFilter)


@dataclass(frozen=True)
class ControllerOutput:
    F_d: np.ndarray
    M_d: np.ndarray
    R_c: np.ndarray
    Omega_c: np.ndarray
    Omega_c_dot: np.ndarray
    e_x: np.ndarray
    e_v: np.ndarray
    e_R: np.ndarray
    e_Omega: np.ndarray
    psi: float
    phi_bar_x: np.ndarray
    phi_bar_R: np.ndarray
    m_hat: np.ndarray
    J_hat: np.ndarray
    reference: tuple


def update_bank(bank, E, e_R, e_Omega, F_d, M_d, gains, dt):
    """Advance all twelve learners one Euler step; returns a new bank."""
    m_hat = np.array([update_mass(j, bank, E[j], F_d[j], gains, dt) for j in range(3)])
    J_hat = np.array([update_inertia(j, bank, e_R[j], e_Omega[j], M_d[j], gains, dt)
                      for j in range(3)])
    rx = tuple(
        s.with_weights(update_weights_x(j, s, E[j], bank.P[j], gains.gamma_x[j], dt))
        if gains.gamma_x[j] != 0.0 else s
        for j, s in enumerate(bank.rbf_x))
    rR = tuple(
        s.with_weights(update_weights_R(j, s, e_R[j], e_Omega[j], gains.c_R, gains.gamma_R[j], dt))
        if gains.gamma_R[j] != 0.0 else s
        for j, s in enumerate(bank.rbf_R))
    return SliceBank(m_hat, J_hat, rx, rR, bank.P)


def controller_step(state, ref, ctrl, gains, scenario, t, dt, saturated=False):
    """One controller tick.

    Parameters
    ----------
    state : RigidState
    ref : object with ``evaluate(t) -> (x_d, v_d, a_d, b1_d)``
    ctrl : ControllerState
    scenario : KnownJ or UnknownJ
    saturated : bool
        Whether the previous allocation clamped a rotor. With
        ``gains.hold_when_saturated`` the learners skip this tick.

    Returns
    -------
    (ControllerOutput, ControllerState)
    """
    x_d, v_d, a_d, b1_d = ref.evaluate(t)
    bank = ctrl.bank
    e_x = state.x - x_d
    e_v = state.v - v_d
    E = np.column_stack([e_x, e_v])

    F_d, phi_bar_x = translational_wrench(E, a_d, bank, gains)
    R_c = compute_desired_attitude(F_d, b1_d, gains.f_min, gains.eps_align)
    Omega_c, Omega_c_dot, rates = ctrl.rates.update(R_c, dt, gains.rate_cutoff)
    e_R, e_Omega = attitude_errors(state.R, R_c, state.Omega, Omega_c)
    M_d, phi_bar_R = rotational_wrench(e_R, e_Omega, state.R, R_c, state.Omega,
                                       Omega_c, Omega_c_dot, bank, gains, scenario)
    psi = psi_R(state.R, R_c)
    if psi >= 1.0:
        logger.debug("t=%.3f: attitude error outside the local attraction domain (psi=%.3f)", t, psi)

    if saturated and gains.hold_when_saturated:
        new_bank = bank
    else:
        new_bank = update_bank(bank, E, e_R, e_Omega, F_d, M_d, gains, dt)
    out = ControllerOutput(F_d=F_d, M_d=M_d, R_c=R_c, Omega_c=Omega_c, Omega_c_dot=Omega_c_dot,
                           e_x=e_x, e_v=e_v, e_R=e_R, e_Omega=e_Omega, psi=psi,
                           phi_bar_x=phi_bar_x, phi_bar_R=phi_bar_R,
                           m_hat=bank.m_hat, J_hat=bank.J_hat,
                           reference=(x_d, v_d, a_d, b1_d))
    return out, ControllerState(new_bank, rates)
