"""Lyapunov diagnostics: candidate functions, gain-condition checks,
attraction-domain tests and near-exponential envelope fitting.

Everything here is a pure function over gains or logged series. The checks
are the sufficient conditions of the stability argument, evaluated
numerically; none of them is needed to run a simulation.
"""

from dataclasses import asdict, dataclass, field
import math

import numpy as np


class NotHurwitz(ValueError):
    pass


class NotDecaying(ValueError):
    pass


# -- Lyapunov equation ------------------------------------------------------

def solve_lyapunov_2x2(Lam, Q):
    """Solve ``Lam^T P + P Lam = -Q`` in closed form.

    For a 2x2 Hurwitz ``Lam`` with trace ``t`` and determinant ``d``::

        P = (d Q + (Lam^T - t I) Q (Lam - t I)) / (-2 t d)
    """
    Lam = np.asarray(Lam, dtype=float)
    Q = np.asarray(Q, dtype=float)
    t = Lam[0, 0] + Lam[1, 1]
    d = Lam[0, 0] * Lam[1, 1] - Lam[0, 1] * Lam[1, 0]
    # a real 2x2 matrix is Hurwitz iff trace < 0 and det > 0
    if not (t < 0.0 and d > 0.0):
        raise NotHurwitz("matrix is not Hurwitz (trace=%g, det=%g)" % (t, d))
    I = np.eye(2)
    P = (d * Q + (Lam.T - t * I) @ Q @ (Lam - t * I)) / (-2.0 * t * d)
    return 0.5 * (P + P.T)


def companion(k_p, k_d):
    if k_p <= 0 or k_d <= 0:
        raise NotHurwitz("k_p and k_d must be positive (got %g, %g)" % (k_p, k_d))
    return np.array([[0.0, 1.0], [-k_p, -k_d]])


def lyapunov_matrices(gains):
    """The three per-axis ``P_j`` for the translational PD loops."""
    return np.array([solve_lyapunov_2x2(companion(gains.k_p[j], gains.k_d[j]), gains.Q[j])
                     for j in range(3)])


@dataclass
class LyapunovData:
    Lam: np.ndarray
    Q: np.ndarray
    P: np.ndarray
    B: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))

    @classmethod
    def from_gains(cls, gains):
        Lam = np.array([companion(gains.k_p[j], gains.k_d[j]) for j in range(3)])
        return cls(Lam, np.array(gains.Q), lyapunov_matrices(gains))

    def residuals(self):
        return np.array([np.linalg.norm(L.T @ P + P @ L + Q)
                         for L, P, Q in zip(self.Lam, self.P, self.Q)])


def _eig_min(A):
    return float(np.linalg.eigvalsh(A)[0])


def _eig_max(A):
    return float(np.linalg.eigvalsh(A)[-1])


# -- bound matrices ---------------------------------------------------------

def attitude_lower_matrix(k_R, c_R):
    return np.array([[k_R / 2.0, -c_R / 2.0], [-c_R / 2.0, 0.5]])


def attitude_upper_matrix(k_R, c_R, psi_bound):
    return np.array([[k_R / (2.0 - psi_bound), c_R / 2.0], [c_R / 2.0, 0.5]])


def full_lower_matrix(P, k_R, c_R):
    # 0.5 * E^T P E >= 0.5 * lambda_min(P) |E|^2
    M = np.zeros((5, 5))
    M[:3, :3] = np.diag([0.5 * _eig_min(Pj) for Pj in P])
    M[3:, 3:] = attitude_lower_matrix(k_R, c_R)
    return M


def full_upper_matrix(P, k_R, c_R, psi_bound):
    M = np.zeros((5, 5))
    M[:3, :3] = np.diag([_eig_max(Pj) for Pj in P])
    M[3:, 3:] = attitude_upper_matrix(k_R, c_R, psi_bound)
    return M


def attitude_decay_matrix(k_R, k_Omega, c_R):
    return np.array([[k_R * c_R / 2.0, -k_Omega * c_R / 2.0],
                     [-k_Omega * c_R / 2.0, (k_Omega - c_R) / 2.0]])


# -- c_R condition ----------------------------------------------------------

CR_TERM_NAMES = ("k_Rk_Omega/(k_Omega^2+k_R)", "sqrt(k_R)", "sqrt(2k_R/(2-psi_R))", "k_Omega")


@dataclass
class CRVerdict:
    passed: bool
    bound: float
    binding: str
    margin: float
    terms: dict


def check_cR_bound(k_R, k_Omega, c_R, psi_bound=1.0):
    """Strict upper bound on the cross-term constant ``c_R``."""
    if not 0.0 < psi_bound < 2.0:
        raise ValueError("psi_R bound must lie in (0, 2)")
    vals = (k_R * k_Omega / (k_Omega ** 2 + k_R),
            math.sqrt(k_R),
            math.sqrt(2.0 * k_R / (2.0 - psi_bound)),
            k_Omega)
    i = int(np.argmin(vals))
    bound = vals[i]
    return CRVerdict(passed=bool(c_R < bound), bound=bound, binding=CR_TERM_NAMES[i],
                     margin=bound - c_R, terms=dict(zip(CR_TERM_NAMES, vals)))


# -- coupling loss and the full decay matrix --------------------------------

def coupling_loss_Xi(P, Q, m, m_max, eps_u, eps_c):
    """Stability loss from position/attitude coupling."""
    s = 0.0
    for Pj, Qj in zip(P, Q):
        s += m_max ** 2 * _eig_max(Pj) ** 2 * (eps_u + eps_c) ** 2 / (_eig_min(Qj) * m ** 2)
    return 3.0 * s


def Xi_bound(k_R, k_Omega, c_R):
    """Largest coupling loss for which the full decay matrix stays positive definite."""
    return min(k_R * c_R / 2.0,
               (k_R * c_R * (k_Omega - c_R) - k_Omega ** 2 * c_R ** 2) / (2.0 * (k_Omega - c_R)))


@dataclass
class MAssembly:
    M: np.ndarray
    M_x: np.ndarray
    M_xR: np.ndarray
    M_R: np.ndarray
    schur: np.ndarray
    Xi: float
    Xi_bound: float
    eigenvalues: np.ndarray
    schur_verdict: bool
    eig_verdict: bool

    @property
    def positive_definite(self):
        return self.eig_verdict


def _is_pd_2x2(A):
    # leading principal minors
    return bool(A[0, 0] > 0.0 and A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0] > 0.0)


def assemble_M(k_R, k_Omega, c_R, P, Q, m, m_max, eps_u, eps_c):
    """Build the 5x5 decay matrix and decide positive definiteness two ways.

    The Schur route checks the translational block and its Schur complement;
    the direct route looks at the eigenvalues of the whole matrix.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    lamQ = np.array([_eig_min(Qj) for Qj in Q])
    lamP = np.array([_eig_max(Pj) for Pj in P])
    M_x = np.diag(lamQ / 4.0)
    M_xR = np.zeros((3, 2))
    M_xR[:, 0] = -math.sqrt(3.0) * m_max * lamP * (eps_u + eps_c) / m
    M_R = attitude_decay_matrix(k_R, k_Omega, c_R)
    M = np.zeros((5, 5))
    M[:3, :3] = M_x
    M[:3, 3:] = 0.5 * M_xR
    M[3:, :3] = 0.5 * M_xR.T
    M[3:, 3:] = M_R
    schur = M_R - 0.25 * M_xR.T @ np.diag(1.0 / np.diag(M_x)) @ M_xR
    schur_ok = bool(np.all(np.diag(M_x) > 0.0)) and _is_pd_2x2(schur)
    eig = np.linalg.eigvalsh(M)
    return MAssembly(M=M, M_x=M_x, M_xR=M_xR, M_R=M_R, schur=schur,
                     Xi=coupling_loss_Xi(P, Q, m, m_max, eps_u, eps_c),
                     Xi_bound=Xi_bound(k_R, k_Omega, c_R), eigenvalues=eig,
                     schur_verdict=schur_ok, eig_verdict=bool(eig[0] > 0.0))


def offset_constants(k_R, k_Omega, c_R, P, Q, m, J_lmin, eps_R, eps_M, eps_x, eps_f):
    """Constant terms ``(C_R, C)`` of the derivative bounds.

    ``J_lmin`` is the smallest principal moment of the true inertia.
    """
    r = eps_R + eps_M / J_lmin
    C_R = c_R * r ** 2 / (2.0 * k_R) + r ** 2 / (2.0 * (k_Omega - c_R))
    eps_x = np.broadcast_to(np.asarray(eps_x, dtype=float), (3,))
    C = C_R + sum(_eig_max(Pj) ** 2 * (ex + eps_f / m) ** 2 / _eig_min(Qj)
                  for Pj, Qj, ex in zip(P, Q, eps_x))
    return C_R, C


def convergence_constants(lam_min_M, lam_min_lower, lam_max_upper, p_lower, p_upper, C):
    """Guaranteed decay rate, overshoot factor and ultimate radius.

    Returns ``(beta, alpha, epsilon)`` of the envelope implied by the
    quadratic sandwich and the derivative bound.
    """
    beta = lam_min_M / (2.0 * p_upper * lam_max_upper)
    alpha = math.sqrt(p_upper * lam_max_upper / (p_lower * lam_min_lower))
    eps = math.sqrt(C / (2.0 * beta * p_lower * lam_min_lower)) if beta > 0 else math.inf
    return beta, alpha, eps


# -- candidate functions ----------------------------------------------------

@dataclass
class Candidates:
    V_Rs: np.ndarray
    V_s: np.ndarray
    V_e: np.ndarray
    V: np.ndarray
    V_x: np.ndarray
    V_R: np.ndarray


def _inv_or_zero(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(np.isfinite(x) & (x != 0.0), 1.0 / np.where(x == 0.0, 1.0, x), 0.0)


def candidates(psi, e_R, e_Omega, E, P, k_R, c_R, m_tilde, J_tilde, Wx_tilde, WR_tilde,
               eta_m, eta_J, gamma_x, gamma_R):
    """Evaluate the attitude, full-state, estimation and complete candidates.

    All state arguments may carry a leading time axis: ``psi`` (n,),
    ``e_R``/``e_Omega`` (n, 3), ``E`` (n, 3, 2), ``m_tilde``/``J_tilde``
    (n, 3), weight errors (n, 3, l). Frozen learners (zero learning rate or
    infinite adaptation inertia) contribute nothing.
    """
    psi = np.asarray(psi, dtype=float)
    e_R = np.asarray(e_R, dtype=float)
    e_Omega = np.asarray(e_Omega, dtype=float)
    E = np.asarray(E, dtype=float)
    V_Rs = k_R * psi + 0.5 * np.sum(e_Omega ** 2, axis=-1) + c_R * np.sum(e_R * e_Omega, axis=-1)
    quad = 0.5 * np.einsum("...ja,jab,...jb->...", E, np.asarray(P), E)
    V_s = V_Rs + quad

    em = eta_m if np.isfinite(eta_m) else 0.0
    eJ = eta_J if np.isfinite(eta_J) else 0.0
    igx = 0.5 * _inv_or_zero(gamma_x)
    igR = 0.5 * _inv_or_zero(gamma_R)
    V_xe = (0.5 * em * np.sum(np.asarray(m_tilde) ** 2, axis=-1)
            + np.sum(igx * np.sum(np.asarray(Wx_tilde) ** 2, axis=-1), axis=-1))
    V_Re = (0.5 * eJ * np.sum(np.asarray(J_tilde) ** 2, axis=-1)
            + np.sum(igR * np.sum(np.asarray(WR_tilde) ** 2, axis=-1), axis=-1))
    V_e = V_xe + V_Re
    return Candidates(V_Rs=V_Rs, V_s=V_s, V_e=V_e, V=V_s + V_e,
                      V_x=quad + V_xe, V_R=V_Rs + V_Re)


def z_norms(E, e_R, e_Omega):
    """The reduced state ``z = (|E_1|, |E_2|, |E_3|, |e_R|, |e_Omega|)``."""
    E = np.asarray(E, dtype=float)
    return np.concatenate([np.linalg.norm(E, axis=-1),
                           np.linalg.norm(e_R, axis=-1)[..., None],
                           np.linalg.norm(e_Omega, axis=-1)[..., None]], axis=-1)


def p_constants(z_norm, V_e, lam_min_lower, lam_max_upper, eps):
    """Largest valid lower factor and smallest valid upper factor outside the eps-ball.

    Returns ``(p_lower, p_upper)``; ``nan`` when no sample lies outside the ball.
    """
    z_norm = np.asarray(z_norm, dtype=float)
    V_e = np.asarray(V_e, dtype=float)
    out = z_norm >= eps
    if not np.any(out):
        return math.nan, math.nan
    p_lower = float(np.min(1.0 + V_e[out] / (lam_min_lower * z_norm[out] ** 2)))
    p_upper = float(1.0 + np.max(V_e[out]) / (lam_max_upper * eps ** 2))
    return p_lower, p_upper


# -- attraction domains -----------------------------------------------------

@dataclass
class DomainResult:
    inside: bool
    clauses: dict
    boundary: bool
    psi: float


def domain_membership(psi, e_R, e_Omega, k_R, flavor="D_R0", E=None, E_cap=None, tol=1e-9):
    """Evaluate each clause of an attraction domain.

    ``flavor`` is ``"D_R0"`` (almost-global attitude domain) or ``"D_0"``
    (local domain of the complete dynamics, which also needs ``E`` and
    ``E_cap``). ``psi == 0`` fails the strict range clause but is the
    equilibrium itself; it is reported with ``boundary=True`` and counted as
    inside.
    """
    e_R = np.asarray(e_R, dtype=float)
    e_Omega = np.asarray(e_Omega, dtype=float)
    if flavor == "D_R0":
        upper = 2.0
    elif flavor == "D_0":
        upper = 1.0
    else:
        raise ValueError("unknown domain flavor %r" % flavor)
    clauses = {
        "psi_range": bool(0.0 < psi < upper),
        "e_R_identity": bool(abs(np.linalg.norm(e_R) - math.sqrt(max(psi * (2.0 - psi), 0.0))) <= tol),
        "e_Omega_bound": bool(e_Omega @ e_Omega < 2.0 * k_R * (upper - psi)),
    }
    if flavor == "D_0":
        if E is None or E_cap is None:
            raise ValueError("D_0 needs the translational errors and their caps")
        norms = np.linalg.norm(np.asarray(E, dtype=float), axis=-1)
        clauses["E_x_bound"] = bool(np.all(norms < np.broadcast_to(E_cap, norms.shape)))
    boundary = psi == 0.0
    inside = all(v for k, v in clauses.items() if not (boundary and k == "psi_range"))
    return DomainResult(inside=inside, clauses=clauses, boundary=boundary, psi=float(psi))


# -- near-exponential envelope ----------------------------------------------

@dataclass
class NESEnvelope:
    alpha: float       # multiplies |z(0)|
    amplitude: float   # alpha * |z(0)|
    beta: float
    epsilon: float
    coverage: float
    converged: bool

    def __call__(self, t):
        return self.amplitude * np.exp(-self.beta * np.asarray(t)) + self.epsilon


def fit_nes_envelope(t, z, final_fraction=0.1, n_grid=20, coverage=0.99):
    """Fit ``|z(t)| <= A exp(-beta t) + eps`` to a logged norm series.

    For each candidate ``eps`` (log-spaced between the final-window RMS and
    ten times that) a line is fitted to ``log(|z| - eps)`` over the samples
    clearly above ``eps``; the amplitude is then inflated until the envelope
    covers ``coverage`` of all samples. The tightest (smallest mean)
    envelope with ``beta > 0`` wins.
    """
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    if t.size < 100 or t.size != z.size:
        raise ValueError("need at least 100 paired samples")
    if np.any(np.diff(t) <= 0):
        raise ValueError("time stamps must be strictly increasing")
    t0 = t - t[0]
    n_final = max(int(final_fraction * t.size), 1)
    floor = float(np.sqrt(np.mean(z[-n_final:] ** 2)))
    if floor <= 0.0:
        floor = np.finfo(float).tiny
    best = None
    for eps in np.geomspace(floor, 10.0 * floor, n_grid):
        sel = z - eps > eps
        if np.count_nonzero(sel) < 10:
            continue
        slope, intercept = np.polyfit(t0[sel], np.log(z[sel] - eps), 1)
        beta = -slope
        if not beta > 0.0:
            continue
        # amplitude inflation in log space; samples under eps are covered anyway
        log_base = intercept - beta * t0
        with np.errstate(divide="ignore"):
            log_ratio = np.where(z > eps, np.log(np.maximum(z - eps, 0.0)) - log_base, -np.inf)
        log_A = intercept + max(float(np.quantile(log_ratio, coverage, method="higher")), -690.0)
        if not log_A < 700.0:
            continue
        A = math.exp(log_A)
        env = A * np.exp(-beta * t0) + eps
        cov = float(np.mean(z <= env * (1.0 + 1e-12)))
        score = float(np.mean(env))
        if best is None or score < best[0]:
            best = (score, A, beta, eps, cov)
    if best is None:
        raise NotDecaying("no envelope with beta > 0 covers the series")
    _, A, beta, eps, cov = best
    z0 = float(z[0])
    return NESEnvelope(alpha=A / z0 if z0 > 0 else math.inf, amplitude=A, beta=beta,
                       epsilon=eps, coverage=cov, converged=True)


# -- report -----------------------------------------------------------------

@dataclass
class DiagnosticsReport:
    candidates_final: dict
    eigenvalues: dict
    Xi: float
    Xi_bound: float
    C_R: float
    C: float
    bound_inputs: dict
    cR_check: dict
    M_schur_verdict: bool
    M_eig_verdict: bool
    domain_R0: dict
    domain_0: dict
    nes: dict
    p_constants: dict
    decay_rate_bound: float
    notes: list = field(default_factory=list)

    def to_dict(self):
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
