"""Scenario runner: plant and controller in a synchronous loop, then metrics
and Lyapunov diagnostics computed from the logged telemetry.

Everything after the loop is a pure function of ``(SimLog, ScenarioConfig)``,
so a log read back from disk yields the same metrics as the live run.
"""

from dataclasses import asdict, dataclass, fields
import logging
import math

import numpy as np

from . import lyapunov as lyap
from .geom3 import E3
from .sanm import (ControllerState, KnownJ, ROTATIONAL_BOX, SliceBank, TRANSLATIONAL_BOX,
                   controller_step, grid_slice)
from .telemetry import SimLog, schema
from .vehicle import NonFiniteState, RigidState, allocate, step_rk4

logger = logging.getLogger(__name__)

DIVERGENCE_RADIUS = 1.0e3


class SimDiverged(RuntimeError):
    def __init__(self, msg, t=None, log=None):
        super().__init__(msg)
        self.t = t
        self.log = log


# -- the loop ---------------------------------------------------------------

class _Row:
    """Precomputed column slices so each tick is a handful of array copies."""

    def __init__(self, l):
        cols = schema(l)
        ix = {c: i for i, c in enumerate(cols)}
        self.k = len(cols)

        def s(name, n=3):
            i = ix[name]
            return slice(i, i + n)

        self.x, self.v, self.R, self.Om = s("x1"), s("v1"), s("R11", 9), s("Omega1")
        self.ref = s("xd1", 12)
        self.Rc, self.Omc, self.Omcd = s("Rc11", 9), s("Omegac1"), s("Omegacdot1")
        self.err = s("ex1", 12)
        self.psi = ix["psi"]
        self.Fd, self.Md = s("Fd1"), s("Md1")
        self.fd, self.f, self.M, self.df, self.dM = ix["fd"], ix["f"], s("M1"), ix["df"], s("dM1")
        self.T = s("T1", 4)
        self.mhat, self.Jhat = s("mhat1"), s("Jhat1")
        self.wx, self.wR = s("wx1_1", 3 * l), s("wR1_1", 3 * l)
        self.wn = s("wnx1", 6)
        self.phib = s("phibx1", 6)
        self.phix, self.phiR = s("phix1"), s("phiR1")
        self.V = s("V", 6)
        self.clamped = ix["clamped"]


def initial_state(cfg):
    return RigidState(cfg.x0.copy(), cfg.v0.copy(), cfg.R0.copy(), cfg.Omega0.copy())


def simulate(cfg):
    """Run the plant-controller loop and return the raw :class:`SimLog`.

    Candidate-function columns are left as NaN; see :func:`fill_candidates`.
    """
    p, gains, dist = cfg.vehicle, cfg.gains, cfg.disturbance
    ref, scenario = cfg.reference, cfg.scenario
    n = cfg.n_steps
    dt = cfg.dt
    dec = cfg.controller_decimation
    every = cfg.log_every
    dt_c = dec * dt
    l = gains.n_neurons
    cols = _Row(l)
    data = np.full(((n + every - 1) // every, cols.k), np.nan)

    state = initial_state(cfg)
    ctrl = ControllerState(SliceBank.initial(cfg.m_hat0, cfg.J_hat0, gains))
    out = act = None
    row = 0
    for k in range(n):
        t = k * dt
        if k % dec == 0:
            bank = ctrl.bank
            out, ctrl = controller_step(state, ref, ctrl, gains, scenario, t, dt_c,
                                        saturated=act is not None and act.clamped)
            act = allocate(out.F_d, out.M_d, state.R, p)
        if k % every == 0:
            r = data[row]
            r[0] = t
            r[cols.x] = state.x
            r[cols.v] = state.v
            r[cols.R] = state.R.ravel()
            r[cols.Om] = state.Omega
            r[cols.ref] = np.concatenate(out.reference)
            r[cols.Rc] = out.R_c.ravel()
            r[cols.Omc] = out.Omega_c
            r[cols.Omcd] = out.Omega_c_dot
            r[cols.err] = np.concatenate([out.e_x, out.e_v, out.e_R, out.e_Omega])
            r[cols.psi] = out.psi
            r[cols.Fd] = out.F_d
            r[cols.Md] = out.M_d
            r[cols.fd] = act.f_d
            r[cols.f] = act.f
            r[cols.M] = act.M
            r[cols.df] = act.delta_f
            r[cols.dM] = act.delta_M
            r[cols.T] = act.T_d
            # estimates in use at this tick (before the update)
            r[cols.mhat] = bank.m_hat
            r[cols.Jhat] = bank.J_hat
            r[cols.wx] = np.concatenate([s_.weights for s_ in bank.rbf_x])
            r[cols.wR] = np.concatenate([s_.weights for s_ in bank.rbf_R])
            r[cols.wn] = bank.weight_norms()
            r[cols.phib] = np.concatenate([out.phi_bar_x, out.phi_bar_R])
            r[cols.phix] = dist.phi_x(t, state.v)
            r[cols.phiR] = dist.phi_R(t)
            r[cols.clamped] = float(act.clamped)
            row += 1
        try:
            state = step_rk4(state, act.f, act.M, dist, t, dt, p)
        except NonFiniteState as exc:
            raise SimDiverged(str(exc), t, SimLog(data[:row], l)) from None
        if not np.linalg.norm(state.x) <= DIVERGENCE_RADIUS:
            raise SimDiverged("|x| exceeded %g m at t=%.3f s" % (DIVERGENCE_RADIUS, t + dt),
                              t + dt, SimLog(data[:row], l))
    return SimLog(data[:row], l)


# -- post-run estimation targets --------------------------------------------

def _features(centers, widths, X):
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
    return np.exp(-d2 / (2.0 * widths[None, :] ** 2))


def slice_features(log, gains):
    """Feature histories ``(h_x, h_R)``, each ``(n, 3, l)``, recomputed from the errors."""
    sx = grid_slice(TRANSLATIONAL_BOX, gains.n_neurons, gains.r_w)
    sR = grid_slice(ROTATIONAL_BOX, gains.n_neurons, gains.r_w)
    ex, ev = log.block("ex"), log.block("ev")
    eR, eO = log.block("eR"), log.block("eOmega")
    hx = np.stack([_features(sx.centers, sx.widths, np.column_stack([ex[:, j], ev[:, j]]))
                   for j in range(3)], axis=1)
    hR = np.stack([_features(sR.centers, sR.widths, np.column_stack([eR[:, j], eO[:, j]]))
                   for j in range(3)], axis=1)
    return hx, hR


def rotational_target(log, cfg):
    """What the rotational slices have to cancel: ``phi_R`` plus, without
    inertia knowledge, the gyroscopic term ``-J^-1 (Omega x J Omega)``."""
    target = log.block("phiR").copy()
    if not isinstance(cfg.scenario, KnownJ):
        J = np.asarray(cfg.vehicle.J)
        Om = log.block("Omega")
        target -= np.cross(Om, J * Om) / J
    return target


def _fit_weights(H, y, cap):
    W = np.linalg.lstsq(H, y, rcond=None)[0]
    n = np.linalg.norm(W)
    if n > cap:
        W *= cap / n
    return W, y - H @ W


@dataclass
class EstimationTargets:
    """Least-squares stand-ins for the ideal weights and their residuals."""
    Wx: np.ndarray        # (3, l)
    WR: np.ndarray        # (3, l)
    resid_x: np.ndarray   # (n, 3)
    resid_R: np.ndarray   # (n, 3)


def estimation_targets(log, cfg):
    hx, hR = slice_features(log, cfg.gains)
    yx = log.block("phix")
    yR = rotational_target(log, cfg)
    cap = cfg.gains.r_w
    fx = [_fit_weights(hx[:, j], yx[:, j], cap) for j in range(3)]
    fR = [_fit_weights(hR[:, j], yR[:, j], cap) for j in range(3)]
    return EstimationTargets(np.array([f[0] for f in fx]), np.array([f[0] for f in fR]),
                             np.column_stack([f[1] for f in fx]), np.column_stack([f[1] for f in fR]))


def candidate_values(log, cfg, targets=None):
    if targets is None:
        targets = estimation_targets(log, cfg)
    g = cfg.gains
    E = np.stack([log.block("ex"), log.block("ev")], axis=-1)
    m = cfg.vehicle.m
    J = np.asarray(cfg.vehicle.J)
    return lyap.candidates(
        log["psi"], log.block("eR"), log.block("eOmega"), E, lyap.lyapunov_matrices(g),
        g.k_R, g.c_R,
        1.0 / m - 1.0 / log.block("mhat"), 1.0 / J - 1.0 / log.block("Jhat"),
        targets.Wx[None] - log.weights("x"), targets.WR[None] - log.weights("R"),
        g.eta_m, g.eta_J, g.gamma_x, g.gamma_R)


def fill_candidates(log, cfg, targets=None):
    c = candidate_values(log, cfg, targets)
    for name in ("V", "V_R", "V_x", "V_e", "V_Rs", "V_s"):
        log.set(name, getattr(c, name))
    return log


def measured_bounds(log, cfg, targets=None):
    """Trajectory maxima standing in for the supremum bounds."""
    if targets is None:
        targets = estimation_targets(log, cfg)
    g = cfg.gains
    K = np.hypot(g.k_p, g.k_d)
    EN = np.hypot(log.block("ex"), log.block("ev"))
    comp = log.block("ad") - cfg.vehicle.g * E3[None] - log.block("phibx")
    return {
        "eps_u": float(np.max(EN @ K)),
        "eps_c": float(np.max(np.abs(comp).sum(axis=1))),
        "eps_R": float(np.max(np.linalg.norm(targets.resid_R, axis=1))),
        "eps_M": float(np.max(np.linalg.norm(log.block("dM"), axis=1))),
        "eps_x": np.max(np.abs(targets.resid_x), axis=0).tolist(),
        "eps_f": float(np.max(np.abs(log["df"]))),
    }


def z_series(log):
    E = np.stack([log.block("ex"), log.block("ev")], axis=-1)
    return lyap.z_norms(E, log.block("eR"), log.block("eOmega"))


# -- diagnostics --------------------------------------------------------------

def diagnose(log, cfg, targets=None):
    """Evaluate every gain condition and bound on a finished run."""
    g = cfg.gains
    if targets is None:
        targets = estimation_targets(log, cfg)
    b = measured_bounds(log, cfg, targets) if cfg.bounds == "measure" else dict(cfg.bounds)
    P = lyap.lyapunov_matrices(g)
    m, m_max = cfg.vehicle.m, g.m_max
    asm = lyap.assemble_M(g.k_R, g.k_Omega, g.c_R, P, g.Q, m, m_max, b["eps_u"], b["eps_c"])
    cr = lyap.check_cR_bound(g.k_R, g.k_Omega, g.c_R, cfg.psi_bound)
    C_R, C = lyap.offset_constants(g.k_R, g.k_Omega, g.c_R, P, g.Q, m, min(cfg.vehicle.J),
                                   b["eps_R"], b["eps_M"], b["eps_x"], b["eps_f"])
    M1 = lyap.full_lower_matrix(P, g.k_R, g.c_R)
    M2 = lyap.full_upper_matrix(P, g.k_R, g.c_R, cfg.psi_bound)
    eig = {
        "M_R1": np.linalg.eigvalsh(lyap.attitude_lower_matrix(g.k_R, g.c_R)),
        "M_R2": np.linalg.eigvalsh(lyap.attitude_upper_matrix(g.k_R, g.c_R, cfg.psi_bound)),
        "M_1": np.linalg.eigvalsh(M1),
        "M_2": np.linalg.eigvalsh(M2),
        "M_R": np.linalg.eigvalsh(asm.M_R),
        "M": asm.eigenvalues,
    }
    V = {k: float(log[k][-1]) for k in ("V_Rs", "V_s", "V_e", "V")} if len(log) else {}

    r0 = 0
    e_cap = cfg.E_cap if cfg.E_cap is not None else math.hypot(*TRANSLATIONAL_BOX)
    E0 = np.column_stack([log.block("ex")[r0], log.block("ev")[r0]])
    dR0 = lyap.domain_membership(log["psi"][r0], log.block("eR")[r0], log.block("eOmega")[r0],
                                 g.k_R, "D_R0")
    d0 = lyap.domain_membership(log["psi"][r0], log.block("eR")[r0], log.block("eOmega")[r0],
                                g.k_R, "D_0", E=E0, E_cap=e_cap)

    notes = []
    z = np.linalg.norm(z_series(log), axis=1)
    try:
        nes = lyap.fit_nes_envelope(log.t, z)
        nes_d = asdict(nes)
    except (lyap.NotDecaying, ValueError) as exc:
        nes = None
        nes_d = {"converged": False, "reason": str(exc)}

    pc = {}
    beta2 = math.nan
    if nes is not None:
        lam1 = float(eig["M_1"][0])
        lam2 = float(eig["M_2"][-1])
        p3, p4 = lyap.p_constants(z, log["V_e"], lam1, lam2, nes.epsilon)
        pc = {"p3": p3, "p4": p4, "lambda_min_M1": lam1, "lambda_max_M2": lam2,
              "epsilon_ball": nes.epsilon}
        if math.isfinite(p4) and asm.eig_verdict:
            beta2, alpha2, eps2 = lyap.convergence_constants(float(asm.eigenvalues[0]), lam1, lam2,
                                                            p3, p4, C)
            pc.update({"beta_2": beta2, "alpha_2": alpha2, "epsilon_2": eps2})
        notes.append("p constants are taken relative to the fitted epsilon ball, which itself "
                     "comes from the same series")
    if asm.schur_verdict != asm.eig_verdict:
        notes.append("Schur and eigenvalue verdicts disagree")
    return lyap.DiagnosticsReport(
        candidates_final=V, eigenvalues=eig, Xi=asm.Xi, Xi_bound=asm.Xi_bound, C_R=C_R, C=C,
        bound_inputs=b, cR_check=asdict(cr), M_schur_verdict=asm.schur_verdict,
        M_eig_verdict=asm.eig_verdict, domain_R0=asdict(dR0), domain_0=asdict(d0),
        nes=nes_d, p_constants=pc, decay_rate_bound=beta2, notes=notes)


# -- metrics ----------------------------------------------------------------

@dataclass
class Metrics:
    duration: float
    rms_e_x: float
    max_e_x: float
    rms_e_v: float
    max_e_v: float
    rms_e_R: float
    max_e_R: float
    rms_e_Omega: float
    max_e_Omega: float
    terminal_rms_e_x: float
    terminal_rms_e_R: float
    m_hat: list
    J_hat: list
    weight_norms: list
    phi_x_rms_error: list
    phi_R_rms_error: list
    clamp_fraction: float
    nes_alpha: float
    nes_amplitude: float
    nes_beta: float
    nes_epsilon: float
    nes_converged: bool
    M_positive_definite: bool

    def to_row(self):
        """Flat ``{name: scalar}`` dict; vectors become ``name_1..name_k``."""
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, list):
                for i, x in enumerate(v):
                    out["%s_%d" % (k, i + 1)] = x
            else:
                out[k] = v
        return out


_VECTOR_METRICS = {"m_hat": 3, "J_hat": 3, "weight_norms": 6,
                   "phi_x_rms_error": 3, "phi_R_rms_error": 3}
METRIC_COLUMNS = [c for f in fields(Metrics)
                  for c in (["%s_%d" % (f.name, i + 1) for i in range(_VECTOR_METRICS[f.name])]
                            if f.name in _VECTOR_METRICS else [f.name])]


def _rms(a):
    a = np.asarray(a)
    return float(np.sqrt(np.mean(a ** 2))) if a.size else math.nan


def _window(log, fraction_start):
    t = log.t
    t0, t1 = t[0], t[-1] + (t[1] - t[0] if len(t) > 1 else 0.0)
    return t >= t0 + fraction_start * (t1 - t0)


def compute_metrics(log, cfg, report=None):
    """Summaries over ``[settle, T]`` plus terminal values; deterministic in ``log``."""
    if report is None:
        report = diagnose(log, cfg)
    w = _window(log, cfg.settle_fraction)
    term = _window(log, 1.0 - cfg.terminal_fraction)
    nx = np.linalg.norm(log.block("ex"), axis=1)
    nv = np.linalg.norm(log.block("ev"), axis=1)
    nR = np.linalg.norm(log.block("eR"), axis=1)
    nO = np.linalg.norm(log.block("eOmega"), axis=1)
    nes = report.nes
    conv = bool(nes.get("converged", False))
    return Metrics(
        duration=float(cfg.duration),
        rms_e_x=_rms(nx[w]), max_e_x=float(nx[w].max()),
        rms_e_v=_rms(nv[w]), max_e_v=float(nv[w].max()),
        rms_e_R=_rms(nR[w]), max_e_R=float(nR[w].max()),
        rms_e_Omega=_rms(nO[w]), max_e_Omega=float(nO[w].max()),
        terminal_rms_e_x=_rms(nx[term]), terminal_rms_e_R=_rms(nR[term]),
        m_hat=log.block("mhat")[-1].tolist(), J_hat=log.block("Jhat")[-1].tolist(),
        weight_norms=np.concatenate([log.block("wnx")[-1], log.block("wnR")[-1]]).tolist(),
        phi_x_rms_error=[_rms(d) for d in (log.block("phibx") - log.block("phix"))[w].T],
        phi_R_rms_error=[_rms(d) for d in (log.block("phibR") - log.block("phiR"))[w].T],
        clamp_fraction=float(np.mean(log["clamped"])),
        nes_alpha=float(nes["alpha"]) if conv else math.nan,
        nes_amplitude=float(nes["amplitude"]) if conv else math.nan,
        nes_beta=float(nes["beta"]) if conv else math.nan,
        nes_epsilon=float(nes["epsilon"]) if conv else math.nan,
        nes_converged=conv,
        M_positive_definite=bool(report.M_eig_verdict))


# -- entry point --------------------------------------------------------------

@dataclass
class RunResult:
    log: SimLog
    metrics: Metrics
    report: object


def run_scenario(cfg, with_report=False):
    """Simulate ``cfg`` and post-process.

    Returns ``(SimLog, Metrics)``, or a :class:`RunResult` that also carries
    the diagnostics report when ``with_report`` is set.

    Raises
    ------
    SimDiverged
        when the position leaves a 1 km ball or the state turns non-finite.
    """
    log = simulate(cfg)
    targets = estimation_targets(log, cfg)
    fill_candidates(log, cfg, targets)
    report = diagnose(log, cfg, targets)
    metrics = compute_metrics(log, cfg, report)
    if with_report:
        return RunResult(log, metrics, report)
    return log, metrics

