import math

import numpy as np
import pytest

from slicequad.geom3 import attitude_errors, rot_z
from slicequad.sanm import (ControllerState, DegenerateThrust, Gains, HeadingAligned, KnownJ,
                            RbfSlice, SliceBank, UnknownJ, compute_desired_attitude,
                            controller_step, desired_angular_rates, grid_slice, mass_rate,
                            rbf_forward, rotational_wrench, translational_wrench, update_bank,
                            update_inertia, update_mass, update_weights_R, update_weights_x)
from slicequad.trajectory import make_trajectory
from slicequad.vehicle import RigidState

G = Gains()
M = 1.5
J = (0.02, 0.02, 0.04)
Z = np.zeros(3)
HOVER_F = np.array([0.0, 0.0, -M * 9.81])


def bank(m=M, Jh=J, gains=G):
    return SliceBank.initial(m, Jh, gains)


def random_slice(rng, l=5):
    return RbfSlice(rng.normal(size=(l, 2)), rng.uniform(0.3, 2.0, l), rng.normal(size=l), 10.0)


# -- RBF ------------------------------------------------------------------

def test_rbf_single_neuron_at_its_center():
    s = RbfSlice(np.array([[0.3, -0.2]]), np.array([0.7]), np.array([2.5]), 10.0)
    assert rbf_forward(s, (0.3, -0.2)) == 2.5


def test_rbf_zero_weights(rng):
    s = grid_slice((1.0, 2.0))
    for x in rng.normal(size=(20, 2)) * 5:
        assert rbf_forward(s, x) == 0.0


def test_rbf_matches_naive_sum(rng):
    for _ in range(50):
        s = random_slice(rng)
        x = rng.normal(size=2)
        total = 0.0
        for k in range(s.l):
            d2 = 0.0
            for i in range(2):
                d2 += (x[i] - s.centers[k, i]) ** 2
            total += s.weights[k] * math.exp(-d2 / (2 * s.widths[k] ** 2))
        assert rbf_forward(s, x) == pytest.approx(total, abs=1e-14)
        h = s.features(x)
        assert np.all((h > 0) & (h <= 1))


def test_grid_slice_layout():
    s = grid_slice((1.0, 2.0))
    assert s.l == 5
    assert np.all(s.widths == 0.5 * math.hypot(1.0, 2.0))
    with pytest.raises(ValueError):
        RbfSlice(np.zeros((1, 2)), np.array([0.0]), np.zeros(1), 1.0)


# -- desired attitude and rates ---------------------------------------------

def test_desired_attitude_examples():
    np.testing.assert_allclose(compute_desired_attitude(HOVER_F, [1, 0, 0]), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(compute_desired_attitude(HOVER_F, [0, 1, 0]), rot_z(np.pi / 2),
                               atol=1e-15)
    with pytest.raises(HeadingAligned):
        compute_desired_attitude(HOVER_F, [0, 0, 1])
    with pytest.raises(DegenerateThrust):
        compute_desired_attitude([0, 0, -1e-4], [1, 0, 0])


def test_desired_attitude_is_rotation(rng):
    for _ in range(100):
        F = rng.normal(size=3) * 10
        Rc = compute_desired_attitude(F, [1, 0, 0])
        np.testing.assert_allclose(Rc.T @ Rc, np.eye(3), atol=1e-12)
        assert np.linalg.det(Rc) == pytest.approx(1.0)
        np.testing.assert_allclose(Rc[:, 2], -F / np.linalg.norm(F), atol=1e-14)


def test_rates_of_constant_attitude_vanish():
    W, Wd = desired_angular_rates([rot_z(0.4)] * 50, 1e-3)
    np.testing.assert_array_equal(W[:2], 0.0)
    np.testing.assert_allclose(W, 0.0, atol=1e-12)
    np.testing.assert_allclose(Wd, 0.0, atol=1e-9)


def test_rates_of_uniform_yaw():
    dt, w = 1e-3, 1.0
    W, _ = desired_angular_rates([rot_z(w * k * dt) for k in range(500)], dt)
    np.testing.assert_array_equal(W[:2], 0.0)
    np.testing.assert_allclose(W[2:], np.tile([0, 0, w], (498, 1)), atol=1e-6)


def test_rate_derivative_of_yaw_ramp():
    dt, a = 1e-3, 2.0
    W, Wd = desired_angular_rates([rot_z(0.5 * a * (k * dt) ** 2) for k in range(1000)], dt)
    assert Wd[-1, 2] == pytest.approx(a, rel=0.05)
    assert W[-1, 2] == pytest.approx(a * 0.999, rel=0.05)


# -- wrench ---------------------------------------------------------------

def test_translational_wrench_examples():
    F, phi = translational_wrench(np.zeros((3, 2)), Z, bank(), G)
    np.testing.assert_allclose(F, [0, 0, -14.715])
    np.testing.assert_array_equal(phi, 0.0)

    g4 = Gains(k_p=(4.0, 16.0, 16.0))
    E = np.zeros((3, 2))
    E[0, 0] = 1.0
    F, _ = translational_wrench(E, Z, bank(gains=g4), g4)
    assert F[0] == pytest.approx(-6.0)

    b = bank()
    rx = list(b.rbf_x)
    s = rx[2]
    # one weight chosen so the net output at the origin is exactly 2
    w = np.zeros(s.l)
    w[2] = 2.0 / s.features((0.0, 0.0))[2]
    rx[2] = s.with_weights(w)
    b2 = SliceBank(b.m_hat, b.J_hat, tuple(rx), b.rbf_R, b.P)
    F, phi = translational_wrench(np.zeros((3, 2)), Z, b2, G)
    assert phi[2] == pytest.approx(2.0)
    assert F[2] == pytest.approx(M * (-9.81 - 2.0))


def test_rotational_wrench_examples(rng):
    I = np.eye(3)
    g9 = Gains(k_R=9.0)
    M_d, _ = rotational_wrench(Z, Z, I, I, Z, Z, Z, bank(gains=g9), g9, UnknownJ())
    np.testing.assert_array_equal(M_d, 0.0)
    M_d, _ = rotational_wrench(np.array([0.1, 0, 0]), Z, I, I, Z, Z, Z, bank(gains=g9), g9,
                               UnknownJ())
    assert M_d[0] == pytest.approx(-0.018)

    b = bank()
    Jt = np.array([0.02, 0.03, 0.05])
    for _ in range(20):
        e_R, e_W, W, Wc, Wcd = rng.normal(size=(5, 3))
        R, Rc = rot_z(0.3), rot_z(-0.2)
        a, _ = rotational_wrench(e_R, e_W, R, Rc, W, Wc, Wcd, b, G, KnownJ(tuple(Jt)))
        u, _ = rotational_wrench(e_R, e_W, R, Rc, W, Wc, Wcd, b, G, UnknownJ())
        np.testing.assert_allclose(a - u, b.J_hat * np.cross(W, Jt * W) / Jt, atol=1e-14)


# -- adaptive laws ----------------------------------------------------------

def test_mass_law_branches():
    b = bank(m=1.0)
    E0 = np.zeros(2)
    assert update_mass(0, b, E0, 5.0, G, 1e-3) == 1.0
    E = np.array([0.1, 0.2])
    sigma = float(E @ b.P[0][:, 1]) * 5.0
    assert sigma > 0
    assert update_mass(0, b, E, 5.0, G, 1e-3) < 1.0
    # negative drive grows the estimate in the interior
    assert update_mass(0, b, E, -5.0, G, 1e-3) > 1.0

    top = bank(m=G.m_max)
    dt = 1e-3
    expected = G.m_max - dt * G.s_m * G.m_max ** 2 / G.eta_m
    assert update_mass(0, top, E, -5.0, G, dt) == pytest.approx(expected, rel=1e-14)
    assert update_mass(0, top, E0, 0.0, G, dt) == pytest.approx(expected, rel=1e-14)


def test_mass_law_respects_clamps():
    b = bank(m=G.m_min)
    assert update_mass(0, b, np.array([1.0, 1.0]), 1e6, G, 1e-3) == G.m_min
    b = bank(m=2.99)
    assert update_mass(0, b, np.array([1.0, 1.0]), -1e6, G, 1e-3) == G.m_max


def test_inertia_law_branches():
    b = bank(Jh=(0.03, 0.03, 0.05))
    assert update_inertia(0, b, 0.0, 0.0, 1.0, G, 1e-3) == 0.03
    assert update_inertia(0, b, 0.1, 0.2, 1.0, G, 1e-3) < 0.03
    top = bank(Jh=G.J_max)
    dt = 1e-3
    Jm = G.J_max[2]
    expected = Jm - dt * G.s_J * Jm ** 2 / G.eta_J
    assert update_inertia(2, top, 0.1, 0.2, -1.0, G, dt) == pytest.approx(expected, rel=1e-14)


def test_mass_law_cross_term_cancels(rng):
    # eta m_tilde mdot / m^2 + m_tilde sigma = 0 whenever the gradient branch is active
    for _ in range(1000):
        m_hat = rng.uniform(G.m_min, G.m_max * 0.999)
        sigma = rng.normal() * 10
        m_tilde = rng.normal()
        rate = mass_rate(m_hat, sigma, G)
        assert abs(G.eta_m * m_tilde * rate / m_hat ** 2 + m_tilde * sigma) < 1e-12 * (1 + abs(sigma))


def test_weight_update_hand_check():
    s = RbfSlice(np.array([[0.0, 0.5]]), np.array([1.0]), np.zeros(1), 10.0)
    E = np.array([0.0, 0.5])
    w = update_weights_x(0, s, E, np.eye(2), 1.0, 1e-3)
    assert w[0] == pytest.approx(5e-4, rel=1e-14)

    r = RbfSlice(np.array([[0.1, 0.3]]), np.array([1.0]), np.zeros(1), 10.0)
    # drive e_Omega + c_R e_R = 0.3 + 2 * 0.1 = 0.5
    w = update_weights_R(0, r, 0.1, 0.3, 2.0, 1.0, 1e-3)
    assert w[0] == pytest.approx(5e-4, rel=1e-14)


def test_weight_update_far_from_centers():
    s = RbfSlice(np.array([[50.0, 50.0]]), np.array([1.0]), np.array([0.3]), 10.0)
    w = update_weights_x(0, s, np.zeros(2), np.eye(2), 1e3, 1e-3)
    assert abs(w[0] - 0.3) < 1e-8
    r = grid_slice((1.0, 4.0)).with_weights(np.arange(5.0))
    np.testing.assert_array_equal(update_weights_R(0, r, 0.0, 0.0, 1.0, 100.0, 1e-3), r.weights)


def test_weight_norm_never_exceeds_cap(rng):
    cap = 2.0
    sx = grid_slice((1.0, 2.0), weight_cap=cap)
    sr = grid_slice((1.0, 4.0), weight_cap=cap)
    P = np.array([[1.5, 0.5], [0.5, 1.0]])
    inputs = rng.normal(size=(100000, 2)) * 2
    worst = 0.0
    for e in inputs:
        sx = sx.with_weights(update_weights_x(0, sx, e, P, 50.0, 1e-2))
        sr = sr.with_weights(update_weights_R(0, sr, e[0], e[1], 1.0, 50.0, 1e-2))
        worst = max(worst, np.linalg.norm(sx.weights), np.linalg.norm(sr.weights))
    assert worst <= cap * (1 + 1e-12)


def test_update_bank_keeps_clamps(rng):
    b = bank()
    for _ in range(2000):
        E = rng.normal(size=(3, 2)) * 3
        e_R, e_W = rng.normal(size=(2, 3))
        F, Md = rng.normal(size=(2, 3)) * 20
        b = update_bank(b, E, e_R, e_W, F, Md, G, 1e-3)
        assert np.all((b.m_hat >= G.m_min) & (b.m_hat <= G.m_max))
        assert np.all((b.J_hat >= G.J_min) & (b.J_hat <= G.J_max))
        assert np.all(b.weight_norms() <= G.r_w * (1 + 1e-12))


def test_slices_are_independent(rng):
    b = bank()
    E = rng.normal(size=(3, 2))
    e_R, e_W, F, Md = rng.normal(size=(4, 3))
    E0, eR0, eW0, F0, M0 = E.copy(), e_R.copy(), e_W.copy(), F.copy(), Md.copy()
    E0[0] = 0.0
    eR0[0] = eW0[0] = F0[0] = M0[0] = 0.0
    a = update_bank(b, E, e_R, e_W, F, Md, G, 1e-3)
    z = update_bank(b, E0, eR0, eW0, F0, M0, G, 1e-3)
    for k in (1, 2):
        assert a.m_hat[k] == z.m_hat[k] and a.J_hat[k] == z.J_hat[k]
        assert np.array_equal(a.rbf_x[k].weights, z.rbf_x[k].weights)
        assert np.array_equal(a.rbf_R[k].weights, z.rbf_R[k].weights)
    assert a.m_hat[0] != z.m_hat[0]


# -- controller step --------------------------------------------------------

REF = make_trajectory({"kind": "hover", "position": [0, 0, -1]})


def test_equilibrium_is_a_fixed_point():
    s = RigidState.at_rest((0, 0, -1))
    b = bank()
    out, ctrl = controller_step(s, REF, ControllerState(b), G, UnknownJ(), 0.0, 1e-3)
    np.testing.assert_allclose(out.F_d, HOVER_F, atol=1e-14)
    np.testing.assert_array_equal(out.M_d, 0.0)
    nb = ctrl.bank
    np.testing.assert_array_equal(nb.m_hat, b.m_hat)
    np.testing.assert_array_equal(nb.J_hat, b.J_hat)
    for a, c in zip(nb.rbf_x + nb.rbf_R, b.rbf_x + b.rbf_R):
        np.testing.assert_array_equal(a.weights, c.weights)


def test_one_step_matches_composition():
    s = RigidState.at_rest((0.1, 0, -1))
    b = bank(m=1.2, Jh=(0.015, 0.015, 0.03))
    out, ctrl = controller_step(s, REF, ControllerState(b), G, UnknownJ(), 0.0, 1e-3)
    E = np.zeros((3, 2))
    E[0, 0] = 0.1
    F, _ = translational_wrench(E, Z, b, G)
    Rc = compute_desired_attitude(F, [1, 0, 0])
    e_R, e_W = attitude_errors(np.eye(3), Rc, Z, Z)
    Md, _ = rotational_wrench(e_R, e_W, np.eye(3), Rc, Z, Z, Z, b, G, UnknownJ())
    nb = update_bank(b, E, e_R, e_W, F, Md, G, 1e-3)
    np.testing.assert_array_equal(out.F_d, F)
    np.testing.assert_array_equal(out.R_c, Rc)
    np.testing.assert_array_equal(out.M_d, Md)
    np.testing.assert_array_equal(ctrl.bank.m_hat, nb.m_hat)
    np.testing.assert_array_equal(ctrl.bank.J_hat, nb.J_hat)
    for a, c in zip(ctrl.bank.rbf_x, nb.rbf_x):
        np.testing.assert_array_equal(a.weights, c.weights)


def test_step_does_not_touch_input_bank():
    s = RigidState.at_rest((0.3, -0.2, -0.8))
    b = bank(m=1.2)
    before = (b.m_hat.copy(), [w.weights.copy() for w in b.rbf_x])
    _, ctrl = controller_step(s, REF, ControllerState(b), G, UnknownJ(), 0.0, 1e-3)
    np.testing.assert_array_equal(b.m_hat, before[0])
    for w, w0 in zip(b.rbf_x, before[1]):
        np.testing.assert_array_equal(w.weights, w0)
    assert not np.array_equal(ctrl.bank.m_hat, b.m_hat)


def test_saturated_tick_holds_learners():
    s = RigidState.at_rest((0.3, -0.2, -0.8))
    b = bank(m=1.2)
    _, ctrl = controller_step(s, REF, ControllerState(b), G, UnknownJ(), 0.0, 1e-3,
                              saturated=True)
    assert ctrl.bank is b


def test_learning_off_is_plain_geometric_pd():
    g = G.learning_off()
    s = RigidState(np.array([0.2, -0.1, -0.7]), np.array([0.1, 0.0, -0.3]), rot_z(0.1),
                   np.array([0.05, -0.02, 0.1]))
    b = bank()
    ctrl = ControllerState(b)
    for k in range(5):
        out, ctrl = controller_step(s, REF, ctrl, g, UnknownJ(), k * 1e-3, 1e-3)
    e_x, e_v = s.x - [0, 0, -1], s.v
    np.testing.assert_allclose(out.F_d, M * (-g.k_p * e_x - g.k_d * e_v - [0, 0, 9.81]),
                               atol=1e-12)
    np.testing.assert_array_equal(ctrl.bank.m_hat, b.m_hat)
    np.testing.assert_array_equal(ctrl.bank.J_hat, b.J_hat)
    assert np.all(ctrl.bank.weight_norms() == 0.0)


def test_gain_validation():
    for bad in (dict(k_p=(-1, 1, 1)), dict(k_R=0), dict(m_min=4.0), dict(J_min=(0.1, 0.1, 0.1)),
                dict(Q=((1.0, 2.0), (2.0, 1.0))), dict(gamma_x=-1.0)):
        with pytest.raises(ValueError):
            Gains(**bad)
