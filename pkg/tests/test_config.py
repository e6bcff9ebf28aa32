import numpy as np
import pytest

from slicequad.config import ConfigError, ScenarioConfig, load_config, make_disturbance, set_path
from slicequad.sanm import KnownJ, UnknownJ


def test_defaults():
    cfg = ScenarioConfig.from_dict({})
    assert isinstance(cfg.scenario, UnknownJ)
    np.testing.assert_allclose(cfg.m_hat0, 0.7 * cfg.vehicle.m)
    np.testing.assert_allclose(cfg.J_hat0, 0.5 * np.asarray(cfg.vehicle.J))
    np.testing.assert_array_equal(cfg.x0, [0, 0, -1])
    assert cfg.n_steps == 10000


@pytest.mark.parametrize("d", [
    {"durration": 1.0},
    {"gains": {"k_RR": 1.0}},
    {"vehicle": {"mass": 1.0}},
    {"disturbance": {"translational": [0, 0]}},
    {"disturbance": {"translational": [{"kind": "sinusoid", "amplitude": 1.0}, 0, 0]}},
    {"disturbance": {"translational": [{"kind": "noise"}, 0, 0]}},
    {"scenario": "maybe_J"},
    {"duration": -1.0},
    {"dt": 0.05},
    {"gains": {"k_R": -1.0}},
    {"initial": {"m_hat": 10.0}},
    {"initial": {"velocity": [1, 2]}},
    {"diagnostics": {"bounds": {"eps_u": 1.0}}},
    {"trajectory": {"kind": "circle", "radius": -2}},
])
def test_invalid_configs_are_rejected(d):
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(d)


def test_learning_flag_freezes_learners():
    g = ScenarioConfig.from_dict({"learning": False}).gains
    assert np.all(g.gamma_x == 0) and np.all(g.gamma_R == 0)
    assert np.isinf(g.eta_m) and np.isinf(g.eta_J)


def test_known_J_carries_true_inertia():
    cfg = ScenarioConfig.from_dict({"scenario": "known_J", "vehicle": {"J": [0.01, 0.02, 0.03]}})
    assert isinstance(cfg.scenario, KnownJ)
    assert cfg.scenario.J == (0.01, 0.02, 0.03)


def test_with_value_and_set_path():
    cfg = ScenarioConfig.from_dict({"disturbance": {"translational": [
        {"kind": "sinusoid", "amplitude": 1.0, "frequency": 1.0}, 0, 0]}})
    c2 = cfg.with_value("disturbance.translational.0.amplitude", 3.0)
    assert c2.disturbance.translational[0].amplitude == 3.0
    assert cfg.disturbance.translational[0].amplitude == 1.0
    assert cfg.with_value("gains.k_R", 99.0).gains.k_R == 99.0
    with pytest.raises(ConfigError):
        cfg.with_value("gains.bogus", 1.0)
    with pytest.raises(ConfigError):
        set_path({"a": [1, 2]}, "a.5", 0)


def test_disturbance_terms_from_dicts():
    d = make_disturbance({"translational": [
        [1.0, {"kind": "gust", "amplitude": 2.0, "onset": 1.0, "rise": 0.0}],
        {"kind": "sinusoid", "amplitude": 1.0, "frequency": 2.0, "phase": 0.5}, 0.0],
        "rotational": [0, 0, 0]})
    assert d.phi_x(0.0)[0] == 1.0 and d.phi_x(2.0)[0] == 3.0
    assert d.phi_x(1.0)[1] == pytest.approx(np.sin(2.5))
    np.testing.assert_array_equal(d.bounds()[0], [3.0, 1.0, 0.0])


def test_random_phases_follow_seed():
    spec = {"translational": [{"kind": "sinusoid", "amplitude": 1.0, "frequency": 1.0}, 0, 0],
            "rotational": [0, 0, 0], "random_phases": True}
    a = make_disturbance(spec, seed=3).translational[0].phase
    assert a == make_disturbance(spec, seed=3).translational[0].phase
    assert a != make_disturbance(spec, seed=4).translational[0].phase


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("duration: [1,\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    rel = tmp_path / "rel.yaml"
    rel.write_text("output: out_here\n")
    assert load_config(rel).output == str(tmp_path / "out_here")


def test_shipped_configs_load(configs):
    for path in sorted(configs.glob("*.yaml")):
        load_config(path)
