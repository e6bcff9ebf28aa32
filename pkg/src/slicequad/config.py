"""Scenario files: nested key-value documents (YAML) with strict keys.

Every section has documented defaults (see ``DEFAULTS``); unknown keys are
rejected so that a typo never silently falls back to a default. A config is
kept as a plain dict so sweeps can override any numeric leaf by a dotted
path such as ``gains.k_R`` or ``disturbance.translational.2.amplitude``.
"""

import copy
from dataclasses import dataclass, fields
import math
import os

import numpy as np
import yaml

from .geom3 import expm_so3
from .sanm import Gains, KnownJ, UnknownJ
from .trajectory import InvalidSpec, make_trajectory
from .vehicle import (Constant, DisturbanceModel, Gust, Sinusoid, Sum, VehicleParams, ZERO)


class ConfigError(ValueError):
    pass


_GAIN_KEYS = [f.name for f in fields(Gains) if f.name != "g"]
_VEHICLE_KEYS = [f.name for f in fields(VehicleParams)]

DEFAULTS = {
    "name": "scenario",
    "duration": 10.0,
    "dt": 0.001,
    "seed": 0,
    # "unknown_J" leaves the gyroscopic term to the rotational slices
    "scenario": "unknown_J",
    "learning": True,
    "vehicle": {},
    "gains": {},
    "trajectory": {"kind": "hover", "position": [0.0, 0.0, -1.0]},
    "heading": {"kind": "fixed", "yaw": 0.0},
    "disturbance": {"translational": [0.0, 0.0, 0.0], "rotational": [0.0, 0.0, 0.0],
                    "drag": 0.0, "random_phases": False},
    "initial": {"m_hat": None, "m_hat_ratio": 0.7, "J_hat": None, "J_hat_ratio": 0.5,
                "position_offset": [0.0, 0.0, 0.0], "velocity": [0.0, 0.0, 0.0],
                "attitude": [0.0, 0.0, 0.0], "Omega": [0.0, 0.0, 0.0]},
    "diagnostics": {"psi_bound": 1.0, "bounds": "measure", "E_cap": None},
    "settle_fraction": 0.2,
    "terminal_fraction": 0.2,
    "controller_decimation": 1,
    "log_every": 1,
    "output": None,
}

_BOUND_KEYS = {"eps_u", "eps_c", "eps_R", "eps_M", "eps_x", "eps_f"}


def _merge(base, over, where):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError("unknown key %r in %s" % (k, where or "top level"))
        if isinstance(base[k], dict) and k not in ("trajectory", "heading"):
            if not isinstance(v, dict):
                raise ConfigError("%s%s must be a mapping" % (where + "." if where else "", k))
            if base[k] or k in ("disturbance", "initial", "diagnostics"):
                out[k] = _merge(base[k], v, (where + "." if where else "") + k)
            else:
                out[k] = copy.deepcopy(v)
        else:
            out[k] = copy.deepcopy(v)
    return out


# -- disturbance terms ------------------------------------------------------

_TERM_KEYS = {"constant": {"value"}, "sinusoid": {"amplitude", "frequency", "phase"},
              "gust": {"amplitude", "onset", "rise"}}


def _term(spec, rng, random_phases):
    """One axis term: a number, a ``{kind: ...}`` mapping or a list (summed)."""
    if isinstance(spec, bool):
        raise ConfigError("cannot read disturbance term %r" % (spec,))
    if isinstance(spec, (int, float)):
        return Constant(float(spec)) if spec else ZERO
    if isinstance(spec, list):
        return Sum(tuple(_term(s, rng, random_phases) for s in spec))
    if not isinstance(spec, dict):
        raise ConfigError("cannot read disturbance term %r" % (spec,))
    kind = spec.get("kind")
    if kind not in _TERM_KEYS:
        raise ConfigError("unknown disturbance kind %r" % kind)
    extra = set(spec) - _TERM_KEYS[kind] - {"kind"}
    if extra:
        raise ConfigError("unknown keys in %s term: %s" % (kind, ", ".join(sorted(extra))))
    try:
        if kind == "constant":
            return Constant(float(spec.get("value", 0.0)))
        if kind == "sinusoid":
            phase = float(spec.get("phase", 0.0))
            if random_phases:
                phase = float(rng.uniform(0.0, 2.0 * math.pi))
            return Sinusoid(float(spec["amplitude"]), float(spec["frequency"]), phase)
        return Gust(float(spec["amplitude"]), float(spec.get("onset", 0.0)),
                    float(spec.get("rise", 1.0)))
    except KeyError as exc:
        raise ConfigError("%s term is missing %s" % (kind, exc)) from None
    except (TypeError, ValueError):
        raise ConfigError("non-numeric field in %s term" % kind) from None


def make_disturbance(spec, seed=0):
    rng = np.random.default_rng(seed)
    rp = bool(spec.get("random_phases", False))
    axes = []
    for name in ("translational", "rotational"):
        terms = spec.get(name, [0.0, 0.0, 0.0])
        if not isinstance(terms, list) or len(terms) != 3:
            raise ConfigError("disturbance.%s needs one term per axis" % name)
        axes.append(tuple(_term(s, rng, rp) for s in terms))
    drag = float(spec.get("drag", 0.0))
    if drag < 0:
        raise ConfigError("drag must be non-negative")
    return DisturbanceModel(axes[0], axes[1], drag)


# -- the config object ------------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario; ``source`` is the merged plain dict it came from."""
    source: dict
    name: str
    duration: float
    dt: float
    seed: int
    scenario: object
    vehicle: VehicleParams
    gains: Gains
    reference: object
    disturbance: DisturbanceModel
    m_hat0: np.ndarray
    J_hat0: np.ndarray
    x0: np.ndarray
    v0: np.ndarray
    R0: np.ndarray
    Omega0: np.ndarray
    psi_bound: float
    bounds: object
    E_cap: object
    settle_fraction: float
    terminal_fraction: float
    controller_decimation: int
    log_every: int
    output: object

    @property
    def n_steps(self):
        return int(round(self.duration / self.dt))

    def to_dict(self):
        return copy.deepcopy(self.source)

    def with_value(self, path, value):
        return ScenarioConfig.from_dict(set_path(self.to_dict(), path, value))

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("a scenario must be a mapping")
        src = _merge(DEFAULTS, d, "")
        try:
            duration = float(src["duration"])
            dt = float(src["dt"])
        except (TypeError, ValueError):
            raise ConfigError("duration and dt must be numbers") from None
        if not (duration > 0 and math.isfinite(duration)):
            raise ConfigError("duration must be positive")
        if not (0.0 < dt <= 0.01):
            raise ConfigError("dt must lie in (0, 0.01]")
        if duration < dt:
            raise ConfigError("duration must cover at least one step")

        for key in src["vehicle"]:
            if key not in _VEHICLE_KEYS:
                raise ConfigError("unknown key %r in vehicle" % key)
        for key in src["gains"]:
            if key not in _GAIN_KEYS:
                raise ConfigError("unknown key %r in gains" % key)
        try:
            vehicle = VehicleParams(**src["vehicle"])
            gains = Gains(g=vehicle.g, **src["gains"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if not src["learning"]:
            gains = gains.learning_off()

        if src["scenario"] == "known_J":
            scenario = KnownJ(vehicle.J)
        elif src["scenario"] == "unknown_J":
            scenario = UnknownJ()
        else:
            raise ConfigError("scenario must be 'known_J' or 'unknown_J'")

        try:
            reference = make_trajectory(src["trajectory"], src["heading"])
        except InvalidSpec as exc:
            raise ConfigError(str(exc)) from None
        disturbance = make_disturbance(src["disturbance"], int(src["seed"]))

        ini = src["initial"]
        m_hat0 = np.full(3, vehicle.m * float(ini["m_hat_ratio"])) if ini["m_hat"] is None \
            else np.broadcast_to(np.asarray(ini["m_hat"], dtype=float), (3,)).copy()
        J_hat0 = np.asarray(vehicle.J) * float(ini["J_hat_ratio"]) if ini["J_hat"] is None \
            else np.broadcast_to(np.asarray(ini["J_hat"], dtype=float), (3,)).copy()
        if np.any(m_hat0 < gains.m_min) or np.any(m_hat0 > gains.m_max):
            raise ConfigError("initial mass estimate %s outside [m_min, m_max]" % m_hat0)
        if np.any(J_hat0 < gains.J_min) or np.any(J_hat0 > gains.J_max):
            raise ConfigError("initial inertia estimate %s outside [J_min, J_max]" % J_hat0)
        vecs = {}
        for key in ("position_offset", "velocity", "attitude", "Omega"):
            a = np.asarray(ini[key], dtype=float)
            if a.shape != (3,) or not np.all(np.isfinite(a)):
                raise ConfigError("initial.%s needs three finite numbers" % key)
            vecs[key] = a

        diag = src["diagnostics"]
        psi_bound = float(diag["psi_bound"])
        if not 0.0 < psi_bound < 2.0:
            raise ConfigError("diagnostics.psi_bound must lie in (0, 2)")
        bounds = diag["bounds"]
        if bounds != "measure":
            if not isinstance(bounds, dict) or set(bounds) != _BOUND_KEYS:
                raise ConfigError("diagnostics.bounds must be 'measure' or give %s"
                                  % ", ".join(sorted(_BOUND_KEYS)))
        settle = float(src["settle_fraction"])
        terminal = float(src["terminal_fraction"])
        if not (0.0 <= settle < 1.0 and 0.0 < terminal <= 1.0):
            raise ConfigError("settle_fraction must lie in [0, 1) and terminal_fraction in (0, 1]")
        dec = int(src["controller_decimation"])
        every = int(src["log_every"])
        if dec < 1 or every < 1:
            raise ConfigError("controller_decimation and log_every must be >= 1")

        return cls(source=src, name=str(src["name"]), duration=duration, dt=dt,
                   seed=int(src["seed"]), scenario=scenario, vehicle=vehicle, gains=gains,
                   reference=reference, disturbance=disturbance, m_hat0=m_hat0, J_hat0=J_hat0,
                   x0=reference.start() + vecs["position_offset"], v0=vecs["velocity"],
                   R0=expm_so3(vecs["attitude"]), Omega0=vecs["Omega"],
                   psi_bound=psi_bound, bounds=bounds, E_cap=diag["E_cap"],
                   settle_fraction=settle, terminal_fraction=terminal,
                   controller_decimation=dec, log_every=every, output=src["output"])


def set_path(d, path, value):
    """Set a leaf of a nested dict/list structure by dotted path; returns ``d``."""
    keys = path.split(".")
    node = d
    for i, k in enumerate(keys):
        last = i == len(keys) - 1
        if isinstance(node, list):
            try:
                k = int(k)
                node[k]
            except (ValueError, IndexError):
                raise ConfigError("bad list index %r in %r" % (k, path)) from None
        elif isinstance(node, dict):
            if not last and k not in node:
                node[k] = {}
        else:
            raise ConfigError("cannot descend into %r at %r" % (node, path))
        if last:
            node[k] = value
        else:
            node = node[k]
    return d


def load_config(path):
    """Read a scenario file and validate it."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            d = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError("cannot read %s: %s" % (path, exc)) from None
    except yaml.YAMLError as exc:
        raise ConfigError("cannot parse %s: %s" % (path, exc)) from None
    cfg = ScenarioConfig.from_dict(d or {})
    if cfg.output is not None and not os.path.isabs(cfg.output):
        src = cfg.to_dict()
        src["output"] = os.path.join(os.path.dirname(os.path.abspath(path)), cfg.output)
        cfg = ScenarioConfig.from_dict(src)
    return cfg
