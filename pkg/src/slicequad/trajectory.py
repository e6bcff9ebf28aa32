"""Analytic reference signals: position with two derivatives plus a heading.

A reference is any object with ``evaluate(t) -> (x_d, v_d, a_d, b1_d)`` and
``start() -> x_d(0)``. Positions are NED, so a hover 1 m above the origin
sits at ``z = -1``.
"""

from dataclasses import dataclass
import math

import numpy as np


class InvalidSpec(ValueError):
    pass


def _finite3(v, name):
    a = np.array(v, dtype=float).reshape(-1)
    if a.size == 1:
        a = np.repeat(a, 3)
    if a.size != 3 or not np.all(np.isfinite(a)):
        raise InvalidSpec("%s needs three finite components, got %r" % (name, v))
    return a


# -- position ---------------------------------------------------------------

@dataclass(frozen=True)
class Hover:
    position: np.ndarray

    def __call__(self, t):
        z = np.zeros(3)
        return self.position.copy(), z, z.copy()


@dataclass(frozen=True)
class Circle:
    """Horizontal circle of ``radius`` traversed once per ``period`` at ``altitude``."""
    radius: float
    period: float
    altitude: float
    center: tuple = (0.0, 0.0)

    def __call__(self, t):
        w = 2.0 * math.pi / self.period
        c, s = math.cos(w * t), math.sin(w * t)
        r = self.radius
        x = np.array([self.center[0] + r * c, self.center[1] + r * s, self.altitude])
        v = np.array([-r * w * s, r * w * c, 0.0])
        a = np.array([-r * w * w * c, -r * w * w * s, 0.0])
        return x, v, a


@dataclass(frozen=True)
class Lissajous:
    """``x_d[j] = center[j] + A[j] sin(w[j] t + phase[j])`` per axis."""
    amplitudes: np.ndarray
    frequencies: np.ndarray
    phases: np.ndarray
    center: np.ndarray

    def __call__(self, t):
        arg = self.frequencies * t + self.phases
        s, c = np.sin(arg), np.cos(arg)
        A, w = self.amplitudes, self.frequencies
        return self.center + A * s, A * w * c, -A * w * w * s


@dataclass(frozen=True)
class Step:
    """Hold ``origin`` until ``at``, then ``origin + offset``."""
    offset: np.ndarray
    origin: np.ndarray
    at: float = 0.0

    def __call__(self, t):
        z = np.zeros(3)
        x = self.origin + self.offset if t >= self.at else self.origin.copy()
        return x, z, z.copy()


# -- heading ----------------------------------------------------------------

@dataclass(frozen=True)
class FixedHeading:
    yaw: float = 0.0

    def __call__(self, t):
        return np.array([math.cos(self.yaw), math.sin(self.yaw), 0.0])


@dataclass(frozen=True)
class RotatingHeading:
    rate: float
    yaw0: float = 0.0

    def __call__(self, t):
        a = self.yaw0 + self.rate * t
        return np.array([math.cos(a), math.sin(a), 0.0])


@dataclass(frozen=True)
class ReferenceSignal:
    position: object
    heading: object

    def evaluate(self, t):
        x, v, a = self.position(t)
        return x, v, a, self.heading(t)

    def start(self):
        if isinstance(self.position, Step):
            return self.position.origin.copy()
        return self.position(0.0)[0]


# -- construction from plain dicts ------------------------------------------

_POSITION_KEYS = {
    "hover": {"position"},
    "circle": {"radius", "period", "altitude", "center"},
    "lissajous": {"amplitudes", "frequencies", "phases", "center"},
    "step": {"offset", "origin", "at"},
}
_HEADING_KEYS = {"fixed": {"yaw"}, "rotating": {"rate", "yaw0"}}


def _check_keys(spec, allowed, what):
    extra = set(spec) - allowed - {"kind"}
    if extra:
        raise InvalidSpec("unknown %s keys: %s" % (what, ", ".join(sorted(extra))))


def make_position(spec):
    spec = dict(spec or {"kind": "hover"})
    kind = spec.get("kind", "hover")
    if kind not in _POSITION_KEYS:
        raise InvalidSpec("unknown trajectory kind %r" % kind)
    _check_keys(spec, _POSITION_KEYS[kind], "trajectory")
    if kind == "hover":
        return Hover(_finite3(spec.get("position", (0.0, 0.0, -1.0)), "position"))
    if kind == "circle":
        r = float(spec.get("radius", 1.0))
        T = float(spec.get("period", 2.0 * math.pi))
        alt = float(spec.get("altitude", -1.0))
        center = tuple(float(c) for c in spec.get("center", (0.0, 0.0)))
        if not (math.isfinite(r) and r >= 0.0) or not (math.isfinite(T) and T > 0.0):
            raise InvalidSpec("circle needs radius >= 0 and period > 0")
        if len(center) != 2 or not math.isfinite(alt):
            raise InvalidSpec("circle center needs two components and a finite altitude")
        return Circle(r, T, alt, center)
    if kind == "lissajous":
        A = _finite3(spec.get("amplitudes", (1.0, 1.0, 0.0)), "amplitudes")
        w = _finite3(spec.get("frequencies", (1.0, 2.0, 0.0)), "frequencies")
        ph = _finite3(spec.get("phases", (0.0, 0.0, 0.0)), "phases")
        c = _finite3(spec.get("center", (0.0, 0.0, -1.0)), "center")
        return Lissajous(A, w, ph, c)
    at = float(spec.get("at", 0.0))
    if not math.isfinite(at):
        raise InvalidSpec("step time must be finite")
    return Step(_finite3(spec.get("offset", (1.0, 0.0, 0.0)), "offset"),
                _finite3(spec.get("origin", (0.0, 0.0, -1.0)), "origin"), at)


def make_heading(spec):
    spec = dict(spec or {"kind": "fixed"})
    kind = spec.get("kind", "fixed")
    if kind not in _HEADING_KEYS:
        raise InvalidSpec("unknown heading kind %r" % kind)
    _check_keys(spec, _HEADING_KEYS[kind], "heading")
    if kind == "fixed":
        yaw = float(spec.get("yaw", 0.0))
        if not math.isfinite(yaw):
            raise InvalidSpec("yaw must be finite")
        return FixedHeading(yaw)
    rate = float(spec.get("rate", 1.0))
    yaw0 = float(spec.get("yaw0", 0.0))
    if not (math.isfinite(rate) and math.isfinite(yaw0)):
        raise InvalidSpec("heading rate and yaw0 must be finite")
    return RotatingHeading(rate, yaw0)


def make_trajectory(spec, heading=None):
    """Build a :class:`ReferenceSignal` from plain dicts.

    Parameters
    ----------
    spec : dict
        ``{"kind": "hover", "position": [x, y, z]}``,
        ``{"kind": "circle", "radius", "period", "altitude", "center"}``,
        ``{"kind": "lissajous", "amplitudes", "frequencies", "phases", "center"}``
        or ``{"kind": "step", "offset", "origin", "at"}``.
    heading : dict, optional
        ``{"kind": "fixed", "yaw"}`` (default) or ``{"kind": "rotating", "rate", "yaw0"}``.

    The heading is always horizontal, so it can never line up with gravity.
    """
    return ReferenceSignal(make_position(spec), make_heading(heading))
