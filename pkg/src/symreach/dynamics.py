"""Agent vector fields and a fixed-step RK4 integrator.

Every model evaluates ``f(x, p)`` on batches: ``x`` has shape ``(..., n)`` and
``p`` shape ``(..., m)`` (broadcast against each other).  Two families ship:

* 3-D linear waypoint followers ``x' = A (x - p[3:6])`` (``linear3d`` and the
  rotation-commuting ``rotlinear3d``);
* a 4-D fixed-wing aircraft with state ``(speed, heading, x, y)``.

Aircraft headings follow the compass convention: heading 0 points along +y and
positive headings turn toward +x, so ``x' = v sin(psi)``, ``y' = v cos(psi)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

TWO_PI = 2.0 * math.pi


class DomainError(ValueError):
    """State outside the region where a model's vector field is defined."""


def wrap_angle(a):
    """Map angles to ``[-pi, pi)``."""
    return np.mod(np.asarray(a, dtype=float) + math.pi, TWO_PI) - math.pi


class ModelSpec:
    """Base class: name, dimensions, constants and metadata of a model."""

    name = "abstract"
    n = 0
    m = 0
    state_labels: tuple = ()
    position_dims: tuple = ()
    heading_dim: Optional[int] = None

    def __init__(self, constants: Optional[dict] = None):
        merged = dict(self.default_constants())
        if constants:
            unknown = set(constants) - set(merged)
            if unknown:
                raise ValueError(f"unknown constants for {self.name}: {sorted(unknown)}")
            merged.update(constants)
        self.constants = merged
        self._setup()

    # subclasses override these
    @staticmethod
    def default_constants() -> dict:
        return {}

    def _setup(self) -> None:
        pass

    def eval(self, x, p) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, x, p) -> np.ndarray:
        """State Jacobian by central differences; shape ``(..., n, n)``."""
        x = np.asarray(x, dtype=float)
        eps = 1e-6 * np.maximum(1.0, np.abs(x))
        cols = []
        for k in range(self.n):
            dx = np.zeros_like(x)
            dx[..., k] = eps[..., k]
            cols.append((self.eval(x + dx, p) - self.eval(x - dx, p)) / (2 * eps[..., k:k + 1]))
        return np.stack(cols, axis=-1)

    @property
    def linear_matrix(self) -> Optional[np.ndarray]:
        return None

    def fingerprint(self) -> str:
        consts = {k: (np.asarray(v).tolist()) for k, v in sorted(self.constants.items())}
        return json.dumps({"model": self.name, "constants": consts}, sort_keys=True)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.constants})"


class LinearWaypointModel(ModelSpec):
    """``x' = A (x - goal)`` with the goal stored in ``p[3:6]``."""

    n = 3
    m = 6
    state_labels = ("x", "y", "z")
    position_dims = (0, 1, 2)

    def _setup(self) -> None:
        A = np.array(self._matrix(), dtype=float)
        if A.shape != (3, 3):
            raise ValueError("A must be 3x3")
        A.setflags(write=False)
        self.A = A

    def _matrix(self):
        return self.constants["A"]

    @property
    def linear_matrix(self) -> np.ndarray:
        return self.A

    def eval(self, x, p) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        return (x - p[..., 3:6]) @ self.A.T

    def jacobian(self, x, p) -> np.ndarray:
        shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(p)[:-1])
        return np.broadcast_to(self.A, shape + (3, 3)).copy()


class Linear3D(LinearWaypointModel):
    name = "linear3d"

    @staticmethod
    def default_constants() -> dict:
        return {"A": [[-3.0, 1.0, 0.0], [0.0, -2.0, 1.0], [0.0, 0.0, -1.0]]}


class RotLinear3D(LinearWaypointModel):
    """Linear model whose planar block ``[[-a,-b],[b,-a]]`` commutes with rotations."""

    name = "rotlinear3d"

    @staticmethod
    def default_constants() -> dict:
        return {"a": 1.0, "b": 1.0, "c": 1.0}

    def _matrix(self):
        a, b, c = (float(self.constants[k]) for k in "abc")
        return [[-a, -b, 0.0], [b, -a, 0.0], [0.0, 0.0, -c]]


class Aircraft4D(ModelSpec):
    """Fixed-wing aircraft tracking the destination waypoint ``p[2:4]``."""

    name = "aircraft4d"
    n = 4
    m = 4
    state_labels = ("speed", "heading", "x", "y")
    position_dims = (2, 3)
    heading_dim = 1
    # only the turn rate sees the bearing command
    singular_rows = (1,)

    @staticmethod
    def default_constants() -> dict:
        return {"k1": 0.5, "k2": 0.5, "mass": 1.0, "c_d1": 0.02, "v_c": 2.0, "g": 9.81}

    def _setup(self) -> None:
        for k, v in self.constants.items():
            if not (float(v) > 0):
                raise ValueError(f"aircraft constant {k} must be positive")

    def command_heading(self, x, p) -> np.ndarray:
        """Bearing from the aircraft to its destination (0 when exactly on it)."""
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        dx = p[..., 2] - x[..., 2]
        dy = p[..., 3] - x[..., 3]
        return np.arctan2(dx, dy)

    def eval(self, x, p) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        c = self.constants
        v = x[..., 0]
        if np.any(v <= 0):
            raise DomainError("aircraft speed must stay positive")
        psi = x[..., 1]
        err = wrap_angle(self.command_heading(x, p) - psi)
        phi = c["k2"] * c["v_c"] / c["g"] * err
        thrust = c["k1"] * c["mass"] * (c["v_c"] - v)
        out = np.empty(np.broadcast_shapes(x.shape, p.shape[:-1] + (4,)))
        out[..., 0] = (thrust - c["c_d1"] * v * v) / c["mass"]
        out[..., 1] = c["g"] / v * np.sin(phi)
        out[..., 2] = v * np.sin(psi)
        out[..., 3] = v * np.cos(psi)
        return out

    def jacobian(self, x, p) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        c = self.constants
        v, psi = x[..., 0], x[..., 1]
        if np.any(v <= 0):
            raise DomainError("aircraft speed must stay positive")
        dx = p[..., 2] - x[..., 2]
        dy = p[..., 3] - x[..., 3]
        d2 = dx * dx + dy * dy
        kappa = c["k2"] * c["v_c"] / c["g"]
        phi = kappa * wrap_angle(np.arctan2(dx, dy) - psi)
        gv = c["g"] / v
        with np.errstate(divide="ignore", invalid="ignore"):
            dpsic_dx = np.where(d2 > 0, -dy / d2, 0.0)
            dpsic_dy = np.where(d2 > 0, dx / d2, 0.0)
        J = np.zeros(np.broadcast_shapes(x.shape[:-1], p.shape[:-1]) + (4, 4))
        J[..., 0, 0] = -c["k1"] - 2 * c["c_d1"] * v / c["mass"]
        J[..., 1, 0] = -gv / v * np.sin(phi)
        J[..., 1, 1] = -gv * np.cos(phi) * kappa
        J[..., 1, 2] = gv * np.cos(phi) * kappa * dpsic_dx
        J[..., 1, 3] = gv * np.cos(phi) * kappa * dpsic_dy
        J[..., 2, 0] = np.sin(psi)
        J[..., 2, 1] = v * np.cos(psi)
        J[..., 3, 0] = np.cos(psi)
        J[..., 3, 1] = -v * np.sin(psi)
        return J

    def is_regular(self, lo, hi, p) -> bool:
        """True when the field is smooth on the box.

        The bearing command is singular at the waypoint and the wrapped
        heading error jumps where it crosses +-pi; both make the Jacobian
        useless as a growth bound.
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo[0] <= 0:
            raise DomainError("enclosure reaches non-positive speed")
        gx, gy = float(p[2]), float(p[3])
        if lo[2] <= gx <= hi[2] and lo[3] <= gy <= hi[3]:
            return False
        xs = np.array([lo[2], hi[2], lo[2], hi[2]])
        ys = np.array([lo[3], lo[3], hi[3], hi[3]])
        b0 = math.atan2(gx - 0.5 * (lo[2] + hi[2]), gy - 0.5 * (lo[3] + hi[3]))
        d = wrap_angle(np.arctan2(gx - xs, gy - ys) - b0)
        psi_mid = 0.5 * (lo[1] + hi[1])
        e0 = float(wrap_angle(b0 - psi_mid))
        e_lo = e0 + d.min() - (hi[1] - psi_mid)
        e_hi = e0 + d.max() + (psi_mid - lo[1])
        return bool(e_lo > -math.pi and e_hi < math.pi)

    def field_bounds(self, lo, hi, p):
        """Componentwise interval enclosure of ``f`` over the box."""
        c = self.constants
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo[0] <= 0:
            raise DomainError("enclosure reaches non-positive speed")

        def f0(v):
            return (c["k1"] * c["mass"] * (c["v_c"] - v) - c["c_d1"] * v * v) / c["mass"]

        kappa = c["k2"] * c["v_c"] / c["g"]
        turn = c["g"] / lo[0] * math.sin(min(kappa * math.pi, math.pi / 2))
        s_lo, s_hi = interval_sin(lo[1], hi[1])
        c_lo, c_hi = interval_sin(lo[1] + math.pi / 2, hi[1] + math.pi / 2)
        x_lo, x_hi = interval_mul(lo[0], hi[0], s_lo, s_hi)
        y_lo, y_hi = interval_mul(lo[0], hi[0], c_lo, c_hi)
        return (np.array([f0(hi[0]), -turn, x_lo, y_lo]),
                np.array([f0(lo[0]), turn, x_hi, y_hi]))


def interval_sin(a: float, b: float):
    """Range of ``sin`` over ``[a, b]``."""
    if b - a >= TWO_PI:
        return -1.0, 1.0
    vals = [math.sin(a), math.sin(b)]
    lo, hi = min(vals), max(vals)
    # peaks at pi/2 + 2k pi, troughs at -pi/2 + 2k pi
    if math.floor((b - math.pi / 2) / TWO_PI) >= math.ceil((a - math.pi / 2) / TWO_PI):
        hi = 1.0
    if math.floor((b + math.pi / 2) / TWO_PI) >= math.ceil((a + math.pi / 2) / TWO_PI):
        lo = -1.0
    return lo, hi


def interval_mul(a_lo, a_hi, b_lo, b_hi):
    prods = (a_lo * b_lo, a_lo * b_hi, a_hi * b_lo, a_hi * b_hi)
    return min(prods), max(prods)


MODELS = {cls.name: cls for cls in (Linear3D, RotLinear3D, Aircraft4D)}


def make_model(name: str, constants: Optional[dict] = None) -> ModelSpec:
    try:
        cls = MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    return cls(constants)


def eval_dynamics(model: ModelSpec, x, p) -> np.ndarray:
    return model.eval(x, p)


@dataclass
class Trajectory:
    states: np.ndarray  # (len, n)
    times: np.ndarray
    step: float

    def __len__(self) -> int:
        return len(self.times)

    @property
    def points(self):
        return list(zip(self.states, self.times))


def step_count(T: float, step: float) -> int:
    """Number of ``step``-sized increments in ``T``; they must divide evenly."""
    if T <= 0 or step <= 0:
        raise ValueError("horizon and step must be positive")
    k = round(T / step)
    if k < 1 or abs(k * step - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"step {step} does not divide horizon {T}")
    return int(k)


def rk4_step(model: ModelSpec, x: np.ndarray, p: np.ndarray, h: float) -> np.ndarray:
    k1 = model.eval(x, p)
    k2 = model.eval(x + 0.5 * h * k1, p)
    k3 = model.eval(x + 0.5 * h * k2, p)
    k4 = model.eval(x + h * k3, p)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(model: ModelSpec, x0, p, n_steps: int, h: float) -> np.ndarray:
    """RK4 states for a batch of initial states, shape ``(n_steps+1, *x0.shape)``."""
    x = np.array(x0, dtype=float)
    p = np.asarray(p, dtype=float)
    out = np.empty((n_steps + 1,) + x.shape)
    out[0] = x
    for i in range(n_steps):
        x = rk4_step(model, x, p, h)
        out[i + 1] = x
    return out


def simulate(model: ModelSpec, x0, p, T: float, step: float) -> Trajectory:
    k = step_count(T, step)
    states = integrate(model, np.asarray(x0, dtype=float), p, k, step)
    times = step * np.arange(k + 1)
    return Trajectory(states, times, step)
