"""Symmetry transforms sending every real mode onto the virtual mode ``p_v = 0``.

A map translates the position dimensions by ``-goal`` (the destination
waypoint), optionally rotates the first two position dimensions by ``theta``
and shifts the heading by ``theta``.  The map is affine, ``gamma(x) = J x + b``
with a constant orthonormal ``J``, so box images are computed exactly from the
center and ``|J| @ radius``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .dynamics import ModelSpec
from .geometry import HyperRect, Reachtube

TRANSLATION = "translation"
TRANSLATION_ROTATION = "translation_rotation"
MAP_KINDS = (TRANSLATION, TRANSLATION_ROTATION)
EQUIVARIANCE_TOL = 1e-8


class DegenerateModeError(ValueError):
    """Source and destination waypoints coincide, so no heading is defined."""


class UnsupportedUnsafeSet(ValueError):
    """Unsafe set with infinite bounds on a dimension that gets rotated."""


def _snap(v: float) -> float:
    # exact 0/+-1 keeps axis-aligned paths free of rounding noise
    if abs(v) < 1e-15:
        return 0.0
    if abs(abs(v) - 1.0) < 1e-15:
        return math.copysign(1.0, v)
    return v


def _shift_out(lo, hi, d):
    """``lo + d`` rounded down and ``hi + d`` rounded up (TwoSum error test)."""
    with np.errstate(invalid="ignore"):
        out = []
        for a, sign in ((lo, -1.0), (hi, 1.0)):
            b = np.broadcast_to(d, a.shape)
            s = a + b
            bb = s - a
            err = (a - (s - bb)) + (b - bb)
            out.append(np.where(err * sign > 0, np.nextafter(s, sign * np.inf), s))
    return out


def _waypoint_layout(model: ModelSpec):
    """(position dims, source slice, destination slice) within ``p``."""
    k = len(model.position_dims)
    return model.position_dims, slice(0, k), slice(k, 2 * k)


def default_map_kind(model: ModelSpec) -> str:
    return TRANSLATION if model.name == "linear3d" else TRANSLATION_ROTATION


@dataclass(frozen=True)
class SymmetryMap:
    kind: str
    goal: np.ndarray
    theta: float
    cos: float
    sin: float
    n: int
    position_dims: tuple
    heading_dim: Optional[int]
    p_source: np.ndarray
    state_jacobian: np.ndarray = field(repr=False)

    @property
    def rotates(self) -> bool:
        return not (self.cos == 1.0 and self.sin == 0.0)

    @property
    def rotation(self) -> np.ndarray:
        return np.array([[self.cos, self.sin], [-self.sin, self.cos]])

    @property
    def rot_dims(self) -> tuple:
        return tuple(self.position_dims[:2])

    # -- points -------------------------------------------------------------

    def forward(self, x) -> np.ndarray:
        y = np.array(x, dtype=float)
        y[..., list(self.position_dims)] -= self.goal
        if self.rotates:
            i, j = self.rot_dims
            a, b = y[..., i].copy(), y[..., j].copy()
            y[..., i] = self.cos * a + self.sin * b
            y[..., j] = -self.sin * a + self.cos * b
        if self.heading_dim is not None:
            y[..., self.heading_dim] += self.theta
        return y

    def inverse(self, x) -> np.ndarray:
        y = np.array(x, dtype=float)
        if self.heading_dim is not None:
            y[..., self.heading_dim] -= self.theta
        if self.rotates:
            i, j = self.rot_dims
            a, b = y[..., i].copy(), y[..., j].copy()
            y[..., i] = self.cos * a - self.sin * b
            y[..., j] = self.sin * a + self.cos * b
        y[..., list(self.position_dims)] += self.goal
        return y

    def apply(self, x, direction: str = "forward") -> np.ndarray:
        return self._fn(direction)(x)

    def _fn(self, direction):
        if direction == "forward":
            return self.forward
        if direction == "inverse":
            return self.inverse
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")

    # -- parameters ---------------------------------------------------------

    def rho(self, p) -> np.ndarray:
        """Parameter map: source dropped, destination sent through the position map."""
        p = np.asarray(p, dtype=float)
        k = len(self.position_dims)
        dst = p[..., k:2 * k] - self.goal
        if self.rotates:
            a, b = dst[..., 0].copy(), dst[..., 1].copy()
            dst[..., 0] = self.cos * a + self.sin * b
            dst[..., 1] = -self.sin * a + self.cos * b
        out = np.zeros_like(p)
        out[..., k:2 * k] = dst
        return out

    # -- sets ---------------------------------------------------------------

    def _bounds(self, lo, hi, direction):
        """Map stacked box bounds ``(..., n)``; infinite bounds allowed off the rotated dims."""
        lo = np.array(lo, dtype=float)
        hi = np.array(hi, dtype=float)
        fwd = direction == "forward"
        if direction not in ("forward", "inverse"):
            raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
        pos = list(self.position_dims)
        if self.heading_dim is not None and not fwd:
            h = self.heading_dim
            lo[..., h], hi[..., h] = _shift_out(lo[..., h], hi[..., h], -self.theta)
        if fwd:
            lo[..., pos], hi[..., pos] = _shift_out(lo[..., pos], hi[..., pos], -self.goal)
        if self.rotates:
            i, j = self.rot_dims
            if not (np.all(np.isfinite(lo[..., [i, j]])) and np.all(np.isfinite(hi[..., [i, j]]))):
                raise UnsupportedUnsafeSet("infinite bounds on rotated position dimensions")
            R = self.rotation if fwd else self.rotation.T
            c = 0.5 * (lo[..., [i, j]] + hi[..., [i, j]])
            r = 0.5 * (hi[..., [i, j]] - lo[..., [i, j]])
            c2 = c @ R.T
            r2 = r @ np.abs(R).T
            # outward rounding so sampled images never fall a few ulps outside
            eps = 4 * np.spacing(np.abs(c2) + r2)
            lo[..., [i, j]] = c2 - r2 - eps
            hi[..., [i, j]] = c2 + r2 + eps
        if not fwd:
            lo[..., pos], hi[..., pos] = _shift_out(lo[..., pos], hi[..., pos], self.goal)
        if self.heading_dim is not None and fwd:
            h = self.heading_dim
            lo[..., h], hi[..., h] = _shift_out(lo[..., h], hi[..., h], self.theta)
        return lo, hi

    def transform_rect(self, r: HyperRect, direction: str = "forward") -> HyperRect:
        if not r.bounded:
            raise ValueError("transform_rect needs a bounded box; use transform_unsafe")
        lo, hi = self._bounds(r.lo, r.hi, direction)
        return HyperRect(lo, hi)

    def transform_unsafe(self, u: HyperRect, direction: str = "forward") -> HyperRect:
        lo, hi = self._bounds(u.lo, u.hi, direction)
        return HyperRect(lo, hi)

    def transform_tube(self, tube: Reachtube, direction: str = "forward") -> Reachtube:
        if len(tube):
            lo, hi = self._bounds(tube.lo, tube.hi, direction)
        else:
            lo, hi = tube.lo, tube.hi
        init = None if tube.init_set is None else self.transform_rect(tube.init_set, direction)
        mode = tube.mode
        if mode is not None and direction == "forward":
            mode = self.rho(mode)
        elif mode is not None:
            mode = self.p_source
        return Reachtube(lo, hi, tube.step, tube.ftime, init, mode)


def build_map(model: ModelSpec, p, kind: Optional[str] = None) -> SymmetryMap:
    """Map for mode ``p``: goal is the destination waypoint."""
    kind = kind or default_map_kind(model)
    if kind not in MAP_KINDS:
        raise ValueError(f"unknown map kind {kind!r}; choose from {MAP_KINDS}")
    p = np.asarray(p, dtype=float)
    if p.shape != (model.m,) or not np.all(np.isfinite(p)):
        raise ValueError(f"mode parameter must be {model.m} finite numbers")
    pos, src_sl, dst_sl = _waypoint_layout(model)
    src, dst = p[src_sl], p[dst_sl]
    theta, c, s = 0.0, 1.0, 0.0
    if kind == TRANSLATION_ROTATION:
        if np.array_equal(src[:2], dst[:2]):
            raise DegenerateModeError(f"source and destination coincide in the rotation plane: {src.tolist()}")
        theta = math.atan2(src[0] - dst[0], dst[1] - src[1])
        c, s = _snap(math.cos(theta)), _snap(math.sin(theta))
    n = model.n
    J = np.eye(n)
    if kind == TRANSLATION_ROTATION:
        i, j = pos[:2]
        J[np.ix_([i, j], [i, j])] = [[c, s], [-s, c]]
    J.setflags(write=False)
    goal = dst.copy()
    goal.setflags(write=False)
    heading = model.heading_dim if kind == TRANSLATION_ROTATION else None
    return SymmetryMap(kind, goal, theta, c, s, n, tuple(pos), heading, p.copy(), J)


def virtual_param(model: ModelSpec) -> np.ndarray:
    return np.zeros(model.m)


@dataclass
class EquivarianceReport:
    max_residual: float
    passed: bool
    samples: int
    worst_state: Optional[np.ndarray] = None
    worst_param: Optional[np.ndarray] = None


def default_sample_box(model: ModelSpec):
    """(state box, parameter box) used by :func:`check_equivariance`."""
    if model.name == "aircraft4d":
        xbox = HyperRect([0.5, -math.pi, -20, -20], [3.0, math.pi, 20, 20])
    else:
        xbox = HyperRect([-20.0] * model.n, [20.0] * model.n)
    pbox = HyperRect([-20.0] * model.m, [20.0] * model.m)
    return xbox, pbox


def check_equivariance(model: ModelSpec, smap: SymmetryMap, samples: int = 1000,
                       seed: int = 0, boxes=None, tol: float = EQUIVARIANCE_TOL) -> EquivarianceReport:
    """Max of ``|J f(x, p) - f(gamma(x), rho(p))|_inf`` over quasi-random ``(x, p)``."""
    if samples < 1:
        raise ValueError("need at least one sample")
    xbox, pbox = boxes or default_sample_box(model)
    u = qmc.Halton(d=model.n + model.m, scramble=True, seed=seed).random(samples)
    xs = xbox.lo + u[:, :model.n] * xbox.widths
    ps = pbox.lo + u[:, model.n:] * pbox.widths
    lhs = model.eval(xs, ps) @ smap.state_jacobian.T
    rhs = model.eval(smap.forward(xs), smap.rho(ps))
    res = np.abs(lhs - rhs).max(axis=1)
    k = int(np.argmax(res))
    worst = float(res[k])
    return EquivarianceReport(worst, worst <= tol, samples, xs[k], ps[k])
