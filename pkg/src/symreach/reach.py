"""Reachtube computation: one center simulation bloated by a discrepancy bound.

Two bounding methods are available.

``global``
    The single-exponential form ``beta(delta, t) = delta * exp(L t)`` with a
    sampled Lipschitz estimate ``L``.  Simple but very loose for long horizons.

``local`` (default)
    Per-segment componentwise comparison.  For linear models the radius is
    the exact box image ``|exp(A t)| r0``.  For nonlinear models a Metzler
    bound ``M`` of the Jacobian over an enclosure of the segment gives
    ``r(t) <= exp(M t) r0``; the enclosure is re-guessed until it contains
    the resulting box, which keeps the bootstrapping argument valid.

Both methods build a segment box from every integrator state inside the
segment (not just the two endpoints) plus a small numeric pad.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import expm
from scipy.stats import qmc

from .dynamics import ModelSpec, integrate, step_count
from .geometry import HyperRect, Reachtube

BLOWUP_LIMIT = 1e12
_ENCLOSURE_TRIES = 6
_ENCLOSURE_GROWTH = 1.5


class DiscrepancyBlowup(RuntimeError):
    """Tube radii grew past the configured limit."""


@dataclass(frozen=True)
class DiscrepancyParams:
    lipschitz_bound: float
    domain_pad: np.ndarray

    def __post_init__(self):
        if self.lipschitz_bound < 0:
            raise ValueError("Lipschitz bound must be non-negative")
        if np.any(np.asarray(self.domain_pad) < 0):
            raise ValueError("domain pad must be non-negative")


def estimate_discrepancy(model: ModelSpec, K: HyperRect, p, T: float,
                         sim_step: float = 0.01, seed: int = 0,
                         domain_pad=None) -> DiscrepancyParams:
    """Largest induced inf-norm of the Jacobian seen around trajectories from ``K``."""
    if not K.bounded:
        raise ValueError("initial set must be bounded")
    p = np.asarray(p, dtype=float)
    pad = K.radius.copy() if domain_pad is None else np.broadcast_to(
        np.asarray(domain_pad, dtype=float), (K.dim,)).copy()
    A = model.linear_matrix
    if A is not None:
        return DiscrepancyParams(float(np.abs(A).sum(axis=1).max()), pad)
    sobol = qmc.Sobol(d=K.dim, scramble=True, seed=seed).random(64)
    starts = np.vstack([K.center[None, :], K.corners(), K.lo + sobol * K.widths])
    k = step_count(T, sim_step)
    states = integrate(model, starts, p, k, sim_step)
    idx = np.linspace(0, k, 10).round().astype(int)
    visited = states[idx].reshape(-1, K.dim)
    rng = np.random.default_rng(seed)
    jitter = visited + rng.uniform(-1, 1, size=visited.shape) * pad
    J = model.jacobian(np.vstack([visited, jitter]), p)
    L = float(np.abs(J).sum(axis=-1).max())
    return DiscrepancyParams(L, pad)


def _unit_grid(n: int, grid: int) -> np.ndarray:
    axes = [np.linspace(0.0, 1.0, grid)] * n
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)


def metzler_bounds(model: ModelSpec, lo, hi, p, grid: int = 4) -> np.ndarray:
    """Batched Metzler bounds for boxes ``lo, hi`` of shape ``(B, n)``; returns ``(B, n, n)``.

    ``M_ii >= J_ii`` and ``M_ij >= |J_ij|`` over each box.  Linear models give
    the exact bound; others sample the Jacobian on a regular grid and add a
    margin proportional to the observed spread.
    """
    lo = np.atleast_2d(lo)
    hi = np.atleast_2d(hi)
    B, n = lo.shape
    A = model.linear_matrix
    if A is not None:
        M = np.abs(A)
        np.fill_diagonal(M, np.diag(A))
        return np.broadcast_to(M, (B, n, n)).copy()
    pts = lo[:, None, :] + _unit_grid(n, grid)[None] * (hi - lo)[:, None, :]
    J = model.jacobian(pts, p)  # (B, G, n, n)
    spread = J.max(axis=1) - J.min(axis=1)
    margin = 0.1 * spread + 1e-9
    M = np.abs(J).max(axis=1) + margin
    d = np.arange(n)
    M[:, d, d] = J[:, :, d, d].max(axis=1) + margin[:, d, d]
    return M


def metzler_bound(model: ModelSpec, lo, hi, p, grid: int = 4) -> Optional[np.ndarray]:
    """Single-box version of :func:`metzler_bounds`; None where the field is not smooth."""
    A = model.linear_matrix
    if A is None:
        if hasattr(model, "is_regular") and not model.is_regular(lo, hi, p):
            return None
        return metzler_bounds(model, np.asarray(lo)[None], np.asarray(hi)[None], p, grid)[0]
    return metzler_bounds(model, np.zeros((1, model.n)), np.zeros((1, model.n)), p)[0]


def compute_reachtube(model: ModelSpec, K: HyperRect, p, T: float, step: float = 0.1,
                      sim_step: float = 0.01, method: str = "local",
                      discrepancy: Optional[DiscrepancyParams] = None) -> Reachtube:
    """Over-approximating ``(K, p, [0, T])`` reachtube with segments of length ``step``."""
    return compute_reachtubes(model, [K], p, T, step, sim_step, method, discrepancy)[0]


def compute_reachtubes(model: ModelSpec, Ks, p, T: float, step: float = 0.1,
                       sim_step: float = 0.01, method: str = "local",
                       discrepancy: Optional[DiscrepancyParams] = None) -> list:
    """Tubes for several initial sets sharing one mode, integrated as a batch."""
    Ks = list(Ks)
    if not Ks:
        return []
    if not all(K.bounded for K in Ks):
        raise ValueError("initial set must be bounded")
    if method not in ("local", "global"):
        raise ValueError(f"unknown discrepancy method {method!r}")
    p = np.asarray(p, dtype=float)
    n_seg = step_count(T, step)
    sub = step_count(step, sim_step)
    total = n_seg * sub
    B, n = len(Ks), Ks[0].dim
    centers = np.array([K.center for K in Ks])
    r0 = np.array([K.radius for K in Ks])
    traj = integrate(model, centers, p, total, sim_step)  # (total+1, B, n)
    speed = np.abs(model.eval(traj, p)).max(axis=2)  # (total+1, B)

    A = model.linear_matrix
    if method == "global":
        t = sim_step * np.arange(total + 1)
        radii = np.empty((total + 1, B, n))
        gains = np.empty((n_seg, B, n, n))
        for b, K in enumerate(Ks):
            disc = discrepancy or estimate_discrepancy(model, K, p, T, sim_step)
            L = disc.lipschitz_bound
            if L * T > np.log(BLOWUP_LIMIT):
                raise DiscrepancyBlowup(
                    f"exp(L*T) = exp({L:.3g}*{T}) exceeds {BLOWUP_LIMIT:g}; "
                    "shorten the horizon or shrink the initial set")
            radii[:, b] = r0[b][None, :] * np.exp(L * t)[:, None]
            gains[:, b] = L * np.eye(n)
    elif A is not None:
        radii = _linear_radii(A, r0, total, sim_step)
        gains = np.broadcast_to(np.abs(A), (n_seg, B, n, n))
    else:
        radii, gains = _local_radii(model, traj, r0, p, n_seg, sub, sim_step)

    scale = np.maximum(1.0, r0.max(axis=1))
    if not np.all(np.isfinite(radii)) or np.any(radii.max(axis=(0, 2)) > BLOWUP_LIMIT * scale):
        raise DiscrepancyBlowup("tube radius diverged; shorten the horizon or shrink the initial set")

    # segment i covers substeps i*sub .. (i+1)*sub inclusive
    idx = np.arange(n_seg)[:, None] * sub + np.arange(sub + 1)[None, :]
    c = traj[idx]      # (n_seg, sub+1, B, n)
    r = radii[idx]
    # between substeps the centre moves a little and radius i drifts by at
    # most h * (|M| r)_i
    drift = np.einsum("sbij,sbj->sbi", gains, r.max(axis=1))
    pad = 1e-6 + sim_step * (0.1 * speed[idx].max(axis=1)[..., None] + 1.1 * drift)
    lo = (c - r).min(axis=1) - pad
    hi = (c + r).max(axis=1) + pad
    return [Reachtube(lo[:, b], hi[:, b], step, 0.0, K, p) for b, K in enumerate(Ks)]


def _linear_radii(A: np.ndarray, r0: np.ndarray, count: int, h: float) -> np.ndarray:
    """``|exp(A t_j)| @ r0`` for every substep; r0 has shape ``(B, n)``."""
    step = expm(A * h)
    n = A.shape[0]
    phis = np.empty((count + 1, n, n))
    phis[0] = np.eye(n)
    for j in range(count):
        phis[j + 1] = step @ phis[j]
    return np.einsum("tij,bj->tbi", np.abs(phis), r0)


def _local_radii(model, traj, r0, p, n_seg, sub, h):
    B, n = r0.shape
    radii = np.empty((n_seg * sub + 1, B, n))
    radii[0] = r0
    gains = np.empty((n_seg, B, n, n))
    r = r0.copy()
    for i in range(n_seg):
        c = traj[i * sub:(i + 1) * sub + 1]
        c_lo, c_hi = c.min(axis=0), c.max(axis=0)
        guess = 1.2 * r + 1e-6
        seg_all = np.empty((sub + 1, B, n))
        pending = np.arange(B)
        for _ in range(_ENCLOSURE_TRIES):
            seg, gain = _segment_radii(model, c_lo[pending] - guess[pending],
                                       c_hi[pending] + guess[pending], p, r[pending], sub, h)
            # padding between substeps is added later; leave room for it here
            top = seg.max(axis=0)
            need = top + 2 * h * np.einsum("bij,bj->bi", gain, top) + 1e-6
            ok = np.all(need <= guess[pending], axis=1)
            seg_all[:, pending[ok]] = seg[:, ok]
            gains[i, pending[ok]] = gain[ok]
            bad = pending[~ok]
            short = need[~ok] > guess[bad]
            guess[bad] = np.where(short, need[~ok] * _ENCLOSURE_GROWTH, guess[bad])
            pending = bad
            if not len(pending):
                break
        else:
            raise DiscrepancyBlowup(f"no stable enclosure found for segment {i}")
        radii[i * sub + 1:(i + 1) * sub + 1] = seg_all[1:]
        r = seg_all[-1]
    return radii, gains


def _segment_radii(model, lo, hi, p, r, sub, h):
    """Radii at each substep given that all states stay in ``[lo, hi]`` (batched).

    Also returns the ``|M|`` gain matrix of each box, used to bound how far the
    radii move between substeps.
    """
    B, n = r.shape
    seg = np.empty((sub + 1, B, n))
    seg[0] = r
    gain = np.zeros((B, n, n))
    if hasattr(model, "is_regular"):
        regular = np.array([model.is_regular(a, b, p) for a, b in zip(lo, hi)], dtype=bool)
    else:
        regular = np.ones(B, dtype=bool)
    sing = np.nonzero(~regular)[0]
    if len(sing):
        # non-smooth rows move at most as fast as their field range; the rest
        # keep a Metzler bound, giving r' <= M r + w solved exactly below
        # any row may switch to its range when that is the smaller bound
        forced = np.zeros(n, dtype=bool)
        forced[list(getattr(model, "singular_rows", range(n)))] = True
        M = metzler_bounds(model, lo[sing], hi[sing], p)
        rad = 0.5 * (hi[sing] - lo[sing])
        w = np.zeros((len(sing), n))
        for k, b in enumerate(sing):
            f_lo, f_hi = model.field_bounds(lo[b], hi[b], p)
            span = f_hi - f_lo
            use = forced | (span <= np.abs(M[k]) @ rad[k])
            M[k, use, :] = 0.0
            w[k, use] = span[use]
        aug = np.zeros((len(sing), n + 1, n + 1))
        aug[:, :n, :n] = M * h
        aug[:, :n, n] = w * h
        E = expm(aug)
        cur = r[sing]
        for j in range(sub):
            cur = np.einsum("bij,bj->bi", E[:, :n, :n], cur) + E[:, :n, n]
            seg[j + 1, sing] = cur
        gain[sing] = np.abs(M)
    reg = np.nonzero(regular)[0]
    if len(reg):
        M = metzler_bounds(model, lo[reg], hi[reg], p)
        E = expm(M * h)
        cur = r[reg]
        for j in range(sub):
            cur = np.einsum("bij,bj->bi", E, cur)
            seg[j + 1, reg] = cur
        gain[reg] = np.abs(M)
    return seg, gain


class ReachEngine:
    """Configured ``computeReachtube`` with a thread-safe call counter."""

    def __init__(self, model: ModelSpec, step: float = 0.1, sim_step: float = 0.01,
                 method: str = "local", discrepancy: Optional[DiscrepancyParams] = None):
        step_count(step, sim_step)
        self.model = model
        self.step = float(step)
        self.sim_step = float(sim_step)
        self.method = method
        self.discrepancy = discrepancy
        self.calls = 0
        self._lock = threading.Lock()

    def __call__(self, K: HyperRect, p, T: float) -> Reachtube:
        return self.batch([K], p, T)[0]

    def batch(self, Ks, p, T: float) -> list:
        """One tube per initial set; counts as ``len(Ks)`` calls."""
        Ks = list(Ks)
        with self._lock:
            self.calls += len(Ks)
        return compute_reachtubes(self.model, Ks, p, T, self.step, self.sim_step,
                                  self.method, self.discrepancy)

    def fingerprint(self) -> dict:
        disc = None
        if self.discrepancy is not None:
            disc = [self.discrepancy.lipschitz_bound, np.asarray(self.discrepancy.domain_pad).tolist()]
        return {"model": self.model.fingerprint(), "step": self.step,
                "sim_step": self.sim_step, "method": self.method, "discrepancy": disc}
