"""Independent reference computations used by the tests.

None of these call into the verifier's numerics: the exponential is a plain
Taylor series with scaling and squaring, trajectories come from scipy's
adaptive DOP853 integrator, and the collision check is a double loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from symreach.caches import SafetyCache, Verdict
from symreach.geometry import HyperRect


def expm_ss(A, t: float = 1.0, terms: int = 20) -> np.ndarray:
    """``exp(A t)`` by scaling, a truncated Taylor series, then squaring."""
    M = np.asarray(A, dtype=float) * t
    norm = np.abs(M).sum(axis=1).max()
    s = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0 else 0
    X = M / 2.0 ** s
    out = np.eye(len(M))
    term = np.eye(len(M))
    for k in range(1, terms + 1):
        term = term @ X / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


# -- hybrid executions ---------------------------------------------------------

@dataclass
class Execution:
    """One sampled run of an agent: absolute times, states, mode and local time."""
    t: list = field(default_factory=list)
    x: list = field(default_factory=list)
    mode: list = field(default_factory=list)
    local: list = field(default_factory=list)


def _flow(model, p, count):
    n = model.n

    def rhs(_, y):
        return model.eval(y.reshape(count, n), p).reshape(-1)
    return rhs


def _initial_points(K, count, rng):
    """Box corners first, then uniform samples."""
    corners = K.corners()
    k = min(len(corners), count // 4)
    pts = [corners[rng.permutation(len(corners))[:k]]] if k else []
    pts.append(K.sample(rng, count - k))
    return np.vstack(pts)


def sample_executions(scenario, agent, count: int = 500, seed: int = 0, dt: float = 0.01,
                      rtol: float = 1e-10, atol: float = 1e-10) -> list:
    """Sampled executions of ``agent`` with urgent guards on a ``dt`` grid.

    Each run follows mode ``j`` until the first grid time at which its state
    lies in the guard box, then switches; a run that never meets the guard
    stops at the dwell bound.
    """
    model = scenario.model
    rng = np.random.default_rng(seed)
    x = _initial_points(agent.initial_set, count, rng)
    runs = [Execution() for _ in range(count)]
    start = np.zeros(count)
    alive = np.arange(count)
    modes = agent.modes()
    for j, mode in enumerate(modes):
        if not len(alive):
            break
        steps = int(round(mode.T / dt))
        tt = np.arange(steps + 1) * dt
        sol = solve_ivp(_flow(model, mode.p, len(alive)), (0.0, tt[-1]), x[alive].reshape(-1),
                        method="DOP853", t_eval=tt, rtol=rtol, atol=atol)
        if not sol.success:
            raise RuntimeError(sol.message)
        Y = sol.y.T.reshape(len(tt), len(alive), model.n)
        if j + 1 < len(modes):
            box = mode.guard.box(model)
            inside = np.all((Y >= box.lo) & (Y <= box.hi), axis=2)
        else:
            inside = np.zeros(Y.shape[:2], dtype=bool)
        nxt = []
        for col, a in enumerate(alive):
            hits = np.nonzero(inside[:, col])[0]
            end = hits[0] if len(hits) else steps
            r = runs[a]
            r.t.extend(start[a] + tt[:end + 1])
            r.x.extend(Y[:end + 1, col])
            r.mode.extend([j] * (end + 1))
            r.local.extend(tt[:end + 1])
            if len(hits):
                x[a] = Y[end, col]
                start[a] += tt[end]
                nxt.append(a)
        alive = np.array(nxt, dtype=int)
    return runs


def containment_failures(agent_result, runs, tol: float = 1e-7) -> int:
    """Number of sampled points not inside the agent tube (box and time window).

    A point at local time ``tau`` of mode ``j`` must lie in a segment of mode
    ``j`` covering ``tau``, and its absolute time must fall in that segment's
    window.
    """
    tube = agent_result.tube
    lb = agent_result.lookback
    starts = np.array([e.start_index for e in lb] + [len(tube)])
    earliest = np.array([e.earliest_start for e in lb])
    cum = np.cumsum([e.time_uncertainty for e in lb])
    t = np.concatenate([np.asarray(r.t, dtype=float) for r in runs])
    x = np.concatenate([np.asarray(r.x, dtype=float).reshape(-1, tube.dim) for r in runs])
    j = np.concatenate([np.asarray(r.mode, dtype=int) for r in runs])
    tau = np.concatenate([np.asarray(r.local, dtype=float) for r in runs])
    base = np.floor(tau / tube.step + 1e-9).astype(int)
    ok = np.zeros(len(t), dtype=bool)
    for c in (base, base - 1):
        i = starts[j] + c
        valid = (c >= 0) & (i < starts[j + 1])
        valid &= (c * tube.step - 1e-9 <= tau) & (tau <= (c + 1) * tube.step + 1e-9)
        i = np.where(valid, i, 0)
        w_lo = earliest[j] + c * tube.step
        w_hi = earliest[j] + cum[j] + (c + 1) * tube.step
        in_time = (w_lo - 1e-9 <= t) & (t <= w_hi + 1e-9)
        in_box = np.all((x >= tube.lo[i] - tol) & (x <= tube.hi[i] + tol), axis=1)
        ok |= valid & in_time & in_box
    return int((~ok).sum())


def mc_tube_failures(model, tube, K, p, count: int = 500, seed: int = 0, dt: float = 0.01,
                     tol: float = 1e-7) -> int:
    """Sample points of single-mode trajectories from ``K`` outside ``tube``."""
    rng = np.random.default_rng(seed)
    x0 = _initial_points(K, count, rng)
    steps = int(round(len(tube) * tube.step / dt))
    tt = np.arange(steps + 1) * dt
    sol = solve_ivp(_flow(model, p, count), (0.0, tt[-1]), x0.reshape(-1), method="DOP853",
                    t_eval=tt, rtol=1e-10, atol=1e-10)
    Y = sol.y.T.reshape(len(tt), count, model.n)
    fails = 0
    for s, tau in enumerate(tt):
        segs = tube.covering_segments(tube.ftime + tau)
        ok = np.zeros(count, dtype=bool)
        for i in segs:
            ok |= np.all((Y[s] >= tube.lo[i] - tol) & (Y[s] <= tube.hi[i] + tol), axis=1)
        fails += int((~ok).sum())
    return fails


# -- dynamic safety ------------------------------------------------------------

def naive_collision(tube_a, lb_a, tube_b, lb_b, O) -> bool:
    """All-pairs check with windows rebuilt segment by segment."""
    def windows(tube, lb):
        out = []
        entries = list(lb) or []
        if not entries:
            return [(i * tube.step, (i + 1) * tube.step) for i in range(len(tube))]
        unc = 0.0
        for j, e in enumerate(entries):
            unc += e.time_uncertainty
            stop = entries[j + 1].start_index if j + 1 < len(entries) else len(tube)
            for k in range(stop - e.start_index):
                out.append((e.earliest_start + k * tube.step,
                            e.earliest_start + unc + (k + 1) * tube.step))
        return out

    wa, wb = windows(tube_a, lb_a), windows(tube_b, lb_b)
    for i in range(len(tube_a)):
        for j in range(len(tube_b)):
            if wa[i][1] < wb[j][0] or wb[j][1] < wa[i][0]:
                continue
            if all(tube_a.lo[i][d] <= tube_b.hi[j][d] and tube_b.lo[j][d] <= tube_a.hi[i][d] for d in O):
                return True
    return False


# -- safety cache --------------------------------------------------------------

def model_tube_hits(K, T: float, U, drift=0.7, growth=0.3, step=0.5) -> bool:
    """Does the toy tube of ``(K, T)`` meet ``U``?

    The toy tube moves ``K`` by ``drift * t`` on every axis and widens it by
    ``growth * t``; it is monotone in ``K`` and ``T`` by construction, which is
    what subsumption relies on.
    """
    t = 0.0
    while t < T - 1e-12:
        t1 = min(t + step, T)
        lo = K.lo + drift * t - growth * t1
        hi = K.hi + drift * t1 + growth * t1
        if np.all(lo <= U.hi) and np.all(U.lo <= hi):
            return True
        t = t1
    return False


def _random_tuple(rng):
    lo = rng.uniform(-3, 3, 2)
    k = HyperRect(lo, lo + rng.uniform(0.1, 2, 2))
    ulo = rng.uniform(-1, 8, 2)
    u = HyperRect(ulo, ulo + rng.uniform(0.1, 3, 2))
    return k, float(rng.choice([1.0, 2.0, 3.0, 4.0])), u


def _nudge(rng, box, scale):
    lo = box.lo + rng.uniform(-scale, scale, box.dim)
    hi = box.hi + rng.uniform(-scale, scale, box.dim)
    return HyperRect(lo, hi) if np.all(lo <= hi) else box


def safety_oracle_trial(seed: int, pairs: int = 200):
    """Store toy verdicts, query perturbations, count disagreements and answered queries."""
    rng = np.random.default_rng(seed)
    wrong = answered = 0
    for _ in range(pairs):
        s = SafetyCache()
        k, T, u = _random_tuple(rng)
        s.store_intersect(k, T, u, Verdict.UNSAFE if model_tube_hits(k, T, u) else Verdict.SAFE)
        qk = _nudge(rng, k, rng.choice([0.0, 0.2]))
        qu = _nudge(rng, u, rng.choice([0.0, 0.2]))
        qT = float(rng.choice([T - 1, T, T + 1])) if T > 1 else T
        got = s.get_intersect(qk, qT, qu)
        if got is not Verdict.UNKNOWN:
            answered += 1
            truth = Verdict.UNSAFE if model_tube_hits(qk, qT, qu) else Verdict.SAFE
            wrong += got is not truth
    return wrong, answered
