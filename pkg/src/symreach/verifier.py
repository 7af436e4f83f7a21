"""Symmetry-accelerated safety verification of waypoint-following agents.

Each mode's initial set is mapped into the virtual frame, its tube is
assembled cell by cell from the tube cache (computing only what is missing),
checked against the unsafe sets through the safety cache, and mapped back.
The guard crossing of one mode seeds the next.  Once an agent's full tube is
known it is checked for collisions against every earlier agent.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .caches import SafetyCache, TubeCache, Verdict, quantize
from .dynamics import DomainError, step_count
from .geometry import AlignmentError, HyperRect, Reachtube, union_all
from .reach import DiscrepancyBlowup, ReachEngine
from .scenario import GuardSpec, Scenario
from .symmetry import (DegenerateModeError, SymmetryMap, UnsupportedUnsafeSet, build_map,
                       check_equivariance, default_map_kind, virtual_param)

log = logging.getLogger(__name__)

# virtual initial sets are rounded outward to this dyadic lattice so that
# congruent modes reached along different paths produce identical queries
QUANTUM = 2.0 ** -30


class VerificationError(RuntimeError):
    """A mode could not be processed; carries agent and mode indices."""

    def __init__(self, message: str, agent=None, mode: Optional[int] = None):
        where = "" if agent is None else f"agent {agent!r}" + ("" if mode is None else f", mode {mode}")
        super().__init__(f"{where}: {message}" if where else message)
        self.agent = agent
        self.mode = mode


class GuardUnreachable(VerificationError):
    pass


class InexactSymmetry(VerificationError):
    pass


@dataclass
class VerifStats:
    computed_segments: int = 0
    transformed_segments: int = 0
    computed: float = 0.0
    transformed: float = 0.0
    tube_calls: int = 0
    cache_hits: int = 0
    wall_time: float = 0.0

    def add(self, other: "VerifStats") -> None:
        for k in self.__dataclass_fields__:
            setattr(self, k, getattr(self, k) + getattr(other, k))

    @property
    def transformed_fraction(self) -> float:
        total = self.computed_segments + self.transformed_segments
        return self.transformed_segments / total if total else 0.0

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class LookbackEntry:
    start_index: int
    time_uncertainty: float
    earliest_start: float


class Lookback(list):
    """Per-mode start index into the agent tube and start-time bookkeeping."""

    def append(self, entry) -> None:
        if not isinstance(entry, LookbackEntry):
            entry = LookbackEntry(*entry)
        if self and entry.start_index <= self[-1].start_index:
            raise ValueError("lookback start indices must increase")
        super().append(entry)


def canonical_box(K: HyperRect, quantum: float = QUANTUM) -> HyperRect:
    return HyperRect(np.floor(K.lo / quantum) * quantum, np.ceil(K.hi / quantum) * quantum)


# -- Algorithm 1 --------------------------------------------------------------

def sym_compute(K_v: HyperRect, T: float, cache: TubeCache, reacher: ReachEngine, p_v,
                stats: Optional[VerifStats] = None, use_cache: bool = True) -> Reachtube:
    """Virtual tube over ``[0, T]`` from every grid cell meeting ``K_v``.

    Cached cell tubes shorter than ``T`` are extended from their last box and
    stored back; longer ones are truncated; missing cells are computed.  With
    ``use_cache`` off the same cells are computed but nothing is read or stored.
    """
    n_seg = step_count(T, reacher.step)
    calls0 = reacher.calls
    if use_cache:
        stored, remainder = cache.get_tube(K_v)
    else:
        stored, remainder = {}, quantize(K_v, cache.resolution)
    parts = {}
    computed = transformed = 0
    for key, tube in stored.items():
        if len(tube) < n_seg:
            ext = reacher(tube.box(len(tube) - 1), p_v, (n_seg - len(tube)) * reacher.step)
            computed += len(ext)
            transformed += len(tube)
            tube = cache.store_tube(key, tube.concat(ext))
        else:
            transformed += n_seg
        parts[key] = tube if len(tube) == n_seg else tube.truncate(T)
    fresh = reacher.batch([cache.cell_box(k) for k in remainder], p_v, T) if remainder else []
    for key, tube in zip(remainder, fresh):
        if use_cache:
            tube = cache.store_tube(key, tube)
        computed += n_seg
        parts[key] = tube
    result = union_all([parts[k] for k in sorted(parts)])
    if stats is not None:
        total = computed + transformed
        stats.computed_segments += computed
        stats.transformed_segments += transformed
        stats.computed += computed / total
        stats.transformed += transformed / total
        stats.tube_calls += reacher.calls - calls0
        stats.cache_hits += len(stored)
    return result


# -- Algorithm 2 --------------------------------------------------------------

def static_check(tube_v: Reachtube, K_v: HyperRect, T: float, U_v: HyperRect,
                 scache: Optional[SafetyCache]) -> Verdict:
    """Verdict of ``tube_v`` against ``U_v``, answered from ``scache`` when possible."""
    if scache is not None:
        hit = scache.get_intersect(K_v, T, U_v)
        if hit is not Verdict.UNKNOWN:
            return hit
    result = Verdict.UNSAFE if tube_v.intersects(U_v) else Verdict.SAFE
    if scache is not None:
        scache.store_intersect(K_v, T, U_v, result)
    return result


def sym_safety_verif(K: HyperRect, p, T: float, U: HyperRect, smap: SymmetryMap,
                     tcache: TubeCache, scache: SafetyCache, reacher: ReachEngine,
                     stats: Optional[VerifStats] = None) -> Verdict:
    """Safety of the real ``(K, p, T)`` tube against ``U`` via the virtual frame."""
    K_v = canonical_box(smap.transform_rect(K, "forward"))
    U_v = smap.transform_unsafe(U, "forward")
    hit = scache.get_intersect(K_v, T, U_v)
    if hit is not Verdict.UNKNOWN:
        return hit
    tube_v = sym_compute(K_v, T, tcache, reacher, smap.rho(p), stats)
    return static_check(tube_v, K_v, T, U_v, scache)


# -- Algorithm 3 pieces -------------------------------------------------------

@dataclass
class GuardHit:
    initset: HyperRect
    mintime: float
    maxtime: float
    first: int
    last: int


def guard_intersect(tube: Reachtube, guard) -> GuardHit:
    """Hull of the tube's overlap with the guard, plus first/last crossing times."""
    box = guard if isinstance(guard, HyperRect) else None
    if box is None:
        raise TypeError("guard must be a HyperRect; use GuardSpec.box(model)")
    hit = np.all((tube.lo <= box.hi) & (box.lo <= tube.hi), axis=1)
    idx = np.nonzero(hit)[0]
    if idx.size == 0:
        raise GuardUnreachable("guard unreachable within dwell bound")
    lo = np.maximum(tube.lo[idx], box.lo).min(axis=0)
    hi = np.minimum(tube.hi[idx], box.hi).max(axis=0)
    first, last = int(idx[0]), int(idx[-1])
    return GuardHit(HyperRect(lo, hi), tube.ftime + first * tube.step,
                    tube.ftime + (last + 1) * tube.step, first, last)


def segment_windows(tube: Reachtube, lookback: Lookback):
    """Absolute time window ``[lo, hi]`` of every segment of an agent tube.

    A mode that starts at an uncertain time ``s`` in ``[earliest, earliest+u]``
    (``u`` the summed uncertainty so far) places its segment ``k`` somewhere in
    ``[earliest + k*step, earliest + u + (k+1)*step]``.
    """
    L = len(tube)
    lo = np.empty(L)
    hi = np.empty(L)
    if not lookback:
        lookback = [LookbackEntry(0, 0.0, 0.0)]
    cum = 0.0
    for j, e in enumerate(lookback):
        cum += e.time_uncertainty
        end = lookback[j + 1].start_index if j + 1 < len(lookback) else L
        k = np.arange(end - e.start_index)
        lo[e.start_index:end] = e.earliest_start + k * tube.step
        hi[e.start_index:end] = e.earliest_start + cum + (k + 1) * tube.step
    return lo, hi


def check_dynamic_safety(tube_a: Reachtube, lb_a, tube_b: Reachtube, lb_b, O) -> Verdict:
    """Unsafe if some pair of segments can coexist in time and overlap on dims ``O``."""
    return Verdict.UNSAFE if find_collision(tube_a, lb_a, tube_b, lb_b, O) else Verdict.SAFE


def find_collision(tube_a, lb_a, tube_b, lb_b, O):
    """First colliding ``(i, j)`` segment pair, or None."""
    if abs(tube_a.step - tube_b.step) > 1e-12:
        raise AlignmentError(f"step mismatch: {tube_a.step} vs {tube_b.step}")
    if not len(tube_a) or not len(tube_b):
        return None
    O = list(O)
    alo, ahi = segment_windows(tube_a, lb_a)
    blo, bhi = segment_windows(tube_b, lb_b)
    timing = (alo[:, None] <= bhi[None, :]) & (blo[None, :] <= ahi[:, None])
    space = np.all((tube_a.lo[:, None, O] <= tube_b.hi[None, :, O])
                   & (tube_b.lo[None, :, O] <= tube_a.hi[:, None, O]), axis=2)
    hits = np.argwhere(timing & space)
    if len(hits) == 0:
        return None
    return int(hits[0][0]), int(hits[0][1])


# -- Algorithm 3 --------------------------------------------------------------

@dataclass
class ModeRecord:
    index: int
    p: np.ndarray
    T: float
    K_v: HyperRect
    U_v: list
    keys: list
    tube: Reachtube
    static: Verdict
    guard: Optional[GuardHit] = None


@dataclass
class AgentResult:
    id: object
    tube: Reachtube
    lookback: Lookback
    modes: list = field(default_factory=list)
    stats: VerifStats = field(default_factory=VerifStats)


@dataclass
class VerifResult:
    verdict: Verdict
    agents: list
    stats: VerifStats
    provenance: list = field(default_factory=list)

    @property
    def tubes(self) -> list:
        return [a.tube for a in self.agents]


class Verifier:
    """Holds the model, engine, caches and equivariance verdicts for one scenario."""

    def __init__(self, scenario: Scenario, tcache: Optional[TubeCache] = None,
                 scache: Optional[SafetyCache] = None, use_cache: Optional[bool] = None):
        self.scenario = scenario
        cfg = scenario.config
        self.model = scenario.model
        self.reacher = ReachEngine(self.model, cfg.step, cfg.sim_step, cfg.discrepancy)
        self.use_cache = cfg.cache_enabled if use_cache is None else use_cache
        self.fingerprint = {**self.reacher.fingerprint(), "grid": scenario.grid.tolist()}
        self.tcache = tcache if tcache is not None else TubeCache(scenario.grid, cfg.step, self.fingerprint)
        if not np.array_equal(self.tcache.resolution, scenario.grid):
            raise VerificationError("tube cache grid differs from the scenario grid")
        self.scache = scache if scache is not None else SafetyCache()
        self.map_kind = cfg.map_kind or default_map_kind(self.model)
        self.p_v = virtual_param(self.model)
        self._checked = None

    def ensure_equivariance(self):
        if self._checked is not None:
            return self._checked
        probe = np.zeros(self.model.m)
        k = len(self.model.position_dims)
        probe[:2] = [1.0, -2.0]
        probe[k:k + 2] = [3.0, 4.0]
        rep = check_equivariance(self.model, build_map(self.model, probe, self.map_kind),
                                 self.scenario.config.equivariance_samples, self.scenario.config.seed)
        if not rep.passed:
            msg = (f"{self.map_kind} map is not an exact symmetry of {self.model.name} "
                   f"(residual {rep.max_residual:.3g})")
            if not self.scenario.config.allow_inexact_symmetry:
                raise InexactSymmetry(msg + "; set allow_inexact_symmetry to override")
            log.warning(msg)
        self._checked = rep
        return rep

    def mode_map(self, p, agent_id=None, j=None) -> SymmetryMap:
        try:
            return build_map(self.model, p, self.map_kind)
        except DegenerateModeError as exc:
            raise VerificationError(str(exc), agent_id, j) from None

    def unsafe_for(self, mode) -> list:
        return list(self.scenario.unsafe_sets) + list(mode.unsafe_sets)

    def run_mode(self, agent_id, j, mode, initset: HyperRect, stats: VerifStats) -> ModeRecord:
        smap = self.mode_map(mode.p, agent_id, j)
        K_v = canonical_box(smap.transform_rect(initset, "forward"))
        try:
            tube_v = sym_compute(K_v, mode.T, self.tcache, self.reacher, self.p_v, stats, self.use_cache)
            U_v = [smap.transform_unsafe(U, "forward") for U in self.unsafe_for(mode)]
        except (DiscrepancyBlowup, DomainError, UnsupportedUnsafeSet) as exc:
            raise VerificationError(str(exc), agent_id, j) from None
        verdict = Verdict.SAFE
        scache = self.scache if self.use_cache else None
        for U in U_v:
            if static_check(tube_v, K_v, mode.T, U, scache) is Verdict.UNSAFE:
                verdict = Verdict.UNSAFE
        tube = smap.transform_tube(tube_v, "inverse")
        keys = quantize(K_v, self.tcache.resolution)
        return ModeRecord(j, mode.p, mode.T, K_v, U_v, keys, tube, verdict)

    def run(self) -> VerifResult:
        t_start = time.perf_counter()
        sc = self.scenario
        self.ensure_equivariance()
        full = sc.config.report_full_tubes
        total = VerifStats()
        agents = []
        provenance = []
        verdict = Verdict.SAFE
        for agent in sc.agents:
            t0 = time.perf_counter()
            res = AgentResult(agent.id, Reachtube.empty(self.model.n, sc.config.step), Lookback())
            modes = agent.modes()
            initset = agent.initial_set
            earliest, unc = 0.0, 0.0
            stop = False
            for j, mode in enumerate(modes):
                res.lookback.append(LookbackEntry(len(res.tube), unc, earliest))
                rec = self.run_mode(agent.id, j, mode, initset, res.stats)
                res.modes.append(rec)
                res.tube = res.tube.concat(rec.tube)
                if rec.static is Verdict.UNSAFE:
                    verdict = Verdict.UNSAFE
                    provenance.append({"kind": "static", "agent": agent.id, "mode": j})
                    if not full:
                        stop = True
                        break
                if j + 1 < len(modes):
                    try:
                        rec.guard = guard_intersect(rec.tube, mode.guard.box(self.model))
                    except GuardUnreachable as exc:
                        raise GuardUnreachable(str(exc), agent.id, j) from None
                    initset = rec.guard.initset
                    earliest += rec.guard.mintime
                    unc = rec.guard.maxtime - rec.guard.mintime
            res.stats.wall_time = time.perf_counter() - t0
            agents.append(res)
            total.add(res.stats)
            if stop:
                break
            for other in agents[:-1]:
                pair = find_collision(res.tube, res.lookback, other.tube, other.lookback, sc.O)
                if pair is not None:
                    verdict = Verdict.UNSAFE
                    provenance.append({"kind": "dynamic", "agents": [other.id, agent.id],
                                       "segments": [pair[1], pair[0]]})
                    if not full:
                        stop = True
                        break
            if stop:
                break
        total.wall_time = time.perf_counter() - t_start
        return VerifResult(verdict, agents, total, provenance)


def sym_multi_verif(scenario: Scenario, tcache: Optional[TubeCache] = None,
                    scache: Optional[SafetyCache] = None, use_cache: Optional[bool] = None) -> VerifResult:
    return Verifier(scenario, tcache, scache, use_cache).run()


# -- unbounded safety ---------------------------------------------------------

@dataclass
class FixedPoint:
    closed: bool
    uncovered_modes: list

    def to_dict(self) -> dict:
        return {"closed": self.closed,
                "uncovered_modes": [{"agent": a, "mode": m} for a, m in self.uncovered_modes]}


def detect_fixed_point(scenario: Scenario, tcache: TubeCache, scache: SafetyCache) -> FixedPoint:
    """Check that every mode is answered by the caches alone.

    The mode chain is replayed without computing anything: each virtual
    initial set must be covered by cached cells long enough for the dwell
    bound, and every unsafe-set query must be subsumed by a stored safe
    verdict.  Once a mode fails, the rest of that agent's chain is unknown.
    """
    v = Verifier(scenario, tcache, scache, use_cache=True)
    uncovered = []
    for agent in scenario.agents:
        modes = agent.modes()
        initset = agent.initial_set
        for j, mode in enumerate(modes):
            try:
                smap = build_map(v.model, mode.p, v.map_kind)
                K_v = canonical_box(smap.transform_rect(initset, "forward"))
                keys = quantize(K_v, tcache.resolution)
                n_seg = step_count(mode.T, tcache.step)
                tubes = [tcache.get(k) for k in keys]
                ok = all(t is not None and len(t) >= n_seg for t in tubes)
                if ok:
                    for U in v.unsafe_for(mode):
                        U_v = smap.transform_unsafe(U, "forward")
                        if scache.get_intersect(K_v, mode.T, U_v) is not Verdict.SAFE:
                            ok = False
                            break
                if ok and j + 1 < len(modes):
                    tube_v = union_all([t.truncate(mode.T) if len(t) > n_seg else t for t in tubes])
                    tube = smap.transform_tube(tube_v, "inverse")
                    initset = guard_intersect(tube, mode.guard.box(v.model)).initset
            except (VerificationError, DegenerateModeError, UnsupportedUnsafeSet, ValueError):
                ok = False
            if not ok:
                uncovered.extend((agent.id, m) for m in range(j, len(modes)))
                break
    return FixedPoint(not uncovered, uncovered)
