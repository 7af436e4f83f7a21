"""Axis-aligned boxes and uniformly stepped reachtubes.

A :class:`HyperRect` is the only set representation used in the package:
initial sets, tube segments, guards and unsafe sets are all boxes.  A
:class:`Reachtube` stores its segment boxes as two ``(len, n)`` arrays; the
time interval of segment ``i`` is implied by ``ftime + i * step``, which keeps
the tube contiguous and uniformly stepped by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

# absolute tolerance used when comparing time stamps of two tubes
TIME_TOL = 1e-9


class AlignmentError(ValueError):
    """Two tubes do not share step or start time."""


def _as_vector(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{name} must have at least one entry")
    if np.isnan(arr).any():
        raise ValueError(f"{name} contains NaN")
    return arr


class HyperRect:
    """Closed box ``[lo, hi]`` in R^n.

    Infinite bounds are accepted (unsafe sets use them), but most geometric
    queries on such boxes only make sense for intersection and containment.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        lo = _as_vector(lo, "lo")
        hi = _as_vector(hi, "hi")
        if lo.shape != hi.shape:
            raise ValueError(f"lo has {lo.size} entries but hi has {hi.size}")
        bad = np.nonzero(lo > hi)[0]
        if bad.size:
            k = int(bad[0])
            raise ValueError(f"lo[{k}] = {lo[k]} exceeds hi[{k}] = {hi[k]}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        self.lo = lo
        self.hi = hi

    @classmethod
    def from_center(cls, center, radius) -> "HyperRect":
        c = np.asarray(center, dtype=float)
        r = np.broadcast_to(np.asarray(radius, dtype=float), c.shape)
        return cls(c - r, c + r)

    @classmethod
    def point(cls, x) -> "HyperRect":
        return cls(x, x)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def radius(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi)))

    def _check(self, other: "HyperRect") -> None:
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def intersect(self, other: "HyperRect") -> Optional["HyperRect"]:
        self._check(other)
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(lo > hi):
            return None
        return HyperRect(lo, hi)

    def intersects(self, other: "HyperRect") -> bool:
        self._check(other)
        return bool(np.all(np.maximum(self.lo, other.lo) <= np.minimum(self.hi, other.hi)))

    def contains(self, other: "HyperRect") -> bool:
        """True when ``other`` lies inside this box (boundaries included)."""
        self._check(other)
        return bool(np.all(self.lo <= other.lo) and np.all(other.hi <= self.hi))

    def contains_point(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.lo - tol <= x) and np.all(x <= self.hi + tol))

    def volume(self) -> float:
        w = self.hi - self.lo
        if np.any(np.isinf(w)):
            # a zero-width edge still wins over an infinite one
            return 0.0 if np.any(w == 0) else math.inf
        return float(np.prod(w))

    def hull(self, other: "HyperRect") -> "HyperRect":
        self._check(other)
        return HyperRect(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def minkowski_pad(self, beta) -> "HyperRect":
        b = np.broadcast_to(np.asarray(beta, dtype=float), self.lo.shape)
        if np.any(b < 0):
            raise ValueError("padding must be non-negative")
        return HyperRect(self.lo - b, self.hi + b)

    def project(self, dims: Sequence[int]) -> "HyperRect":
        idx = list(dims)
        return HyperRect(self.lo[idx], self.hi[idx])

    def corners(self) -> np.ndarray:
        """All 2^n vertices, shape ``(2**n, n)``."""
        n = self.dim
        bits = (np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1
        return np.where(bits == 1, self.hi[None, :], self.lo[None, :])

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(count, self.dim))

    def to_list(self) -> list:
        return [self.lo.tolist(), self.hi.tolist()]

    def allclose(self, other: "HyperRect", atol: float = 1e-9) -> bool:
        return self.dim == other.dim and bool(
            np.allclose(self.lo, other.lo, rtol=0, atol=atol)
            and np.allclose(self.hi, other.hi, rtol=0, atol=atol)
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, HyperRect):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self) -> int:
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    def __repr__(self) -> str:
        return f"HyperRect({self.lo.tolist()}, {self.hi.tolist()})"


def hull_of(rects: Sequence[HyperRect]) -> HyperRect:
    if not rects:
        raise ValueError("hull of an empty collection")
    lo = np.min([r.lo for r in rects], axis=0)
    hi = np.max([r.hi for r in rects], axis=0)
    return HyperRect(lo, hi)


@dataclass(frozen=True)
class TubeSegment:
    box: HyperRect
    t_lo: float
    t_hi: float


class Reachtube:
    """Sequence of boxes over ``[ftime + i*step, ftime + (i+1)*step]``.

    ``lo`` and ``hi`` have shape ``(len, n)``.  ``init_set`` is the initial
    set the tube was computed from and ``mode`` the parameter vector.
    """

    __slots__ = ("lo", "hi", "step", "ftime", "init_set", "mode")

    def __init__(self, lo, hi, step: float, ftime: float = 0.0,
                 init_set: Optional[HyperRect] = None, mode=None):
        lo = np.array(lo, dtype=float)
        hi = np.array(hi, dtype=float)
        if lo.ndim != 2 or lo.shape != hi.shape:
            raise ValueError(f"segment arrays must be (len, n); got {lo.shape} and {hi.shape}")
        if step <= 0:
            raise ValueError("step must be positive")
        if np.any(lo > hi):
            raise ValueError("segment box with lo > hi")
        if init_set is not None and init_set.dim != lo.shape[1]:
            raise ValueError("init_set dimension does not match segments")
        lo.setflags(write=False)
        hi.setflags(write=False)
        self.lo = lo
        self.hi = hi
        self.step = float(step)
        self.ftime = float(ftime)
        self.init_set = init_set
        self.mode = None if mode is None else np.asarray(mode, dtype=float)

    @classmethod
    def empty(cls, n: int, step: float, ftime: float = 0.0) -> "Reachtube":
        return cls(np.zeros((0, n)), np.zeros((0, n)), step, ftime)

    @classmethod
    def from_boxes(cls, boxes: Sequence[HyperRect], step: float, ftime: float = 0.0,
                   init_set: Optional[HyperRect] = None, mode=None) -> "Reachtube":
        lo = np.array([b.lo for b in boxes], dtype=float)
        hi = np.array([b.hi for b in boxes], dtype=float)
        return cls(lo, hi, step, ftime, init_set, mode)

    def __len__(self) -> int:
        return self.lo.shape[0]

    @property
    def dim(self) -> int:
        return self.lo.shape[1]

    @property
    def etime(self) -> float:
        return self.ftime + len(self) * self.step

    @property
    def t_lo(self) -> np.ndarray:
        return self.ftime + self.step * np.arange(len(self))

    @property
    def t_hi(self) -> np.ndarray:
        return self.ftime + self.step * np.arange(1, len(self) + 1)

    def box(self, i: int) -> HyperRect:
        return HyperRect(self.lo[i], self.hi[i])

    @property
    def segments(self) -> Iterator[TubeSegment]:
        for i in range(len(self)):
            yield TubeSegment(self.box(i), self.ftime + i * self.step,
                              self.ftime + (i + 1) * self.step)

    def bounding_box(self) -> HyperRect:
        if not len(self):
            raise ValueError("empty tube has no bounding box")
        return HyperRect(self.lo.min(axis=0), self.hi.max(axis=0))

    def replace(self, **kw) -> "Reachtube":
        fields = dict(lo=self.lo, hi=self.hi, step=self.step, ftime=self.ftime,
                      init_set=self.init_set, mode=self.mode)
        fields.update(kw)
        return Reachtube(**fields)

    # -- the four tube operators ------------------------------------------

    def union(self, other: "Reachtube") -> "Reachtube":
        """Segment-wise hull; the tail of the longer tube is kept as is."""
        if not len(other):
            return self
        if not len(self):
            return other
        _check_aligned(self, other, same_ftime=True)
        a, b = (self, other) if len(self) >= len(other) else (other, self)
        k = len(b)
        lo = a.lo.copy()
        hi = a.hi.copy()
        lo[:k] = np.minimum(lo[:k], b.lo)
        hi[:k] = np.maximum(hi[:k], b.hi)
        init = _hull_opt(self.init_set, other.init_set)
        mode = self.mode if self.mode is not None else other.mode
        return Reachtube(lo, hi, self.step, self.ftime, init, mode)

    def time_shift(self, ts: float) -> "Reachtube":
        if ts < 0:
            raise ValueError("time shift must be non-negative")
        return self.replace(ftime=self.ftime + ts)

    def concat(self, other: "Reachtube") -> "Reachtube":
        """Append ``other`` (which starts at time 0) after this tube."""
        if not len(other):
            return self
        if abs(other.ftime) > TIME_TOL:
            raise AlignmentError("the appended tube must start at time 0")
        if not len(self):
            return other.time_shift(self.ftime)
        _check_aligned(self, other, same_ftime=False)
        lo = np.vstack([self.lo, other.lo])
        hi = np.vstack([self.hi, other.hi])
        return Reachtube(lo, hi, self.step, self.ftime, self.init_set, self.mode)

    def truncate(self, tc: float) -> "Reachtube":
        """Shortest prefix whose last interval ends at or after ``tc``."""
        if not (self.ftime + TIME_TOL < tc <= self.etime + TIME_TOL):
            raise ValueError(f"truncation time {tc} outside ({self.ftime}, {self.etime}]")
        k = math.ceil((tc - self.ftime) / self.step - TIME_TOL / self.step)
        k = min(max(k, 1), len(self))
        return self.replace(lo=self.lo[:k], hi=self.hi[:k])

    # -- queries ----------------------------------------------------------

    def intersects(self, rect: HyperRect) -> bool:
        if not len(self):
            return False
        hit = np.all((self.lo <= rect.hi) & (rect.lo <= self.hi), axis=1)
        return bool(hit.any())

    def covering_segments(self, t: float) -> list[int]:
        """Indices of the (one or two) segments whose closed interval holds ``t``."""
        x = (t - self.ftime) / self.step
        out = []
        for i in (math.floor(x + TIME_TOL) - 1, math.floor(x + TIME_TOL)):
            if 0 <= i < len(self):
                if self.ftime + i * self.step - TIME_TOL <= t <= self.ftime + (i + 1) * self.step + TIME_TOL:
                    out.append(i)
        return out

    def allclose(self, other: "Reachtube", atol: float = 1e-9) -> bool:
        return (
            len(self) == len(other)
            and self.dim == other.dim
            and abs(self.step - other.step) <= TIME_TOL
            and abs(self.ftime - other.ftime) <= TIME_TOL
            and bool(np.allclose(self.lo, other.lo, rtol=0, atol=atol))
            and bool(np.allclose(self.hi, other.hi, rtol=0, atol=atol))
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Reachtube):
            return NotImplemented
        return (
            self.step == other.step
            and self.ftime == other.ftime
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return (f"Reachtube(len={len(self)}, n={self.dim}, step={self.step}, "
                f"t=[{self.ftime}, {self.etime}])")


def _hull_opt(a: Optional[HyperRect], b: Optional[HyperRect]) -> Optional[HyperRect]:
    if a is None:
        return b
    if b is None:
        return a
    return a.hull(b)


def _check_aligned(a: Reachtube, b: Reachtube, same_ftime: bool) -> None:
    if a.dim != b.dim:
        raise AlignmentError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if abs(a.step - b.step) > TIME_TOL:
        raise AlignmentError(f"step mismatch: {a.step} vs {b.step}")
    if same_ftime and abs(a.ftime - b.ftime) > TIME_TOL:
        raise AlignmentError(f"start time mismatch: {a.ftime} vs {b.ftime}")


def union_all(tubes: Sequence[Reachtube]) -> Reachtube:
    """Hull of many time-aligned tubes, done in one pass."""
    if not tubes:
        raise ValueError("no tubes to unite")
    if len(tubes) == 1:
        return tubes[0]
    for t in tubes[1:]:
        _check_aligned(tubes[0], t, same_ftime=True)
    length = max(len(t) for t in tubes)
    n = tubes[0].dim
    lo = np.full((length, n), np.inf)
    hi = np.full((length, n), -np.inf)
    for t in tubes:
        k = len(t)
        np.minimum(lo[:k], t.lo, out=lo[:k])
        np.maximum(hi[:k], t.hi, out=hi[:k])
    inits = [t.init_set for t in tubes if t.init_set is not None]
    init = hull_of(inits) if inits else None
    return Reachtube(lo, hi, tubes[0].step, tubes[0].ftime, init, tubes[0].mode)


def export_rows(tube: Reachtube, agent_id, mode_index: int, seg_offset: int = 0) -> list[list]:
    """Flat export records: agent, mode, segment, t_lo, t_hi, lo..., hi..."""
    rows = []
    for i in range(len(tube)):
        t0 = tube.ftime + i * tube.step
        rows.append([agent_id, mode_index, seg_offset + i, t0, t0 + tube.step,
                     *tube.lo[i].tolist(), *tube.hi[i].tolist()])
    return rows
