"""Memo stores: a grid-keyed tube cache and a subsumption-keyed verdict cache.

Both live in virtual coordinates.  The tube cache quantizes initial sets on a
grid anchored at the origin; cell ``k`` covers ``[k*delta, (k+1)*delta]`` on
each axis.  The safety cache answers a query from any stored tuple that
subsumes it in the right direction.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
import threading
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .geometry import HyperRect, Reachtube

CACHE_FORMAT = "symreach-cache"
CACHE_VERSION = 1


class Verdict(str, enum.Enum):
    SAFE = "safe"
    UNSAFE = "unsafe"
    UNKNOWN = "unknown"

    def __str__(self) -> str:
        return self.value


class CacheMismatch(ValueError):
    """Snapshot built for a different model, step or grid."""


def _axis_cells(lo: float, hi: float, d: float) -> range:
    """Cells along one axis whose closed interval overlaps ``[lo, hi]`` with positive length."""
    k0 = math.floor(lo / d)
    # repair rounding in the division
    while k0 * d > lo:
        k0 -= 1
    while (k0 + 1) * d <= lo:
        k0 += 1
    if hi == lo:
        return range(k0, k0 + 1)
    k1 = math.ceil(hi / d) - 1
    while (k1 + 1) * d < hi:
        k1 += 1
    while k1 > k0 and k1 * d >= hi:
        k1 -= 1
    return range(k0, k1 + 1)


def quantize(K: HyperRect, delta) -> list:
    """Sorted integer keys of the grid cells covering ``K``."""
    if not K.bounded:
        raise ValueError("cannot quantize an unbounded box")
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (K.dim,))
    if np.any(delta <= 0):
        raise ValueError("grid resolution must be positive")
    axes = [_axis_cells(float(a), float(b), float(d)) for a, b, d in zip(K.lo, K.hi, delta)]
    return [tuple(k) for k in itertools.product(*axes)]


def cell_box(key, delta) -> HyperRect:
    k = np.asarray(key, dtype=float)
    delta = np.broadcast_to(np.asarray(delta, dtype=float), k.shape)
    return HyperRect(k * delta, (k + 1) * delta)


def _float(v) -> float:
    return float(v) if not isinstance(v, str) else float(v.replace("infinity", "inf"))


def _json_num(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def _rect_json(r: HyperRect) -> list:
    return [[_json_num(v) for v in r.lo], [_json_num(v) for v in r.hi]]


def _rect_from_json(obj) -> HyperRect:
    return HyperRect([_float(v) for v in obj[0]], [_float(v) for v in obj[1]])


class TubeCache:
    """Virtual-system tubes keyed by grid cell."""

    def __init__(self, resolution, step: float, fingerprint: Optional[dict] = None):
        res = np.array(resolution, dtype=float).reshape(-1)
        if res.size == 0 or np.any(res <= 0):
            raise ValueError("grid resolution must be positive")
        res.setflags(write=False)
        self.resolution = res
        self.step = float(step)
        self.fingerprint = fingerprint
        self.hits = 0
        self.misses = 0
        self._entries: dict = {}
        self._lock = threading.RLock()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key) -> bool:
        return tuple(key) in self._entries

    def keys(self) -> list:
        with self._lock:
            return sorted(self._entries)

    def cell_box(self, key) -> HyperRect:
        return cell_box(key, self.resolution)

    def quantize(self, K: HyperRect) -> list:
        if K.dim != self.resolution.size:
            raise ValueError(f"box has {K.dim} dims, grid has {self.resolution.size}")
        return quantize(K, self.resolution)

    def get(self, key) -> Optional[Reachtube]:
        with self._lock:
            return self._entries.get(tuple(key))

    def get_tube(self, K_v: HyperRect):
        """``(stored, remainder)``: cached tubes by key and the keys still missing."""
        keys = self.quantize(K_v)
        stored = {}
        remainder = []
        with self._lock:
            for k in keys:
                tube = self._entries.get(k)
                if tube is None:
                    remainder.append(k)
                else:
                    stored[k] = tube
            self.hits += len(stored)
            self.misses += len(remainder)
        return stored, remainder

    def store_tube(self, key, tube: Reachtube) -> Reachtube:
        """Insert ``tube`` unless a longer one is already present; returns the kept tube."""
        key = tuple(int(k) for k in key)
        box = self.cell_box(key)
        if tube.init_set is None or not tube.init_set.allclose(box, atol=1e-12):
            raise ValueError(f"tube initial set {tube.init_set} is not the cell box {box}")
        if abs(tube.step - self.step) > 1e-12:
            raise ValueError(f"tube step {tube.step} differs from cache step {self.step}")
        with self._lock:
            old = self._entries.get(key)
            if old is None or len(tube) > len(old):
                self._entries[key] = tube
                return tube
            return old

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()
            self.hits = self.misses = 0

    # -- snapshots ----------------------------------------------------------

    def to_dict(self) -> dict:
        with self._lock:
            items = sorted(self._entries.items())
        return {
            "resolution": self.resolution.tolist(),
            "step": self.step,
            "fingerprint": self.fingerprint,
            "entries": [
                {"key": list(k), "lo": t.lo.tolist(), "hi": t.hi.tolist(),
                 "mode": None if t.mode is None else t.mode.tolist()}
                for k, t in items
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict, expect: Optional[dict] = None) -> "TubeCache":
        if expect is not None and obj.get("fingerprint") != expect:
            raise CacheMismatch("tube cache snapshot was built with a different model or step")
        cache = cls(obj["resolution"], obj["step"], obj.get("fingerprint"))
        for e in obj["entries"]:
            key = tuple(e["key"])
            tube = Reachtube(e["lo"], e["hi"], cache.step, 0.0, cache.cell_box(key), e.get("mode"))
            cache.store_tube(key, tube)
        return cache

    def merge(self, other: "TubeCache") -> None:
        if not np.array_equal(self.resolution, other.resolution) or self.step != other.step:
            raise CacheMismatch("grid resolution or step differ")
        for k in other.keys():
            self.store_tube(k, other.get(k))


@dataclass(frozen=True)
class SafetyRecord:
    K: HyperRect
    T: float
    U: HyperRect
    result: Verdict


class SafetyCache:
    """Verdicts of intersecting virtual tubes with virtual unsafe sets."""

    def __init__(self):
        self._entries: list = []
        self._lock = threading.RLock()
        self.hits = 0

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> list:
        with self._lock:
            return list(self._entries)

    def get_intersect(self, K_v: HyperRect, T: float, U_v: HyperRect) -> Verdict:
        safe = unsafe = False
        with self._lock:
            for rec in self._entries:
                if rec.K.dim != K_v.dim:
                    continue
                if rec.result is Verdict.UNSAFE:
                    if not unsafe and K_v.contains(rec.K) and T >= rec.T and U_v.contains(rec.U):
                        unsafe = True
                        break
                elif not safe and rec.K.contains(K_v) and T <= rec.T and rec.U.contains(U_v):
                    safe = True
            if unsafe or safe:
                self.hits += 1
        if unsafe:
            return Verdict.UNSAFE
        return Verdict.SAFE if safe else Verdict.UNKNOWN

    def store_intersect(self, K_v: HyperRect, T: float, U_v: HyperRect, result) -> None:
        result = Verdict(result)
        if result is Verdict.UNKNOWN:
            raise ValueError("only safe or unsafe verdicts can be stored")
        rec = SafetyRecord(K_v, float(T), U_v, result)
        with self._lock:
            if rec not in self._entries:
                self._entries.append(rec)

    def to_dict(self) -> dict:
        return {"entries": [
            {"K": _rect_json(r.K), "T": r.T, "U": _rect_json(r.U), "result": r.result.value}
            for r in self.entries
        ]}

    @classmethod
    def from_dict(cls, obj: dict) -> "SafetyCache":
        cache = cls()
        for e in obj["entries"]:
            cache.store_intersect(_rect_from_json(e["K"]), e["T"], _rect_from_json(e["U"]), e["result"])
        return cache


def save_snapshot(path, tubes: TubeCache, safety: Optional[SafetyCache] = None) -> None:
    doc = {"format": CACHE_FORMAT, "version": CACHE_VERSION, "tubecache": tubes.to_dict(),
           "safetycache": (safety or SafetyCache()).to_dict()}
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_snapshot(path, expect_fingerprint: Optional[dict] = None):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != CACHE_FORMAT or doc.get("version") != CACHE_VERSION:
        raise CacheMismatch(f"{path} is not a version {CACHE_VERSION} cache snapshot")
    tubes = TubeCache.from_dict(doc["tubecache"], expect_fingerprint)
    safety = SafetyCache.from_dict(doc.get("safetycache", {"entries": []}))
    return tubes, safety


def snapshot_rows(tubes: TubeCache) -> Iterable[list]:
    """Flat rows ``key..., seg_index, t_lo, t_hi, lo..., hi...`` for every cached segment."""
    for k in tubes.keys():
        t = tubes.get(k)
        for i in range(len(t)):
            yield [*k, i, i * t.step, (i + 1) * t.step, *t.lo[i].tolist(), *t.hi[i].tolist()]
