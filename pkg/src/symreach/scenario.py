"""Scenario description, JSON loading and validation.

A scenario lists agents that follow waypoints.  Waypoint ``j`` to ``j+1`` is
one mode with parameter ``p = (wp_j, wp_{j+1})``; the mode ends in a guard box
around ``wp_{j+1}``.  Infinite bounds are written as the strings ``"inf"`` and
``"-inf"`` in JSON.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Union

import jsonschema
import numpy as np

from .dynamics import ModelSpec, make_model
from .geometry import HyperRect

SCHEMA_VERSION = 1
DEFAULT_GUARD_RADIUS = 0.5
DEFAULT_GRIDS = {
    "aircraft4d": [0.1, 0.05, 0.5, 0.5],
    "linear3d": [0.5, 0.5, 0.5],
    "rotlinear3d": [0.5, 0.5, 0.5],
}


class ScenarioError(ValueError):
    """Invalid scenario; ``path`` is a JSON pointer to the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path or '/'}: {message}")
        self.path = path or "/"
        self.detail = message


def _schema() -> dict:
    text = resources.files("symreach").joinpath("data/scenario.schema.json").read_text()
    return json.loads(text)


def _pointer(parts) -> str:
    return "".join(f"/{p}" for p in parts)


def _num(v) -> float:
    if isinstance(v, str):
        return math.inf if v == "inf" else -math.inf
    return float(v)


def _enc(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def rect_from_json(obj, path: str = "") -> HyperRect:
    lo = [_num(v) for v in obj[0]]
    hi = [_num(v) for v in obj[1]]
    if len(lo) != len(hi):
        raise ScenarioError(f"lo has {len(lo)} entries but hi has {len(hi)}", path)
    for k, (a, b) in enumerate(zip(lo, hi)):
        if a > b:
            raise ScenarioError(f"lo[{k}] = {a} exceeds hi[{k}] = {b}", f"{path}/0/{k}")
    return HyperRect(lo, hi)


def rect_to_json(r: HyperRect) -> list:
    return [[_enc(v) for v in r.lo], [_enc(v) for v in r.hi]]


@dataclass
class GuardSpec:
    """Box around a waypoint on the position dims, optionally bounding other dims."""

    center: np.ndarray
    radius: np.ndarray
    extra_bounds: dict = field(default_factory=dict)

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.radius = np.broadcast_to(np.asarray(self.radius, dtype=float), self.center.shape).copy()
        if np.any(self.radius <= 0):
            raise ValueError("guard radius must be positive")

    def box(self, model: ModelSpec) -> HyperRect:
        lo = np.full(model.n, -np.inf)
        hi = np.full(model.n, np.inf)
        pos = list(model.position_dims)
        lo[pos] = self.center - self.radius
        hi[pos] = self.center + self.radius
        for d, (a, b) in self.extra_bounds.items():
            lo[int(d)] = max(lo[int(d)], a)
            hi[int(d)] = min(hi[int(d)], b)
        return HyperRect(lo, hi)


@dataclass
class ModeSpec:
    p: np.ndarray
    T: float
    guard: GuardSpec
    unsafe_sets: list = field(default_factory=list)


@dataclass
class AgentSpec:
    id: Union[str, int]
    initial_set: HyperRect
    waypoints: list
    dwell_bounds: list
    guard_radius: list
    guard_bounds: list = field(default_factory=list)
    mode_unsafe_sets: list = field(default_factory=list)

    @property
    def n_modes(self) -> int:
        return len(self.waypoints) - 1

    def modes(self) -> list:
        out = []
        for j in range(self.n_modes):
            src = np.asarray(self.waypoints[j], dtype=float)
            dst = np.asarray(self.waypoints[j + 1], dtype=float)
            extra = self.guard_bounds[j] if j < len(self.guard_bounds) and self.guard_bounds[j] else {}
            guard = GuardSpec(dst, self.guard_radius[j], dict(extra))
            unsafe = self.mode_unsafe_sets[j] if j < len(self.mode_unsafe_sets) else []
            out.append(ModeSpec(np.concatenate([src, dst]), float(self.dwell_bounds[j]), guard, list(unsafe)))
        return out


@dataclass
class VerifConfig:
    step: float = 0.1
    sim_step: float = 0.01
    grid: Optional[list] = None
    map_kind: Optional[str] = None
    cache_enabled: bool = True
    allow_inexact_symmetry: bool = False
    report_full_tubes: bool = False
    cache_in: Optional[str] = None
    cache_out: Optional[str] = None
    seed: int = 0
    discrepancy: str = "local"
    equivariance_samples: int = 1000

    def to_dict(self) -> dict:
        return {k: copy.deepcopy(getattr(self, k)) for k in self.__dataclass_fields__}


@dataclass
class Scenario:
    model_name: str
    agents: list
    constants: dict = field(default_factory=dict)
    unsafe_sets: list = field(default_factory=list)
    dynamic_dims: Optional[list] = None
    config: VerifConfig = field(default_factory=VerifConfig)
    name: str = ""
    description: str = ""

    def __post_init__(self):
        self._model = None

    @property
    def model(self) -> ModelSpec:
        if self._model is None:
            self._model = make_model(self.model_name, self.constants or None)
        return self._model

    @property
    def O(self) -> list:
        if self.dynamic_dims is None:
            return list(self.model.position_dims)
        return list(self.dynamic_dims)

    @property
    def grid(self) -> np.ndarray:
        g = self.config.grid if self.config.grid is not None else DEFAULT_GRIDS[self.model_name]
        return np.broadcast_to(np.asarray(g, dtype=float), (self.model.n,)).copy()

    def to_dict(self) -> dict:
        agents = []
        for a in self.agents:
            d = {
                "id": a.id,
                "initial_set": rect_to_json(a.initial_set),
                "waypoints": [list(map(float, w)) for w in a.waypoints],
                "dwell_bounds": [float(t) for t in a.dwell_bounds],
                "guard_radius": [float(r) for r in a.guard_radius],
            }
            if a.guard_bounds:
                d["guard_bounds"] = [
                    None if not gb else {str(k): [_enc(v[0]), _enc(v[1])] for k, v in sorted(gb.items())}
                    for gb in a.guard_bounds
                ]
            if a.mode_unsafe_sets:
                d["mode_unsafe_sets"] = [[rect_to_json(u) for u in us] for us in a.mode_unsafe_sets]
            agents.append(d)
        doc = {
            "schema_version": SCHEMA_VERSION,
            "model": {"name": self.model_name, "constants": copy.deepcopy(self.constants)},
            "agents": agents,
            "unsafe_sets": [rect_to_json(u) for u in self.unsafe_sets],
            "config": self.config.to_dict(),
        }
        if self.dynamic_dims is not None:
            doc["dynamic_dims"] = list(self.dynamic_dims)
        if self.name:
            doc["name"] = self.name
        if self.description:
            doc["description"] = self.description
        return doc

    def __eq__(self, other) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _per_mode(value, n_modes: int, path: str, what: str) -> list:
    if isinstance(value, (int, float)):
        return [float(value)] * n_modes
    if len(value) == 1:
        return [float(value[0])] * n_modes
    if len(value) != n_modes:
        raise ScenarioError(f"{what} lists {len(value)} values for {n_modes} modes", path)
    return [float(v) for v in value]


def parse_scenario(doc: dict) -> Scenario:
    """Validate a JSON document and build a :class:`Scenario`."""
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ScenarioError(err.message, _pointer(err.absolute_path))

    model_doc = doc["model"]
    constants = model_doc.get("constants", {}) or {}
    try:
        model = make_model(model_doc["name"], constants or None)
    except ValueError as exc:
        raise ScenarioError(str(exc), "/model/constants") from None
    n = model.n
    wdim = len(model.position_dims)

    agents = []
    seen = set()
    for i, a in enumerate(doc["agents"]):
        base = f"/agents/{i}"
        if a["id"] in seen:
            raise ScenarioError(f"duplicate agent id {a['id']!r}", f"{base}/id")
        seen.add(a["id"])
        init = rect_from_json(a["initial_set"], f"{base}/initial_set")
        if init.dim != n:
            raise ScenarioError(f"initial set has {init.dim} dims, model has {n}", f"{base}/initial_set")
        for j, w in enumerate(a["waypoints"]):
            if len(w) != wdim:
                raise ScenarioError(f"waypoint has {len(w)} coordinates, expected {wdim}",
                                    f"{base}/waypoints/{j}")
        n_modes = len(a["waypoints"]) - 1
        dwell = _per_mode(a["dwell_bounds"], n_modes, f"{base}/dwell_bounds", "dwell_bounds")
        radius = _per_mode(a.get("guard_radius", DEFAULT_GUARD_RADIUS), n_modes,
                           f"{base}/guard_radius", "guard_radius")
        gbounds = []
        for j, gb in enumerate(a.get("guard_bounds", [])):
            if gb is None:
                gbounds.append({})
                continue
            parsed = {}
            for k, (lo, hi) in gb.items():
                if int(k) >= n:
                    raise ScenarioError(f"dimension {k} out of range", f"{base}/guard_bounds/{j}/{k}")
                if _num(lo) > _num(hi):
                    raise ScenarioError("lower bound exceeds upper bound", f"{base}/guard_bounds/{j}/{k}")
                parsed[int(k)] = (_num(lo), _num(hi))
            gbounds.append(parsed)
        if len(gbounds) > n_modes:
            raise ScenarioError("more guard bounds than modes", f"{base}/guard_bounds")
        mus = []
        for j, us in enumerate(a.get("mode_unsafe_sets", [])):
            rects = [rect_from_json(u, f"{base}/mode_unsafe_sets/{j}/{k}") for k, u in enumerate(us)]
            for k, r in enumerate(rects):
                if r.dim != n:
                    raise ScenarioError(f"unsafe set has {r.dim} dims, model has {n}",
                                        f"{base}/mode_unsafe_sets/{j}/{k}")
            mus.append(rects)
        if len(mus) > n_modes:
            raise ScenarioError("more mode unsafe-set lists than modes", f"{base}/mode_unsafe_sets")
        agents.append(AgentSpec(a["id"], init, [list(map(float, w)) for w in a["waypoints"]],
                                dwell, radius, gbounds, mus))

    unsafe = []
    for k, u in enumerate(doc.get("unsafe_sets", [])):
        r = rect_from_json(u, f"/unsafe_sets/{k}")
        if r.dim != n:
            raise ScenarioError(f"unsafe set has {r.dim} dims, model has {n}", f"/unsafe_sets/{k}")
        unsafe.append(r)

    dyn = doc.get("dynamic_dims")
    if dyn is not None:
        for k, d in enumerate(dyn):
            if d >= n:
                raise ScenarioError(f"dimension {d} out of range", f"/dynamic_dims/{k}")

    cfg = VerifConfig(**doc.get("config", {}))
    if cfg.grid is not None:
        g = cfg.grid if isinstance(cfg.grid, list) else [cfg.grid]
        if len(g) not in (1, n):
            raise ScenarioError(f"grid needs 1 or {n} entries", "/config/grid")
    ratio = cfg.step / cfg.sim_step
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise ScenarioError("sim_step must divide step", "/config/sim_step")
    for i, a in enumerate(agents):
        for j, T in enumerate(a.dwell_bounds):
            r = T / cfg.step
            if abs(r - round(r)) > 1e-9 * max(1.0, r):
                raise ScenarioError(f"dwell bound {T} is not a multiple of step {cfg.step}",
                                    f"/agents/{i}/dwell_bounds")

    sc = Scenario(model_doc["name"], agents, dict(constants), unsafe, dyn, cfg,
                  doc.get("name", ""), doc.get("description", ""))
    sc._model = model
    return sc


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"not valid JSON: {exc}") from None
    return parse_scenario(doc)


def dump_scenario(scenario: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def fixture_path(name: str):
    """Path of a bundled scenario file such as ``"linear_s3"``."""
    fname = name if name.endswith(".json") else f"{name}.json"
    return resources.files("symreach").joinpath("data/scenarios").joinpath(fname)


def bundled_fixtures() -> list:
    root = resources.files("symreach").joinpath("data/scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))
