"""Builders for the bundled scenario files.

Every builder returns a plain JSON-ready dict.  ``write_bundled`` regenerates
the files under ``symreach/data/scenarios``; the results are checked in, so
running it is only needed after changing a builder.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

INF = "inf"
NEG_INF = "-inf"

# building footprint used by the aircraft fixtures: any speed, any heading
BUILDING = [[0.0, NEG_INF, 11.9, 5.1], [INF, INF, 12.9, 6.1]]


def s_path(blocks: int, origin=(0.0, 0.0), size: float = 10.0) -> list:
    """Planar waypoints of ``blocks`` stacked S shapes: right, up, left, up."""
    x, y = float(origin[0]), float(origin[1])
    wps = [[x, y]]
    for _ in range(blocks):
        for dx, dy in ((size, 0.0), (0.0, size), (-size, 0.0), (0.0, size)):
            x, y = x + dx, y + dy
            wps.append([x, y])
    return wps


def _rotate(points, angle: float, about=(0.0, 0.0)) -> list:
    c, s = math.cos(angle), math.sin(angle)
    out = []
    for x, y in points:
        dx, dy = x - about[0], y - about[1]
        out.append([round(about[0] + c * dx - s * dy, 12), round(about[1] + s * dx + c * dy, 12)])
    return out


def _box3(center, half=0.5) -> list:
    return [[c - half for c in center], [c + half for c in center]]


def _doc(name, description, model, agents, config=None, unsafe_sets=None, constants=None,
         dynamic_dims=None) -> dict:
    doc = {"schema_version": 1, "name": name, "description": description,
           "model": {"name": model}, "agents": agents, "config": dict(config or {})}
    if constants:
        doc["model"]["constants"] = constants
    if unsafe_sets:
        doc["unsafe_sets"] = unsafe_sets
    if dynamic_dims is not None:
        doc["dynamic_dims"] = dynamic_dims
    return doc


# -- linear systems ---------------------------------------------------------

LINEAR_OFFSETS = [(0.0, 0.0), (0.0, 60.0), (60.0, 0.0)]


def linear_agents(count: int, blocks: int = 2, dwell: float = 3.0) -> list:
    """Translated copies of one S path, far enough apart to never meet."""
    agents = []
    for i, (ox, oy) in enumerate(LINEAR_OFFSETS[:count]):
        wps = [[x, y, 0.0] for x, y in s_path(blocks, (ox, oy))]
        agents.append({"id": f"a{i + 1}", "initial_set": _box3(wps[0]),
                       "waypoints": wps, "dwell_bounds": dwell})
    return agents


def linear_s_path(count: int = 3) -> dict:
    return _doc(f"linear_s{count}", f"{count} linear agents on translated S paths",
                "linear3d", linear_agents(count))


def minimal_linear() -> dict:
    wps = [[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [10.0, 10.0, 0.0]]
    return _doc("minimal_linear", "one linear agent, two modes", "linear3d",
                [{"id": "solo", "initial_set": _box3(wps[0]), "waypoints": wps,
                  "dwell_bounds": 3.0}])


def rotlinear_rotated(count: int = 3) -> dict:
    """S paths rotated by multiples of 90 degrees; the rotation map is exact here."""
    agents = []
    for i in range(count):
        center = (40.0 * i, 0.0)
        base = s_path(2, center)
        wps = [[x, y, 0.0] for x, y in _rotate(base, i * math.pi / 2, center)]
        agents.append({"id": f"r{i + 1}", "initial_set": _box3(wps[0]),
                       "waypoints": wps, "dwell_bounds": 3.0})
    return _doc(f"rotlinear_s{count}", "rotated copies of an S path under a rotation-symmetric field",
                "rotlinear3d", agents, config={"map_kind": "translation_rotation"})


def fixpoint_s_path(blocks: int) -> dict:
    """Repeating S path with a no-go square two units left of every leg.

    The square is attached to its mode, so corresponding legs of different
    blocks see it at the same spot in the virtual frame and cached safe
    verdicts carry over.
    """
    wps2 = s_path(blocks)
    wps = [[x, y, 0.0] for x, y in wps2]
    unsafe = []
    for (x0, y0), (x1, y1) in zip(wps2, wps2[1:]):
        L = math.hypot(x1 - x0, y1 - y0)
        ux, uy = (x1 - x0) / L, (y1 - y0) / L
        # midpoint shifted to the left normal
        cx, cy = (x0 + x1) / 2 - 2.5 * uy, (y0 + y1) / 2 + 2.5 * ux
        unsafe.append([[[cx - 0.5, cy - 0.5, NEG_INF], [cx + 0.5, cy + 0.5, INF]]])
    agent = {"id": "s", "initial_set": _box3(wps[0]), "waypoints": wps,
             "dwell_bounds": 3.0, "mode_unsafe_sets": unsafe}
    return _doc(f"fixpoint_s{blocks}", f"{blocks} stacked S blocks with per-leg no-go squares",
                "linear3d", [agent])


def linear_static_unsafe() -> dict:
    wps = [[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [10.0, 10.0, 0.0]]
    return _doc("linear_static_unsafe", "a wall across the first leg", "linear3d",
                [{"id": "w", "initial_set": _box3(wps[0]), "waypoints": wps, "dwell_bounds": 3.0}],
                unsafe_sets=[[[4.0, -3.0, NEG_INF], [5.0, 3.0, INF]]])


def linear_collision() -> dict:
    """Two agents swapping places along the same line."""
    a = [[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [20.0, 0.0, 0.0]]
    b = [[20.0, 0.0, 0.0], [10.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
    agents = [{"id": "east", "initial_set": _box3(a[0]), "waypoints": a, "dwell_bounds": 3.0},
              {"id": "west", "initial_set": _box3(b[0]), "waypoints": b, "dwell_bounds": 3.0}]
    return _doc("linear_collision", "head-on swap", "linear3d", agents, dynamic_dims=[0, 1, 2])


# -- aircraft ---------------------------------------------------------------

AIRCRAFT_GRID = [0.2, 0.1, 0.5, 0.5]
AIRCRAFT_DWELL = 6.2
HEADING_SLACK = 0.12
CROSSING_LEG = 12.0
CROSSING_SEED = 3


def aircraft_initial_set(start, toward, speed=2.0) -> list:
    """Widths 0.1 in speed, 0.01 in heading and 1.0 in position."""
    b = math.atan2(toward[0] - start[0], toward[1] - start[1])
    return [[speed - 0.05, b - 0.005, start[0] - 0.5, start[1] - 0.5],
            [speed + 0.05, b + 0.005, start[0] + 0.5, start[1] + 0.5]]


def _heading_bounds(wps) -> list:
    """Guard heading window around the bearing of each leg."""
    out = []
    for (x0, y0), (x1, y1) in zip(wps, wps[1:]):
        b = math.atan2(x1 - x0, y1 - y0)
        out.append({"1": [b - HEADING_SLACK, b + HEADING_SLACK]})
    return out


def _aircraft_agent(aid, wps, dwell=None) -> dict:
    dwell = AIRCRAFT_DWELL if dwell is None else dwell
    return {"id": aid, "initial_set": aircraft_initial_set(wps[0], wps[1]),
            "waypoints": [list(map(float, w)) for w in wps], "dwell_bounds": dwell,
            "guard_bounds": _heading_bounds(wps)}


def crossing_paths(count: int = 3, seed: int = CROSSING_SEED, leg_length: float = CROSSING_LEG,
                   frac: float = 0.15) -> list:
    """Two-leg north-east paths, each crossing its predecessor's track.

    Leg bearings are drawn between 25 and 65 degrees east of north.  Agent
    ``i`` meets the first leg of agent ``i-1`` a fraction ``frac`` along it,
    at a point ``1 - frac`` of the way down its own second leg, so the two
    pass the crossing roughly one leg apart in time.
    """
    rng = np.random.default_rng(seed)
    paths = []
    prev = None
    for _ in range(count):
        d1, d2 = (leg_length * np.array([math.sin(b), math.cos(b)])
                  for b in np.radians(rng.uniform(25.0, 65.0, 2)))
        if prev is None:
            start = np.zeros(2)
        else:
            cross = prev[0] + frac * (prev[1] - prev[0])
            start = cross - (1 - frac) * d2 - d1
        wps = [start, start + d1, start + d1 + d2]
        paths.append([[round(float(v), 6) for v in w] for w in wps])
        prev = wps
    return paths


def aircraft_crossing(count: int = 3, seed: int = CROSSING_SEED) -> dict:
    agents = [_aircraft_agent(f"d{i + 1}", w) for i, w in enumerate(crossing_paths(count, seed))]
    return _doc("aircraft_crossing", f"{count} aircraft on crossing north-east paths (seed {seed})",
                "aircraft4d", agents, config={"grid": AIRCRAFT_GRID}, dynamic_dims=[2, 3])


def aircraft_building_safe() -> dict:
    """One long leg well south of the building."""
    wps = [[0.0, -4.0], [24.0, -4.0]]
    return _doc("aircraft_building_safe", "a single aircraft passing below the building",
                "aircraft4d", [_aircraft_agent("d", wps, 12.6)], unsafe_sets=[BUILDING],
                config={"grid": AIRCRAFT_GRID})


def aircraft_building_unsafe() -> dict:
    """A leg aimed straight through the building."""
    wps = [[2.5, 0.5], [14.3, 6.6]]
    return _doc("aircraft_building_unsafe", "a single aircraft flying through the building",
                "aircraft4d", [_aircraft_agent("d", wps, 6.4)], unsafe_sets=[BUILDING],
                config={"grid": AIRCRAFT_GRID})


BUILDERS = {
    "minimal_linear": minimal_linear,
    "linear_s1": lambda: linear_s_path(1),
    "linear_s2": lambda: linear_s_path(2),
    "linear_s3": lambda: linear_s_path(3),
    "rotlinear_s3": rotlinear_rotated,
    "fixpoint_s1": lambda: fixpoint_s_path(1),
    "fixpoint_s4": lambda: fixpoint_s_path(4),
    "linear_static_unsafe": linear_static_unsafe,
    "linear_collision": linear_collision,
    "aircraft_crossing": aircraft_crossing,
    "aircraft_building_safe": aircraft_building_safe,
    "aircraft_building_unsafe": aircraft_building_unsafe,
}


def build(name: str) -> dict:
    return BUILDERS[name]()


def write_bundled(directory=None) -> list:
    """Write every fixture as ``<name>.json``; returns the paths written."""
    directory = Path(directory or Path(__file__).parent / "data" / "scenarios")
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in BUILDERS:
        path = directory / f"{name}.json"
        with open(path, "w") as fh:
            json.dump(build(name), fh, indent=2)
            fh.write("\n")
        paths.append(path)
    return paths
