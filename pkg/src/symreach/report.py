"""Running a scenario end to end and writing its stats and tubes."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional

from .caches import SafetyCache, TubeCache, Verdict, load_snapshot, save_snapshot
from .scenario import Scenario
from .verifier import FixedPoint, VerifResult, Verifier, VerifStats, detect_fixed_point, segment_windows


@dataclass
class RunReport:
    verdict: Verdict
    stats: VerifStats
    agent_stats: list
    fixed_point: FixedPoint
    provenance: list = field(default_factory=list)
    cache_enabled: bool = True
    name: str = ""

    def to_dict(self) -> dict:
        d = {
            "verdict": self.verdict.value,
            "scenario": self.name,
            "cache_enabled": self.cache_enabled,
            **self.stats.to_dict(),
            "transformed_fraction": self.stats.transformed_fraction,
            "fixed_point": self.fixed_point.to_dict(),
            "agents": [{"id": aid, **s.to_dict()} for aid, s in self.agent_stats],
            "provenance": self.provenance,
        }
        return d


def run_verify(scenario: Scenario, no_cache: bool = False, cache_in: Optional[str] = None,
               cache_out: Optional[str] = None, tcache: Optional[TubeCache] = None,
               scache: Optional[SafetyCache] = None):
    """Verify ``scenario``; returns ``(report, result, tube_cache, safety_cache)``."""
    cfg = scenario.config
    use_cache = cfg.cache_enabled and not no_cache
    cache_in = cache_in or cfg.cache_in
    cache_out = cache_out or cfg.cache_out
    verifier = Verifier(scenario, tcache, scache, use_cache)
    if cache_in and use_cache:
        t_in, s_in = load_snapshot(cache_in, verifier.fingerprint)
        verifier.tcache.merge(t_in)
        for rec in s_in.entries:
            verifier.scache.store_intersect(rec.K, rec.T, rec.U, rec.result)
    result = verifier.run()
    if use_cache:
        fp = detect_fixed_point(scenario, verifier.tcache, verifier.scache)
    else:
        fp = FixedPoint(False, [(a.id, m) for a in scenario.agents for m in range(a.n_modes)])
    if cache_out and use_cache:
        save_snapshot(cache_out, verifier.tcache, verifier.scache)
    report = RunReport(result.verdict, result.stats, [(a.id, a.stats) for a in result.agents],
                       fp, result.provenance, use_cache, scenario.name)
    return report, result, verifier.tcache, verifier.scache


def tube_rows(result: VerifResult) -> list:
    """One row per segment: agent, mode, segment, absolute window, lo..., hi..."""
    rows = []
    for agent in result.agents:
        lo_t, hi_t = segment_windows(agent.tube, agent.lookback)
        bounds = [e.start_index for e in agent.lookback] + [len(agent.tube)]
        for j in range(len(agent.lookback)):
            for i in range(bounds[j], bounds[j + 1]):
                rows.append([agent.id, j, i - bounds[j], float(lo_t[i]), float(hi_t[i]),
                             *agent.tube.lo[i].tolist(), *agent.tube.hi[i].tolist()])
    return rows


def tube_header(n: int) -> list:
    return (["agent_id", "mode_index", "seg_index", "t_lo", "t_hi"]
            + [f"lo_{k}" for k in range(n)] + [f"hi_{k}" for k in range(n)])


def emit_outputs(report: RunReport, result: VerifResult, stats_path: Optional[str] = None,
                 tubes_path: Optional[str] = None, n: Optional[int] = None) -> None:
    if stats_path:
        with open(stats_path, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    if tubes_path:
        if n is None:
            n = result.agents[0].tube.dim if result.agents else 0
        with open(tubes_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(tube_header(n))
            w.writerows(tube_rows(result))
