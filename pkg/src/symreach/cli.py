"""Command line entry point: ``symreach verify|check-symmetry|export-cache|inspect-cache``.

Exit codes: 0 safe (or check passed), 1 unsafe (or check failed), 2 error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from .caches import CacheMismatch, load_snapshot, snapshot_rows
from .dynamics import MODELS, make_model
from .scenario import ScenarioError, fixture_path, load_scenario
from .symmetry import MAP_KINDS, build_map, check_equivariance, default_map_kind
from .verifier import VerificationError
from .report import emit_outputs, run_verify

EXIT_SAFE, EXIT_UNSAFE, EXIT_ERROR = 0, 1, 2


def _resolve(path: str) -> str:
    if os.path.exists(path):
        return path
    bundled = fixture_path(path)
    if bundled.is_file():
        return str(bundled)
    return path


def cmd_verify(args) -> int:
    scenario = load_scenario(_resolve(args.scenario))
    if args.full_tubes:
        scenario.config.report_full_tubes = True
    report, result, _, _ = run_verify(scenario, args.no_cache, args.cache_in, args.cache_out)
    emit_outputs(report, result, args.stats_out, args.tubes_out, scenario.model.n)
    s = report.stats
    if not args.quiet:
        print(f"verdict: {report.verdict.value}")
        print(f"segments computed/transformed: {s.computed_segments}/{s.transformed_segments} "
              f"(tubes {s.computed:.2f}/{s.transformed:.2f})")
        print(f"tube calls: {s.tube_calls}  cache hits: {s.cache_hits}  wall time: {s.wall_time:.3f} s")
        print(f"fixed point closed: {str(report.fixed_point.closed).lower()}")
        for p in report.provenance:
            print(f"unsafe ({p['kind']}): {json.dumps(p, default=str)}")
    return EXIT_SAFE if report.verdict.value == "safe" else EXIT_UNSAFE


def cmd_check_symmetry(args) -> int:
    if args.scenario:
        sc = load_scenario(_resolve(args.scenario))
        model = sc.model
        kind = args.kind or sc.config.map_kind or default_map_kind(model)
    else:
        model = make_model(args.model)
        kind = args.kind or default_map_kind(model)
    k = len(model.position_dims)
    p = np.zeros(model.m)
    p[:2] = [1.0, -2.0]
    p[k:k + 2] = [3.0, 4.0]
    rep = check_equivariance(model, build_map(model, p, kind), args.samples, args.seed)
    status = "pass" if rep.passed else "FAIL"
    print(f"{model.name} {kind}: max residual {rep.max_residual:.3e} over {rep.samples} samples [{status}]")
    return EXIT_SAFE if rep.passed else EXIT_UNSAFE


def cmd_export_cache(args) -> int:
    tubes, _ = load_snapshot(args.snapshot)
    n = tubes.resolution.size
    header = ([f"key_{k}" for k in range(n)] + ["seg_index", "t_lo", "t_hi"]
              + [f"lo_{k}" for k in range(n)] + [f"hi_{k}" for k in range(n)])
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(header)
        w.writerows(snapshot_rows(tubes))
    finally:
        if args.out:
            out.close()
    return EXIT_SAFE


def cmd_inspect_cache(args) -> int:
    tubes, safety = load_snapshot(args.snapshot)
    lengths = [len(tubes.get(k)) for k in tubes.keys()]
    fp = tubes.fingerprint or {}
    info = {
        "tube_entries": len(tubes),
        "resolution": tubes.resolution.tolist(),
        "step": tubes.step,
        "model": json.loads(fp["model"])["model"] if "model" in fp else None,
        "segments_min": min(lengths) if lengths else 0,
        "segments_max": max(lengths) if lengths else 0,
        "safety_records": len(safety),
        "safe_records": sum(r.result.value == "safe" for r in safety.entries),
    }
    print(json.dumps(info, indent=2, sort_keys=True))
    return EXIT_SAFE


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="symreach", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="verify a scenario file (or a bundled fixture name)")
    v.add_argument("scenario")
    v.add_argument("--no-cache", action="store_true", help="compute every cell tube fresh")
    v.add_argument("--cache-in", metavar="P", help="seed the caches from a snapshot")
    v.add_argument("--cache-out", metavar="P", help="write the caches to a snapshot")
    v.add_argument("--stats-out", metavar="P", help="write run statistics as JSON")
    v.add_argument("--tubes-out", metavar="P", help="write agent tubes as CSV")
    v.add_argument("--full-tubes", action="store_true", help="keep going after an unsafe verdict")
    v.add_argument("-q", "--quiet", action="store_true")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("check-symmetry", help="measure the equivariance residual of a map")
    src = c.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario")
    src.add_argument("--model", choices=sorted(MODELS))
    c.add_argument("--kind", choices=MAP_KINDS)
    c.add_argument("--samples", type=int, default=1000)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_check_symmetry)

    e = sub.add_parser("export-cache", help="dump a cache snapshot as CSV rows")
    e.add_argument("snapshot")
    e.add_argument("--out", metavar="P")
    e.set_defaults(func=cmd_export_cache)

    i = sub.add_parser("inspect-cache", help="summarize a cache snapshot")
    i.add_argument("snapshot")
    i.set_defaults(func=cmd_inspect_cache)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BrokenPipeError:
        # output piped into head or similar
        sys.stderr.close()
        return EXIT_SAFE
    except (ScenarioError, VerificationError, CacheMismatch, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
