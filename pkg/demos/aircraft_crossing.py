"""
Crossing aircraft
=================

Three fixed-wing aircraft fly two-leg north-east paths that cross each
other's tracks.  Tubes are computed in a frame where the next waypoint is the
origin and the leg points north, so legs with different bearings still share
cached work.
"""

import numpy as np

from symreach import parse_scenario
from symreach.fixtures import build
from symreach.verifier import segment_windows, Verifier

scenario = parse_scenario(build("aircraft_crossing"))
scenario.config.report_full_tubes = True
result = Verifier(scenario).run()

print("verdict:", result.verdict.value)
for agent in result.agents:
    s = agent.stats
    print(f"{agent.id}: {s.transformed_segments}/{s.transformed_segments + s.computed_segments} "
          f"segments reused")

# %%
# Each mode's start time is uncertain; the lookback records how uncertain.
for agent in result.agents:
    starts = ", ".join(f"[{e.earliest_start:.1f}, {e.earliest_start + e.time_uncertainty:.1f}]"
                       for e in agent.lookback)
    print(f"{agent.id} mode start windows: {starts}")

# %%
# Take the first pair of segments of d1 and d2 that overlap in position:
# their time windows keep them apart.
a, b = result.agents[0], result.agents[1]
lo_a, hi_a = segment_windows(a.tube, a.lookback)
lo_b, hi_b = segment_windows(b.tube, b.lookback)
near = np.all((a.tube.lo[:, None, 2:] <= b.tube.hi[None, :, 2:])
              & (b.tube.lo[None, :, 2:] <= a.tube.hi[:, None, 2:]), axis=2)
i, j = np.argwhere(near)[0]
print(f"{a.id} segment {i} in [{lo_a[i]:.1f}, {hi_a[i]:.1f}] s, "
      f"{b.id} segment {j} in [{lo_b[j]:.1f}, {hi_b[j]:.1f}] s")
