"""
Reusing tubes along an S path
=============================

Three linear agents follow translated copies of the same S path.  Every leg
is mapped into one virtual frame, so after the first agent most of the work
is a lookup.
"""

import time

from symreach import parse_scenario
from symreach.fixtures import build
from symreach.verifier import Verifier

# %%
# Load the bundled three-agent fixture and run it with the caches enabled.
scenario = parse_scenario(build("linear_s3"))
t0 = time.perf_counter()
cached = Verifier(scenario).run()
t_cached = time.perf_counter() - t0

for agent in cached.agents:
    s = agent.stats
    print(f"{agent.id}: computed {s.computed_segments:5d} segments, "
          f"transformed {s.transformed_segments:5d}")

# %%
# The same scenario with every cell tube computed from scratch.
t0 = time.perf_counter()
plain = Verifier(parse_scenario(build("linear_s3")), use_cache=False).run()
t_plain = time.perf_counter() - t0

print(f"verdict with cache {cached.verdict.value}, without {plain.verdict.value}")
print(f"wall time {t_cached:.3f} s vs {t_plain:.3f} s")
print(f"tube calls {cached.stats.tube_calls} vs {plain.stats.tube_calls}")

# %%
# Caching changes the cost, never the answer: the agent tubes agree box for box.
same = all(a.tube == b.tube for a, b in zip(cached.agents, plain.agents))
print("identical tubes:", same)
