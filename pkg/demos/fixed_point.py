"""
Unbounded S paths
=================

Stacking more S blocks onto a verified path adds modes that are congruent to
ones already checked.  Once every virtual query is answered from the caches,
the path can be extended forever without computing another tube.
"""

from symreach import parse_scenario
from symreach.fixtures import build
from symreach.verifier import detect_fixed_point, Verifier

# %%
# Verify a single block; this fills both caches.
one = parse_scenario(build("fixpoint_s1"))
v = Verifier(one)
r = v.run()
print(f"1 block: {r.verdict.value}, {r.stats.tube_calls} tube calls")
print("closed after 1 block:", detect_fixed_point(one, v.tcache, v.scache).closed)

# %%
# Four blocks, reusing the caches from the first run.
four = parse_scenario(build("fixpoint_s4"))
v4 = Verifier(four, v.tcache, v.scache)
r4 = v4.run()
print(f"4 blocks: {r4.verdict.value}, {r4.stats.tube_calls} new tube calls, "
      f"{r4.stats.cache_hits} cell hits")
print("closed after 4 blocks:", detect_fixed_point(four, v.tcache, v.scache).closed)
