"""
Flying past a building
======================

A single aircraft either passes well south of a building footprint or is
aimed straight through it.  The footprint is unbounded in speed and heading,
so it is moved into the virtual frame exactly like the tubes.
"""

import numpy as np

from symreach import parse_scenario
from symreach.dynamics import simulate
from symreach.fixtures import build
from symreach.verifier import Verifier

for name in ("aircraft_building_safe", "aircraft_building_unsafe"):
    scenario = parse_scenario(build(name))
    result = Verifier(scenario).run()
    print(f"{name}: {result.verdict.value}")
    for p in result.provenance:
        print("   ", p)

# %%
# The unsafe verdict is not a tube artifact: plain simulations from the
# initial box hit the footprint too.
scenario = parse_scenario(build("aircraft_building_unsafe"))
agent = scenario.agents[0]
mode = agent.modes()[0]
U = scenario.unsafe_sets[0]
rng = np.random.default_rng(0)
hits = 0
for x0 in agent.initial_set.sample(rng, 20):
    traj = simulate(scenario.model, x0, mode.p, mode.T, 0.01)
    hits += any(U.contains_point(x) for x in traj.states)
print(f"{hits} of 20 sampled runs enter the building")
