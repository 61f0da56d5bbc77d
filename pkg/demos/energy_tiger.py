"""
Which actions are safe with a nearly empty battery?
===================================================

The tiger problem with a battery.  Listening drains one unit, recharging
costs time, and opening a door ends the episode.  The qualitative analysis
tells us, for every belief support and energy level, which actions keep
the target reachable with probability one.
"""

from energy_pomdp import analyze, build_product, energy_tiger, initial_belief, belief_update

model = energy_tiger(capacity=3)
product = build_product(model)
result = analyze(product)
print("feasible:", result.feasible)
print("product states:", product.n_states, " belief supports:", len(result.graph))

# %%
# Allowed actions per energy level.  With one unit left, listening would
# empty the tank, so it disappears from the allowed set.
graph = result.graph
for u in range(len(graph)):
    if graph.is_target[u] or u not in result.allowed.allowed:
        continue
    names = sorted({model.state_names[product.pairs[s][0]] for s in graph.supports[u]})
    actions = [model.action_names[a] for a in result.allowed[u]]
    print(f"energy {graph.energy[u]}  support {names}: {actions}")

# %%
# The belief itself: one "hear-left" moves the 50/50 prior to 85/15.
b = initial_belief(product, model.obs_names.index("init"))
b = belief_update(product, b, model.action_names.index("listen"), model.obs_names.index("hear-left"))
for s, p in b:
    print(f"{product.name(s):28s} {p:.3f}")
