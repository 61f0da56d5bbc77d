"""
From value table to decision tree on a 6x6 hallway
==================================================

The whole pipeline on one maze: build the energy product, restrict to
allowed actions, run RTDP-Bel, simulate its greedy policy to collect
training data, learn a small tree, and compare all three policies.
"""

from energy_pomdp import (
    analyze,
    build_product,
    dt_policy,
    evaluate,
    gen_hallway,
    generate_training_data,
    greedy_policy,
    grid_features_for,
    hallway_spec,
    learn_tree,
    prune_tree,
    report_table,
    sigma_all,
    solve,
    tree_to_text,
)

spec = hallway_spec("6x6")
print("\n".join(spec.grid))
model = gen_hallway(spec)
product = build_product(model)
allowed = analyze(product).allowed

# %%
# RTDP-Bel.  The table is keyed by beliefs rounded to multiples of 1/20.
solved = solve(product, allowed, trials=3000, seed=0)
print("table entries:", len(solved.table))

# %%
# Training data use row and column marginals of the belief plus the energy
# level, so the tree speaks about positions rather than raw states.
features = grid_features_for(model.state_names)
greedy = greedy_policy(product, allowed, solved.table)
data = generate_training_data(greedy, product, features, simulations=500, seed=0)
tree = prune_tree(learn_tree(data, "infogain", min_leaf=5), data, alpha=1.0)
print(f"{len(data)} records -> tree with {tree.size} nodes")
print(tree_to_text(tree))

# %%
# Side by side.  A leading ``~`` marks values where some runs never
# reached the goal within the cutoff.
dt = dt_policy(tree, features, product, allowed)
reports = [evaluate(p, product, sims=2000, seed=1, instance=spec.name) for p in (sigma_all(allowed), greedy, dt)]
print(report_table(reports))
