"""
How fast does RTDP-Bel settle?
==============================

Trial costs on RockSample[3,4] with a penalty of 10 per good rock left
behind, printed as a coarse text histogram per block of trials (one ``#``
per two cost units).  Without the penalty the best plan is to walk
straight to the exit, which makes for a dull plot.  Compare the zero
heuristic with the fully observable one.
"""

import numpy as np

from energy_pomdp import RockSampleSpec, analyze, build_product, gen_rocksample, mdp_heuristic, solve

product = build_product(gen_rocksample(RockSampleSpec(3, 4, missed_penalty=10)))
allowed = analyze(product).allowed

for label, heuristic in (("zero", None), ("mdp", mdp_heuristic(product))):
    res = solve(product, allowed, trials=1000, seed=0, heuristic=heuristic)
    blocks = np.array(res.trace).reshape(10, -1)
    print(f"heuristic={label}  final table entries={len(res.table)}")
    for i, block in enumerate(blocks):
        print(f"  trials {i * 100:4d}-{i * 100 + 99:4d}  median cost {np.median(block):5.1f}  "
              + "#" * int(block.mean() / 2))
