"""
Local outlier factor on a handful of numbers
============================================

Each sample gives one output per device.  Those outputs are a tiny 1-D
point set, and the local outlier factor says how isolated each one is
relative to its neighbours.
"""

import numpy as np

from orsa.lof import k_distance, local_reachability_density, lof_scores, lof_weights

# four devices agree, one is far off
outputs = np.array([0.0, 0.1, 0.2, 0.3, 10.0])

# k-distance: how far to the k-th nearest other output
for i in range(len(outputs)):
    d_k, nbrs = k_distance(outputs, i, 2)
    print(f"point {outputs[i]:5.1f}: 2-distance {d_k:.2f}, neighbours {nbrs.tolist()}")

# local reachability density is the inverse mean reachability distance
print("lrd of the middle point:", local_reachability_density(outputs, 2, 2))

# LOF compares a point's density with its neighbours'; ~1 is ordinary
scores = lof_scores(outputs, 2)
print("LOF scores:", np.round(scores, 3))

# reciprocal LOF, normalised, becomes the weight in the loss
weights = lof_weights(scores)
print("weights:   ", np.round(weights, 4))

# scores ignore shifts and positive rescaling of the outputs
print("shift/scale invariant:", np.allclose(lof_scores(3 * outputs - 7, 2), scores))

# ties at the k-th distance pull every tied point into the neighbourhood
print("tie example:", k_distance([0, 1, 1, 5], 0, 1))
