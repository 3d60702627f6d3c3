"""
From hard minimum to average
============================

k_s controls how many of the lowest device outputs feed the loss.  With
k_s = 1 the network learns the hard minimum; with every device selected
it approaches the mean.  In between it trades one for the other.  This
runs a small sweep through the harness and prints the comparison table.
Here the members keep the devices' Gaussian noise, so the spread between
minimum and mean is wide enough to see the trade-off.
"""

import tempfile

from orsa import harness

doc = {
    "synth": {"n_devices": 30, "samples_per_device": 2000,
              "outlier_assignment": {"21": "type1", "26": "type2", "20": "type3", "0": "type4"}},
    "orsa": {"steps": 5000},
    "members": {"source": "synthetic", "error": 0.0, "noise": True},
    "sweep": {"probes": 100, "probe_seed": 1},
}

with tempfile.TemporaryDirectory() as tmp:
    harness.run_generate(doc, f"{tmp}/data")
    rows = harness.run_sweep(f"{tmp}/data", doc, f"{tmp}/sweep", grid=[(1, 1), (3, 3), (6, 6), (12, 12), (30, 29)])

print(" k_s k_lof  rmse_min  rmse_mean  between")
for r in rows:
    print(f"{r['k_s']:4d} {r['k_lof']:5d} {r['rmse_extreme']:9.4f} {r['rmse_mean']:10.4f} {r['frac_between']:8.0%}")
