"""
Four kinds of outlier device
============================

The artificial dataset shares one base function across devices.  Regular
devices add Gaussian noise; the four outlier types add offsets that get
harder to spot: a constant shift, a bump in one region, that bump only
some of the time, and that intermittent bump with a random sign and size.
"""

import numpy as np

from orsa import synthgen

config = synthgen.artificial_config(samples_per_device=5000)
data = synthgen.generate_dataset(config)
print(f"{data.n_devices} devices, outliers at",
      {i: lab for i, lab in enumerate(data.labels) if lab != "regular"})

# mean absolute deviation from the base function, per label
for table in data.devices:
    if table.label == "regular" and table.device_id != 1:
        continue
    resid = table.outputs - config.base(table.samples)
    line = f"device {table.device_id:2d} {table.label:8s} mean|dev| {np.abs(resid).mean():.4f}"
    if table.area is not None:
        inside = table.area.contains(table.samples)
        line += f"  inside area {np.abs(resid[inside]).mean():.4f}, outside {np.abs(resid[~inside]).mean():.4f}"
    print(line)

# the bump: -1 at the area centre, 0 on the boundary and beyond
area = data.devices[26].area
lo, hi = np.array(area.lower), np.array(area.upper)
print("area", np.round(lo, 3), "to", np.round(hi, 3))
for t in (0.0, 0.25, 0.5, 0.75, 1.0):
    s = area.center + t * (hi - area.center) * np.array([1.0, 0.0])
    print(f"  {t:.2f} of the way to the edge: offset {synthgen.smooth_offset(area, s):+.4f}")

# the same seed always gives the same tables
again = synthgen.generate_dataset(config)
print("reproducible:", all(np.array_equal(a.outputs, b.outputs) for a, b in zip(data.devices, again.devices)))
