"""
Where the twisted curve meets the base curve
============================================

With constant amplitude and a constant frame, one full oscillation
integrates to zero and the twisted curve returns to the base curve at every
k/n. On a helix the frame turns and the amplitude is weighted by it, so the
return is only approximate: the gap is of order 1/n, not zero.
"""

import numpy as np

from corrugate import (MetricSpec, build_twisted_map, deterministic_phase,
                       make_catalog_curve)

line = make_catalog_curve("line", {"dx": 0.5, "dy": 0.0, "dz": 0.0})
helix = make_catalog_curve("helix", {"a": 0.1, "b": 0.05})

for name, curve, metric in [("line", line, MetricSpec.constant(1.25)),
                            ("helix", helix, MetricSpec.constant(2.0))]:
    print(name)
    for n in (4, 16, 64, 256, 1024):
        m = build_twisted_map(curve, metric, "rmf", deterministic_phase(n))
        gap = np.linalg.norm(m.breakpoint_differences, axis=1).max()
        print(f"  n={n:5d}  max gap at k/n = {gap:.2e}   n * gap = {n * gap:.3f}")
