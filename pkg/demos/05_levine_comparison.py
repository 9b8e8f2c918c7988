"""
Comparison with the wedge v1 > v0 > s0
======================================

The classical sufficient condition asks for v'(0) > v(0) > s0. Our region
contains that wedge and also admits negative v(0).
"""

from blowup.cli import compare_levine
from blowup.odi_core import OdiParams, in_region_sub_quadratic, levine_s0

print("s0 =", levine_s0(1.0, 1.0, 1.5))
report = compare_levine(1.0, 1.0, 1.5, n=10_000, seed=0)
print("wedge points inside ours:", report["levine_in_ours"])
print("our points outside the wedge:", report["ours_not_levine"])
for v0, v1 in report["witnesses"][:5]:
    print(f"  ({v0:+.4f}, {v1:.4f})  ours: "
          f"{in_region_sub_quadratic(OdiParams(1.0, 1.0, 1.5), v0, v1)}")
