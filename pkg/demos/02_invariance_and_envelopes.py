"""
Invariance of the region under the extremal flow
================================================

The equality case x' = y, y' = b|y|^q - a x is the slowest admissible
evolution. Trajectories started in the region stay there, their rate stays
above the envelope, and they blow up before t_star.
"""

import numpy as np

from blowup import (IntegratorOptions, OdiParams, NotCertified, SubQuadratic,
                    boundary_inwardness, certify_scalar, check_envelope, detect_blowup,
                    extremal_scalar_field, integrate_ivp, region_margin,
                    sub_quadratic_constants)

p = OdiParams(1.0, 2.0, 1.5)
opts = IntegratorOptions()
field = extremal_scalar_field(p)

cert = certify_scalar(p, 0.0, 1.0)
traj = integrate_ivp(field, [0.0, 1.0], opts)
print(traj.termination, "after", traj.times.size, "steps")
est = detect_blowup(traj, opts, component=1)
print("refined T =", est.t_est, " exponent =", est.exponent, "(expected 2)")
print("envelope:", check_envelope(traj, cert).to_dict())

# A small random sweep.
rng = np.random.default_rng(7)
worst, ratio, n = np.inf, 0.0, 0
while n < 25:
    v0, v1 = rng.uniform(-3, 3), rng.uniform(0, 3)
    try:
        c = certify_scalar(p, v0, v1)
    except NotCertified:
        continue
    n += 1
    tr = integrate_ivp(field, [v0, v1], opts)
    worst = min(worst, region_margin(c, tr.states).min())
    ratio = max(ratio, tr.termination.t_est / c.t_star)
print(f"25 points: smallest margin {worst:.3g}, largest t_est/t_star {ratio:.3f}")

# Why it works: on the boundary the field points inward.
k = sub_quadratic_constants(p)
print(boundary_inwardness(SubQuadratic(k), p, 1000, (k.x1, 10 * k.x2)))
