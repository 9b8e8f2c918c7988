"""
Certificates for v'' + a v >= b |v'|^q
======================================

Which initial data (v(0), v'(0)) force blow-up, and how fast?
"""

import numpy as np

from blowup import (OdiParams, certify_scalar, rate_envelope, sub_quadratic_constants,
                    boundary_F, NotCertified)

# Sub-quadratic growth (q <= 2): the region sits above a four-piece curve F.
p = OdiParams(a=1.0, b=2.0, q=1.5)
c = sub_quadratic_constants(p)
print("alpha =", c.alpha, " plateau =", c.plateau, " x1 =", c.x1, " x2 =", c.x2)
for x in np.linspace(-1.0, 3.0, 9):
    print(f"  F({x:+.2f}) = {boundary_F(c, p, x):.6f}")

# Data above F get a certificate with a rate envelope and a time bound.
cert = certify_scalar(p, 0.0, 1.0)
print("t_star =", cert.t_star, " epsilon =", cert.epsilon)
for t in (0.0, 0.5, 1.0, 1.5, 1.9):
    print(f"  v'({t}) >= {rate_envelope(cert, t):.6f}")

# Below F the criterion is silent, which is not the same as global existence.
try:
    certify_scalar(p, 0.0, 0.5)
except NotCertified as exc:
    print("not certified:", exc)

# Super-quadratic growth (q > 2): epsilon is the smallest root of a quadratic.
sup = certify_scalar(OdiParams(1.0, 1.0, 2.5), 0.0, 1.0)
print("q = 2.5: epsilon =", sup.epsilon, " t_star =", sup.t_star)
