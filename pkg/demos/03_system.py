"""
Coupled inequalities U'' + aU >= |V'|^p, V'' + aV >= |U'|^q
===========================================================
"""

from blowup import (SystemParams, SystemRegion, boundary_inwardness, certify_system,
                    check_envelope, extremal_system_field, integrate_ivp)

sp = SystemParams(a=1.0, p=1.5, q=2.0)
cert = certify_system(sp, U0=4.0, V0=4.0, U1=4.0, V1=4.0)
print("t_star =", cert.t_star, " envelope for U' + V' starts at", cert(0.0))

traj = integrate_ivp(extremal_system_field(sp), [4.0, 4.0, 4.0, 4.0])
print(traj.termination)
print(check_envelope(traj, cert, slack=0.02).to_dict())

# Face inwardness, restricted to velocities above the certified floor.
print(boundary_inwardness(SystemRegion(sp), sp, 500, (0.0, 50.0), velocity_floor=(4.0, 4.0)))

# With p = q and symmetric data the diagonal U = V is invariant.
sym = SystemParams(1.0, 2.0, 2.0)
tr = integrate_ivp(extremal_system_field(sym), [3.0, 4.0, 3.0, 4.0])
print("max |U - V| =", abs(tr.states[:, 0] - tr.states[:, 2]).max())
