"""The decoupled front: no reaction feedback on the flow, no buoyancy.

At tau = 0 the temperature equation reduces to -T'' - c T' = 0 on (-a, a)
with T(-a) = 1, T(a) = 0, and the speed is fixed by requiring T(0) = theta0.
That root has a closed form, c = log(1/theta0 - 1) / a, so this is the
cleanest place to see how well the discretisation tracks the continuum.

Run:  python demos/planar_front.py
"""

import math

from bqwave.fields import make_grid
from bqwave.fixedpoint import FixedPointConfig, solve_homotopy
from bqwave.geometry import PhysParams, build_rectangle
from bqwave.reaction import NonlinearitySpec
from bqwave.temperature import planar_profile, planar_speed

theta0 = 0.25
pp = PhysParams(1.0, (0.0, 0.0, -1.0), 0, theta0)
rx = NonlinearitySpec("hat", 4.0, theta0)
cs = build_rectangle(0.5, 0.5, 4, 4)

print("closed form vs the tau = 0 stage of the solver")
print(f"{'a':>6} {'nx':>6} {'c exact':>14} {'c discrete':>14} {'rel err':>10} {'order':>6}")
for a in (5.0, 10.0, 20.0):
    exact = planar_speed(a, theta0)
    prev = None
    for nx in (int(3.2 * a), int(6.4 * a), int(12.8 * a)):
        nx += nx % 2
        st = solve_homotopy(FixedPointConfig(taus=(0,)), make_grid(a, nx, cs), pp, rx)
        err = abs(st.c / exact - 1)
        order = f"{math.log2(prev / err):6.2f}" if prev else " " * 6
        print(f"{a:6.1f} {nx:6d} {exact:14.10f} {st.c:14.10f} {err:10.2e} {order}")
        prev = err

# the speed shrinks like 1/a: the truncated front is pulled by its boundary data,
# which is why the reaction has to take over as tau grows
a = 10.0
c = planar_speed(a, theta0)
T = planar_profile(c, a)
print(f"\nprofile at a = {a:g}: T(-a) = {T(-a):.3f}, T(0) = {T(0.0):.3f}, T(a) = {T(a):.3f}")
print(f"c * a = {c * a:.6f}  (log 3 = {math.log(3):.6f})")
