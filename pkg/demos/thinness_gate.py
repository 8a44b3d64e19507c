"""When may the solver trust the full coupled model?

With the advective term in the momentum equation switched on (d = 1), the
existence argument needs the channel to be thin relative to viscosity and
buoyancy.  The check is a single number built from the Poincare constants of
the cross-section, its transverse moment and (nu, rho).  This demo tabulates it
and shows the gate refusing a run that violates it.

Run:  python demos/thinness_gate.py
"""

from bqwave.fields import make_grid
from bqwave.fixedpoint import ConditionViolated, FixedPointConfig, solve_homotopy
from bqwave.geometry import PhysParams, build_rectangle, evaluate_thinness
from bqwave.reaction import NonlinearitySpec

print("square cross-sections, gravity across the channel (rho = (0, 0, -1))")
print(f"{'side':>6} {'nu':>8} {'lhs':>12}  status")
for side in (0.25, 0.5, 1.0):
    cs = build_rectangle(side, side, 32, 32)
    for nu in (1e-3, 0.1, 1.0):
        rep = evaluate_thinness(cs, PhysParams(nu, (0.0, 0.0, -1.0), 1, 0.25))
        print(f"{side:6.2f} {nu:8.0e} {rep.lhs:12.4g}  {rep.as_dict()['status']}")

# the number scales like nu^(-3/2) and linearly in |rho|
cs = build_rectangle(0.5, 0.5, 32, 32)
base = evaluate_thinness(cs, PhysParams(1.0, (0.0, 0.0, -1.0), 1, 0.25)).lhs
print(f"\nnu -> nu/4 multiplies lhs by {evaluate_thinness(cs, PhysParams(0.25, (0, 0, -1), 1, 0.25)).lhs / base:.6f}"
      f" (8 expected)")
print(f"side 0.5 needs nu > {base ** (2 / 3):.4f}")

# the gate: d = 1 with nu = 1e-3 is refused before any solve
try:
    solve_homotopy(FixedPointConfig(taus=(0, 1)), make_grid(8.0, 64, build_rectangle(0.5, 0.5, 6, 6)),
                   PhysParams(1e-3, (0.0, 0.0, -1.0), 1, 0.25), NonlinearitySpec("hat", 4.0, 0.25))
except ConditionViolated as e:
    print(f"\nrefused: {e}")
    print(f"components: { {k: round(v, 5) for k, v in e.report.components.items()} }")
