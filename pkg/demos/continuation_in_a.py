"""Letting the channel grow: the limit a -> infinity.

A traveling wave on the infinite channel is the limit of the truncated waves
as the half-length a grows.  Each step pads the previous solution onto the
longer domain and restarts at tau = 1, so only the first length pays for the
homotopy.  The speeds should form a Cauchy sequence; with an exponentially
decaying front the differences shrink very quickly.

Run:  python demos/continuation_in_a.py
"""

import time

from bqwave.diagnostics import PlateauNotFound, classify_left_limit
from bqwave.fields import make_grid
from bqwave.fixedpoint import FixedPointConfig, WaveProblem, continue_in_a
from bqwave.geometry import PhysParams, build_rectangle
from bqwave.reaction import NonlinearitySpec

cs = build_rectangle(0.5, 0.5, 8, 8)
pp = PhysParams(1.0, (0.0, 0.0, -1.0), 0, 0.25)
rx = NonlinearitySpec("hat", 4.0, 0.25)
grid = make_grid(6.0, 48, cs)
cfg = FixedPointConfig(taus=(0, 0.5, 1), a_schedule=(6.0, 8.0, 12.0, 16.0, 24.0))

t0 = time.perf_counter()
states, table = continue_in_a(cfg, grid, pp, rx)
print(f"{'a':>6} {'c':>16} {'|c - c_prev|':>14} {'iterations':>10}")
for row in table:
    print(f"{row['a']:6.1f} {row['c']:16.12f} {row['cauchy']:14.3e} {row.get('iterations', '-'):>10}")
print(f"total {time.perf_counter() - t0:.1f}s")

# the burned side flattens as a grows; its level is the left limit theta_-
for st, row in zip(states, table):
    g = make_grid(row["a"], st.T.box.nx, cs)
    try:
        th, branch, info = classify_left_limit(st, WaveProblem(g, pp, rx))
        print(f"a = {st.a:5.1f}: theta_- = {th:.10f} ({branch}), "
              f"plateau variation {info['plateau_variation']:.1e}")
    except PlateauNotFound as e:
        print(f"a = {st.a:5.1f}: {e}")
