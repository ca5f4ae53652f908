"""Water flooding a dry unit square from the left wall.

The saturation front that enters the domain is the Welge composite: a
rarefaction from the injected state down to u*, then a shock to the dry
state.  A one-cell-high slice reduces the problem to 1-D with unit velocity,
where the exact similarity solution is available for comparison.
"""
import numpy as np

from blsim.driver import RunConfig, run
from blsim.grid import StaggeredGrid, norms
from blsim.riemann import riemann_oracle

T = 0.4

print("2-D flood, nx = ny = 48 (unit inflow of pure water, so the stored volume equals t)")
traj = run(RunConfig(grid=StaggeredGrid(48, 48), T=T, output_dt=0.1))
for st, row in zip(traj.states, traj.report.rows):
    swept = norms(st.u, traj.grid, "L1")
    print(f"  t = {st.t:.2f}  water volume = {swept:.4f}  min u = {row[1]:.2e}  max u = {row[2]:.4f}")

print("\n1-D slice, nx = 400, against the exact profile")
slice_traj = run(RunConfig(grid=StaggeredGrid(400, 1), T=T), store=False)
u = slice_traj.states[-1].u[0]
x = slice_traj.grid.xc
exact = riemann_oracle(slice_traj.model, 1.0, 0.0)
ref = exact.profile(x, T, x0=0.0)
print(f"  u* = {exact.u_star:.6f}, shock speed = {exact.shock_speed:.6f}")
print(f"  L1 distance to the exact profile = {np.sum(np.abs(u - ref)) * slice_traj.grid.dx:.4e}")
for xi in (0.1, 0.3, 0.5, 0.7):
    i = int(xi * x.size)
    print(f"  x = {x[i]:.3f}  computed {u[i]:.4f}  exact {ref[i]:.4f}")
