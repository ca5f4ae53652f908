"""Limits tau -> 0 (time delay) and epsilon -> 0 (viscosity) on small grids.

For tau the distance between the delayed velocity and its quasi-stationary
counterpart is measured in L2(0,T; V1); it shrinks linearly in tau.  For
epsilon, successive L1 space-time differences of the viscous saturations
shrink as epsilon is halved.
"""
from blsim.driver import RunConfig, epsilon_study, tau_study, uniform_bound_check
from blsim.grid import StaggeredGrid

base = RunConfig(grid=StaggeredGrid(24, 24), T=0.2)

rep = tau_study(base, [1e-1, 1e-2, 1e-3])
print("tau       ||v - B||^2      steps")
for r in rep.rows:
    print(f"{r['tau']:.0e}   {r['D']:.4e}   {r['steps']}")
print(f"fitted slope {rep.slope:.3f}")

eps = epsilon_study(RunConfig(grid=StaggeredGrid(256, 1), T=0.3), [4e-2, 2e-2, 1e-2], samples=16)
print("\nepsilon   L1 difference to previous")
for r in eps.rows:
    print(f"{r['epsilon']:.0e}   {r['cauchy_l1']:.4e}")

print("\nenergy bounds relative to the second parameter value (one-sided excess):")
for name, study, par in (("tau", rep, "tau"), ("epsilon", eps, "epsilon")):
    for col, (ok, excess, _) in uniform_bound_check(study.rows, par).items():
        print(f"  {name:8s}{col:20s}{excess:+.3f}  {'ok' if ok else 'exceeds 10%'}")
