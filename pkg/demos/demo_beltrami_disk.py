"""
Dirichlet problem for the Beltrami equation with a source
=========================================================

Solves  omega_zbar = mu omega_z + sigma  on the unit disk with
Re omega = phi on the circle, through the factorization

    omega = (A + H) o f,

where f straightens the coefficient, H absorbs the pushed-forward source
via a Cauchy transform, and A is the holomorphic completion of a harmonic
Dirichlet solve on the image domain.

Two runs:
  1. mu = 0, sigma = indicator of the half disk, phi = 0: omega has the
     assembled closed form -w/4 + H(w), giving omega(0.8) = 0.1125;
  2. a radial-stretch mu with phi = cos(theta): the image domain is again
     the unit disk and omega reduces to the map itself.
"""

import numpy as np

from qcdirichlet import BeltramiProblem, solve_beltrami
from qcdirichlet.fields import BoundaryData, Grid, field_from_callable
from qcdirichlet.presets import boundary_data_preset, domain_preset, mu_preset, radial_stretch_map

grid = Grid(0j, 2.0, 256)
disk = domain_preset("disk", samples=512)
zero = field_from_callable(grid, lambda z: np.zeros_like(z))

# --- run 1: pure source ------------------------------------------------
sigma = field_from_callable(grid, lambda z: (np.abs(z) <= 0.5).astype(complex),
                            supersample=3)
problem = BeltramiProblem(disk, zero, sigma, BoundaryData(disk, np.zeros(disk.m)),
                          anchor=0.8 + 0j)
sol = solve_beltrami(problem)
w = sol.evaluate(np.array([0.8 + 0j]))[0]
print("source run:")
print(f"  omega(0.8) = {w.real:+.5f}  (assembled closed form +0.11250)")
print(f"  interior residual  {sol.report.interior_l2:.2e}")
print(f"  boundary sup error {sol.report.boundary_sup:.2e}")
print(f"  gauge Im omega(anchor) = {sol.report.gauge_imag:+.1e}")
print(f"  source norms on the image domain: "
      + ", ".join(f"{k}={v:.3f}" for k, v in sol.source_lp.items()))

# --- run 2: coefficient only -------------------------------------------
mu = field_from_callable(grid, mu_preset("radial-stretch", K=2.0), supersample=3)
problem2 = BeltramiProblem(disk, mu, zero, boundary_data_preset("cos-harmonic", disk),
                           anchor=0j)
sol2 = solve_beltrami(problem2)
Z = grid.nodes()
oracle = radial_stretch_map(2.0)(Z)
ok = sol2.omega.unmasked & ~sol2.omega.near_boundary
print("\nradial-stretch run:")
print(f"  max |omega - z|z|| on reliable nodes: "
      f"{np.max(np.abs(sol2.omega.values - oracle)[ok]):.2e}")
print(f"  interior residual  {sol2.report.interior_l2:.2e}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    show = np.where(sol.omega.unmasked, sol.omega.values.real, np.nan)
    axes[0].imshow(show.T, origin="lower", extent=[-2, 2, -2, 2], cmap="RdBu_r")
    axes[0].set_title("Re omega, source run")
    show2 = np.where(sol2.omega.unmasked, sol2.omega.values.real, np.nan)
    axes[1].imshow(show2.T, origin="lower", extent=[-2, 2, -2, 2], cmap="RdBu_r")
    axes[1].set_title("Re omega, radial-stretch run")
    fig.tight_layout()
    fig.savefig("demo_beltrami_disk.png", dpi=110)
    print("\nwrote demo_beltrami_disk.png")
except ImportError:
    pass
