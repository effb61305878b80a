"""
Cauchy transform and logarithmic potential of a disk
====================================================

The two convolution operators that everything else is built on, applied to
the indicator of the unit disk, and checked against their closed forms:

* the Cauchy transform comes out as conj(w) inside the disk and 1/w outside,
  and differentiating it with respect to conj(w) recovers the source;
* the logarithmic potential has the radial profile r^2/4 - 1/4 inside and
  (1/2) log r outside, and its Laplacian recovers the source.
"""

import numpy as np

from qcdirichlet import Grid, cauchy_transform, log_potential, wirtinger_derivatives
from qcdirichlet.fields import field_from_callable

# a box four times the disk so the compact-support margin is comfortable
grid = Grid(0j, 4.0, 512)
S = field_from_callable(grid, lambda z: (np.abs(z) < 1).astype(complex), supersample=3)

H = cauchy_transform(S)
print("Cauchy transform of the unit-disk indicator")
for w, expect in ((0.0, 0.0), (0.5, 0.5), (2.0, 0.5)):
    print(f"  H({w}) = {H.at(w).real:+.5f}   closed form {expect:+.5f}")

# dH/dzbar returns the source (away from the indicator jump, where no
# difference stencil can converge)
_, Hzb = wirtinger_derivatives(H)
Z = grid.nodes()
away = np.abs(np.abs(Z) - 1.0) > 3 * grid.spacing
resid = np.abs(Hzb.values - S.values)[away]
print(f"  || dH/dzbar - S ||_2 away from the jump: "
      f"{np.sqrt(np.sum(resid**2) * grid.cell_area):.2e}")

G = field_from_callable(grid, lambda z: (np.abs(z) < 1).astype(float),
                        supersample=3, real=True)
N = log_potential(G)
print("\nLogarithmic potential of the same indicator")
for r, expect in ((0.0, -0.25), (1.0, 0.0), (2.0, np.log(2) / 2)):
    print(f"  N({r}) = {N.at(r):+.5f}   closed form {expect:+.5f}")
print(f"  center-normalized N(2) - N(0) = {N.at(2.0) - N.at(0.0):+.5f} "
      f"(radial profile value {np.log(2)/2 + 0.25:+.5f})")

# optional pictures
try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    ext = [-4, 4, -4, 4]
    axes[0].imshow(H.values.real.T, origin="lower", extent=ext, cmap="RdBu_r")
    axes[0].set_title("Re Cauchy transform")
    axes[1].imshow(N.values.T, origin="lower", extent=ext, cmap="viridis")
    axes[1].set_title("log potential")
    fig.tight_layout()
    fig.savefig("demo_singular_integrals.png", dpi=110)
    print("\nwrote demo_singular_integrals.png")
except ImportError:
    pass
