"""Dirichlet problem for harmonic functions on Jordan domains, and the
harmonic conjugate that completes them to holomorphic functions.

The Dirichlet solve uses the classical double-layer potential ansatz.  With
boundary samples y_k of a positively oriented closed curve and density rho,

    u(z) = (dt / 2 pi) * sum_k rho_k Im[ y'_k / (y_k - z) ],

the interior limit produces the second-kind equation (I/2 + K) rho = phi,
discretized by the Nystrom method with the trapezoidal rule (spectrally
accurate on smooth curves) and solved densely.  Evaluation at grid nodes
closer to the boundary than two boundary spacings is unreliable with plain
quadrature; those nodes are flagged and their values replaced by the nearest
boundary datum rather than silently returned.

The conjugate is produced by integrating the conjugate differential
(-u_y dx + u_x dy) along grid paths of a spanning tree rooted at an anchor
node; on a simply connected region the loop integrals vanish, and the
residual of random closed loops is itself a quality diagnostic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fields import BoundaryData, DomainSpec, Grid, RealField, _partial

__all__ = [
    "DoubleLayerSolution",
    "solve_dirichlet_harmonic",
    "harmonic_conjugate",
    "ConjugateReport",
]

NEAR_BOUNDARY_SPACINGS = 2.0


@dataclass
class DoubleLayerSolution:
    """Boundary density with direct evaluation, from a Nystrom Dirichlet solve."""

    domain: DomainSpec
    density: np.ndarray
    tangent: np.ndarray  # dy/dt at the samples (parameter in [0, 2pi))

    def evaluate(self, z: np.ndarray, chunk: int = 4096) -> np.ndarray:
        """Evaluate the double-layer potential at strictly interior points."""
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        out = np.empty(flat.shape, dtype=float)
        bd = self.domain.boundary
        dt = 2 * np.pi / self.domain.m
        w = self.density * dt / (2 * np.pi)
        for s in range(0, flat.size, chunk):
            blk = flat[s : s + chunk]
            D = bd[None, :] - blk[:, None]
            out[s : s + chunk] = np.imag(self.tangent[None, :] / D) @ w
        return out.reshape(z.shape)


def _spectral_curve_derivatives(bd: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = bd.size
    freq = 1j * np.fft.fftfreq(m, d=1.0 / m)
    hat = np.fft.fft(bd)
    yp = np.fft.ifft(hat * freq)
    ypp = np.fft.ifft(hat * freq**2)
    return yp, ypp


def solve_dirichlet_harmonic(
    domain: DomainSpec,
    phi: BoundaryData,
    grid: Grid,
    return_solution: bool = False,
):
    """Solve the Dirichlet problem for a harmonic function on ``domain``.

    Returns a RealField on ``grid`` masked to the domain interior, attaining
    ``phi`` continuously at the boundary.  Nodes within two boundary spacings
    of the curve are excluded from the reliable mask (attribute
    ``near_boundary``) and filled with the nearest boundary value.

    With ``return_solution=True`` also returns the DoubleLayerSolution for
    direct (grid-free) evaluation at interior points.
    """
    if phi.domain is not domain and phi.values.size != domain.m:
        raise ValueError("boundary data and domain sample counts differ")
    bd = domain.boundary
    m = domain.m
    yp, ypp = _spectral_curve_derivatives(bd)
    dt = 2 * np.pi / m
    D = bd[None, :] - bd[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        K = np.imag(yp[None, :] / D) / (2 * np.pi)
    K[np.arange(m), np.arange(m)] = np.imag(ypp / (2 * yp)) / (2 * np.pi)
    A = 0.5 * np.eye(m) + K * dt
    rho = np.linalg.solve(A, phi.values)
    sol = DoubleLayerSolution(domain=domain, density=rho, tangent=yp)

    Z = grid.nodes()
    inside = domain.contains(Z)
    dist = domain.boundary_distance(Z)
    spacing_local = np.abs(np.roll(bd, -1) - bd)
    near = inside & (dist < NEAR_BOUNDARY_SPACINGS * spacing_local.max())

    vals = np.zeros(Z.shape, dtype=float)
    safe = inside & ~near
    if np.any(safe):
        vals[safe] = sol.evaluate(Z[safe])
    if np.any(near):
        # zeroth-order extrapolation from the boundary data (u is continuous
        # up to the boundary); these nodes stay flagged
        znear = Z[near]
        d2 = np.abs(znear[:, None] - bd[None, :])
        vals[near] = phi.values[np.argmin(d2, axis=1)]
    u = RealField(grid, vals, inside)
    u.near_boundary = near
    if return_solution:
        return u, sol
    return u


# ----------------------------------------------------------------------
# Harmonic conjugate by path integration
# ----------------------------------------------------------------------

@dataclass
class ConjugateReport:
    """Loop-closure diagnostics of a conjugate integration."""

    max_loop_residual: float
    loops_tested: int


def harmonic_conjugate(
    u: RealField,
    domain: Optional[DomainSpec] = None,
    anchor: complex = 0j,
    loop_tolerance: float = 1e-6,
    rng_seed: int = 2718,
    return_report: bool = False,
):
    """Conjugate v with u + i v holomorphic, normalized to v(anchor) = 0.

    v is accumulated along a breadth-first spanning tree of the reliable
    nodes of ``u`` (its mask minus any near-boundary flag), using trapezoidal
    increments of the conjugate differential (-u_y dx + u_x dy).  Path
    independence holds on simply connected regions up to discretization;
    closed-loop residuals over random interior rectangles are measured and a
    loop residual above ``loop_tolerance`` (relative to the data scale) is
    reported, signalling a defective field or domain.
    """
    g = u.grid
    h = g.spacing
    reliable = u.unmasked.copy()
    flag = getattr(u, "near_boundary", None)
    if flag is not None:
        reliable &= ~flag
    # integrate only where the centered stencil sees reliable values on all
    # sides, otherwise extrapolated near-boundary nodes pollute the gradient
    region = reliable.copy()
    region[1:, :] &= reliable[:-1, :]
    region[:-1, :] &= reliable[1:, :]
    region[:, 1:] &= reliable[:, :-1]
    region[:, :-1] &= reliable[:, 1:]
    ux = _partial(u.values, h, axis=0)
    uy = _partial(u.values, h, axis=1)

    i0, j0 = g.index_of(anchor)
    if not region[i0, j0]:
        ii, jj = np.nonzero(region)
        if ii.size == 0:
            raise ValueError("no reliable nodes to integrate over")
        k = int(np.argmin((ii - i0) ** 2 + (jj - j0) ** 2))
        i0, j0 = int(ii[k]), int(jj[k])

    v = np.full_like(u.values, np.nan)
    v[i0, j0] = 0.0
    seen = np.zeros_like(region)
    seen[i0, j0] = True
    queue = deque([(i0, j0)])
    n = g.n
    while queue:
        i, j = queue.popleft()
        base = v[i, j]
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = i + di, j + dj
            if not (0 <= a < n and 0 <= b < n) or seen[a, b] or not region[a, b]:
                continue
            if di:
                inc = -0.5 * (uy[i, j] + uy[a, b]) * (di * h)
            else:
                inc = 0.5 * (ux[i, j] + ux[a, b]) * (dj * h)
            v[a, b] = base + inc
            seen[a, b] = True
            queue.append((a, b))

    v = np.where(seen, v, 0.0)
    # re-anchor exactly (the anchor node may have shifted to the nearest
    # reliable node; gauge v = 0 there)
    v -= v[i0, j0]

    report = _loop_residuals(ux, uy, region, h, rng_seed)
    scale = max(float(np.max(np.abs(u.values[region]))) if region.any() else 0.0, 1e-30)
    if report.max_loop_residual > loop_tolerance * max(scale, 1.0):
        import warnings

        warnings.warn(
            f"conjugate loop residual {report.max_loop_residual:.3g} exceeds tolerance; "
            "the field may not be harmonic or the region may not be simply connected",
            RuntimeWarning,
            stacklevel=2,
        )
    out = RealField(g, v, seen)
    out.near_boundary = getattr(u, "near_boundary", None)
    if return_report:
        return out, report
    return out


def _loop_residuals(ux, uy, region, h, seed, loops: int = 10) -> ConjugateReport:
    rng = np.random.default_rng(seed)
    ii, jj = np.nonzero(region)
    worst = 0.0
    tested = 0
    attempts = 0
    while tested < loops and attempts < 200 and ii.size:
        attempts += 1
        k = rng.integers(ii.size)
        i, j = int(ii[k]), int(jj[k])
        w = int(rng.integers(2, 9))
        t = int(rng.integers(2, 9))
        if i + w >= region.shape[0] or j + t >= region.shape[1]:
            continue
        if not region[i : i + w + 1, j : j + t + 1].all():
            continue
        r = 0.0
        for a in range(i, i + w):  # bottom, rightward
            r += -0.5 * (uy[a, j] + uy[a + 1, j]) * h
        for b in range(j, j + t):  # right side, upward
            r += 0.5 * (ux[i + w, b] + ux[i + w, b + 1]) * h
        for a in range(i + w, i, -1):  # top, leftward
            r += -0.5 * (uy[a, j + t] + uy[a - 1, j + t]) * (-h)
        for b in range(j + t, j, -1):  # left side, downward
            r += 0.5 * (ux[i, b] + ux[i, b - 1]) * (-h)
        worst = max(worst, abs(r))
        tested += 1
    return ConjugateReport(max_loop_residual=float(worst), loops_tested=tested)
