"""Construction of normalized mu-conformal homeomorphisms of the plane.

Given a compactly supported Beltrami coefficient mu with |mu| <= k < 1 on the
grid, the homeomorphic solution of f_zbar = mu f_z with hydrodynamic
normalization f(z) = z + O(1/z) is built from the singular-integral fixed
point

    h = mu * B(h) + mu,      f = z + C(h),

where B is the Beurling transform and C the Cauchy transform.  Since B is a
unimodular multiplier, the iteration contracts with factor k in L2 and the
returned derivatives f_z = 1 + B(h), f_zbar = h satisfy the Beltrami relation
to the stopping tolerance by construction.

Coefficients whose dilatation blows up toward a domain boundary are handled
by a truncation ladder: the modulus of mu is clipped so the dilatation stays
under an increasing sequence of caps, each level is solved, and the
sup-distance of consecutive maps on a fixed interior compact is recorded.  A
Cauchy trace that falls under tolerance certifies (numerically) that the
truncated maps have stabilized; a trace that refuses to contract is the
signature of an inadmissible boundary singularity.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .fields import ComplexField, RealField, Grid
from .transforms import beurling_transform, cauchy_transform

__all__ = [
    "QCMap",
    "TruncationLadder",
    "solve_mu_conformal",
    "solve_degenerate",
    "invert",
    "homeomorphism_probe",
    "NonContractionError",
    "InversionError",
]

DEFAULT_CAPS = (2, 4, 8, 16, 32, 64)
NEWTON_MAX_STEPS = 50


class NonContractionError(RuntimeError):
    """Raised when the fixed-point iteration cannot contract (k_max >= 1)."""


class InversionError(RuntimeError):
    """Raised when a point cannot be inverted through the map."""


@dataclass
class QCMap:
    """A computed mu-conformal homeomorphism with derivatives and inverse.

    Attributes
    ----------
    mu : ComplexField
        The Beltrami coefficient actually solved (zero-extended, clipped).
    f : ComplexField
        Forward map values, normalized so f(z) ~ z far from supp mu.
    f_z, f_zbar : ComplexField
        Wirtinger derivatives produced by the solver (consistent with f).
    J : RealField
        Jacobian |f_z|^2 - |f_zbar|^2; positive at every node.
    residual : float
        Relative Beltrami residual ||f_zbar - mu f_z||_2 / ||1 + |f_z|||_2.
    iterations : int
        Fixed-point iterations used.
    """

    mu: ComplexField
    f: ComplexField
    f_z: ComplexField
    f_zbar: ComplexField
    J: RealField
    residual: float
    iterations: int
    _seed_tree: Optional[cKDTree] = dc_field(default=None, repr=False)
    _seed_tri: Optional[Delaunay] = dc_field(default=None, repr=False)
    _seed_z: Optional[np.ndarray] = dc_field(default=None, repr=False)

    @property
    def grid(self) -> Grid:
        return self.f.grid

    def forward(self, z: np.ndarray) -> np.ndarray:
        """Map points forward by bilinear interpolation of f."""
        return self.f.interp(z)

    def derivatives_at(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.f_z.interp(z), self.f_zbar.interp(z)

    # -- inverse ------------------------------------------------------

    def _build_seed(self, stride: int = 4) -> None:
        g = self.grid
        Z = g.nodes()[::stride, ::stride].ravel()
        W = self.f.values[::stride, ::stride].ravel()
        pts = np.c_[W.real, W.imag]
        self._seed_tree = cKDTree(pts)
        try:
            self._seed_tri = Delaunay(pts)
        except Exception:  # degenerate point sets: nearest-node seeding still works
            self._seed_tri = None
        self._seed_z = Z

    def seed_points(self, w: np.ndarray) -> np.ndarray:
        """Initial inverse guesses from the triangulated image lookup."""
        if self._seed_tree is None:
            self._build_seed()
        w = np.asarray(w, dtype=complex)
        pts = np.c_[w.real.ravel(), w.imag.ravel()]
        z0 = np.empty(pts.shape[0], dtype=complex)
        filled = np.zeros(pts.shape[0], dtype=bool)
        if self._seed_tri is not None:
            simp = self._seed_tri.find_simplex(pts)
            inside = simp >= 0
            if np.any(inside):
                tr = self._seed_tri.transform[simp[inside]]
                d = pts[inside] - tr[:, 2, :]
                bary2 = np.einsum("nij,nj->ni", tr[:, :2, :], d)
                bary = np.c_[bary2, 1.0 - bary2.sum(axis=1)]
                verts = self._seed_tri.simplices[simp[inside]]
                z0[inside] = np.sum(self._seed_z[verts] * bary, axis=1)
                filled |= inside
        if np.any(~filled):
            _, idx = self._seed_tree.query(pts[~filled])
            z0[~filled] = self._seed_z[idx]
        return z0.reshape(w.shape)

    def invert_points(self, w: np.ndarray, tol: Optional[float] = None) -> np.ndarray:
        """Vectorized inverse via seeded damped Newton; see ``invert``."""
        g = self.grid
        if tol is None:
            tol = 1e-9 * g.half_width
        w = np.asarray(w, dtype=complex)
        flat_w = w.ravel()
        flat_z = self.seed_points(flat_w).ravel().astype(complex)
        lim = g.half_width - 1.5 * g.spacing
        active = np.ones(flat_z.size, dtype=bool)
        for _ in range(NEWTON_MAX_STEPS):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            za = flat_z[idx]
            r = self.f.interp(za) - flat_w[idx]
            conv = np.abs(r) <= tol
            active[idx[conv]] = False
            idx = idx[~conv]
            if idx.size == 0:
                break
            za, r = za[~conv], r[~conv]
            fz, fzb = self.derivatives_at(za)
            J = np.abs(fz) ** 2 - np.abs(fzb) ** 2
            J = np.where(np.abs(J) < 1e-300, 1e-300, J)
            dz = (np.conj(fz) * r - fzb * np.conj(r)) / J
            damp = np.minimum(1.0, 8 * g.spacing / np.maximum(np.abs(dz), 1e-300))
            zn = za - dz * damp
            zn = (
                np.clip(zn.real, g.center.real - lim, g.center.real + lim)
                + 1j * np.clip(zn.imag, g.center.imag - lim, g.center.imag + lim)
            )
            flat_z[idx] = zn
        res = np.abs(self.f.interp(flat_z) - flat_w)
        stuck = res > 100 * tol
        if np.any(stuck):
            seeds = self.seed_points(flat_w[stuck]).ravel()
            flat_z[stuck] = _segment_search(self, flat_w[stuck], seeds, flat_z[stuck], tol)
            res = np.abs(self.f.interp(flat_z) - flat_w)
            stuck = res > 1000 * tol
            if np.any(stuck):
                k = int(np.argmax(res))
                raise InversionError(
                    f"inversion failed for w = {flat_w[k]:.6g} (residual {res[k]:.3g}); "
                    "the point may lie outside the numerical image"
                )
        return flat_z.reshape(w.shape)


def _segment_search(qmap: QCMap, w: np.ndarray, za: np.ndarray, zb: np.ndarray, tol: float) -> np.ndarray:
    """Bisection-style fallback along the segment between seed and iterate."""
    fa = np.abs(qmap.f.interp(za) - w)
    fb = np.abs(qmap.f.interp(zb) - w)
    lo = np.where(fa <= fb, za, zb)
    hi = np.where(fa <= fb, zb, za)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm = np.abs(qmap.f.interp(mid) - w)
        flo = np.abs(qmap.f.interp(lo) - w)
        hi = np.where(fm < flo, hi, mid)
        lo = np.where(fm < flo, mid, lo)
        if np.all(np.abs(hi - lo) < tol):
            break
    return lo


def invert(qc_map: QCMap, w: complex, tol: Optional[float] = None) -> complex:
    """Invert a single point: return z with |f(z) - w| within tolerance.

    Seeds from the triangulated image lookup and refines by Newton steps
    using the solver's own (f_z, f_zbar); falls back to a segment search when
    Newton stalls.  Default tolerance is 1e-9 times the box half-width.
    """
    return complex(qc_map.invert_points(np.asarray([w], dtype=complex), tol=tol)[0])


# ----------------------------------------------------------------------
# Uniformly elliptic solve
# ----------------------------------------------------------------------

def _zero_extended(mu: ComplexField) -> np.ndarray:
    return mu.values if mu.mask is None else np.where(mu.mask, mu.values, 0.0)


def _fixed_point(grid: Grid, mu_vals: np.ndarray, stop: float, warm: Optional[np.ndarray],
                 max_iterations: int) -> tuple[np.ndarray, int]:
    h = np.zeros_like(mu_vals) if warm is None else warm.copy()
    sq_area = np.sqrt(grid.cell_area)
    for it in range(1, max_iterations + 1):
        Bh = beurling_transform(ComplexField(grid, h)).values
        h_new = mu_vals * Bh + mu_vals
        diff = np.linalg.norm(h_new - h) * sq_area
        h = h_new
        if diff < stop:
            return h, it
    raise NonContractionError(
        f"fixed point not reached in {max_iterations} iterations "
        f"(k_max = {np.max(np.abs(mu_vals)):.4g})"
    )


def _assemble_map(grid: Grid, mu_eff: ComplexField, h: np.ndarray, iterations: int) -> QCMap:
    hf = ComplexField(grid, h)
    if np.any(h):
        f_z = 1.0 + beurling_transform(hf).values
        f = grid.nodes() + cauchy_transform(hf).values
    else:
        f_z = np.ones_like(h)
        f = grid.nodes().astype(complex)
    J = np.abs(f_z) ** 2 - np.abs(h) ** 2
    resid = float(
        np.linalg.norm(h - mu_eff.values * f_z) / np.linalg.norm(1.0 + np.abs(f_z))
    )
    return QCMap(
        mu=mu_eff,
        f=ComplexField(grid, f),
        f_z=ComplexField(grid, f_z),
        f_zbar=hf,
        J=RealField(grid, J),
        residual=resid,
        iterations=iterations,
    )


def solve_mu_conformal(
    mu: ComplexField,
    tol: float = 1e-6,
    max_iterations: int = 20000,
) -> QCMap:
    """Solve f_zbar = mu f_z for a normalized homeomorphism, |mu| <= k < 1.

    Fixed-point iteration h <- mu B(h) + mu, stopped when consecutive
    iterates differ by less than ``tol`` in L2; then f = z + C(h).  Masked
    coefficients are zero-extended outside the mask before solving.
    Degenerate coefficients (unbounded dilatation) go through
    ``solve_degenerate`` instead.

    Raises
    ------
    NonContractionError
        If max |mu| >= 1 on the grid, or the iteration cap is exceeded.
    """
    g = mu.grid
    vals = _zero_extended(mu)
    kmax = float(np.max(np.abs(vals)))
    if kmax >= 1.0:
        raise NonContractionError(
            f"max |mu| = {kmax:.6g} >= 1: iteration cannot contract; "
            "clip the coefficient (solve_degenerate) first"
        )
    mu_eff = ComplexField(g, vals)
    if kmax == 0.0:
        return _assemble_map(g, mu_eff, np.zeros_like(vals), 0)
    h, it = _fixed_point(g, vals, tol, None, max_iterations)
    return _assemble_map(g, mu_eff, h, it)


# ----------------------------------------------------------------------
# Degenerate coefficients: truncation ladder
# ----------------------------------------------------------------------

@dataclass
class TruncationLadder:
    """Sequence of solves under increasing dilatation caps.

    ``convergence_trace[i]`` is the sup-distance between the maps at caps
    ``levels[i]`` and ``levels[i+1]`` over the probe compact.  ``converged``
    is set when the trace fell under tolerance; ``final`` is the last map
    (the stabilized one when the ladder converged).
    """

    levels: list
    maps: list
    convergence_trace: list
    probe_mask: np.ndarray
    tol: float
    converged: bool

    @property
    def final(self) -> QCMap:
        return self.maps[-1]


def clip_to_cap(mu_values: np.ndarray, cap: float) -> np.ndarray:
    """Rescale |mu| so the pointwise dilatation stays <= cap, preserving arg mu."""
    if cap <= 1:
        raise ValueError("dilatation cap must exceed 1")
    k_cap = (cap - 1.0) / (cap + 1.0)
    absmu = np.abs(mu_values)
    scale = np.where(absmu > k_cap, k_cap / np.where(absmu == 0, 1.0, absmu), 1.0)
    return mu_values * scale


def solve_degenerate(
    mu: ComplexField,
    caps: Sequence[float] = DEFAULT_CAPS,
    tol: float = 1e-3,
    inner_tol: float = 1e-8,
    probe_mask: Optional[np.ndarray] = None,
    probe_margin: float = 0.1,
) -> TruncationLadder:
    """Truncation-ladder solve for coefficients degenerating at the boundary.

    |mu| < 1 pointwise is required, but the dilatation may be unbounded near
    the domain boundary (the masked region of ``mu``, when present).  For each
    cap the coefficient is radially clipped, solved (warm-started from the
    previous level), and the sup-distance of consecutive maps recorded on the
    probe compact: by default the domain nodes at depth >= ``probe_margin``
    times the domain extent, since interior regularity is all a truncation
    argument can promise.

    The ladder stops early once the trace falls under ``tol``; if it runs out
    of caps, the trace is returned with ``converged=False`` and the caller
    decides (the criteria module predicts which behavior to expect).
    """
    g = mu.grid
    vals = _zero_extended(mu)
    absv = np.abs(vals)
    if np.max(absv) >= 1.0:
        i, j = np.argwhere(absv >= 1.0)[0]
        raise NonContractionError(
            f"|mu| >= 1 at node ({i}, {j}); degenerate solves still need |mu| < 1 pointwise"
        )
    caps = sorted(set(float(c) for c in caps))
    if probe_mask is None:
        probe_mask = _default_probe(mu, probe_margin)
    maps: list[QCMap] = []
    trace: list[float] = []
    converged = False
    warm = None
    for cap in caps:
        clipped = clip_to_cap(vals, cap)
        k_cap = float(np.max(np.abs(clipped)))
        stop = inner_tol * max(1.0 - k_cap, 1e-6)
        h, it = _fixed_point(g, clipped, stop, warm, 40000)
        warm = h
        qc = _assemble_map(g, ComplexField(g, clipped), h, it)
        if maps:
            trace.append(float(np.max(np.abs(qc.f.values - maps[-1].f.values)[probe_mask])))
        maps.append(qc)
        if trace and trace[-1] < tol:
            converged = True
            break
    return TruncationLadder(
        levels=caps[: len(maps)],
        maps=maps,
        convergence_trace=trace,
        probe_mask=probe_mask,
        tol=tol,
        converged=converged,
    )


def _default_probe(mu: ComplexField, probe_margin: float) -> np.ndarray:
    """Interior compact: region nodes within (1 - 2*margin)/2 * extent of its center."""
    g = mu.grid
    region = mu.mask
    if region is None:
        region = np.abs(mu.values) > 0
        if not region.any():
            return np.ones((g.n, g.n), dtype=bool)
    Z = g.nodes()
    inside = Z[region]
    extent = max(np.ptp(inside.real), np.ptp(inside.imag))
    c = complex(
        0.5 * (inside.real.min() + inside.real.max()),
        0.5 * (inside.imag.min() + inside.imag.max()),
    )
    shrunk = region & (np.abs(Z - c) <= (0.5 - probe_margin) * extent)
    return shrunk if shrunk.any() else region


# ----------------------------------------------------------------------
# Homeomorphism diagnostics
# ----------------------------------------------------------------------

def homeomorphism_probe(qc_map: QCMap, fraction: float = 0.01, seed: int = 2718) -> dict:
    """Check images of a random cell sample for degeneracy and overlap.

    Each sampled grid cell maps to a quadrilateral; the probe verifies both
    triangles of each image quad keep positive orientation and that no two
    sampled quads properly overlap (segment-intersection test after a
    bounding-box prefilter).
    """
    g = qc_map.grid
    rng = np.random.default_rng(seed)
    n_cells = (g.n - 1) ** 2
    count = max(16, int(fraction * n_cells))
    idx = rng.choice(n_cells, size=min(count, n_cells), replace=False)
    ii, jj = idx // (g.n - 1), idx % (g.n - 1)
    f = qc_map.f.values
    quads = np.stack([f[ii, jj], f[ii + 1, jj], f[ii + 1, jj + 1], f[ii, jj + 1]], axis=1)

    def tri_area2(a, b, c):
        return np.real(np.conj(b - a) * (c - a) * -1j)

    a1 = tri_area2(quads[:, 0], quads[:, 1], quads[:, 2])
    a2 = tri_area2(quads[:, 0], quads[:, 2], quads[:, 3])
    degenerate = int(np.sum((a1 <= 0) | (a2 <= 0)))

    overlaps = 0
    lo = np.c_[quads.real.min(axis=1), quads.imag.min(axis=1)]
    hi = np.c_[quads.real.max(axis=1), quads.imag.max(axis=1)]
    order = np.argsort(lo[:, 0])
    for a_pos, a in enumerate(order):
        for b in order[a_pos + 1:]:
            if lo[b, 0] > hi[a, 0]:
                break
            if lo[b, 1] > hi[a, 1] or hi[b, 1] < lo[a, 1]:
                continue
            if _quads_properly_overlap(quads[a], quads[b]):
                overlaps += 1
    return {
        "sampled": int(quads.shape[0]),
        "degenerate": degenerate,
        "overlapping_pairs": overlaps,
        "ok": degenerate == 0 and overlaps == 0,
    }


def _quads_properly_overlap(qa: np.ndarray, qb: np.ndarray) -> bool:
    """Proper overlap test: edge crossing, or one centroid strictly inside the other."""
    if min(abs(p - q) for p in qa for q in qb) < 1e-15:
        return False  # adjacent cells legitimately share edges or corners
    for p1, p2 in zip(qa, np.roll(qa, -1)):
        for q1, q2 in zip(qb, np.roll(qb, -1)):
            if _segments_cross(p1, p2, q1, q2):
                return True
    return _point_in_quad(qb.mean(), qa) or _point_in_quad(qa.mean(), qb)


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return np.sign(np.real(np.conj(b - a) * (c - a) * -1j))

    return (
        orient(p1, p2, q1) * orient(p1, p2, q2) < 0
        and orient(q1, q2, p1) * orient(q1, q2, p2) < 0
    )


def _point_in_quad(p, quad) -> bool:
    signs = [
        np.sign(np.real(np.conj(b - a) * (p - a) * -1j))
        for a, b in zip(quad, np.roll(quad, -1))
    ]
    return all(s > 0 for s in signs) or all(s < 0 for s in signs)
