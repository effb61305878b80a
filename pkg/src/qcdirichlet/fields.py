"""Grid-sampled planar fields and the dilatation calculus built on them.

Everything downstream works on complex or real functions sampled on a uniform
Cartesian grid over a square box.  Grids have a power-of-two number of nodes
per side so that FFT-based operators never need resizing.  Node (i, j) sits at

    center + (-L + i*spacing) + 1j*(-L + j*spacing),   spacing = 2L/n,

i.e. the first array axis is x and the second is y, and the box is the
half-open square [-L, L) x [-L, L) around ``center``.

Fields may carry a boolean ``mask`` marking nodes that belong to a domain of
interest; by convention the dilatation quotients are reported as 1 at masked
out nodes (the coefficient is extended conformally outside the domain).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np
import shapely

__all__ = [
    "Grid",
    "ComplexField",
    "RealField",
    "DomainSpec",
    "BoundaryData",
    "field_from_callable",
    "wirtinger_derivatives",
    "dilatation_quotient",
    "tangent_dilatation",
]


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform n-by-n Cartesian grid over the box [-L, L)^2 around a center.

    Parameters
    ----------
    center : complex
        Box center.
    half_width : float
        Half side length L > 0.
    n : int
        Nodes per side; must be a power of two, at least 8.
    """

    center: complex
    half_width: float
    n: int

    def __post_init__(self):
        if not (self.half_width > 0):
            raise ValueError(f"half_width must be positive, got {self.half_width}")
        if self.n < 8 or not _is_power_of_two(self.n):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def cell_area(self) -> float:
        return self.spacing ** 2

    def axis(self) -> np.ndarray:
        """1-D node coordinates along one axis, relative to the center."""
        return -self.half_width + self.spacing * np.arange(self.n)

    def nodes(self) -> np.ndarray:
        """Complex node positions, shape (n, n), axis 0 = x, axis 1 = y."""
        ax = self.axis()
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        return self.center + X + 1j * Y

    def index_of(self, z: complex) -> tuple[int, int]:
        """Indices of the node nearest to ``z`` (must fall inside the box)."""
        w = complex(z) - self.center
        i = int(round((w.real + self.half_width) / self.spacing))
        j = int(round((w.imag + self.half_width) / self.spacing))
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise ValueError(f"point {z} falls outside the grid box")
        return i, j

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Grid)
            and self.n == other.n
            and self.half_width == other.half_width
            and self.center == other.center
        )


class _FieldBase:
    """Shared machinery of ComplexField / RealField."""

    _dtype: type

    def __init__(self, grid: Grid, values: np.ndarray, mask: Optional[np.ndarray] = None):
        values = np.asarray(values, dtype=self._dtype)
        if values.shape != (grid.n, grid.n):
            raise ValueError(f"values shape {values.shape} != ({grid.n}, {grid.n})")
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != values.shape:
                raise ValueError(f"mask shape {mask.shape} != values shape {values.shape}")
        check = values if mask is None else values[mask]
        if check.size and not np.all(np.isfinite(check)):
            raise ValueError("non-finite values at unmasked nodes")
        self.grid = grid
        self.values = values
        self.mask = mask

    # -- basic queries ------------------------------------------------

    @property
    def unmasked(self) -> np.ndarray:
        """Boolean array of valid nodes (all True when there is no mask)."""
        if self.mask is None:
            return np.ones((self.grid.n, self.grid.n), dtype=bool)
        return self.mask

    def with_values(self, values: np.ndarray, mask: Optional[np.ndarray] = "keep"):
        if isinstance(mask, str) and mask == "keep":
            mask = self.mask
        return type(self)(self.grid, values, mask)

    def at(self, z: complex):
        """Value at the node nearest to ``z``."""
        i, j = self.grid.index_of(z)
        return self.values[i, j]

    def interp(self, points: np.ndarray) -> np.ndarray:
        """Bilinear interpolation at complex ``points`` (clipped to the box)."""
        pts = np.asarray(points, dtype=complex)
        g = self.grid
        fx = (pts.real - (g.center.real - g.half_width)) / g.spacing
        fy = (pts.imag - (g.center.imag - g.half_width)) / g.spacing
        fx = np.clip(fx, 0.0, g.n - 1.0 - 1e-12)
        fy = np.clip(fy, 0.0, g.n - 1.0 - 1e-12)
        i0 = np.floor(fx).astype(int)
        j0 = np.floor(fy).astype(int)
        tx = fx - i0
        ty = fy - j0
        v = self.values
        out = (
            v[i0, j0] * (1 - tx) * (1 - ty)
            + v[i0 + 1, j0] * tx * (1 - ty)
            + v[i0, j0 + 1] * (1 - tx) * ty
            + v[i0 + 1, j0 + 1] * tx * ty
        )
        return out

    def norm_l2(self) -> float:
        """Discrete L2 norm sqrt(sum |v|^2 * cell_area) over unmasked nodes."""
        v = self.values[self.unmasked]
        return float(np.sqrt(np.sum(np.abs(v) ** 2) * self.grid.cell_area))

    def norm_lp(self, p: float) -> float:
        """Discrete Lp norm over unmasked nodes."""
        v = np.abs(self.values[self.unmasked])
        return float((np.sum(v ** p) * self.grid.cell_area) ** (1.0 / p))

    def support_margin(self, threshold: float = 0.0) -> float:
        """Distance from the support {|v| > threshold} to the box edge.

        Returns +inf for an identically-zero field.
        """
        g = self.grid
        absv = np.abs(self.values)
        if threshold <= 0:
            threshold = 1e-13 * max(float(absv.max()), 1e-300)
        ii, jj = np.nonzero(absv > threshold)
        if ii.size == 0:
            return float("inf")
        ax = g.axis()
        dx = g.half_width - np.abs(ax[ii])
        dy = g.half_width - np.abs(ax[jj])
        return float(min(dx.min(), dy.min()))


class ComplexField(_FieldBase):
    """Complex-valued function sampled on a Grid, with an optional domain mask."""

    _dtype = complex


class RealField(_FieldBase):
    """Real-valued function sampled on a Grid, with an optional domain mask."""

    _dtype = float

    def __init__(self, grid, values, mask=None):
        arr = np.asarray(values)
        if np.iscomplexobj(arr):
            if arr.size and np.max(np.abs(arr.imag)) > 1e-12 * max(1.0, np.max(np.abs(arr))):
                raise ValueError("complex values passed to RealField")
            arr = arr.real
        super().__init__(grid, arr, mask)


def field_from_callable(
    grid: Grid,
    fn: Callable[[np.ndarray], np.ndarray],
    mask: Optional[np.ndarray] = None,
    supersample: int = 1,
    real: bool = False,
):
    """Sample a vectorized callable ``fn(z)`` on the grid nodes.

    With ``supersample`` = s > 1 each node value is the average of fn over an
    s-by-s sub-lattice of its cell, which tames jump discontinuities that
    would otherwise alias into first-order errors of the convolution
    operators.
    """
    Z = grid.nodes()
    if supersample <= 1:
        vals = fn(Z)
    else:
        offs = ((np.arange(supersample) + 0.5) / supersample - 0.5) * grid.spacing
        acc = None
        for ox in offs:
            for oy in offs:
                v = np.asarray(fn(Z + ox + 1j * oy))
                acc = v if acc is None else acc + v
        vals = acc / supersample ** 2
    cls = RealField if real else ComplexField
    return cls(grid, vals, mask)


# ----------------------------------------------------------------------
# Domains and boundary data
# ----------------------------------------------------------------------

class DomainSpec:
    """Bounded simply connected Jordan domain given by ordered boundary samples.

    Parameters
    ----------
    boundary : array of complex, length >= 64
        Ordered samples of the boundary curve, positively oriented, without
        self-intersections.  The curve is closed implicitly (last sample
        connects back to the first).
    """

    def __init__(self, boundary: np.ndarray):
        bd = np.asarray(boundary, dtype=complex).ravel()
        if bd.size < 64:
            raise ValueError(f"boundary needs at least 64 samples, got {bd.size}")
        if not np.all(np.isfinite(bd)):
            raise ValueError("non-finite boundary samples")
        coords = np.c_[bd.real, bd.imag]
        ring = shapely.LinearRing(coords)
        if not ring.is_simple:
            raise ValueError("boundary curve is self-intersecting")
        if not ring.is_ccw:
            raise ValueError("boundary must be positively oriented (counterclockwise)")
        self.boundary = bd
        self._polygon = shapely.Polygon(coords)
        probe = self._polygon.representative_point()
        if self.winding_number(complex(probe.x, probe.y)) != 1:
            raise ValueError("winding number about an interior probe point is not 1")

    @property
    def m(self) -> int:
        return self.boundary.size

    def winding_number(self, z: complex) -> int:
        d = self.boundary - z
        ang = np.angle(np.roll(d, -1) / d)
        return int(round(np.sum(ang) / (2 * np.pi)))

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=complex)
        return shapely.contains_xy(self._polygon, pts.real, pts.imag)

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        """Unsigned distance from ``points`` to the boundary polyline."""
        pts = np.asarray(points, dtype=complex)
        geoms = shapely.points(np.c_[pts.real.ravel(), pts.imag.ravel()])
        d = shapely.distance(geoms, self._polygon.exterior)
        return d.reshape(pts.shape)

    def diameter(self) -> float:
        hull = self._polygon.convex_hull.exterior.coords
        pts = np.asarray(hull)
        d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        return float(np.sqrt(d2.max()))

    def centroid(self) -> complex:
        c = self._polygon.centroid
        return complex(c.x, c.y)

    def arclength(self) -> np.ndarray:
        """Cumulative arclength at each sample (starting at 0)."""
        seg = np.abs(np.diff(self.boundary, append=self.boundary[:1]))
        return np.concatenate([[0.0], np.cumsum(seg)[:-1]])

    def outward_normals(self) -> np.ndarray:
        """Unit outward normals at the samples (centered tangent estimate)."""
        t = np.roll(self.boundary, -1) - np.roll(self.boundary, 1)
        t = t / np.abs(t)
        return -1j * t  # rotate ccw tangent by -90 degrees: outward for ccw curves

    def interior_mask(self, grid: Grid) -> np.ndarray:
        return self.contains(grid.nodes())


@dataclass
class BoundaryData:
    """Real boundary data at the samples of a DomainSpec.

    Interpolation between samples is piecewise linear in arclength and
    periodic across the seam.
    """

    domain: DomainSpec
    values: np.ndarray = dc_field(default=None)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        if vals.size != self.domain.m:
            raise ValueError(f"need one value per boundary sample ({self.domain.m}), got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite boundary values")
        self.values = vals

    @classmethod
    def from_callable(cls, domain: DomainSpec, fn: Callable[[np.ndarray], np.ndarray]) -> "BoundaryData":
        return cls(domain, np.asarray(fn(domain.boundary), dtype=float))

    def at_arclength(self, s: np.ndarray) -> np.ndarray:
        """Evaluate by periodic piecewise-linear interpolation in arclength."""
        s_nodes = self.domain.arclength()
        total = s_nodes[-1] + abs(self.domain.boundary[0] - self.domain.boundary[-1])
        sq = np.mod(np.asarray(s, dtype=float), total)
        xp = np.concatenate([s_nodes, [total]])
        fp = np.concatenate([self.values, [self.values[0]]])
        return np.interp(sq, xp, fp)

    def minmax(self) -> tuple[float, float]:
        return float(self.values.min()), float(self.values.max())


# ----------------------------------------------------------------------
# Wirtinger calculus
# ----------------------------------------------------------------------

def erode_mask(mask: np.ndarray, steps: int = 1) -> np.ndarray:
    """Shrink a boolean mask by ``steps`` 4-neighborhood erosions."""
    out = mask.copy()
    for _ in range(steps):
        nxt = out.copy()
        nxt[1:, :] &= out[:-1, :]
        nxt[:-1, :] &= out[1:, :]
        nxt[:, 1:] &= out[:, :-1]
        nxt[:, :-1] &= out[:, 1:]
        out = nxt
    return out


def dilate_mask(mask: np.ndarray, steps: int = 1) -> np.ndarray:
    """Grow a boolean mask by ``steps`` 4-neighborhood dilations."""
    out = mask.copy()
    for _ in range(steps):
        nxt = out.copy()
        nxt[1:, :] |= out[:-1, :]
        nxt[:-1, :] |= out[1:, :]
        nxt[:, 1:] |= out[:, :-1]
        nxt[:, :-1] |= out[:, 1:]
        out = nxt
    return out


def _partial(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Centered first difference with second-order one-sided stencils at the edges."""
    v = values
    out = np.empty_like(v)
    sl = [slice(None)] * v.ndim

    def ax(s):
        sl2 = list(sl)
        sl2[axis] = s
        return tuple(sl2)

    out[ax(slice(1, -1))] = (v[ax(slice(2, None))] - v[ax(slice(0, -2))]) / (2 * h)
    out[ax(0)] = (-3 * v[ax(0)] + 4 * v[ax(1)] - v[ax(2)]) / (2 * h)
    out[ax(-1)] = (3 * v[ax(-1)] - 4 * v[ax(-2)] + v[ax(-3)]) / (2 * h)
    return out


def wirtinger_derivatives(
    F: ComplexField, method: str = "fd"
) -> tuple[ComplexField, ComplexField]:
    """Return (F_z, F_zbar) with F_z = (F_x - i F_y)/2 and F_zbar = (F_x + i F_y)/2.

    ``method='fd'`` uses centered differences (one-sided at the box edge);
    ``method='spectral'`` uses FFT differentiation and requires an unmasked
    field (it treats the box as periodic).  On masked fields the derivative
    is only meaningful at nodes whose full stencil is unmasked; the returned
    fields carry that eroded mask.
    """
    g = F.grid
    if g.n < 8:
        raise ValueError("grid too small for derivative stencils (n < 8)")
    if method == "spectral":
        if F.mask is not None:
            raise ValueError("spectral differentiation requires an unmasked field")
        from scipy import fft as sfft

        xi = sfft.fftfreq(g.n, d=g.spacing)
        KX, KY = np.meshgrid(xi, xi, indexing="ij")
        Fh = sfft.fft2(F.values)
        Fx = sfft.ifft2(2j * np.pi * KX * Fh)
        Fy = sfft.ifft2(2j * np.pi * KY * Fh)
    elif method == "fd":
        Fx = _partial(F.values, g.spacing, axis=0)
        Fy = _partial(F.values, g.spacing, axis=1)
    else:
        raise ValueError(f"unknown differentiation method {method!r}")

    Fz = (Fx - 1j * Fy) / 2
    Fzb = (Fx + 1j * Fy) / 2
    mask = F.mask
    if mask is not None:
        # keep only nodes whose full 4-neighborhood is unmasked
        er = erode_mask(mask)
        Fz = np.where(er, Fz, 0.0)
        Fzb = np.where(er, Fzb, 0.0)
        mask = er
    return ComplexField(g, Fz, mask), ComplexField(g, Fzb, mask)


# ----------------------------------------------------------------------
# Dilatation quantities
# ----------------------------------------------------------------------

def _check_ellipticity(mu: ComplexField) -> np.ndarray:
    absmu = np.abs(mu.values)
    bad = (absmu >= 1.0) & mu.unmasked
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        z = mu.grid.nodes()[i, j]
        raise ValueError(
            f"|mu| >= 1 at node ({i}, {j}), z = {z:.6g} (|mu| = {absmu[i, j]:.6g}); "
            "the coefficient must be strictly elliptic"
        )
    return absmu


def dilatation_quotient(mu: ComplexField) -> RealField:
    """Pointwise dilatation quotient K = (1 + |mu|) / (1 - |mu|).

    Masked-out nodes report 1 (coefficient extended conformally outside the
    domain).  Raises if |mu| >= 1 at any unmasked node.
    """
    absmu = _check_ellipticity(mu)
    K = (1.0 + absmu) / (1.0 - absmu)
    if mu.mask is not None:
        K = np.where(mu.mask, K, 1.0)
    return RealField(mu.grid, K, None)


def tangent_dilatation(mu: ComplexField, z0: complex) -> RealField:
    """Tangent dilatation quotient relative to a base point z0.

    K_T(z, z0) = |1 - (conj(z - z0)/(z - z0)) mu(z)|^2 / (1 - |mu(z)|^2);
    at the (measure-zero) node z = z0 the pointwise quotient K(z0) is used.
    Masked-out nodes report 1.
    """
    absmu = _check_ellipticity(mu)
    Z = mu.grid.nodes()
    d = Z - z0
    at0 = d == 0
    d_safe = np.where(at0, 1.0, d)
    ratio = np.conj(d_safe) / d_safe
    KT = np.abs(1.0 - ratio * mu.values) ** 2 / (1.0 - absmu ** 2)
    Kpt = (1.0 + absmu) / (1.0 - absmu)
    KT = np.where(at0, Kpt, KT)
    if mu.mask is not None:
        KT = np.where(mu.mask, KT, 1.0)
    return RealField(mu.grid, KT, None)
