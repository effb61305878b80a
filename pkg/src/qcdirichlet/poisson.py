"""Dirichlet solver for divergence-form Poisson-type equations

    div [ A(z) grad u(z) ] = g(z)   in D,      u -> phi on the boundary,

with A symmetric, det A = 1 and det(I + A) > 0 per node, entries locally
Hoelder continuous, and g compactly supported in D.

The matrix coefficient corresponds one-to-one with a Beltrami coefficient:

    mu_A = -(a11 - a22 + i (a12 + a21)) / (2 + a11 + a22),

and conversely A recovers from mu as the normalized distortion matrix with
entries |1 -/+ mu|^2 / (1 - |mu|^2) on the diagonal and -2 Im mu / (1 - |mu|^2)
off it.  The solve factors through the mu_A-conformal map f:

    G = (g / J) o f^{-1}  on D* = f(D),
    N = logarithmic potential of G          (so Delta N = G),
    phi* = phi o f^{-1} - N on the image boundary,
    HH = harmonic extension of phi*,
    u = (HH + N) o f.

The weak form used for verification is

    integral <A grad u, grad psi> dm + integral g psi dm = 0

for compactly supported smooth test bumps psi, which is the integrated-by-
parts form of the equation above.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .fields import (
    BoundaryData,
    ComplexField,
    DomainSpec,
    Grid,
    RealField,
    _partial,
    dilate_mask,
    erode_mask,
)
from .beltrami import (
    StageError,
    SUPPORT_MARGIN_FRACTION,
    _jump_band,
    image_grid_for,
)
from .harmonic import DoubleLayerSolution, solve_dirichlet_harmonic
from .qcmap import QCMap, solve_degenerate, solve_mu_conformal
from .transforms import log_potential

__all__ = [
    "MatrixField",
    "PoissonProblem",
    "PoissonSolution",
    "WeakFormReport",
    "mu_from_A",
    "A_from_mu",
    "pushforward_density",
    "solve_poisson",
    "weak_residual",
    "divergence_identity_check",
    "bump_basis",
]


@dataclass
class MatrixField:
    """Symmetric unit-determinant matrix coefficient sampled per node.

    Invariants checked at construction: a12 = a21, det A = 1 and the
    ellipticity condition det(I + A) > 0, i.e. (1+a11)(1+a22) > a12*a21.
    """

    a11: RealField
    a12: RealField
    a21: RealField
    a22: RealField

    def __post_init__(self):
        g = self.a11.grid
        for f in (self.a12, self.a21, self.a22):
            if f.grid != g:
                raise ValueError("matrix entries must share one grid")
        if not np.allclose(self.a12.values, self.a21.values, atol=1e-12):
            raise ValueError("matrix must be symmetric (a12 = a21)")
        det = self.a11.values * self.a22.values - self.a12.values * self.a21.values
        if not np.allclose(det, 1.0, atol=1e-8):
            k = np.unravel_index(np.argmax(np.abs(det - 1)), det.shape)
            raise ValueError(f"det A must be 1 per node; worst node {k}: det = {det[k]:.6g}")
        ell = (1 + self.a11.values) * (1 + self.a22.values) - self.a12.values * self.a21.values
        if np.any(ell <= 0):
            k = np.unravel_index(np.argmin(ell), ell.shape)
            raise ValueError(f"ellipticity det(I+A) > 0 violated at node {k}")

    @property
    def grid(self) -> Grid:
        return self.a11.grid

    @classmethod
    def identity(cls, grid: Grid) -> "MatrixField":
        one = RealField(grid, np.ones((grid.n, grid.n)))
        zero = RealField(grid, np.zeros((grid.n, grid.n)))
        return cls(one, zero, zero, one)

    def apply(self, vx: np.ndarray, vy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Matrix-vector product A (vx, vy) per node."""
        return (
            self.a11.values * vx + self.a12.values * vy,
            self.a21.values * vx + self.a22.values * vy,
        )


def mu_from_A(A: MatrixField) -> ComplexField:
    """Beltrami coefficient of a matrix coefficient.

    mu_A = -(a11 - a22 + i (a12 + a21)) / (2 + a11 + a22); ellipticity of A
    guarantees |mu_A| < 1, which is checked numerically anyway.
    """
    den = 2.0 + A.a11.values + A.a22.values
    if np.any(den <= 0):
        k = np.unravel_index(np.argmin(den), den.shape)
        raise ValueError(f"2 + tr A <= 0 at node {k} (excluded by ellipticity)")
    mu = -(A.a11.values - A.a22.values + 1j * (A.a12.values + A.a21.values)) / den
    if np.any(np.abs(mu) >= 1.0):
        k = np.unravel_index(np.argmax(np.abs(mu)), mu.shape)
        raise ValueError(f"|mu_A| >= 1 at node {k}: matrix not uniformly elliptic there")
    return ComplexField(A.grid, mu)


def A_from_mu(mu: ComplexField) -> MatrixField:
    """Distortion matrix of a Beltrami coefficient (inverse of ``mu_from_A``)."""
    m = mu.values if mu.mask is None else np.where(mu.mask, mu.values, 0.0)
    if np.any(np.abs(m) >= 1.0):
        k = np.unravel_index(np.argmax(np.abs(m)), m.shape)
        raise ValueError(f"|mu| >= 1 at node {k}")
    den = 1.0 - np.abs(m) ** 2
    g = mu.grid
    return MatrixField(
        a11=RealField(g, np.abs(1.0 - m) ** 2 / den),
        a12=RealField(g, -2.0 * m.imag / den),
        a21=RealField(g, -2.0 * m.imag / den),
        a22=RealField(g, np.abs(1.0 + m) ** 2 / den),
    )


@dataclass
class PoissonProblem:
    """Problem data for div[A grad u] = g with Dirichlet boundary values."""

    domain: DomainSpec
    A: MatrixField
    g: RealField
    phi: BoundaryData

    def __post_init__(self):
        if self.A.grid != self.g.grid:
            raise ValueError("A and g must share one grid")
        vals = np.where(self.g.unmasked, self.g.values, 0.0)
        self.g = RealField(self.g.grid, vals)
        absg = np.abs(vals)
        supp = absg > 1e-13 * max(float(absg.max()), 1e-300)
        if supp.any():
            d = self.domain.boundary_distance(self.g.grid.nodes()[supp])
            need = SUPPORT_MARGIN_FRACTION * self.domain.diameter()
            if float(d.min()) < need:
                raise ValueError(
                    f"g support reaches within {float(d.min()):.4g} of the boundary "
                    f"(compact-support margin requires >= {need:.4g})"
                )


@dataclass
class PoissonSolution:
    """Factorization fields of a solved Poisson-type problem."""

    problem: PoissonProblem
    u: RealField
    f: QCMap
    G: RealField
    N: RealField
    H_harm: RealField
    image_domain: DomainSpec
    harmonic: DoubleLayerSolution
    report: Optional["WeakFormReport"] = None

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Evaluate u at interior points (harmonic part grid-free)."""
        pts = np.asarray(points, dtype=complex)
        w = self.f.forward(pts)
        return self.harmonic.evaluate(w) + self.N.interp(w)


def pushforward_density(
    g_field: RealField,
    qc_map: QCMap,
    image_grid: Optional[Grid] = None,
    boundary: Optional[np.ndarray] = None,
) -> tuple[RealField, dict]:
    """Push the density through the map: G = (g / J) o f^{-1}.

    Returns G on a grid covering D* = f(D) plus its discrete L_q norms for
    q in {2.5, 3, 4}.
    """
    src = g_field.grid
    if image_grid is None:
        if boundary is None:
            raise ValueError("need either image_grid or the domain boundary")
        image_grid = image_grid_for(qc_map, boundary)
    vals = np.where(g_field.unmasked, g_field.values, 0.0)
    supp = np.abs(vals) > 1e-13 * max(float(np.max(np.abs(vals))), 1e-300)
    G_vals = np.zeros((image_grid.n, image_grid.n))
    if supp.any():
        w_supp = qc_map.f.values[supp]
        pad = 4 * image_grid.spacing + 2 * qc_map.grid.spacing
        W = image_grid.nodes()
        cand = (
            (W.real >= w_supp.real.min() - pad)
            & (W.real <= w_supp.real.max() + pad)
            & (W.imag >= w_supp.imag.min() - pad)
            & (W.imag <= w_supp.imag.max() + pad)
        )
        if cand.any():
            try:
                z_back = qc_map.invert_points(W[cand])
            except Exception as exc:
                raise StageError("pushforward_density", f"inversion failed on supp G: {exc}")
            fz, fzb = qc_map.derivatives_at(z_back)
            J = np.abs(fz) ** 2 - np.abs(fzb) ** 2
            if np.any(J <= 0):
                raise StageError("pushforward_density", "nonpositive Jacobian on supp g")
            G_vals[cand] = RealField(src, vals).interp(z_back) / J
    G = RealField(image_grid, G_vals)
    norms = {f"L{q:g}": G.norm_lp(q) for q in (2.5, 3.0, 4.0)}
    return G, norms


def solve_poisson(
    problem: PoissonProblem,
    solver_tol: float = 1e-8,
    degenerate: str = "auto",
    caps: Optional[Sequence[float]] = None,
    with_report: bool = True,
    test_basis_size: int = 25,
) -> PoissonSolution:
    """Solve div[A grad u] = g with continuous boundary data phi.

    The weak solution is unique; no gauge is involved (contrast the Beltrami
    pipeline, whose solutions float by an imaginary constant).
    """
    dom = problem.domain
    grid = problem.A.grid
    inside = dom.interior_mask(grid)

    try:
        mu = mu_from_A(problem.A)
        mu = ComplexField(grid, np.where(inside, mu.values, 0.0), inside)
    except Exception as exc:
        raise StageError("mu_from_A", str(exc))
    try:
        kmax = float(np.max(np.abs(mu.values)))
        if degenerate == "always" or (degenerate == "auto" and kmax > 0.9):
            Z = grid.nodes()
            probe = inside & (dom.boundary_distance(Z) >= 0.1 * dom.diameter())
            ladder = solve_degenerate(mu, caps=caps or (2, 4, 8, 16, 32, 64), probe_mask=probe)
            qc = ladder.final
        else:
            qc = solve_mu_conformal(mu, tol=solver_tol)
    except Exception as exc:
        raise StageError("qc_map", str(exc))

    try:
        img_grid = image_grid_for(qc, dom.boundary)
        G, _lp = pushforward_density(problem.g, qc, image_grid=img_grid)
        if np.any(G.values):
            N = log_potential(G)
        else:
            N = RealField(img_grid, np.zeros_like(G.values))
    except StageError:
        raise
    except Exception as exc:
        raise StageError("pushforward_density", str(exc))

    try:
        w_bd = qc.forward(dom.boundary)
        image_domain = DomainSpec(w_bd)
        phi_star = BoundaryData(image_domain, problem.phi.values - N.interp(w_bd))
    except Exception as exc:
        raise StageError("transfer_boundary", str(exc))

    try:
        HH, dlp = solve_dirichlet_harmonic(image_domain, phi_star, img_grid, return_solution=True)
    except Exception as exc:
        raise StageError("harmonic", str(exc))

    try:
        U = RealField(img_grid, HH.values + N.values, HH.mask)
        Z = grid.nodes()
        w_nodes = qc.f.values
        u_vals = np.zeros(Z.shape)
        u_vals[inside] = U.interp(w_nodes[inside])
        u = RealField(grid, np.where(inside, u_vals, 0.0), inside)
        reliable = RealField(img_grid, (HH.unmasked & ~HH.near_boundary).astype(float))
        flagged = np.zeros_like(inside)
        flagged[inside] = reliable.interp(w_nodes[inside]) < 0.999
        u.near_boundary = flagged
    except Exception as exc:
        raise StageError("compose", str(exc))

    sol = PoissonSolution(
        problem=problem,
        u=u,
        f=qc,
        G=G,
        N=N,
        H_harm=HH,
        image_domain=image_domain,
        harmonic=dlp,
    )
    if with_report:
        sol.report = weak_residual(u, problem, test_basis_size, solution=sol)
    return sol


# ----------------------------------------------------------------------
# Weak-form verification
# ----------------------------------------------------------------------

def bump_basis(
    domain: DomainSpec,
    grid: Grid,
    count: int = 25,
    clearance: float = 2.0,
) -> list[tuple[complex, float]]:
    """Centers and radii of compactly supported test bumps inside the domain.

    Candidate centers sit on a ceil(sqrt(count))-square lattice over the
    domain bounding box; a disc is kept when it fits inside the domain with
    ``clearance`` grid cells to spare.  Each bump is
    psi(z) = (1 - |(z - c)/rho|^2)^3 on its disc, zero outside: smooth,
    compact support, cheap exact gradient.
    """
    bd = domain.boundary
    k = int(np.ceil(np.sqrt(count)))
    xs = np.linspace(bd.real.min(), bd.real.max(), k + 2)[1:-1]
    ys = np.linspace(bd.imag.min(), bd.imag.max(), k + 2)[1:-1]
    pitch = max(xs[1] - xs[0] if len(xs) > 1 else 0.0, ys[1] - ys[0] if len(ys) > 1 else 0.0)
    centers = np.asarray([complex(x, y) for x in xs for y in ys])
    inside = domain.contains(centers)
    dist = domain.boundary_distance(centers)
    bumps = []
    for c, ok, d in zip(centers, inside, dist):
        if not ok:
            continue
        rho = min(0.45 * pitch if pitch > 0 else d, d - clearance * grid.spacing)
        if rho > 3 * grid.spacing:
            bumps.append((c, float(rho)))
        if len(bumps) == count:
            break
    return bumps


def _bump_values(grid: Grid, c: complex, rho: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """psi and its exact gradient on the grid; psi = (1 - s)^3, s = |(z-c)/rho|^2."""
    Z = grid.nodes()
    s = (np.abs(Z - c) / rho) ** 2
    inside = s < 1.0
    w = np.where(inside, 1.0 - s, 0.0)
    psi = w ** 3
    coef = np.where(inside, -6.0 * w ** 2 / rho ** 2, 0.0)
    return psi, coef * (Z.real - c.real), coef * (Z.imag - c.imag)


@dataclass
class WeakFormReport:
    """Weak residuals against a bump basis plus the boundary defect."""

    residuals: np.ndarray
    normalizers: np.ndarray
    max_normalized: float
    boundary_sup: float
    bumps: list

    def as_dict(self) -> dict:
        return {
            "max_normalized_residual": self.max_normalized,
            "boundary_sup": self.boundary_sup,
            "bumps": len(self.bumps),
        }


def weak_residual(
    u: RealField,
    problem: PoissonProblem,
    test_basis_size: int = 25,
    solution: Optional[PoissonSolution] = None,
) -> WeakFormReport:
    """Test u against the weak form of div[A grad u] = g.

    For each bump psi, r = integral <A grad u, grad psi> dm + integral g psi
    dm by grid quadrature, normalized by ||grad psi||_2.  Also reports the
    boundary sup defect of u against phi at samples offset two cells inward.
    """
    grid = u.grid
    h = grid.spacing
    ux = _partial(u.values, h, axis=0)
    uy = _partial(u.values, h, axis=1)
    valid = u.unmasked.copy()
    flag = getattr(u, "near_boundary", None)
    if flag is not None:
        valid &= ~flag
    stencil_ok = erode_mask(valid, 1)
    Ax, Ay = problem.A.apply(ux, uy)
    bumps = bump_basis(problem.domain, grid, count=test_basis_size)
    res, nrm = [], []
    area = grid.cell_area
    for c, rho in bumps:
        psi, px, py = _bump_values(grid, c, rho)
        supp = psi > 0
        if not np.all(stencil_ok[supp]):
            continue  # bump leaks into unreliable gradient territory
        r = np.sum((Ax * px + Ay * py)[supp]) * area + np.sum((problem.g.values * psi)[supp]) * area
        res.append(r)
        nrm.append(np.sqrt(np.sum(px[supp] ** 2 + py[supp] ** 2) * area))
    res = np.asarray(res)
    nrm = np.asarray(nrm)

    dom = problem.domain
    nu = dom.outward_normals()
    probes = dom.boundary - 2.0 * h * nu
    if solution is not None:
        up = solution.evaluate(probes)
    else:
        up = u.interp(probes)
    boundary_sup = float(np.max(np.abs(up - problem.phi.values)))
    maxn = float(np.max(np.abs(res) / nrm)) if res.size else float("nan")
    return WeakFormReport(
        residuals=res,
        normalizers=nrm,
        max_normalized=maxn,
        boundary_sup=boundary_sup,
        bumps=bumps[: len(res)],
    )


def divergence_identity_check(
    T: Callable[[np.ndarray], np.ndarray],
    grad_T: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    qc_map: QCMap,
    A: MatrixField,
    domain: DomainSpec,
    test_basis_size: int = 25,
    atol_mu: float = 1e-8,
) -> dict:
    """Weak-form comparison of div[A grad(T o f)] with the pushed Laplacian.

    For test bumps psi the two integrals

        L(psi) = integral <A grad(T o f), grad psi> dm,
        R(psi) = integral J <M^{-1} ((grad T) o f), grad psi> dm,

    must agree when A is the distortion matrix of the map's coefficient (M is
    the Jacobian matrix of f, J its determinant).  Returns per-bump pairs and
    the worst normalized difference.
    """
    grid = qc_map.grid
    mu_of_A = mu_from_A(A)
    if float(np.max(np.abs(mu_of_A.values - qc_map.mu.values))) > max(atol_mu, 1e-8):
        raise ValueError("A and the map are inconsistent: A_from_mu(map.mu) != A")
    h = grid.spacing
    w = qc_map.f.values
    Tw = T(w)
    tx = _partial(np.real(Tw), h, axis=0)
    ty = _partial(np.real(Tw), h, axis=1)
    Ax, Ay = A.apply(tx, ty)

    fz, fzb = qc_map.f_z.values, qc_map.f_zbar.values
    fx = fz + fzb
    fy = 1j * (fz - fzb)
    m11, m21 = fx.real, fx.imag  # d(Re f)/dx, d(Im f)/dx
    m12, m22 = fy.real, fy.imag
    J = qc_map.J.values
    gTx, gTy = grad_T(w)
    # M^{-1} v with M = [[m11, m12], [m21, m22]], det M = J
    r1 = (m22 * gTx - m12 * gTy) / J
    r2 = (-m21 * gTx + m11 * gTy) / J

    bumps = bump_basis(domain, grid, count=test_basis_size)
    pairs = []
    area = grid.cell_area
    for c, rho in bumps:
        psi, px, py = _bump_values(grid, c, rho)
        supp = psi > 0
        L = np.sum((Ax * px + Ay * py)[supp]) * area
        R = np.sum((J * (r1 * px + r2 * py))[supp]) * area
        nrm = np.sqrt(np.sum(px[supp] ** 2 + py[supp] ** 2) * area)
        pairs.append((float(L), float(R), float(nrm)))
    diffs = [abs(L - R) / n for L, R, n in pairs]
    return {
        "pairs": pairs,
        "max_normalized_difference": float(max(diffs)) if diffs else float("nan"),
        "bumps": bumps,
    }
