import numpy as np
import pytest

from qcdirichlet.fields import BoundaryData, Grid, RealField, field_from_callable
from qcdirichlet.poisson import (
    A_from_mu,
    MatrixField,
    PoissonProblem,
    divergence_identity_check,
    mu_from_A,
    pushforward_density,
    solve_poisson,
    weak_residual,
)
from qcdirichlet.presets import boundary_data_preset, domain_preset, mu_preset
from qcdirichlet.qcmap import solve_mu_conformal


def setup(n=256, m=512):
    g = Grid(0j, 2.0, n)
    dom = domain_preset("disk", samples=m)
    t = 2 * np.pi * np.arange(m) / m
    return g, dom, t


def const_matrix(g, a11, a12, a22):
    n = g.n
    return MatrixField(
        RealField(g, np.full((n, n), a11)),
        RealField(g, np.full((n, n), a12)),
        RealField(g, np.full((n, n), a12)),
        RealField(g, np.full((n, n), a22)),
    )


class TestDictionary:
    def test_identity_matrix_maps_to_zero(self):
        g = Grid(0j, 1.0, 8)
        assert np.allclose(mu_from_A(MatrixField.identity(g)).values, 0.0)

    def test_diag_three_third(self):
        g = Grid(0j, 1.0, 8)
        A = const_matrix(g, 3.0, 0.0, 1.0 / 3.0)
        mu = mu_from_A(A)
        assert np.allclose(mu.values, -0.5, atol=1e-15)

    def test_zero_mu_gives_identity(self):
        g = Grid(0j, 1.0, 8)
        A = A_from_mu(field_from_callable(g, lambda z: np.zeros_like(z)))
        assert np.allclose(A.a11.values, 1.0) and np.allclose(A.a22.values, 1.0)
        assert np.allclose(A.a12.values, 0.0)

    def test_real_minus_half(self):
        g = Grid(0j, 1.0, 8)
        A = A_from_mu(field_from_callable(g, lambda z: np.full_like(z, -0.5)))
        assert np.allclose(A.a11.values, 3.0)
        assert np.allclose(A.a22.values, 1.0 / 3.0)
        assert np.allclose(A.a12.values, 0.0)

    def test_off_diagonal_family(self):
        # a11 = a22 = sqrt(1 + s^2), a12 = s: det 1, mu purely imaginary
        g = Grid(0j, 1.0, 8)
        s = 0.7
        d = np.sqrt(1 + s ** 2)
        A = const_matrix(g, d, s, d)
        mu = mu_from_A(A)
        expect = -1j * 2 * s / (2 + 2 * d)
        assert np.allclose(mu.values, expect, atol=1e-14)

    def test_round_trip_random(self):
        g = Grid(0j, 1.0, 16)
        rng = np.random.default_rng(17)
        raw = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
        mu_vals = 0.95 * rng.uniform(0, 1, (16, 16)) * raw / np.abs(raw)
        mu = field_from_callable(g, lambda z: mu_vals)
        A = A_from_mu(mu)
        back = mu_from_A(A)
        assert np.max(np.abs(back.values - mu_vals)) <= 1e-12
        det = A.a11.values * A.a22.values - A.a12.values * A.a21.values
        assert np.max(np.abs(det - 1)) <= 1e-10

    def test_invariants_enforced(self):
        g = Grid(0j, 1.0, 8)
        ones = RealField(g, np.ones((8, 8)))
        twos = RealField(g, np.full((8, 8), 2.0))
        zeros = RealField(g, np.zeros((8, 8)))
        with pytest.raises(ValueError, match="symmetric"):
            MatrixField(ones, zeros, RealField(g, np.full((8, 8), 0.1)), ones)
        with pytest.raises(ValueError, match="det"):
            MatrixField(twos, zeros, zeros, twos)


class TestPushforwardDensity:
    def test_zero_and_identity(self):
        g, dom, _ = setup(n=128)
        qc = solve_mu_conformal(field_from_callable(g, lambda z: np.zeros_like(z)))
        gz = field_from_callable(g, lambda z: np.zeros(z.shape), real=True)
        G, _ = pushforward_density(gz, qc, boundary=dom.boundary)
        assert np.all(G.values == 0)
        gsrc = field_from_callable(g, lambda z: (np.abs(z) <= 0.5).astype(float),
                                   supersample=3, real=True)
        G, _ = pushforward_density(gsrc, qc, boundary=dom.boundary)
        assert abs(G.interp(np.array([0.0]))[0] - 1.0) < 1e-6

    def test_radial_stretch_jacobian_weighting(self):
        g, dom, _ = setup(n=512)
        K = 2.0
        qc = solve_mu_conformal(field_from_callable(g, mu_preset("radial-stretch", K=K),
                                                    supersample=3), tol=1e-10)
        gsrc = field_from_callable(g, lambda z: (np.abs(z) <= 0.25).astype(float),
                                   supersample=3, real=True)
        G, _ = pushforward_density(gsrc, qc, boundary=dom.boundary)
        supp = np.abs(G.values) > 1e-3
        assert np.max(np.abs(G.grid.nodes()[supp])) < 0.0625 * 1.35
        w = 0.03 + 0.0j
        z = w * abs(w) ** (1 / K - 1)
        expect = 1.0 / (K * abs(z) ** (2 * K - 2))  # 1/J with J = K|z|^(2K-2)
        assert abs(G.interp(np.array([w]))[0] - expect) / expect < 5e-2


class TestSolvePoisson:
    def test_identity_harmonic_case(self):
        g, dom, t = setup()
        prob = PoissonProblem(dom, MatrixField.identity(g),
                              field_from_callable(g, lambda z: np.zeros(z.shape), real=True),
                              boundary_data_preset("cos-harmonic", dom))
        sol = solve_poisson(prob)
        Z = g.nodes()
        ok = sol.u.unmasked & ~sol.u.near_boundary
        assert np.max(np.abs(sol.u.values - Z.real)[ok]) < 1e-4
        assert sol.report.max_normalized < 1e-4

    def test_disk_source_center_value(self):
        g, dom, t = setup()
        gsrc = field_from_callable(g, lambda z: (np.abs(z) <= 0.5).astype(float),
                                   supersample=3, real=True)
        prob = PoissonProblem(dom, MatrixField.identity(g), gsrc,
                              BoundaryData(dom, np.zeros(t.size)))
        sol = solve_poisson(prob)
        expect = -(np.log(2) / 8 + 1 / 16)
        assert abs(sol.evaluate(np.array([0j]))[0] - expect) < 1e-2
        assert sol.report.max_normalized <= 1e-2

    def test_from_mu_reduces_to_composed_harmonic(self):
        g, dom, t = setup()
        mu = field_from_callable(g, mu_preset("radial-stretch", K=1.5), supersample=1)
        A = A_from_mu(mu)
        prob = PoissonProblem(dom, A,
                              field_from_callable(g, lambda z: np.zeros(z.shape), real=True),
                              boundary_data_preset("cos-harmonic", dom))
        sol = solve_poisson(prob)
        assert sol.report.max_normalized < 1e-2
        # maximum principle for g = 0
        ok = sol.u.unmasked & ~sol.u.near_boundary
        assert np.all(sol.u.values[ok] <= 1.0 + 1e-6)
        assert np.all(sol.u.values[ok] >= -1.0 - 1e-6)

    def test_g_support_margin_enforced(self):
        g, dom, t = setup(n=128)
        gsrc = field_from_callable(g, lambda z: (np.abs(z) <= 0.99).astype(float), real=True)
        with pytest.raises(ValueError, match="margin"):
            PoissonProblem(dom, MatrixField.identity(g), gsrc,
                           BoundaryData(dom, np.zeros(t.size)))

    def test_regularity_echo_gradient(self):
        from qcdirichlet.transforms import verify_regularity

        g, dom, t = setup()
        gsrc = field_from_callable(g, lambda z: (np.abs(z) <= 0.5).astype(float),
                                   supersample=3, real=True)
        prob = PoissonProblem(dom, MatrixField.identity(g), gsrc,
                              BoundaryData(dom, np.zeros(t.size)))
        sol = solve_poisson(prob)
        rep = verify_regularity(sol.u, claimed_exponent=0.5, on_gradient=True,
                                region=np.abs(g.nodes()) < 0.8)
        assert rep.passed


class TestWeakResidual:
    def test_harmonic_exactness(self):
        g, dom, t = setup()
        u = field_from_callable(g, lambda z: z.real, real=True)
        u = RealField(g, u.values, dom.interior_mask(g))
        prob = PoissonProblem(dom, MatrixField.identity(g),
                              field_from_callable(g, lambda z: np.zeros(z.shape), real=True),
                              boundary_data_preset("cos-harmonic", dom))
        rep = weak_residual(u, prob)
        # exact gradients; what remains is midpoint-quadrature error of the bumps
        assert rep.max_normalized < 1e-4

    def test_quadratic_perturbation_detected(self):
        g, dom, t = setup()
        base = field_from_callable(g, lambda z: z.real, real=True)
        mask = dom.interior_mask(g)
        prob = PoissonProblem(dom, MatrixField.identity(g),
                              field_from_callable(g, lambda z: np.zeros(z.shape), real=True),
                              boundary_data_preset("cos-harmonic", dom))
        pert = RealField(g, base.values + 0.1 * g.nodes().real ** 2, mask)
        rep = weak_residual(pert, prob)
        # r_m = integral <grad(0.1 x^2), grad psi> = -0.2 integral psi (per bump)
        area = g.cell_area
        from qcdirichlet.poisson import _bump_values

        for (c, rho), r in zip(rep.bumps, rep.residuals):
            psi, _, _ = _bump_values(g, c, rho)
            assert r == pytest.approx(-0.2 * np.sum(psi) * area, rel=5e-2, abs=1e-4)


class TestDivergenceIdentity:
    def test_identity_map_squared_modulus(self):
        g, dom, _ = setup()
        qc = solve_mu_conformal(field_from_callable(g, lambda z: np.zeros_like(z)))
        rep = divergence_identity_check(
            T=lambda w: np.abs(w) ** 2,
            grad_T=lambda w: (2 * w.real, 2 * w.imag),
            qc_map=qc,
            A=MatrixField.identity(g),
            domain=dom,
        )
        assert rep["max_normalized_difference"] < 1e-8
        # both sides equal 4 against every bump: -L / integral(psi) = 4
        from qcdirichlet.poisson import _bump_values

        for (c, rho), (L, R, _n) in zip(rep["bumps"], rep["pairs"]):
            psi, _, _ = _bump_values(g, c, rho)
            ipsi = np.sum(psi) * g.cell_area
            assert -L / ipsi == pytest.approx(4.0, rel=1e-2)
            assert -R / ipsi == pytest.approx(4.0, rel=1e-2)

    def test_identity_map_harmonic_T(self):
        g, dom, _ = setup()
        qc = solve_mu_conformal(field_from_callable(g, lambda z: np.zeros_like(z)))
        rep = divergence_identity_check(
            T=lambda w: (w ** 2).real,
            grad_T=lambda w: (2 * w.real, -2 * w.imag),
            qc_map=qc,
            A=MatrixField.identity(g),
            domain=dom,
        )
        for L, R, n in rep["pairs"]:
            assert abs(L) / n < 1e-3 and abs(R) / n < 1e-3

    def test_inconsistent_pair_rejected(self):
        g, dom, _ = setup(n=128)
        mu = field_from_callable(g, mu_preset("radial-stretch", K=2.0), supersample=1)
        qc = solve_mu_conformal(mu, tol=1e-8)
        with pytest.raises(ValueError, match="inconsistent"):
            divergence_identity_check(
                T=lambda w: np.abs(w) ** 2,
                grad_T=lambda w: (2 * w.real, 2 * w.imag),
                qc_map=qc,
                A=MatrixField.identity(g),
                domain=dom,
            )

    def test_radial_stretch_weak_identity(self):
        g = Grid(0j, 2.0, 512)
        dom = domain_preset("disk", samples=512)
        mu = field_from_callable(g, mu_preset("radial-stretch", K=2.0), supersample=1)
        qc = solve_mu_conformal(mu, tol=1e-10)
        rep = divergence_identity_check(
            T=lambda w: (w ** 2).real,
            grad_T=lambda w: (2 * w.real, -2 * w.imag),
            qc_map=qc,
            A=A_from_mu(qc.mu),
            domain=dom,
        )
        assert rep["max_normalized_difference"] <= 1e-2
