import numpy as np
import pytest

from qcdirichlet.fields import ComplexField, Grid, field_from_callable, wirtinger_derivatives
from qcdirichlet.presets import mu_preset, radial_stretch_map
from qcdirichlet.qcmap import (
    NonContractionError,
    clip_to_cap,
    homeomorphism_probe,
    invert,
    solve_degenerate,
    solve_mu_conformal,
)


def grid2(n):
    return Grid(0j, 2.0, n)


def radial_mu_field(g, K=2.0, supersample=3):
    return field_from_callable(g, mu_preset("radial-stretch", K=K), supersample=supersample)


def test_oracle_satisfies_beltrami_equation():
    # the closed-form radial stretch must solve f_zbar = mu f_z before it is
    # trusted as an oracle; checked by finite differences away from the rim
    g = grid2(256)
    K = 2.0
    f = field_from_callable(g, radial_stretch_map(K))
    fz, fzb = wirtinger_derivatives(f)
    mu = field_from_callable(g, mu_preset("radial-stretch", K=K), supersample=1)
    Z = g.nodes()
    r = np.abs(Z)
    interior = (r < 0.95) & (r > 0.05)
    resid = np.abs(fzb.values - mu.values * fz.values)[interior]
    assert np.max(resid) < 5e-3


class TestSolveMuConformal:
    def test_zero_coefficient_gives_identity(self):
        g = grid2(128)
        qc = solve_mu_conformal(field_from_callable(g, lambda z: np.zeros_like(z)))
        assert np.allclose(qc.f.values, g.nodes())
        assert np.allclose(qc.J.values, 1.0)
        assert qc.residual == 0.0

    def test_radial_stretch_against_oracle(self):
        g = grid2(512)
        qc = solve_mu_conformal(radial_mu_field(g), tol=1e-10)
        Z = g.nodes()
        r = np.abs(Z)
        oracle = radial_stretch_map(2.0)(Z)
        err = np.max(np.abs(qc.f.values - oracle)[r <= 0.9])
        assert err < 1e-2
        assert abs(qc.f.at(0.5) - 0.25) < 1e-2
        assert qc.residual <= 1e-3
        assert np.all(qc.J.values > 0)

    def test_uniform_half_self_residual(self):
        g = grid2(256)
        mu = field_from_callable(g, lambda z: np.where(np.abs(z) < 1, 0.5, 0.0).astype(complex))
        qc = solve_mu_conformal(mu, tol=1e-10)
        assert qc.residual <= 1e-6  # no closed form; fixed point self-check
        assert np.all(qc.J.values > 0)

    def test_rejects_nonelliptic(self):
        g = grid2(64)
        vals = np.zeros((64, 64), dtype=complex)
        vals[30, 30] = 1.0
        with pytest.raises(NonContractionError):
            solve_mu_conformal(ComplexField(g, vals))

    def test_conformal_outside_support(self):
        g = grid2(256)
        qc = solve_mu_conformal(radial_mu_field(g), tol=1e-10)
        outside = np.abs(g.nodes()) > 1.05
        assert np.max(np.abs(qc.f_zbar.values[outside])) < 1e-12

    def test_masked_coefficient_zero_extended(self):
        g = grid2(128)
        mask = np.abs(g.nodes()) < 1
        mu = ComplexField(g, np.full((128, 128), 0.3 + 0j), mask)
        qc = solve_mu_conformal(mu, tol=1e-8)
        assert np.all(qc.mu.values[~mask] == 0)


class TestInvert:
    def test_identity_map(self):
        g = grid2(128)
        qc = solve_mu_conformal(field_from_callable(g, lambda z: np.zeros_like(z)))
        assert abs(invert(qc, 0.3 + 0.4j) - (0.3 + 0.4j)) < 1e-9

    def test_radial_stretch_oracle_inverse(self):
        g = grid2(512)
        qc = solve_mu_conformal(radial_mu_field(g), tol=1e-10)
        z = invert(qc, 0.25 + 0j)
        assert abs(z - 0.5) < 1e-2  # oracle inverse w |w|^(1/K - 1)

    def test_round_trip_on_random_probes(self):
        g = grid2(256)
        qc = solve_mu_conformal(radial_mu_field(g), tol=1e-10)
        rng = np.random.default_rng(42)
        w = (rng.uniform(-0.9, 0.9, 100) + 1j * rng.uniform(-0.9, 0.9, 100))
        z = qc.invert_points(w)
        assert np.max(np.abs(qc.forward(z) - w)) < 1e-6

    def test_outside_image_raises(self):
        g = grid2(128)
        qc = solve_mu_conformal(radial_mu_field(g), tol=1e-8)
        from qcdirichlet.qcmap import InversionError

        with pytest.raises(InversionError):
            invert(qc, 100 + 100j)


class TestTruncationLadder:
    def test_zero_converges_at_first_levels(self):
        g = grid2(128)
        ladder = solve_degenerate(field_from_callable(g, lambda z: np.zeros_like(z)),
                                  caps=(2, 4))
        assert ladder.converged
        assert ladder.convergence_trace[-1] == 0.0

    def test_clip_preserves_argument(self):
        rng = np.random.default_rng(3)
        mu = rng.normal(size=40) + 1j * rng.normal(size=40)
        mu = 0.999 * mu / np.abs(mu)
        clipped = clip_to_cap(mu, 3.0)
        assert np.allclose(np.angle(clipped), np.angle(mu))
        K = (1 + np.abs(clipped)) / (1 - np.abs(clipped))
        assert np.all(K <= 3.0 + 1e-12)

    def test_exponential_class_contracts(self):
        g = grid2(256)
        mu = field_from_callable(g, mu_preset("exp-boundary"), supersample=1)
        ladder = solve_degenerate(mu, caps=(2, 4, 8, 16, 32, 64), tol=1e-3)
        d = ladder.convergence_trace
        assert ladder.converged
        assert all(b <= a * (1 + 1e-9) for a, b in zip(d, d[1:]))  # monotone decrease
        assert d[-1] < 1e-3

    def test_inverse_square_class_fails_to_contract(self):
        g = grid2(256)
        mu = field_from_callable(g, mu_preset("inv-sq-boundary"), supersample=1)
        ladder = solve_degenerate(mu, caps=(2, 4, 8, 16, 32, 64), tol=1e-3)
        assert not ladder.converged
        assert ladder.convergence_trace[-1] >= 1e-3


class TestHomeomorphismProbe:
    def test_identity_ok(self):
        g = grid2(128)
        qc = solve_mu_conformal(field_from_callable(g, lambda z: np.zeros_like(z)))
        rep = homeomorphism_probe(qc, seed=7)
        assert rep["ok"]

    def test_radial_stretch_ok(self):
        g = grid2(256)
        qc = solve_mu_conformal(radial_mu_field(g), tol=1e-8)
        rep = homeomorphism_probe(qc, seed=7)
        assert rep["degenerate"] == 0
        assert rep["overlapping_pairs"] == 0

    def test_detects_folding(self):
        g = grid2(128)
        Z = g.nodes()
        folded = ComplexField(g, np.where(Z.real > 0, -Z.real, Z.real) + 1j * Z.imag)
        qc = solve_mu_conformal(field_from_callable(g, lambda z: np.zeros_like(z)))
        bad = type(qc)(mu=qc.mu, f=folded, f_z=qc.f_z, f_zbar=qc.f_zbar, J=qc.J,
                       residual=0.0, iterations=0)
        rep = homeomorphism_probe(bad, fraction=0.05, seed=7)
        assert not rep["ok"]
