import math

import numpy as np
import pytest

from qcdirichlet.criteria import (
    INCONCLUSIVE,
    SATISFIED,
    VIOLATED,
    CriterionVerdict,
    PsiFamily,
    bmo_dominant_test,
    bmo_norm,
    circle_mean,
    condition_equivalence_suite,
    cz_test,
    default_eps0,
    fmo_growth_check,
    fmo_test,
    lehto_test,
    mean_test,
    orlicz_test,
    psi_condition_test,
    tangent_dilatation_callable,
    tangent_profile_mu,
)
from qcdirichlet.fields import Grid, field_from_callable
from qcdirichlet.presets import phi_gauge_preset, psi_family_preset, q_profile_preset

Z0 = 0j
EPS0 = default_eps0(Z0)


def as_field_of_z(profile, z0=Z0):
    return lambda z: profile(np.abs(np.asarray(z) - z0))


class TestCircleMean:
    def test_constant(self):
        assert circle_mean(lambda z: np.ones_like(np.abs(z)), 0.3 + 0.1j, 0.05) == pytest.approx(1.0)

    def test_radial_log(self):
        z0 = 0.2 + 0j
        K = lambda z: np.log(1.0 / np.abs(z - z0))
        for r in (0.01, 0.001):
            assert circle_mean(K, z0, r) == pytest.approx(np.log(1 / r), rel=1e-12)

    def test_angular_term_averages_out(self):
        z0 = 0j
        K = lambda z: 1.0 + ((z - z0) / np.abs(z - z0)).real
        assert circle_mean(K, z0, 0.02) == pytest.approx(1.0, abs=1e-12)

    def test_grid_backed_resolution_floor(self):
        g = Grid(0j, 1.0, 64)
        f = field_from_callable(g, lambda z: np.abs(z), real=True)
        with pytest.raises(ValueError, match="callable"):
            circle_mean(f, 0j, g.spacing)


class TestLehto:
    def test_constant_dilatation_diverges(self):
        v = lehto_test(lambda r: 2.0, EPS0)
        assert v.verdict == SATISFIED
        # T(eps) = (1/2) log(eps0/eps): check the trace against the antiderivative
        eps, T = v.trace[-1]
        assert T == pytest.approx(0.5 * math.log(EPS0 / eps), rel=1e-8)

    def test_log_mean_still_diverges(self):
        v = lehto_test(lambda r: math.log(1.0 / r), EPS0)
        assert v.verdict == SATISFIED
        eps, T = v.trace[-1]
        # antiderivative: loglog(1/eps) - loglog(1/eps0)
        assert T == pytest.approx(math.log(math.log(1 / eps)) - math.log(math.log(1 / EPS0)),
                                  rel=1e-6)

    def test_inverse_radius_converges(self):
        v = lehto_test(lambda r: 1.0 / r, EPS0)
        assert v.verdict == VIOLATED
        eps, T = v.trace[-1]
        assert T == pytest.approx(EPS0 - eps, rel=1e-8)

    def test_zero_mean_rejected(self):
        with pytest.raises(ValueError, match="zero or non-finite"):
            lehto_test(lambda r: 0.0, EPS0)


class TestCZ:
    def test_constant(self):
        mu = tangent_profile_mu(q_profile_preset("const", c=1.0), Z0)
        v = cz_test(mu, Z0, EPS0)
        assert v.verdict == SATISFIED
        # A(eps) = 2 pi log(eps0/eps): ratio trace matches the antiderivative
        eps, ratio = v.trace[10]
        assert ratio == pytest.approx(2 * math.pi * math.log(EPS0 / eps) / math.log(1 / eps) ** 2,
                                      rel=1e-6)

    def test_log_profile_violates_little_o(self):
        v = cz_test(tangent_profile_mu(q_profile_preset("log"), Z0), Z0, EPS0)
        assert v.verdict == VIOLATED
        assert v.trace[-1][1] == pytest.approx(math.pi, rel=0.2)  # ratio -> pi

    def test_sqrt_log_profile_satisfies(self):
        v = cz_test(tangent_profile_mu(q_profile_preset("pow-log", lam=0.5), Z0), Z0, EPS0)
        assert v.verdict == SATISFIED


class TestFMO:
    def test_constant_zero_dispersion(self):
        v = fmo_test(lambda z: np.full(np.shape(z), 3.0), Z0, eps0=EPS0)
        assert v.verdict == SATISFIED

    def test_log_is_fmo(self):
        v = fmo_test(as_field_of_z(q_profile_preset("log")), Z0, eps0=EPS0)
        assert v.verdict == SATISFIED
        # dispersions of a log profile are scale-invariant: trace ~ constant
        d = [val for _, val in v.trace]
        assert np.std(d[-5:]) < 1e-3 * np.mean(d[-5:]) + 1e-12

    def test_inverse_radius_violates(self):
        v = fmo_test(as_field_of_z(q_profile_preset("inv-r")), Z0, eps0=EPS0)
        assert v.verdict == VIOLATED
        # d(eps) ~ 1/eps: growth exponent ~ 1
        assert v.growth_exponent == pytest.approx(1.0, abs=0.1)


class TestMean:
    def test_constant(self):
        assert mean_test(lambda z: np.full(np.shape(z), 2.0), Z0, EPS0).verdict == SATISFIED

    def test_log_grows(self):
        assert mean_test(as_field_of_z(q_profile_preset("log")), Z0, EPS0).verdict == VIOLATED

    def test_inverse_radius(self):
        assert mean_test(as_field_of_z(q_profile_preset("inv-r")), Z0, EPS0).verdict == VIOLATED


class TestBMO:
    def test_constant_is_zero(self):
        g = Grid(0j, 1.0, 128)
        f = field_from_callable(g, lambda z: np.full(z.shape, 5.0), real=True)
        assert bmo_norm(f) == 0.0

    def test_log_stable_under_refinement(self):
        norms = {}
        off = None
        for n in (128, 256, 512):
            g = Grid(0j, 1.0, n)
            if off is None:
                off = 0.31 * g.spacing + 1j * 0.47 * g.spacing
            f = field_from_callable(
                g, lambda z: np.log(1.0 / np.maximum(np.abs(z - off), 1e-300)), real=True)
            norms[n] = bmo_norm(f)
        assert norms[512] < 1.3 * norms[128]

    def test_inverse_radius_grows_under_refinement(self):
        norms = {}
        off = None
        for n in (128, 256, 512):
            g = Grid(0j, 1.0, n)
            if off is None:
                off = 0.31 * g.spacing + 1j * 0.47 * g.spacing
            f = field_from_callable(
                g, lambda z: 1.0 / np.maximum(np.abs(z - off), 1e-300), real=True)
            norms[n] = bmo_norm(f)
        assert norms[256] > 1.5 * norms[128]
        assert norms[512] > 1.5 * norms[256]

    def test_dominant_test_wrapper(self):
        off = 0.0017 + 0.0023j

        def factory_log(n):
            g = Grid(0j, 1.0, n)
            return field_from_callable(
                g, lambda z: np.log(1.0 / np.maximum(np.abs(z - off), 1e-300)), real=True)

        v = bmo_dominant_test(None, 0j, 1.0, factory_log, sizes=(128, 256, 512))
        assert v.verdict == SATISFIED
        assert v.criterion == "BMO-dominant"


class TestOrlicz:
    def test_exponential_gauge_on_log_profile(self):
        kt = tangent_dilatation_callable(tangent_profile_mu(q_profile_preset("log"), Z0), Z0)
        v = orlicz_test(kt, Z0, EPS0, phi_gauge_preset("exp"))
        assert v.verdict == SATISFIED
        assert v.criterion == "EXP"
        assert v.params["tail"] == "divergent"

    def test_power_gauge_tail_fails_regardless(self):
        kt = tangent_dilatation_callable(tangent_profile_mu(q_profile_preset("const"), Z0), Z0)
        v = orlicz_test(kt, Z0, EPS0, phi_gauge_preset("power", p=3))
        assert v.verdict == VIOLATED
        assert v.params["tail"] == "convergent"

    def test_exp_sqrt_gauge_tail_fails(self):
        kt = tangent_dilatation_callable(tangent_profile_mu(q_profile_preset("const"), Z0), Z0)
        v = orlicz_test(kt, Z0, EPS0, phi_gauge_preset("exp-sqrt"))
        assert v.verdict == VIOLATED

    def test_overflow_handled_in_log_domain(self):
        kt = tangent_dilatation_callable(tangent_profile_mu(q_profile_preset("inv-r"), Z0), Z0)
        v = orlicz_test(kt, Z0, EPS0, phi_gauge_preset("exp"))  # e^(1/r): hopeless
        assert v.verdict == VIOLATED
        assert np.all(np.isfinite([val for _, val in v.trace]))


class TestEquivalenceSuite:
    @pytest.mark.parametrize("name,expect", [
        ("exp", "divergent"),
        ("power", "convergent"),
        ("exp-sqrt", "convergent"),
        ("exp-over-log", "divergent"),
    ])
    def test_preset_gauges_uniform(self, name, expect):
        rep = condition_equivalence_suite(phi_gauge_preset(name))
        assert rep["uniform"]
        assert set(rep["verdicts"].values()) == {expect}
        assert not any(a.get("contradicts") for a in rep["audits"].values())

    def test_gauge_validation(self):
        for name in ("exp", "power", "exp-sqrt", "exp-over-log"):
            phi_gauge_preset(name).validate()

    def test_inverse_inequality(self):
        phi = phi_gauge_preset("exp")
        for t in (0.5, 1.0, 7.0):
            tau = float(phi.eval(np.asarray([t]))[0])
            assert phi.inverse(tau) <= t + 1e-9


class TestFMOGrowth:
    def test_constant_profile_bounded(self):
        eps0 = math.exp(-math.e) * 0.99
        rep = fmo_growth_check(lambda z: np.ones(np.shape(z)), Z0, eps0)
        # I(eps) = 2 pi [1/log(1/eps0) - 1/log(1/eps)] stays bounded
        eps, I = rep["trace"][-1]
        expect = 2 * math.pi * (1 / math.log(1 / eps0) - 1 / math.log(1 / eps))
        assert I == pytest.approx(expect, rel=1e-6)

    def test_log_profile_slope_two_pi(self):
        eps0 = math.exp(-math.e) * 0.99
        ladder = [2.0 ** (-k) for k in range(5, 16)]
        rep = fmo_growth_check(lambda z: np.log(1.0 / np.abs(z)), Z0, eps0, eps_ladder=ladder)
        assert rep["fitted_slope"] == pytest.approx(2 * math.pi, rel=0.1)

    def test_zero_profile(self):
        eps0 = math.exp(-math.e) * 0.5
        rep = fmo_growth_check(lambda z: np.zeros(np.shape(z)), Z0, eps0)
        assert all(abs(v) < 1e-14 for _, v in rep["trace"])

    def test_eps0_bound_enforced(self):
        with pytest.raises(ValueError, match="e\\^-e"):
            fmo_growth_check(lambda z: np.ones(np.shape(z)), Z0, 0.5)


class TestPsiCondition:
    def test_conformal_with_inverse_t(self):
        mu = lambda z: np.zeros_like(np.asarray(z, dtype=complex))
        v = psi_condition_test(mu, Z0, psi_family_preset("inv-t"), EPS0)
        assert v.verdict == SATISFIED
        # ratio = 2 pi / I with I = log(eps0/eps)
        eps, ratio = v.trace[20]
        assert ratio == pytest.approx(2 * math.pi / math.log(EPS0 / eps), rel=1e-6)

    def test_compatible_pair_log_profile(self):
        mu = tangent_profile_mu(q_profile_preset("log"), Z0)
        v = psi_condition_test(mu, Z0, psi_family_preset("inv-t-log"), EPS0)
        assert v.verdict == SATISFIED

    def test_hard_singularity_violates(self):
        prof = lambda r: 1.0 / np.asarray(r, dtype=float) ** 2
        mu = tangent_profile_mu(prof, Z0)
        v = psi_condition_test(mu, Z0, psi_family_preset("inv-t"), EPS0)
        assert v.verdict == VIOLATED

    def test_bad_family_rejected(self):
        fam = PsiFamily("broken", psi=lambda t: np.zeros_like(t), integral=lambda e, e0: 0.0)
        mu = lambda z: np.zeros_like(np.asarray(z, dtype=complex))
        with pytest.raises(ValueError, match="zero or non-finite"):
            psi_condition_test(mu, Z0, fam, EPS0)


class TestVerdictStructure:
    def test_trace_must_be_decreasing(self):
        with pytest.raises(ValueError, match="decreasing"):
            CriterionVerdict("CZ", SATISFIED, [(0.1, 1.0), (0.2, 2.0)], 0.0)
        with pytest.raises(ValueError, match="non-empty"):
            CriterionVerdict("CZ", SATISFIED, [], 0.0)

    def test_traces_monotone_where_oracle_says(self):
        # cumulative integrals are monotone in eps by construction
        v = lehto_test(lambda r: 2.0, EPS0)
        vals = [val for _, val in v.trace]
        assert all(b >= a for a, b in zip(vals, vals[1:]))
        mu = tangent_profile_mu(q_profile_preset("log"), Z0)
        v2 = psi_condition_test(mu, Z0, psi_family_preset("inv-t"), EPS0, levels=40)
        # numerator grows quadratically vs I^2: ratio decreasing toward pi
        vals2 = [val for _, val in v2.trace]
        assert all(b <= a for a, b in zip(vals2[5:], vals2[6:]))


class TestHierarchyConsistency:
    """Implication chain on the shipped presets: an FMO-satisfied dominant
    implies the Lehto-type divergence also reads satisfied, and the
    exponential-gauge verdict implies it too."""

    @pytest.mark.parametrize("row", ["const", "log", "pow-log"])
    def test_fmo_implies_lehto(self, row):
        prof = q_profile_preset(row)
        fmo = fmo_test(as_field_of_z(prof), Z0, eps0=EPS0)
        kt = tangent_dilatation_callable(tangent_profile_mu(prof, Z0), Z0)
        leh = lehto_test(lambda r: circle_mean(kt, Z0, r), EPS0)
        if fmo.verdict == SATISFIED:
            assert leh.verdict == SATISFIED

    @pytest.mark.parametrize("row", ["const", "log", "pow-log", "inv-r", "exp-integrable"])
    def test_exp_implies_lehto(self, row):
        prof = q_profile_preset(row)
        kt = tangent_dilatation_callable(tangent_profile_mu(prof, Z0), Z0)
        exp_v = orlicz_test(kt, Z0, EPS0, phi_gauge_preset("exp"))
        leh = lehto_test(lambda r: circle_mean(kt, Z0, r), EPS0)
        if exp_v.verdict == SATISFIED:
            assert leh.verdict == SATISFIED

    def test_cz_and_lehto_agree_on_const_and_powlog(self):
        for row, lam in (("const", None), ("pow-log", 0.5), ("pow-log", 0.8)):
            prof = q_profile_preset(row) if lam is None else q_profile_preset(row, lam=lam)
            mu = tangent_profile_mu(prof, Z0)
            kt = tangent_dilatation_callable(mu, Z0)
            assert cz_test(mu, Z0, EPS0).verdict == SATISFIED
            assert lehto_test(lambda r: circle_mean(kt, Z0, r), EPS0).verdict == SATISFIED


class TestShallowLaddersStayHonest:
    def test_boundary_point_log_profile_inconclusive(self):
        # at z0 = 1 float64 cancellation caps the ladder depth; the slowly
        # stabilizing log-profile ratio must then read INCONCLUSIVE, not
        # SATISFIED
        z0 = 1.0 + 0j
        mu = tangent_profile_mu(q_profile_preset("log"), z0)
        v = psi_condition_test(mu, z0, psi_family_preset("inv-t"), default_eps0(z0))
        assert v.verdict in (INCONCLUSIVE, VIOLATED)
        assert "clamped" in v.note
