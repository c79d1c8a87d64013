import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from dsbs.errors import InvalidArgument
from dsbs.sde import (
    ExpDecayBeta,
    Family,
    GeometricSmld,
    LinearAlpha,
    LinearDdpmBeta,
    ProfileScheme,
    ReferenceSde,
    TimeGrid,
    base_drift,
    beta_integral,
    diffusion_coeff,
    transition_params,
    sigma_profile,
)

# 30-digit mpmath evaluations of the closed forms
ONE_MINUS_EXP_M1 = 0.632120558828557678404476229839
ONE_MINUS_EXP_M10 = 0.999954600070237515148464408484
VP1_MEAN_SCALE_01 = 0.729015504215524673375440278885
VP1_VARIANCE_01 = 0.468536394613384327183085162900
SQRT_10_EXP_M10 = 0.0213072592706065440451071974009
SQRT_20 = 4.47213595499957939281834733746


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def triples(rng, n):
    s, t, u = np.sort(rng.uniform(0.0, 1.0, size=(3, n)), axis=0)
    return zip(s, t, u)


class TestBaseDrift:
    def test_zero_input(self):
        np.testing.assert_array_equal(base_drift(ReferenceSde.vp(2), [0.0, 0.0], 0.3), [0.0, 0.0])

    def test_ve_is_zero(self):
        np.testing.assert_array_equal(base_drift(ReferenceSde.ve(2), [5.0, -2.0], 0.7), [0.0, 0.0])

    def test_vp_at_origin_time(self):
        np.testing.assert_allclose(base_drift(ReferenceSde.vp(2), [2.0, 0.0], 0.0), [-1.0, 0.0], rtol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgument):
            base_drift(ReferenceSde.vp(2), [1.0, 2.0, 3.0], 0.1)


class TestDiffusion:
    def test_ve_linear(self):
        assert diffusion_coeff(ReferenceSde.ve(1), 0.5) == 1.0

    def test_vp_at_zero(self):
        assert diffusion_coeff(ReferenceSde.vp(1), 0.0) == 1.0

    def test_subvp_vanishes_at_zero(self):
        assert diffusion_coeff(ReferenceSde.subvp(1), 0.0) == 0.0

    def test_smld_matches_alpha_prime(self):
        sched = GeometricSmld(0.01, 50.0)
        sde = ReferenceSde.ve(1, sched)
        for t in (0.1, 0.3, 0.9):
            h = 1e-6
            fd = (sched.alpha(t + h) - sched.alpha(t - h)) / (2 * h)
            assert rel(diffusion_coeff(sde, t) ** 2, fd) < 1e-6


class TestBetaIntegral:
    def test_tau1(self):
        assert rel(beta_integral(ReferenceSde.vp(1, 1.0), 0.0, 1.0), ONE_MINUS_EXP_M1) < 1e-15

    def test_tau10(self):
        assert rel(beta_integral(ReferenceSde.vp(1, 10.0), 0.0, 1.0), ONE_MINUS_EXP_M10) < 1e-15

    def test_empty_interval(self):
        assert beta_integral(ReferenceSde.vp(1), 0.37, 0.37) == 0.0

    def test_reversed_interval(self):
        with pytest.raises(InvalidArgument):
            beta_integral(ReferenceSde.vp(1), 0.5, 0.4)

    def test_ve_rejected(self):
        with pytest.raises(InvalidArgument):
            beta_integral(ReferenceSde.ve(1), 0.0, 0.5)

    @pytest.mark.parametrize("sched", [ExpDecayBeta(1.0), ExpDecayBeta(10.0), LinearDdpmBeta(0.1, 20.0)])
    def test_additivity(self, sched):
        sde = ReferenceSde(Family.VP, sched, 1)
        rng = np.random.default_rng(0)
        for s, t, u in triples(rng, 1000):
            lhs = beta_integral(sde, s, t) + beta_integral(sde, t, u)
            rhs = beta_integral(sde, s, u)
            assert abs(lhs - rhs) <= 1e-14 * max(abs(rhs), 1e-300) + 1e-17


class TestTransitionParams:
    def test_ve_quarter(self):
        k = transition_params(ReferenceSde.ve(1), 0.0, 0.25)
        assert (k.mean_scale, k.variance) == (1.0, 0.25)

    def test_vp_unit_interval(self):
        k = transition_params(ReferenceSde.vp(1, 1.0), 0.0, 1.0)
        assert rel(k.mean_scale, VP1_MEAN_SCALE_01) < 1e-14
        assert rel(k.variance, VP1_VARIANCE_01) < 1e-14

    @pytest.mark.parametrize(
        "sde",
        [ReferenceSde.ve(1), ReferenceSde.vp(1), ReferenceSde.subvp(1), ReferenceSde.subvp(1, exact_variance=True)],
    )
    def test_degenerate(self, sde):
        k = transition_params(sde, 0.4, 0.4)
        assert (k.mean_scale, k.variance) == (1.0, 0.0)

    def test_reversed(self):
        with pytest.raises(InvalidArgument):
            transition_params(ReferenceSde.vp(1), 0.6, 0.2)

    def test_ve_semigroup(self):
        sde = ReferenceSde.ve(1, GeometricSmld())
        for s, t, u in triples(np.random.default_rng(1), 1000):
            a, b, c = (transition_params(sde, *p) for p in ((s, t), (t, u), (s, u)))
            assert a.mean_scale == b.mean_scale == c.mean_scale == 1.0
            assert abs(a.variance + b.variance - c.variance) <= 1e-12 * c.variance + 1e-300

    @pytest.mark.parametrize("tau", [1.0, 10.0])
    def test_vp_semigroup(self, tau):
        sde = ReferenceSde.vp(1, tau)
        for s, t, u in triples(np.random.default_rng(2), 1000):
            a, b, c = (transition_params(sde, *p) for p in ((s, t), (t, u), (s, u)))
            assert rel(a.mean_scale * b.mean_scale, c.mean_scale) < 1e-12
            comp = b.mean_scale**2 * a.variance + b.variance
            assert abs(comp - c.variance) <= 1e-12 * c.variance + 1e-300


def subvp_composition_error(sde, s, t, u):
    a, b, c = (transition_params(sde, *p) for p in ((s, t), (t, u), (s, u)))
    return abs(b.mean_scale**2 * a.variance + b.variance - c.variance) / c.variance


class TestSubVpComposition:
    def test_exact_variant_composes(self):
        sde = ReferenceSde.subvp(1, 1.0, exact_variance=True)
        worst = max(subvp_composition_error(sde, s, t, u) for s, t, u in triples(np.random.default_rng(3), 1000))
        assert worst < 1e-12

    def test_default_variant_does_not(self):
        sde = ReferenceSde.subvp(1, 1.0)
        errs = [subvp_composition_error(sde, s, t, u) for s, t, u in triples(np.random.default_rng(3), 1000)]
        assert max(errs) > 0.1
        assert subvp_composition_error(sde, 0.2, 0.5, 0.8) > 1e-3

    def test_exact_variant_matches_sde_moments(self):
        # Var[x_t | x_s] from the linear SDE by quadrature of e^{-(A_t - A_r)} sigma(r)^2
        sde = ReferenceSde.subvp(1, 1.0, exact_variance=True)
        A = lambda r: beta_integral(sde, 0.0, r)
        s, t = 0.2, 0.7
        integrand = lambda r: math.exp(-(A(t) - A(r))) * sde.schedule.beta(r) * (1 - math.exp(-2 * A(r)))
        var, _ = quad(integrand, s, t, epsabs=1e-14, epsrel=1e-13)
        assert rel(transition_params(sde, s, t).variance, var) < 1e-10


class TestProfiles:
    def test_ve_constant(self):
        assert all(sigma_profile("ve-dsbs", t) == 1.0 for t in np.linspace(0, 1, 11))

    def test_ddpm_end(self):
        assert rel(sigma_profile("ddpm", 1.0), SQRT_20) < 1e-15

    def test_vp10_end(self):
        assert rel(sigma_profile("vp-dsbs-10", 1.0), SQRT_10_EXP_M10) < 1e-14

    @pytest.mark.parametrize("label,sign", [("smld", 1), ("ddpm", 1), ("vp-dsbs-1", -1), ("vp-dsbs-10", -1)])
    def test_strict_monotonicity(self, label, sign):
        vals = np.array([sigma_profile(label, t) for t in np.linspace(0, 1, 201)])
        assert np.all(sign * np.diff(vals) > 0)

    @pytest.mark.parametrize("bad", [ProfileScheme.parse, lambda s: sigma_profile(s, 0.5)])
    def test_invalid_constants(self, bad):
        for label in ("vp-dsbs--1", "vp-dsbs-0", "unknown"):
            with pytest.raises(InvalidArgument):
                bad(label)
        with pytest.raises(InvalidArgument):
            ProfileScheme("smld", sigma_min=2.0, sigma_max=1.0)
        with pytest.raises(InvalidArgument):
            ProfileScheme("ddpm", beta_min=0.0)

    def test_label_roundtrip(self):
        for label in ("ve-dsbs", "vp-dsbs-1", "vp-dsbs-10", "subvp-dsbs-2.5", "smld", "ddpm"):
            assert ProfileScheme.parse(label).label == label


class TestSchedulesAndSde:
    def test_family_schedule_pairing(self):
        with pytest.raises(InvalidArgument):
            ReferenceSde(Family.VE, ExpDecayBeta(1.0), 2)
        with pytest.raises(InvalidArgument):
            ReferenceSde(Family.VP, LinearAlpha(), 2)

    def test_bad_dim(self):
        with pytest.raises(InvalidArgument):
            ReferenceSde.ve(0)

    def test_bad_tau(self):
        with pytest.raises(InvalidArgument):
            ExpDecayBeta(0.0)

    def test_time_out_of_range(self):
        with pytest.raises(InvalidArgument):
            diffusion_coeff(ReferenceSde.vp(1), 1.5)


class TestTimeGrid:
    def test_uniform(self):
        g = TimeGrid.uniform(4)
        np.testing.assert_array_equal(g.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])
        assert g.n_steps == 4

    @pytest.mark.parametrize("nodes", [[0.0, 0.5], [0.1, 1.0], [0.0, 0.5, 0.5, 1.0], [0.0]])
    def test_rejects(self, nodes):
        with pytest.raises(InvalidArgument):
            TimeGrid(np.array(nodes))

    def test_zero_steps(self):
        with pytest.raises(InvalidArgument):
            TimeGrid.uniform(0)

    @given(st.integers(1, 2000))
    def test_uniform_endpoints(self, n):
        g = TimeGrid.uniform(n)
        assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0 and np.all(g.steps > 0)


unit = st.floats(0.0, 1.0, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(unit, unit, st.sampled_from(["ve", "ve-smld", "vp1", "vp10", "subvp", "subvp-exact"]))
def test_kernel_well_formed(a, b, which):
    s, t = min(a, b), max(a, b)
    sde = {
        "ve": ReferenceSde.ve(1),
        "ve-smld": ReferenceSde.ve(1, GeometricSmld()),
        "vp1": ReferenceSde.vp(1, 1.0),
        "vp10": ReferenceSde.vp(1, 10.0),
        "subvp": ReferenceSde.subvp(1),
        "subvp-exact": ReferenceSde.subvp(1, exact_variance=True),
    }[which]
    k = transition_params(sde, s, t)
    assert 0.0 < k.mean_scale <= 1.0
    assert k.variance >= 0.0
    if s == t:
        assert (k.mean_scale, k.variance) == (1.0, 0.0)


@settings(max_examples=200, deadline=None)
@given(unit, unit, unit)
def test_vp_semigroup_property(a, b, c):
    s, t, u = sorted((a, b, c))
    sde = ReferenceSde.vp(1, 10.0)
    k1, k2, k3 = (transition_params(sde, *p) for p in ((s, t), (t, u), (s, u)))
    assert abs(k1.mean_scale * k2.mean_scale - k3.mean_scale) <= 1e-12 * k3.mean_scale
    assert abs(k2.mean_scale**2 * k1.variance + k2.variance - k3.variance) <= 1e-12 * k3.variance + 1e-300
