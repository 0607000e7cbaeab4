import numpy as np
import pytest

from makinolab.coupling import PhysParams
from makinolab.diagnostics import (DecayExponents, NormSeries, OdeParams,
                                   bisect_ode_threshold, decay_exponents,
                                   decay_fit, fit_power_law, ineq_ratio,
                                   ineq_ratio_sweep, mass, ode_lemma_run)
from makinolab.errors import DomainError, InsufficientWindowError
from makinolab.evolve import MakinoState
from makinolab.spectral import (Grid, ScalarField, VectorField,
                                random_band_limited)


class TestDecayExponents:
    def test_monatomic_three_dimensional(self):
        e = decay_exponents(3, 5.0 / 3.0, 0.0)
        assert e.c_dg == pytest.approx(-0.5)

    def test_one_dimensional_gamma_two(self):
        e = decay_exponents(1, 2.0, 0.0)
        assert e.c_dg == pytest.approx(0.0)
        assert e.a == pytest.approx(1.5)

    def test_order_shift(self):
        e = decay_exponents(3, 1.4, 2.0)
        assert e.c_dgs == pytest.approx(0.6 - 1.5 + 2.0)

    def test_weight_exceeds_one_iff_gamma_does(self):
        assert decay_exponents(2, 1.0 + 1e-9, 0.0).a > 1.0
        with pytest.raises(ValueError):
            decay_exponents(2, 1.0, 0.0)


class TestNormSeries:
    def make(self):
        t = np.linspace(0.0, 10.0, 21)
        x = np.stack([2.0 / (1 + t), 3.0 / (1 + t) ** 2], axis=1)
        return NormSeries(times=t, sigmas=(0.0, 1.0), x=x, d=1, gamma=2.0)

    def test_weighted_views(self):
        s = self.make()
        e0 = decay_exponents(1, 2.0, 0.0)
        np.testing.assert_allclose(
            s.weighted(0.0), (1 + s.times) ** e0.c_dgs * s.x[:, 0])
        e1 = decay_exponents(1, 2.0, 1.0)
        np.testing.assert_allclose(
            s.bootstrap(1.0), (1 + s.times) ** (e1.c_dgs - e1.a) * s.x[:, 1])

    def test_rejects_unsorted_times(self):
        with pytest.raises(ValueError):
            NormSeries(times=np.array([0.0, 0.0, 1.0]), sigmas=(0.0,),
                       x=np.zeros((3, 1)), d=1, gamma=2.0)

    def test_unknown_sigma(self):
        with pytest.raises(KeyError):
            self.make().x_of(7.0)


class TestMass:
    def test_zero_state(self):
        g = Grid(1, 64, 10.0)
        state = MakinoState(0.0, ScalarField.zeros(g), VectorField.zeros(g))
        assert mass(state, PhysParams(gamma=2.0)) == 0.0

    def test_identity_transform_parameters(self):
        # gamma=3, A=1/3 make the sound variable equal the density, so the
        # mass is the plain box quadrature of rho
        g = Grid(1, 128, 10.0)
        p = PhysParams(gamma=3.0, a_pressure=1.0 / 3.0)
        data = np.abs(np.sin(g.x_axis)) + 0.1
        state = MakinoState(0.0, ScalarField(g, data), VectorField.zeros(g))
        assert mass(state, p) == pytest.approx(g.cell_volume * data.sum(), rel=1e-14)


class TestDecayFit:
    def test_exact_power_law(self):
        t = np.linspace(1.0, 40.0, 100)
        x = 5.0 * (1 + t) ** (-2.0)
        f = fit_power_law(t, x, (1.0, 40.0))
        assert f.slope == pytest.approx(-2.0, abs=1e-6)
        assert f.stderr <= 1e-6

    def test_constant_series_has_zero_slope(self):
        t = np.linspace(1.0, 40.0, 50)
        f = fit_power_law(t, np.full_like(t, 3.3), (1.0, 40.0))
        assert f.slope == pytest.approx(0.0, abs=1e-9)

    def test_window_must_start_past_one(self):
        t = np.linspace(0.0, 40.0, 100)
        with pytest.raises(InsufficientWindowError):
            fit_power_law(t, t + 1, (0.5, 40.0))

    def test_needs_ten_samples(self):
        t = np.linspace(1.0, 40.0, 100)
        with pytest.raises(InsufficientWindowError):
            fit_power_law(t, t, (39.0, 40.0))

    def test_series_interface(self):
        t = np.linspace(0.0, 30.0, 200)
        x = np.stack([4.0 * (1 + t) ** (-1.5)], axis=1)
        series = NormSeries(times=t, sigmas=(1.0,), x=x, d=1, gamma=2.0)
        f = decay_fit(series, 1.0, (1.0, 30.0))
        assert f.slope == pytest.approx(-1.5, abs=1e-6)


class TestOdeLemma:
    def test_linear_case_exact(self):
        p = OdeParams(a=2.0, m=1.0, m_prime=1.5, c=0.0, y0=0.5)
        res = ode_lemma_run(p, 1e3)
        assert res.verdict and not res.blow_up
        exact = p.y0 / (1 + res.times) ** p.a
        rel = np.max(np.abs(res.y - exact) / exact)
        assert rel <= 1e-6

    def test_zero_start_stays_zero(self):
        p = OdeParams(a=1.5, m=0.5, m_prime=0.0, c=3.0, y0=0.0)
        res = ode_lemma_run(p, 100.0)
        assert res.verdict
        assert np.max(res.y) == 0.0

    def test_verdict_monotone_in_y0(self):
        lo, hi = bisect_ode_threshold(2.0, 1.0, 1.5, 1.0, t_end=200.0)
        assert 0.0 < lo < hi
        verdicts = [ode_lemma_run(OdeParams(2.0, 1.0, 1.5, 1.0, y0), 200.0).verdict
                    for y0 in (lo / 8, lo / 2, lo, hi * 2, hi * 16)]
        assert verdicts == sorted(verdicts, reverse=True)

    def test_verdict_monotone_in_forcing(self):
        # a larger forcing constant never rescues a failing bound
        y0 = 0.3
        results = [ode_lemma_run(OdeParams(2.0, 1.0, 1.5, c, y0), 200.0).verdict
                   for c in (0.25, 1.0, 4.0)]
        assert results == sorted(results, reverse=True)

    def test_blow_up_reported_not_raised(self):
        res = ode_lemma_run(OdeParams(2.0, 1.0, 1.5, 1.0, 50.0), 100.0)
        assert res.blow_up and not res.verdict

    def test_side_conditions_validated(self):
        with pytest.raises(ValueError):
            OdeParams(a=1.0, m=1.0, m_prime=0.5, c=1.0, y0=0.1)
        with pytest.raises(ValueError):
            OdeParams(a=2.0, m=0.0, m_prime=-1.0, c=1.0, y0=0.1)
        with pytest.raises(ValueError):
            OdeParams(a=2.0, m=1.0, m_prime=2.0, c=1.0, y0=0.1)
        with pytest.raises(ValueError):
            OdeParams(a=2.0, m=1.0, m_prime=1.0, c=-1.0, y0=0.1)


def grid1(n=256):
    return Grid(1, n, 2 * np.pi)


class TestIneqRatio:
    def test_constant_v_commutes(self):
        g = grid1()
        v = ScalarField(g, np.full(g.shape, 2.0))
        u = random_band_limited(g, 20, seed=1)
        assert ineq_ratio("com1", v=v, u=u, s=1.5) <= 1e-13

    def test_com1_scale_invariance(self):
        g = grid1()
        v = random_band_limited(g, 30, seed=2)
        u = random_band_limited(g, 30, seed=3)
        base = ineq_ratio("com1", v=v, u=u, s=1.5)
        for lam in (1e-3, 7.0, 1e4):
            vs = ScalarField(g, lam * v.data)
            us = ScalarField(g, lam * u.data)
            assert abs(ineq_ratio("com1", v=vs, u=u, s=1.5) - base) <= 1e-10 * base
            assert abs(ineq_ratio("com1", v=v, u=us, s=1.5) - base) <= 1e-10 * base

    def test_compo_square_refinement_stable(self):
        # single positive-mean mode family: |z|^2 is an exact polynomial, so
        # coarse and fine evaluations agree to roundoff
        vals = []
        for n in (128, 256):
            g = grid1(n)
            z = ScalarField(g, 2.0 + np.cos(3 * g.x_axis))
            vals.append(ineq_ratio("compo", z=z, sigma=1.0, alpha=2.0))
        assert vals[0] == pytest.approx(vals[1], rel=1e-12)
        assert np.isfinite(vals[0]) and vals[0] > 0

    def test_parameter_domains(self):
        g = grid1(64)
        f = random_band_limited(g, 10, seed=4)
        with pytest.raises(DomainError):
            ineq_ratio("com1", v=f, u=f, s=0.0)
        with pytest.raises(DomainError):
            ineq_ratio("com2", v=f, u=f, s=1.0)
        with pytest.raises(DomainError):
            ineq_ratio("compo", z=f, sigma=3.0, alpha=2.0)
        with pytest.raises(DomainError):
            ineq_ratio("compo", z=f, sigma=1.0, alpha=0.5)
        with pytest.raises(DomainError):
            ineq_ratio("nope", v=f, u=f, s=2.0)

    def test_sweep_deterministic(self):
        g = grid1(128)
        a = ineq_ratio_sweep("com1", g, 10, root_seed=55, kmax=20, s=1.5)
        b = ineq_ratio_sweep("com1", g, 10, root_seed=55, kmax=20, s=1.5)
        assert np.array_equal(a.ratios, b.ratios)
        assert a.max_ratio == b.max_ratio

    def test_sweep_resolution_stable(self):
        kw = dict(n_seeds=25, root_seed=99, kmax=128 // 6)
        a = ineq_ratio_sweep("com2", grid1(128), s=2.5, **kw)
        b = ineq_ratio_sweep("com2", grid1(256), s=2.5, **kw)
        assert abs(a.max_ratio - b.max_ratio) <= 0.10 * a.max_ratio
