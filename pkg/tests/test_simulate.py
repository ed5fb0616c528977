import math

import numpy as np
import pytest
from scipy import stats

from oracles import quad_moment, quad_tail
from voltune.errors import InvalidArgument
from voltune.grid import JumpComponent, SamplingGrid, grid_for_days
from voltune.simulate import (
    CgmyParams,
    CppParams,
    HestonParams,
    SimConfig,
    TwoRegimeParams,
    _heston_euler,
    apply_overrides,
    cgmy_big_jump_intensity,
    cgmy_compensator_drift,
    cgmy_small_variance,
    cgmy_tail,
    model_preset,
    simulate_cgmy,
    simulate_cpp,
    simulate_heston,
    simulate_model,
    simulate_two_regime,
    stream,
    two_regime_threshold,
    upper_gamma,
)

WEEK = grid_for_days(5)


class TestStreams:
    def test_reproducible(self):
        a = stream(7, 3, 1).standard_normal(5)
        b = stream(7, 3, 1).standard_normal(5)
        assert np.array_equal(a, b)

    def test_distinct_keys(self):
        draws = {tuple(stream(7, p, c).standard_normal(3)) for p in range(3) for c in range(4)}
        assert len(draws) == 12
        assert not np.array_equal(stream(7, 0, 3, 512).random(3), stream(7, 0, 3, 2048).random(3))


class TestHeston:
    def test_constant_variance(self):
        g = SamplingGrid(50, 1.0)
        s2, dx = simulate_heston(HestonParams(xi=0.0), g, 10, stream(0, 0, 0))
        assert np.all(s2 == 0.04)
        assert dx.shape == (50,)

    def test_ode_limit(self):
        g = SamplingGrid(100, 1.0)
        p = HestonParams(kappa=5.0, theta=0.04, xi=0.0, v0=0.09)
        s2, _ = simulate_heston(p, g, 10, stream(0, 0, 0))
        t = np.linspace(0, 1, s2.size)
        exact = 0.04 + 0.05 * np.exp(-5 * t)
        # Euler on 1000 steps: global error O(kappa * dt) relative
        assert np.max(np.abs(s2 - exact)) < 0.05 * 5 * 1e-3 * 2

    def test_gaussian_increments(self):
        h = 1 / 19656
        g = SamplingGrid(10_000, 10_000 * h)
        _, dx = simulate_heston(HestonParams(kappa=500.0, xi=0.0), g, 10, stream(3, 0, 0))
        se_var = 0.04 * h * math.sqrt(2 / dx.size)
        assert abs(dx.mean()) < 4 * math.sqrt(0.04 * h / dx.size)
        assert abs(dx.var() - 0.04 * h) < 4 * se_var
        assert abs(stats.kurtosis(dx)) < 4 * math.sqrt(24 / dx.size)

    @pytest.mark.parametrize("rho", [-1.0, -0.5, 0.0, 1.0])
    def test_correlation(self, rho):
        N = 20_000
        rng = np.random.default_rng(11)
        zb, zp = rng.standard_normal(N), rng.standard_normal(N)
        _, dx = _heston_euler(0.04, 5.0, 0.04, 0.0, rho, 1e-4, zb, zp)
        corr = np.corrcoef(dx, zb)[0, 1]
        assert abs(corr - rho) < 3 / math.sqrt(N)

    def test_nonnegative_variance(self):
        p = HestonParams(kappa=1.0, theta=0.01, xi=2.0)
        s2, _ = simulate_heston(p, SamplingGrid(500, 1.0), 10, stream(1, 0, 0))
        assert np.all(s2 >= 0) and np.any(s2 == 0)

    @pytest.mark.parametrize("kw", [dict(theta=0), dict(rho=1.5), dict(xi=-1), dict(v0=-0.1)])
    def test_invalid(self, kw):
        with pytest.raises(InvalidArgument):
            HestonParams(**kw)


class TestCgmy:
    P = CgmyParams()

    def test_incomplete_gamma_recurrence(self):
        from scipy import integrate

        for s in (-0.917, -0.5, 0.083, 1.2):
            for z in (1e-4, 0.3, 2.0):
                ref = integrate.quad(lambda u: u ** (s - 1) * math.exp(-u), z, math.inf)[0]
                assert float(upper_gamma(s, z)) == pytest.approx(ref, rel=1e-8)

    def test_tail_vs_quadrature(self):
        for _, amp, rate in self.P.sides():
            for x in (1e-5, 1e-3, 0.05):
                assert float(cgmy_tail(amp, rate, self.P.y, x)) == pytest.approx(quad_tail(amp, rate, self.P.y, x), rel=1e-7)

    def test_intensity(self):
        lam = cgmy_big_jump_intensity(self.P, 1e-5)
        ref = sum(quad_tail(a, r, self.P.y, 1e-5) for _, a, r in self.P.sides())
        assert lam == pytest.approx(ref, rel=1e-7)
        assert lam == pytest.approx(7586.9, rel=1e-4)

    def test_small_jump_variance_and_drift(self):
        eps, y = 1e-5, self.P.y
        var = sum(quad_moment(a, r, y, 0, eps, 2) for _, a, r in self.P.sides())
        assert cgmy_small_variance(self.P, eps) == pytest.approx(var, rel=1e-7)
        drift = -sum(sign * quad_moment(a, r, y, eps, 1.0, 1) for sign, a, r in self.P.sides())
        assert cgmy_compensator_drift(self.P, eps) == pytest.approx(drift, rel=1e-7)

    def test_zero_process(self):
        p = CgmyParams(c_minus=0.0, c_plus=0.0)
        g = SamplingGrid(20, 1.0)
        incs, rec = simulate_cgmy(p, g, SimConfig(g), stream(0, 0, 1))
        assert not incs.any() and len(rec) == 0

    def test_invalid(self):
        for kw in (dict(y=2.0), dict(y=0.0), dict(c_plus=-1), dict(g=0.0)):
            with pytest.raises(InvalidArgument):
                CgmyParams(**kw)

    def test_jump_counts_poisson(self):
        g = SamplingGrid(10, 1.0)
        cfg = SimConfig(g, gaussian_correction=False)
        lam = cgmy_big_jump_intensity(self.P, cfg.cgmy_trunc)
        counts = np.array([len(simulate_cgmy(self.P, g, cfg, stream(5, p, 1))[1]) for p in range(2000)])
        edges = stats.poisson.ppf(np.linspace(0, 1, 11)[1:-1], lam)
        observed = np.bincount(np.searchsorted(edges, counts, side="left"), minlength=10)
        cdf = stats.poisson.cdf(edges, lam)
        probs = np.diff(np.r_[0.0, cdf, 1.0])
        chi2 = np.sum((observed - 2000 * probs) ** 2 / (2000 * probs))
        assert chi2 < stats.chi2.ppf(0.99, 9)

    def test_jump_size_distribution(self):
        g = SamplingGrid(10, 1.0)
        _, rec = simulate_cgmy(self.P, g, SimConfig(g), stream(9, 0, 1))
        sizes = rec.sizes
        assert np.all(np.abs(sizes) > 1e-5 * (1 - 1e-9))
        lam = cgmy_big_jump_intensity(self.P, 1e-5)
        for x in (1e-4, 1e-3, 1e-2):
            p = quad_tail(self.P.c_plus, self.P.m, self.P.y, x) / lam
            frac = np.mean(sizes > x)
            assert abs(frac - p) < 4 * math.sqrt(p * (1 - p) / sizes.size)

    def test_first_two_cumulants(self):
        T, m = 0.05, 10_000
        g = SamplingGrid(2, T)
        cfg = SimConfig(g)
        y = self.P.y
        mean = sum(sign * quad_moment(a, r, y, 1.0, math.inf, 1) for sign, a, r in self.P.sides())
        var = sum(quad_moment(a, r, y, 0.0, math.inf, 2) for _, a, r in self.P.sides())
        L = np.array([simulate_cgmy(self.P, g, cfg, stream(2, p, 1))[0].sum() for p in range(m)])
        assert abs(L.mean() - T * mean) < 4 * math.sqrt(T * var / m)
        # sd of the sample variance uses the fourth cumulant, also finite
        k4 = sum(quad_moment(a, r, y, 0.0, math.inf, 4) for _, a, r in self.P.sides())
        se = math.sqrt((T * k4 + 2 * (T * var) ** 2) / m)
        assert abs(L.var() - T * var) < 4 * se


class TestCpp:
    def test_daily_count(self):
        g = SamplingGrid(78, 1 / 252)
        counts = [len(simulate_cpp(CppParams(lam=252.0), None, g, stream(0, p, 2))) for p in range(10_000)]
        assert np.mean(counts) == pytest.approx(1.0, abs=0.05)

    def test_switching_off(self):
        g = SamplingGrid(78, 1 / 252)
        p = CppParams("vol_switching", lam=504.0, threshold=0.04)
        low = np.full(781, 0.03)
        assert sum(len(simulate_cpp(p, low, g, stream(0, k, 2))) for k in range(500)) == 0

    def test_switching_on(self):
        g = SamplingGrid(78, 1 / 252)
        p = CppParams("vol_switching", lam=504.0, threshold=0.04)
        high = np.full(781, 0.04)
        counts = [len(simulate_cpp(p, high, g, stream(1, k, 2))) for k in range(10_000)]
        assert np.mean(counts) == pytest.approx(2.0, abs=0.07)

    def test_switching_needs_path(self):
        p = CppParams("vol_switching", lam=504.0, threshold=0.04)
        with pytest.raises(InvalidArgument):
            simulate_cpp(p, None, WEEK, stream(0, 0, 2))
        with pytest.raises(InvalidArgument):
            CppParams("vol_switching", lam=1.0)

    def test_sizes(self):
        g = SamplingGrid(10, 40.0)
        rec = simulate_cpp(CppParams(lam=252.0), None, g, stream(4, 0, 2))
        assert rec.sizes.mean() == pytest.approx(-0.005, abs=4 * 0.01 / math.sqrt(len(rec)))
        assert rec.sizes.std() == pytest.approx(0.01, rel=0.02)
        assert np.all((rec.times > 0) & (rec.times <= g.T))


class TestModels:
    def test_presets(self):
        m2 = model_preset(2)
        assert m2.cpp.intensity == "vol_switching" and m2.cpp.lam == 504 and m2.cpp.threshold == 0.04
        assert model_preset(3).cpp.lam == 378
        assert model_preset(4).cgmy is None and model_preset(4).cpp.lam == pytest.approx(289.8)
        m5 = model_preset(5)
        assert m5.cgmy is None and m5.cpp is None and m5.heston.theta == pytest.approx(0.275**2)
        for bad in (0, 6, "1"):
            with pytest.raises(InvalidArgument):
                model_preset(bad)

    def test_overrides(self):
        spec = apply_overrides(model_preset(1), {"heston": {"theta": 0.09}, "cgmy": None})
        assert spec.heston.theta == 0.09 and spec.heston.kappa == 5 and spec.cgmy is None
        with pytest.raises(InvalidArgument):
            apply_overrides(model_preset(1), {"heston": None})
        with pytest.raises(InvalidArgument):
            apply_overrides(model_preset(1), {"volatility": {}})

    def test_no_jump_model(self):
        b = simulate_model(5, WEEK, SimConfig(WEEK, seed=1))
        assert all(len(r) == 0 for r in b.jumps) and len(b.jumps) == 2

    def test_finite_activity_model(self):
        b = simulate_model(4, WEEK, SimConfig(WEEK, seed=1))
        assert len(b.jump_record(JumpComponent.INFINITE_ACTIVITY)) == 0

    @pytest.mark.parametrize("model", [1, 2, 3, 4, 5])
    def test_bookkeeping(self, model):
        b = simulate_model(model, WEEK, SimConfig(WEEK, seed=3), path_index=4)
        total = b.components["diffusion"] + b.components.get("levy_small", 0.0)
        total = total + sum(r.binned(WEEK) for r in b.jumps)
        assert np.max(np.abs(total - b.increments.values)) < 1e-10
        assert b.levels()[0] == 1.0
        assert b.c_true > 0 and np.all(b.sigma2_fine >= 0)
        assert b.sigma2_fine.size == 10 * WEEK.n + 1

    def test_reproducible(self):
        cfg = SimConfig(WEEK, seed=42)
        a = simulate_model(1, WEEK, cfg, 7)
        b = simulate_model(1, WEEK, cfg, 7)
        c = simulate_model(1, WEEK, cfg, 8)
        assert np.array_equal(a.increments.values, b.increments.values)
        assert np.array_equal(a.sigma2_fine, b.sigma2_fine)
        assert not np.array_equal(a.increments.values, c.increments.values)

    def test_shared_volatility_across_models(self):
        # models draw the variance path from the same stream
        cfg = SimConfig(WEEK, seed=42)
        assert np.array_equal(simulate_model(1, WEEK, cfg, 0).sigma2_fine, simulate_model(4, WEEK, cfg, 0).sigma2_fine)

    def test_config_validation(self):
        with pytest.raises(InvalidArgument):
            SimConfig(WEEK, substeps=0)
        with pytest.raises(InvalidArgument):
            SimConfig(WEEK, cgmy_trunc=1.0)


class TestTwoRegime:
    def test_constant_vol(self):
        p = TwoRegimeParams(a=0.5, b=0.5, c0=0.8)
        assert p.delta == pytest.approx(0.4)
        assert p.integrated_variance(1.0) == pytest.approx(0.25)

    def test_delta(self):
        assert TwoRegimeParams(a=0.25, b=1.0, theta_break=0.8, c0=2.0).delta == pytest.approx(0.25, rel=1e-14)

    def test_truth(self):
        assert TwoRegimeParams(a=1.0, b=4.0, theta_break=0.8, c0=2.0).integrated_variance(1.0) == pytest.approx(4.0)

    @pytest.mark.parametrize("kw", [dict(a=2.0, b=1.0), dict(theta_break=1.0), dict(c0=4.0), dict(c0=0.0)])
    def test_invalid(self, kw):
        with pytest.raises(InvalidArgument):
            TwoRegimeParams(**kw)

    def test_path(self):
        p = TwoRegimeParams()
        g = SamplingGrid(1000, 1.0)
        b = simulate_two_regime(p, g, stream(0, 0, 3))
        assert b.c_true == pytest.approx(0.25**2 * 0.8 + 0.2)
        assert all(len(r) == 0 for r in b.jumps)
        x = b.increments.values
        # volatility ratio between the regimes
        assert np.std(x[850:]) / np.std(x[:750]) == pytest.approx(4.0, rel=0.2)
        assert two_regime_threshold(p, g) == pytest.approx(math.sqrt(2 * b.c_true * 1e-3 * math.log(1000)))

    def test_break_inside_interval(self):
        p = TwoRegimeParams()
        g = SamplingGrid(3, 1.0)  # break at 0.8 falls in (2/3, 1]
        x = np.array([simulate_two_regime(p, g, stream(0, k, 3)).increments.values for k in range(20_000)])
        expected = np.array([0.0625 / 3, 0.0625 / 3, 0.0625 * (0.8 - 2 / 3) + 0.2])
        assert np.allclose(x.var(axis=0), expected, rtol=0.05)
