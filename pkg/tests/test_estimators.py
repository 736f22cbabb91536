import math

import numpy as np
import pytest

from scsm.dataset import SurvivalDataset
from scsm.errors import (
    DegenerateFirstStage,
    EmptyWindow,
    InvalidTime,
    MissingColumn,
    NoJumpsInWindow,
    NonBinaryExposure,
    RankDeficientRiskSet,
    WeakInstrument,
)
from scsm.estimators import (
    StepFunction,
    VolterraFit,
    constant_effect,
    fit_recursive,
    fit_volterra_binary,
    naive_aalen,
    piecewise_effect,
    two_stage_ls,
)
from scsm.instrument import InstrumentModelSpec, fit_instrument_model

E = math.e


def mean_fit(ds):
    return fit_instrument_model(ds, InstrumentModelSpec("mean"))


def four_subject_dataset():
    # times 1, 2, 3 are cause-1 events; 1.5 is a censoring
    return SurvivalDataset(
        time=[1.0, 2.0, 1.5, 3.0],
        status=[1, 1, 0, 1],
        exposure=[1.0, 0.0, 1.0, 2.0],
        instrument=[1.0, 1.0, 0.0, 0.0],
    )


def random_dataset(rng, n, binary_exposure=False, event_prob=0.65):
    g = rng.normal(size=n)
    x = g + 0.8 * rng.normal(size=n)
    if binary_exposure:
        x = (x > 0).astype(float)
    return SurvivalDataset(
        time=rng.exponential(1.0, n) + 0.05,
        status=(rng.uniform(size=n) < event_prob).astype(int),
        exposure=x,
        instrument=g,
    )


# -- StepFunction ------------------------------------------------------------


class TestStepFunction:
    def test_evaluation_and_left_limits(self):
        f = StepFunction(grid=[1.0, 2.0], values=[0.5, -0.25], initial=0.1)
        assert f(0.0) == 0.1
        assert f(1.0) == 0.5            # right-continuous at the jump
        assert f.value_before(1.0) == 0.1
        assert f(1.5) == 0.5
        assert f(2.0) == -0.25
        assert f.value_before(2.0) == 0.5
        assert f(10.0) == -0.25
        np.testing.assert_allclose(f(np.array([0.0, 1.0, 3.0])),
                                   [0.1, 0.5, -0.25])
        np.testing.assert_allclose(f.increments(), [0.4, -0.75])

    def test_integration(self):
        f = StepFunction(grid=[1.0, 2.0], values=[1.0, 3.0], initial=0.0)
        # 0 on [0,1), 1 on [1,2), 3 from 2 on
        assert f.integrate(0.0, 3.0) == pytest.approx(0.0 + 1.0 + 3.0)
        assert f.integrate(0.5, 1.5) == pytest.approx(0.5 * 0.0 + 0.5 * 1.0)
        assert f.integrate(2.5, 2.5) == 0.0
        with pytest.raises(ValueError):
            f.integrate(2.0, 1.0)

    def test_empty_grid(self):
        f = StepFunction(grid=[], values=[], initial=0.25)
        assert f(5.0) == 0.25
        assert f.increments().size == 0
        assert f.integrate(0.0, 4.0) == pytest.approx(1.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            StepFunction(grid=[1.0, 1.0], values=[0.0, 1.0])
        with pytest.raises(ValueError):
            StepFunction(grid=[2.0, 1.0], values=[0.0, 1.0])
        with pytest.raises(ValueError):
            StepFunction(grid=[1.0], values=[0.0, 1.0])


# -- recursive fit -----------------------------------------------------------


class TestRecursiveFit:
    def test_four_subject_closed_form(self):
        ds = four_subject_dataset()
        b_hat, trace = fit_recursive(ds, mean_fit(ds))
        np.testing.assert_allclose(trace.times, [1.0, 2.0, 3.0])
        np.testing.assert_allclose(
            b_hat.values, [-0.5, -(1 + E) / 2, -E / 2], rtol=1e-12)
        # per-step internals, worked by hand from the defining recursion
        np.testing.assert_allclose(trace.num, [0.5, 0.5, -0.5 * E ** (-1 - E)],
                                   rtol=1e-12)
        np.testing.assert_allclose(trace.den, [-1.0, -1 / E, -E ** (-1 - E)],
                                   rtol=1e-12)
        np.testing.assert_allclose(trace.delta, [-0.5, -E / 2, 0.5], rtol=1e-12)
        assert b_hat(0.5) == 0.0
        assert b_hat.initial == 0.0
        assert trace.n == 4
        assert trace.min_den_over_n == pytest.approx(E ** (-1 - E) / 4)

    def test_estimating_equation_exactness(self):
        # the defining property: at each event time the centered-instrument
        # estimating function, evaluated at the fitted increment, is exactly 0
        rng = np.random.default_rng(1234)
        checked = 0
        for _ in range(100):
            n = int(rng.integers(4, 21))
            ds = random_dataset(rng, n)
            if not np.any(ds.status == 1):
                continue
            try:
                b_hat, trace = fit_recursive(ds, mean_fit(ds))
            except WeakInstrument:
                continue
            gc = mean_fit(ds).residuals
            x, t, st = ds.exposure, ds.time, ds.status
            for k, tk in enumerate(trace.times):
                b_prev = 0.0 if k == 0 else trace.b_values[k - 1]
                weights = gc * np.exp(b_prev * x)
                dn = ((t == tk) & (st == 1)).astype(float)
                at_risk = (t >= tk).astype(float)
                terms = weights * (dn - at_risk * x * trace.delta[k])
                # scale by both sides of the cancellation, not the residual
                scale = (np.sum(np.abs(weights * dn))
                         + np.sum(np.abs(weights * at_risk * x)) * abs(trace.delta[k]))
                assert abs(terms.sum()) <= 1e-12 * scale
            checked += 1
        assert checked >= 60

    def test_jumps_only_at_event_times(self):
        rng = np.random.default_rng(77)
        ds = random_dataset(rng, 40)
        b_hat, trace = fit_recursive(ds, mean_fit(ds))
        event_times = np.unique(ds.time[ds.status == 1])
        np.testing.assert_array_equal(b_hat.grid, event_times)
        assert b_hat(event_times[0] - 1e-9) == 0.0

    def test_no_events_returns_zero_fit(self):
        ds = SurvivalDataset([1.0, 2.0], [0, 0], [1.0, 0.0], [1.0, 0.0])
        b_hat, trace = fit_recursive(ds, mean_fit(ds))
        assert trace.m == 0
        assert b_hat.m == 0
        assert b_hat(5.0) == 0.0
        assert trace.min_den_over_n is None

    def test_weak_instrument_at_first_step(self):
        # instrument and exposure arranged so the first denominator is 0
        ds = SurvivalDataset(
            time=[1.0, 2.0, 3.0, 4.0],
            status=[1, 1, 1, 1],
            exposure=[1.0, 0.0, 1.0, 0.0],
            instrument=[1.0, 1.0, 0.0, 0.0],
        )
        with pytest.raises(WeakInstrument) as info:
            fit_recursive(ds, mean_fit(ds))
        assert info.value.time == 1.0
        assert math.isnan(info.value.min_den_over_n)

    def test_weak_instrument_at_later_step(self):
        # first step fine; after the early exits the time-2 denominator is 0
        ds = SurvivalDataset(
            time=[1.0, 1.0, 2.0, 2.0, 2.0, 2.0],
            status=[1, 0, 1, 1, 1, 1],
            exposure=[1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            instrument=[1.0, 0.0, 1.0, 1.0, 0.0, 0.0],
        )
        with pytest.raises(WeakInstrument) as info:
            fit_recursive(ds, mean_fit(ds))
        assert info.value.time == 2.0
        # the diagnostic reports the strength seen before the failure
        assert info.value.min_den_over_n == pytest.approx(0.5 / 6)

    def test_instrument_fit_validation(self):
        ds = four_subject_dataset()
        with pytest.raises(TypeError):
            fit_recursive(ds, np.zeros(4))
        other = SurvivalDataset([1.0, 2.0], [1, 0], [1.0, 0.0], [1.0, 0.0])
        with pytest.raises(ValueError):
            fit_recursive(ds, mean_fit(other))

    def test_affine_instrument_invariance(self):
        # replacing G by a + c G leaves the fit unchanged: the centering
        # removes a and c cancels between numerator and denominator
        rng = np.random.default_rng(21)
        ds = random_dataset(rng, 60)
        shifted = SurvivalDataset(ds.time, ds.status, ds.exposure,
                                  -1.3 + 2.7 * ds.instrument)
        b1, _ = fit_recursive(ds, mean_fit(ds))
        b2, _ = fit_recursive(shifted, mean_fit(shifted))
        np.testing.assert_array_equal(b1.grid, b2.grid)
        np.testing.assert_allclose(b1.values, b2.values, rtol=1e-12)

    def test_sign_consistency(self):
        # negating both the exposure and the instrument flips the sign of
        # the cumulative coefficient exactly
        rng = np.random.default_rng(22)
        ds = random_dataset(rng, 50)
        flipped = SurvivalDataset(ds.time, ds.status, -ds.exposure,
                                  -ds.instrument)
        b1, _ = fit_recursive(ds, mean_fit(ds))
        b2, _ = fit_recursive(flipped, mean_fit(flipped))
        np.testing.assert_allclose(b1.values, -b2.values, rtol=1e-12)

    def test_row_permutation_reproduces_bitwise(self):
        rng = np.random.default_rng(23)
        ds = random_dataset(rng, 80)
        perm = rng.permutation(80)
        shuffled = SurvivalDataset(ds.time[perm], ds.status[perm],
                                   ds.exposure[perm], ds.instrument[perm])
        b1, _ = fit_recursive(ds, mean_fit(ds))
        b2, _ = fit_recursive(shuffled, mean_fit(shuffled))
        assert np.array_equal(b1.values, b2.values)


# -- closed-form binary fit --------------------------------------------------


class TestVolterraBinary:
    def test_requires_binary_exposure(self):
        rng = np.random.default_rng(31)
        ds = random_dataset(rng, 20, binary_exposure=False)
        with pytest.raises(NonBinaryExposure):
            fit_volterra_binary(ds, mean_fit(ds))

    def test_single_event_closed_form(self):
        # with a single event by subject j the solution is 1 + Gc_j / den0
        ds = SurvivalDataset(
            time=[1.0, 2.0, 3.0, 4.0],
            status=[1, 0, 0, 0],
            exposure=[0.0, 1.0, 0.0, 0.0],
            instrument=[1.0, 1.0, 0.0, 0.0],
        )
        fit = fit_volterra_binary(ds, mean_fit(ds))
        assert fit.survival_ratio.grid.tolist() == [1.0]
        # Gc = (.5, .5, -.5, -.5); den0 = .5, the event subject has Gc = .5
        assert fit.survival_ratio.values[0] == pytest.approx(2.0, rel=1e-12)
        assert fit.min_den_over_n == pytest.approx(0.5 / 4)

    def test_constant_instrument_is_weak(self):
        ds = SurvivalDataset([1.0, 2.0], [1, 0], [1.0, 1.0], [1.0, 1.0])
        with pytest.raises(WeakInstrument):
            fit_volterra_binary(ds, mean_fit(ds))

    def test_matches_direct_double_sum(self):
        # brute-force solution of the same one-pass equation:
        # A(t_k) = prod_{j<=k} (1 + dU_j) + sum_j dW_j prod_{j<l<=k} (1 + dU_l)
        rng = np.random.default_rng(32)
        # events only in the earlier 70% of follow-up so the at-risk
        # denominators stay well away from zero
        time = rng.exponential(1.0, 120) + 0.05
        g = rng.normal(size=120)
        x = (g + 0.8 * rng.normal(size=120) > 0).astype(float)
        status = (time < np.quantile(time, 0.7)).astype(int)
        ds = SurvivalDataset(time, status, x, g)
        fit = fit_volterra_binary(ds, mean_fit(ds))
        gc = ds.instrument - ds.instrument.mean()
        x, t, st = ds.exposure, ds.time, ds.status
        times = np.unique(t[st == 1])
        dw, du = [], []
        for tk in times:
            ev = (t == tk) & (st == 1)
            den0 = float(np.sum(gc[t >= tk] * x[t >= tk]))
            dw.append(float(np.sum(gc[ev] * (1 - x[ev]))) / den0)
            du.append(float(np.sum(gc[ev] * x[ev])) / den0)
        m = len(times)
        expected = np.empty(m)
        for k in range(m):
            total = np.prod([1 + du[j] for j in range(k + 1)])
            for j in range(k + 1):
                total += dw[j] * np.prod([1 + du[l] for l in range(j + 1, k + 1)])
            expected[k] = total
        np.testing.assert_allclose(fit.survival_ratio.values, expected,
                                   rtol=1e-12)

    def test_recursion_increment_identity(self):
        # for binary exposures the recursive increment factorizes exactly:
        # delta_k = dU_k + exp(-b_{k-1}) dW_k, and den_k = exp(b_{k-1}) den0_k
        rng = np.random.default_rng(33)
        ds = random_dataset(rng, 150, binary_exposure=True)
        _, trace = fit_recursive(ds, mean_fit(ds))
        gc = ds.instrument - ds.instrument.mean()
        x, t, st = ds.exposure, ds.time, ds.status
        for k, tk in enumerate(trace.times):
            b_prev = 0.0 if k == 0 else trace.b_values[k - 1]
            ev = (t == tk) & (st == 1)
            den0 = float(np.sum(gc[t >= tk] * x[t >= tk]))
            dw = float(np.sum(gc[ev] * (1 - x[ev]))) / den0
            du = float(np.sum(gc[ev] * x[ev])) / den0
            assert trace.delta[k] == pytest.approx(
                du + math.exp(-b_prev) * dw, rel=1e-12)
            assert trace.den[k] == pytest.approx(
                math.exp(b_prev) * den0, rel=1e-12)

    def test_no_events_identity_ratio(self):
        ds = SurvivalDataset([1.0, 2.0], [0, 0], [1.0, 0.0], [1.0, 0.0])
        fit = fit_volterra_binary(ds, mean_fit(ds))
        assert fit.survival_ratio.m == 0
        assert fit.survival_ratio(3.0) == 1.0
        assert fit.min_den_over_n is None

    def test_log_ratio(self):
        ratio = StepFunction([1.0, 2.0], [0.8, -0.1], initial=1.0)
        fit = VolterraFit(survival_ratio=ratio, min_den_over_n=0.2)
        logs = fit.log_ratio()
        assert logs.initial == 0.0
        assert logs.values[0] == pytest.approx(math.log(0.8))
        assert math.isnan(logs.values[1])


# -- effect summaries --------------------------------------------------------


class TestConstantEffect:
    def test_two_subject_oracle(self):
        # jump 0.3 at t=1; follow-up 1 (event) and 2 (censored); tau=2:
        # integral of the risk count over [0,2] is 1+2=3, the weight at the
        # jump is 2/3, so beta = 0.2
        ds = SurvivalDataset([1.0, 2.0], [1, 0], [1.0, 0.0], [1.0, 0.0])
        b_hat = StepFunction([1.0], [0.3], initial=0.0)
        summary = constant_effect(b_hat, ds, tau=2.0)
        assert summary.beta == pytest.approx(0.2, rel=1e-12)
        assert summary.kind == "constant"
        np.testing.assert_allclose(summary.jump_times[0], [1.0])
        np.testing.assert_allclose(summary.jump_weights[0], [2 / 3])
        # the reporting weight function integrates to one over the window
        assert summary.weights[0].integrate(0.0, 2.0) == pytest.approx(1.0)
        assert summary.predicted(1.0) == pytest.approx(0.2)
        assert summary.predicted(2.0) == pytest.approx(0.4)
        assert summary.predicted(5.0) == pytest.approx(0.4)  # flat past tau

    def test_matches_direct_weighting(self):
        rng = np.random.default_rng(41)
        ds = random_dataset(rng, 60)
        b_hat, _ = fit_recursive(ds, mean_fit(ds))
        tau = float(np.quantile(ds.time, 0.8))
        summary = constant_effect(b_hat, ds, tau)
        jumps = b_hat.grid[b_hat.grid <= tau]
        incr = b_hat.increments()[b_hat.grid <= tau]
        norm = np.sum(np.minimum(ds.time, tau))
        weights = np.array([(ds.time >= t).sum() for t in jumps]) / norm
        assert summary.beta == pytest.approx(float(weights @ incr), rel=1e-12)
        assert summary.weights[0].integrate(0.0, tau) == pytest.approx(1.0)

    def test_invalid_tau(self):
        ds = SurvivalDataset([1.0, 2.0], [1, 0], [1.0, 0.0], [1.0, 0.0])
        b_hat = StepFunction([1.0], [0.3])
        for bad in (0.0, -1.0, math.inf, math.nan):
            with pytest.raises(InvalidTime):
                constant_effect(b_hat, ds, bad)

    def test_no_jumps_in_window(self):
        ds = SurvivalDataset([1.0, 2.0], [1, 0], [1.0, 0.0], [1.0, 0.0])
        b_hat = StepFunction([1.0], [0.3])
        with pytest.raises(NoJumpsInWindow):
            constant_effect(b_hat, ds, tau=0.5)


class TestPiecewiseEffect:
    def synthetic(self):
        ds = SurvivalDataset([4.0] * 5, [0] * 5, [1.0, 0.0, 1.0, 0.0, 1.0],
                             [1.0, 0.0, 1.0, 0.0, 1.0])
        b_hat = StepFunction([1.0, 3.0], [0.2, 0.3], initial=0.0)
        return ds, b_hat

    def test_synthetic_oracle(self):
        # constant risk set of 5; jumps 0.2 at t=1 and 0.1 at t=3;
        # windows [0,2) and [2,4] each have risk integral 10, weight 1/2
        ds, b_hat = self.synthetic()
        summary = piecewise_effect(b_hat, ds, changepoint=2.0, tau=4.0)
        assert summary.beta0 == pytest.approx(0.1, rel=1e-12)
        assert summary.beta1 == pytest.approx(0.05, rel=1e-12)
        assert summary.changepoint == 2.0
        assert summary.weights[0].integrate(0.0, 2.0) == pytest.approx(1.0)
        assert summary.weights[1].integrate(2.0, 4.0) == pytest.approx(1.0)
        # fitted cumulative value at tau: 0.1 * 2 + 0.05 * 2 = 0.3
        assert summary.predicted(4.0) == pytest.approx(0.3)
        assert summary.predicted(1.0) == pytest.approx(0.1)
        assert summary.predicted(3.0) == pytest.approx(0.25)

    def test_boundary_jump_belongs_to_second_window(self):
        ds, _ = self.synthetic()
        b_hat = StepFunction([1.0, 2.0], [0.2, 0.3], initial=0.0)
        summary = piecewise_effect(b_hat, ds, changepoint=2.0, tau=4.0)
        np.testing.assert_allclose(summary.jump_times[0], [1.0])
        np.testing.assert_allclose(summary.jump_times[1], [2.0])

    def test_window_errors(self):
        ds, b_hat = self.synthetic()
        with pytest.raises(EmptyWindow):
            piecewise_effect(b_hat, ds, changepoint=0.0, tau=4.0)
        with pytest.raises(EmptyWindow):
            piecewise_effect(b_hat, ds, changepoint=4.0, tau=4.0)
        with pytest.raises(EmptyWindow):
            piecewise_effect(b_hat, ds, changepoint=5.0, tau=4.0)
        with pytest.raises(InvalidTime):
            piecewise_effect(b_hat, ds, changepoint=1.0, tau=-2.0)
        with pytest.raises(NoJumpsInWindow):
            piecewise_effect(b_hat, ds, changepoint=0.5, tau=4.0)


# -- reference estimators ----------------------------------------------------


class TestNaiveAalen:
    def test_intercept_only_is_event_over_risk(self):
        rng = np.random.default_rng(51)
        ds = random_dataset(rng, 40)
        fit = naive_aalen(ds, columns=())
        t, st = ds.time, ds.status
        times = np.unique(t[st == 1])
        expected = np.cumsum([
            ((t == tk) & (st == 1)).sum() / (t >= tk).sum() for tk in times
        ])
        np.testing.assert_allclose(fit["intercept"].values, expected,
                                   rtol=1e-12)

    def test_matches_per_event_least_squares(self):
        rng = np.random.default_rng(52)
        # keep the longest follow-ups censored so every at-risk design has
        # enough rows to stay full rank
        time = rng.exponential(1.0, 50) + 0.05
        status = (time < np.quantile(time, 0.7)).astype(int)
        ds = SurvivalDataset(time, status, rng.normal(size=50),
                             rng.normal(size=50))
        fit = naive_aalen(ds)
        t, st = ds.time, ds.status
        design = np.column_stack([np.ones(50), ds.exposure, ds.instrument])
        times = np.unique(t[st == 1])
        cum = np.zeros(3)
        for k, tk in enumerate(times):
            risk = t >= tk
            ev = (t == tk) & (st == 1)
            lhs = design[risk].T @ design[risk]
            rhs = design[ev].sum(axis=0)
            cum = cum + np.linalg.solve(lhs, rhs)
            for j, name in enumerate(("intercept", "exposure", "instrument")):
                assert fit[name].values[k] == pytest.approx(cum[j], rel=1e-10)

    def test_rank_deficient_risk_set(self):
        ds = SurvivalDataset([1.0, 2.0, 3.0], [1, 1, 0], [1.0, 1.0, 1.0],
                             [0.5, -0.5, 0.2])
        with pytest.raises(RankDeficientRiskSet) as info:
            naive_aalen(ds, columns=("exposure",))
        assert info.value.time == 1.0

    def test_column_errors(self):
        ds = four_subject_dataset()
        with pytest.raises(MissingColumn):
            naive_aalen(ds, columns=("weight",))
        with pytest.raises(MissingColumn):
            naive_aalen(ds, columns=("exposure", "exposure"))


class TestTwoStageLs:
    def brute_force(self, ds, covariates):
        """Stacked normal equations computed with plain loops."""
        t, st = ds.time, ds.status
        distinct = np.unique(t)
        p = covariates.shape[1]
        a_mat = np.zeros((p, p))
        prev = 0.0
        for tk in distinct:
            risk = t >= tk
            zr = covariates[risk]
            zbar = zr.mean(axis=0)
            centered = zr - zbar
            a_mat += (tk - prev) * (centered.T @ centered)
            prev = tk
        b_vec = np.zeros(p)
        for i in np.flatnonzero(st == 1):
            risk = t >= t[i]
            b_vec += covariates[i] - covariates[risk].mean(axis=0)
        return np.linalg.solve(a_mat, b_vec)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(61)
        ds = random_dataset(rng, 30)
        fit = two_stage_ls(ds)
        design = np.column_stack([np.ones(30), ds.instrument])
        stage1, *_ = np.linalg.lstsq(design, ds.exposure, rcond=None)
        xhat = design @ stage1
        expected = self.brute_force(ds, xhat[:, None])
        np.testing.assert_allclose(fit.coef, expected, rtol=1e-10)
        np.testing.assert_allclose(fit.stage1_coef, stage1, rtol=1e-10)
        assert fit.coef_names == ("predicted_exposure",)
        assert fit.beta_exposure == pytest.approx(expected[0], rel=1e-10)
        assert fit.tau == pytest.approx(float(ds.time.max()))

    def test_six_subject_hand_example(self):
        ds = SurvivalDataset(
            time=[1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            status=[1, 0, 1, 1, 0, 1],
            exposure=[0.2, 1.1, -0.3, 0.9, 0.4, 1.6],
            instrument=[0.0, 1.0, 0.0, 1.0, 0.0, 1.0],
        )
        fit = two_stage_ls(ds)
        design = np.column_stack([np.ones(6), ds.instrument])
        stage1, *_ = np.linalg.lstsq(design, ds.exposure, rcond=None)
        expected = self.brute_force(ds, (design @ stage1)[:, None])
        np.testing.assert_allclose(fit.coef, expected, rtol=1e-10)

    def test_exposure_equal_to_instrument_reduces_to_plain_fit(self):
        rng = np.random.default_rng(62)
        g = rng.normal(size=25)
        ds = SurvivalDataset(rng.exponential(1.0, 25) + 0.05,
                             rng.integers(0, 2, 25), g, g)
        fit = two_stage_ls(ds)
        # a perfect first stage makes the predicted exposure the exposure
        # itself, so the fit collapses to the one-regressor hazards fit
        expected = self.brute_force(ds, ds.exposure[:, None])
        assert fit.coef_names == ("predicted_exposure",)
        assert fit.beta_exposure == pytest.approx(expected[0], rel=1e-10)
        assert math.isfinite(fit.beta_exposure)

    def test_constant_instrument_is_degenerate(self):
        rng = np.random.default_rng(63)
        ds = SurvivalDataset(rng.exponential(1.0, 20) + 0.05,
                             rng.integers(0, 2, 20), rng.normal(size=20),
                             np.ones(20))
        with pytest.raises(DegenerateFirstStage):
            two_stage_ls(ds)

    def test_logistic_first_stage(self):
        rng = np.random.default_rng(64)
        ds = random_dataset(rng, 200, binary_exposure=True)
        fit = two_stage_ls(ds, first_stage="logistic")
        assert fit.first_stage == "logistic"
        assert fit.coef_names == ("predicted_exposure",)
        assert np.all(np.isfinite(fit.coef))
        # stage-one score is zero at the reported coefficients
        from scipy.special import expit
        design = np.column_stack([np.ones(200), ds.instrument])
        score = design.T @ (ds.exposure - expit(design @ fit.stage1_coef))
        assert np.max(np.abs(score)) < 1e-10
        # stage two runs on the fitted probabilities
        xhat = expit(design @ fit.stage1_coef)
        expected = self.brute_force(ds, xhat[:, None])
        np.testing.assert_allclose(fit.coef, expected, rtol=1e-10)

    def test_logistic_needs_binary_exposure(self):
        rng = np.random.default_rng(65)
        ds = random_dataset(rng, 20, binary_exposure=False)
        with pytest.raises(DegenerateFirstStage):
            two_stage_ls(ds, first_stage="logistic")

    def test_unknown_first_stage(self):
        ds = four_subject_dataset()
        with pytest.raises(ValueError):
            two_stage_ls(ds, first_stage="probit")
