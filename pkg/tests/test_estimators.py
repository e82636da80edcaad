import math

import numpy as np
import pytest

from sensipw import (
    EstimandKind,
    EstimatorContext,
    LinearFit,
    Method,
    Mode,
    SensitivitySpec,
    Target,
    ValidationError,
    ate_interval,
    att_interval,
    fit_logistic,
    make_context,
    mean_response_interval,
    nonrespondent_mean_interval,
    point_interval,
    saipw_interval,
    sipw_at,
    validate_table,
)

from conftest import make_missing_table, make_observational_table
from oracles import brute_force_difference, brute_force_fractional, fractional_value

ALL_KINDS = [
    EstimandKind(Target.MEAN_RESPONSE, Method.SIPW),
    EstimandKind(Target.MEAN_RESPONSE, Method.SAIPW),
    EstimandKind(Target.NONRESPONDENT_MEAN, Method.SIPW),
    EstimandKind(Target.NONRESPONDENT_MEAN, Method.SAIPW),
    EstimandKind(Target.ATE, Method.SIPW),
    EstimandKind(Target.ATE, Method.SAIPW),
    EstimandKind(Target.ATT, Method.SIPW),
    EstimandKind(Target.ATT, Method.SAIPW),
]


def table_for(kind, rng, **kw):
    if kind.mode is Mode.MISSING_DATA:
        return make_missing_table(rng, **kw)
    return make_observational_table(rng, **kw)


def zero_fit(table):
    return LinearFit(np.zeros(table.d + 1), np.zeros(table.n))


class TestSipwAt:
    def test_unit_multipliers_equal_weights_give_plain_mean(self, rng):
        # intercept-only propensity on balanced arms: ghat is identically
        # zero, so every observed row gets weight (1 + z) with z = 1
        a = np.array([1, 1, 1, 0, 0, 0])
        x = rng.normal(size=(6, 1))
        y = np.array([3.0, 5.0, 10.0, np.nan, np.nan, np.nan])
        t = validate_table(a, x, y, Mode.MISSING_DATA)
        prop = fit_logistic(np.empty((6, 0)), a)
        assert abs(prop.beta[0]) < 1e-10
        ctx = EstimatorContext(t, prop, SensitivitySpec(1.0))
        got = sipw_at(ctx, np.ones(3))
        assert math.isclose(got, 6.0, rel_tol=1e-12)

    def test_sample_boundedness_under_random_z(self, rng):
        t = make_missing_table(rng, n=40)
        spec = SensitivitySpec(1.2)
        ctx = make_context(t, spec, EstimandKind(Target.MEAN_RESPONSE))
        obs_y = t.y[t.a == 1]
        for _ in range(200):
            z = np.exp(rng.uniform(-1.2, 1.2, size=int(t.n_observed)))
            v = sipw_at(ctx, z)
            assert obs_y.min() - 1e-12 <= v <= obs_y.max() + 1e-12

    def test_fixed_six_row_instance_direct_arithmetic(self):
        a = np.array([1, 1, 1, 1, 0, 0])
        x = np.array([[0.5], [-0.25], [1.0], [0.0], [0.6], [-1.0]])
        y = np.array([2.0, -1.0, 0.5, 3.0, np.nan, np.nan])
        t = validate_table(a, x, y, Mode.MISSING_DATA)
        ctx = make_context(t, SensitivitySpec(0.7), EstimandKind(Target.MEAN_RESPONSE))
        z = np.array([2.0, 0.5, 1.0, 1.5])
        w = np.exp(-ctx.propensity.linear_predictors[:4])
        want = fractional_value(y[:4], w, math.exp(0.7), z)
        assert math.isclose(sipw_at(ctx, z), want, rel_tol=1e-12)

    def test_z_outside_box_rejected(self, rng):
        t = make_missing_table(rng, n=20)
        ctx = make_context(t, SensitivitySpec(0.5), EstimandKind(Target.MEAN_RESPONSE))
        with pytest.raises(ValueError):
            sipw_at(ctx, np.full(int(t.n_observed), 3.0))


class TestPointIntervals:
    @pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: f"{k.target.value}-{k.method.value}")
    def test_lambda_zero_collapses(self, kind, rng):
        t = table_for(kind, rng)
        ctx = make_context(t, SensitivitySpec(0.0), kind)
        iv = point_interval(ctx, kind)
        assert iv.lo == iv.hi

    @pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: f"{k.target.value}-{k.method.value}")
    def test_nesting_in_lambda(self, kind, rng):
        t = table_for(kind, rng)
        prev = None
        for lam in (0.0, 0.25, 0.7, 1.5):
            ctx = make_context(t, SensitivitySpec(lam), kind)
            iv = point_interval(ctx, kind)
            if prev is not None:
                assert iv.lo <= prev.lo + 1e-12
                assert iv.hi >= prev.hi - 1e-12
            prev = iv

    def test_mean_response_extrema_sample_bounded(self, rng):
        t = make_missing_table(rng, n=50)
        ctx = make_context(t, SensitivitySpec(2.0), EstimandKind(Target.MEAN_RESPONSE))
        iv = mean_response_interval(ctx)
        obs_y = t.y[t.a == 1]
        assert obs_y.min() - 1e-12 <= iv.lo <= iv.hi <= obs_y.max() + 1e-12

    def test_mean_response_brute_force(self, rng):
        t = make_missing_table(rng, n=16)
        lam = 0.9
        ctx = make_context(t, SensitivitySpec(lam), EstimandKind(Target.MEAN_RESPONSE))
        iv = mean_response_interval(ctx)
        obs = t.a == 1
        w = np.exp(-ctx.propensity.linear_predictors[obs])
        want = brute_force_fractional(t.y[obs], w, math.exp(lam))
        assert math.isclose(iv.lo, want[0], rel_tol=1e-11)
        assert math.isclose(iv.hi, want[1], rel_tol=1e-11)

    def test_location_scale_equivariance_mean(self, rng):
        t = make_missing_table(rng, n=30)
        kind = EstimandKind(Target.MEAN_RESPONSE)
        spec = SensitivitySpec(1.0)
        ctx = make_context(t, spec, kind)
        iv = mean_response_interval(ctx)
        scale, shift = 2.5, -3.0
        y2 = np.where(t.a == 1, scale * t.y + shift, np.nan)
        t2 = validate_table(t.a, t.x, y2, Mode.MISSING_DATA)
        iv2 = mean_response_interval(make_context(t2, spec, kind))
        assert math.isclose(iv2.lo, scale * iv.lo + shift, rel_tol=1e-10)
        assert math.isclose(iv2.hi, scale * iv.hi + shift, rel_tol=1e-10)


class TestNonRespondentMean:
    def test_lambda_zero_point_value(self, rng):
        t = make_missing_table(rng, n=30)
        ctx = make_context(t, SensitivitySpec(0.0), EstimandKind(Target.NONRESPONDENT_MEAN))
        iv = nonrespondent_mean_interval(ctx)
        obs = t.a == 1
        w = np.exp(-ctx.propensity.linear_predictors[obs])
        want = float(np.dot(t.y[obs], w) / np.sum(w))
        assert math.isclose(iv.lo, want, rel_tol=1e-12)

    def test_brute_force(self, rng):
        t = make_missing_table(rng, n=14)
        lam = 1.1
        ctx = make_context(t, SensitivitySpec(lam), EstimandKind(Target.NONRESPONDENT_MEAN))
        iv = nonrespondent_mean_interval(ctx)
        obs = t.a == 1
        w = np.exp(-ctx.propensity.linear_predictors[obs])
        want = brute_force_fractional(t.y[obs], w, math.exp(lam), unit=False)
        assert math.isclose(iv.lo, want[0], rel_tol=1e-11)
        assert math.isclose(iv.hi, want[1], rel_tol=1e-11)

    def test_constant_outcome_degenerate_interval(self, rng):
        n = 20
        x = rng.normal(size=(n, 1))
        a = np.r_[np.ones(12, dtype=int), np.zeros(8, dtype=int)]
        y = np.where(a == 1, 4.0, np.nan)
        t = validate_table(a, x, y, Mode.MISSING_DATA)
        for lam in (0.0, 1.0, 3.0):
            ctx = make_context(t, SensitivitySpec(lam), EstimandKind(Target.NONRESPONDENT_MEAN))
            iv = nonrespondent_mean_interval(ctx)
            assert math.isclose(iv.lo, 4.0, rel_tol=1e-12)
            assert math.isclose(iv.hi, 4.0, rel_tol=1e-12)

    def test_requires_unobserved_rows(self, rng):
        x = rng.normal(size=(10, 1))
        t = validate_table(np.ones(10, dtype=int), x, np.arange(10.0), Mode.MISSING_DATA)
        with pytest.raises(ValidationError, match="both indicator arms|indicator-0"):
            make_context(t, SensitivitySpec(0.5), EstimandKind(Target.NONRESPONDENT_MEAN))


class TestAte:
    def test_lambda_zero_equals_direct_formula(self, rng):
        t = make_observational_table(rng, n=60)
        ctx = make_context(t, SensitivitySpec(0.0), EstimandKind(Target.ATE))
        iv = ate_interval(ctx)
        g = ctx.propensity.linear_predictors
        a, y = t.a, t.y
        w1 = 1.0 + np.exp(-g[a == 1])
        w0 = 1.0 + np.exp(+g[a == 0])
        want = float(np.dot(y[a == 1], w1) / w1.sum() - np.dot(y[a == 0], w0) / w0.sum())
        assert math.isclose(iv.lo, want, rel_tol=1e-12)
        assert iv.lo == iv.hi

    def test_joint_brute_force(self, rng):
        t = make_observational_table(rng, n=10, d=1)
        lam = 0.8
        ctx = make_context(t, SensitivitySpec(lam), EstimandKind(Target.ATE))
        iv = ate_interval(ctx)
        g = ctx.propensity.linear_predictors
        a, y = t.a, t.y
        o1 = np.argsort(-y[a == 1], kind="stable")
        o0 = np.argsort(-y[a == 0], kind="stable")
        want = brute_force_difference(
            y[a == 1][o1], np.exp(-g[a == 1][o1]),
            y[a == 0][o0], np.exp(+g[a == 0][o0]),
            math.exp(lam),
        )
        assert math.isclose(iv.lo, want[0], rel_tol=1e-11, abs_tol=1e-11)
        assert math.isclose(iv.hi, want[1], rel_tol=1e-11, abs_tol=1e-11)

    def test_identical_arms_symmetric_about_zero(self, rng):
        n = 14
        x = rng.normal(size=(n, 1))
        y = rng.normal(size=n)
        xx = np.vstack([x, x])
        yy = np.concatenate([y, y])
        aa = np.r_[np.ones(n, dtype=int), np.zeros(n, dtype=int)]
        t = validate_table(aa, xx, yy, Mode.OBSERVATIONAL)
        ctx = make_context(t, SensitivitySpec(1.0), EstimandKind(Target.ATE))
        iv = ate_interval(ctx)
        assert math.isclose(iv.hi, -iv.lo, rel_tol=1e-9, abs_tol=1e-12)

    def test_scale_equivariance(self, rng):
        t = make_observational_table(rng, n=40)
        kind = EstimandKind(Target.ATE)
        spec = SensitivitySpec(0.8)
        iv = ate_interval(make_context(t, spec, kind))
        scale = 3.5
        t2 = validate_table(t.a, t.x, scale * t.y, Mode.OBSERVATIONAL)
        iv2 = ate_interval(make_context(t2, spec, kind))
        assert math.isclose(iv2.lo, scale * iv.lo, rel_tol=1e-10)
        assert math.isclose(iv2.hi, scale * iv.hi, rel_tol=1e-10)

    def test_needs_both_arms(self, rng):
        x = rng.normal(size=(8, 1))
        t = validate_table(np.ones(8, dtype=int), x, np.arange(8.0), Mode.OBSERVATIONAL)
        with pytest.raises(ValidationError, match="both indicator arms"):
            make_context(t, SensitivitySpec(0.5), EstimandKind(Target.ATE))


class TestAtt:
    def test_lambda_zero_standard_identity(self, rng):
        t = make_observational_table(rng, n=50)
        ctx = make_context(t, SensitivitySpec(0.0), EstimandKind(Target.ATT))
        iv = att_interval(ctx)
        a, y = t.a, t.y
        ehat = 1.0 / (1.0 + np.exp(-ctx.propensity.linear_predictors))
        odds = (ehat / (1.0 - ehat))[a == 0]
        want = float(np.mean(y[a == 1]) - np.dot(y[a == 0], odds) / odds.sum())
        assert math.isclose(iv.lo, want, rel_tol=1e-12)
        assert iv.lo == iv.hi

    def test_constant_control_outcomes_degenerate(self, rng):
        n = 24
        x = rng.normal(size=(n, 1))
        a = np.r_[np.ones(12, dtype=int), np.zeros(12, dtype=int)]
        y = np.where(a == 1, rng.normal(size=n) + 2.0, 0.75)
        t = validate_table(a, x, y, Mode.OBSERVATIONAL)
        first = float(np.mean(y[a == 1]))
        for lam in (0.0, 1.5):
            ctx = make_context(t, SensitivitySpec(lam), EstimandKind(Target.ATT))
            iv = att_interval(ctx)
            assert math.isclose(iv.lo, first - 0.75, rel_tol=1e-12)
            assert math.isclose(iv.hi, first - 0.75, rel_tol=1e-12)

    def test_brute_force(self, rng):
        t = make_observational_table(rng, n=12, d=1)
        lam = 1.3
        ctx = make_context(t, SensitivitySpec(lam), EstimandKind(Target.ATT))
        iv = att_interval(ctx)
        a, y = t.a, t.y
        first = float(np.mean(y[a == 1]))
        w = np.exp(+ctx.propensity.linear_predictors[a == 0])
        sub = brute_force_fractional(y[a == 0], w, math.exp(lam), unit=False)
        assert math.isclose(iv.lo, first - sub[1], rel_tol=1e-11)
        assert math.isclose(iv.hi, first - sub[0], rel_tol=1e-11)


class TestSaipw:
    @pytest.mark.parametrize(
        "target", [Target.MEAN_RESPONSE, Target.NONRESPONDENT_MEAN, Target.ATE, Target.ATT]
    )
    def test_zero_augmentation_reduces_to_sipw(self, target, rng):
        kind = EstimandKind(target, Method.SAIPW)
        t = table_for(kind, rng, n=40)
        spec = SensitivitySpec(1.0)
        base = make_context(t, spec, EstimandKind(target, Method.SIPW))
        zero = zero_fit(t)
        if target in (Target.MEAN_RESPONSE, Target.NONRESPONDENT_MEAN):
            ctx = EstimatorContext(t, base.propensity, spec, outcome_fit=zero)
        else:
            ctx = EstimatorContext(t, base.propensity, spec, outcome_pair=(zero, zero))
        sipw = point_interval(base, EstimandKind(target, Method.SIPW))
        saipw = saipw_interval(ctx, target)
        assert abs(saipw.lo - sipw.lo) <= 1e-12 * max(1.0, abs(sipw.lo))
        assert abs(saipw.hi - sipw.hi) <= 1e-12 * max(1.0, abs(sipw.hi))

    def test_mean_lambda_zero_matches_direct_formula(self, rng):
        t = make_missing_table(rng, n=36)
        kind = EstimandKind(Target.MEAN_RESPONSE, Method.SAIPW)
        ctx = make_context(t, SensitivitySpec(0.0), kind)
        iv = saipw_interval(ctx, Target.MEAN_RESPONSE)
        obs = t.a == 1
        fhat = ctx.outcome_fit.fitted
        w = np.exp(-ctx.propensity.linear_predictors)
        resid = (t.y - fhat)[obs]
        want = float(np.mean(fhat) + np.dot(resid, 1 + w[obs]) / np.sum(1 + w[obs]))
        assert math.isclose(iv.lo, want, rel_tol=1e-12)

    def test_mean_brute_force_on_residual_problem(self, rng):
        t = make_missing_table(rng, n=14)
        lam = 0.8
        kind = EstimandKind(Target.MEAN_RESPONSE, Method.SAIPW)
        ctx = make_context(t, SensitivitySpec(lam), kind)
        iv = saipw_interval(ctx, Target.MEAN_RESPONSE)
        obs = t.a == 1
        offset = float(np.mean(ctx.outcome_fit.fitted))
        resid = (t.y - ctx.outcome_fit.fitted)[obs]
        w = np.exp(-ctx.propensity.linear_predictors[obs])
        want = brute_force_fractional(resid, w, math.exp(lam))
        assert math.isclose(iv.lo, offset + want[0], rel_tol=1e-10)
        assert math.isclose(iv.hi, offset + want[1], rel_tol=1e-10)

    def test_ate_saipw_brute_force(self, rng):
        t = make_observational_table(rng, n=12, d=1)
        lam = 0.9
        kind = EstimandKind(Target.ATE, Method.SAIPW)
        ctx = make_context(t, SensitivitySpec(lam), kind)
        iv = saipw_interval(ctx, Target.ATE)
        f1, f0 = ctx.outcome_pair
        a, y, g = t.a, t.y, ctx.propensity.linear_predictors
        off = float(np.mean(f1.fitted) - np.mean(f0.fitted))
        r1 = (y - f1.fitted)[a == 1]
        r0 = (y - f0.fitted)[a == 0]
        o1, o0 = np.argsort(-r1, kind="stable"), np.argsort(-r0, kind="stable")
        want = brute_force_difference(
            r1[o1], np.exp(-g[a == 1][o1]), r0[o0], np.exp(+g[a == 0][o0]), math.exp(lam)
        )
        assert math.isclose(iv.lo, off + want[0], rel_tol=1e-10, abs_tol=1e-10)
        assert math.isclose(iv.hi, off + want[1], rel_tol=1e-10, abs_tol=1e-10)

    def test_extrema_bounded_by_offset_plus_residual_range(self, rng):
        t = make_missing_table(rng, n=35)
        kind = EstimandKind(Target.MEAN_RESPONSE, Method.SAIPW)
        ctx = make_context(t, SensitivitySpec(2.5), kind)
        iv = saipw_interval(ctx, Target.MEAN_RESPONSE)
        offset = float(np.mean(ctx.outcome_fit.fitted))
        resid = (t.y - ctx.outcome_fit.fitted)[t.a == 1]
        assert offset + resid.min() - 1e-12 <= iv.lo
        assert iv.hi <= offset + resid.max() + 1e-12

    def test_missing_outcome_fit_rejected(self, rng):
        t = make_missing_table(rng, n=20)
        spec = SensitivitySpec(0.5)
        prop = fit_logistic(t.x, t.a)
        ctx = EstimatorContext(t, prop, spec)
        with pytest.raises(ValidationError, match="outcome regression"):
            saipw_interval(ctx, Target.MEAN_RESPONSE)


class TestLipschitzRouting:
    def test_huge_constant_matches_unconstrained_interval(self, rng):
        from sensipw import LipschitzSpec

        t = make_missing_table(rng, n=25)
        kind = EstimandKind(Target.MEAN_RESPONSE)
        plain = point_interval(make_context(t, SensitivitySpec(1.0), kind), kind)
        smooth = point_interval(
            make_context(t, SensitivitySpec(1.0, LipschitzSpec(1e6)), kind), kind
        )
        assert math.isclose(plain.lo, smooth.lo, rel_tol=1e-8)
        assert math.isclose(plain.hi, smooth.hi, rel_tol=1e-8)

    def test_small_constant_narrows_interval(self, rng):
        from sensipw import LipschitzSpec

        t = make_observational_table(rng, n=30)
        kind = EstimandKind(Target.ATE)
        plain = point_interval(make_context(t, SensitivitySpec(1.0), kind), kind)
        smooth = point_interval(
            make_context(t, SensitivitySpec(1.0, LipschitzSpec(0.05)), kind), kind
        )
        assert plain.lo - 1e-9 <= smooth.lo
        assert smooth.hi <= plain.hi + 1e-9
        assert smooth.hi - smooth.lo < plain.hi - plain.lo


class TestModeChecks:
    def test_wrong_mode_rejected(self, rng):
        t_obs = make_observational_table(rng)
        with pytest.raises(ValidationError, match="expects a missing-data table"):
            make_context(t_obs, SensitivitySpec(0.1), EstimandKind(Target.MEAN_RESPONSE))
        t_md = make_missing_table(rng)
        with pytest.raises(ValidationError, match="expects a observational table"):
            make_context(t_md, SensitivitySpec(0.1), EstimandKind(Target.ATE))
