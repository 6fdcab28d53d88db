"""Coverage, rate, load-model, and path-loss layers against frozen references.

The closed forms are checked against values computed independently at
50-digit precision; the quadrature rate is additionally cross-checked
against the closed forms it is supposed to integrate.
"""

import math

import pytest
from scipy.integrate import quad

from ppcell.analytics import (
    CoverageCurve,
    PathLossPdf,
    PcovKind,
    RateMethod,
    RateResult,
    coverage_curve,
    load_model,
    pathloss_cdf,
    pathloss_pdf,
    pcov_approx_full,
    pcov_exact_full,
    pcov_general,
    pcov_partial_load,
    rate_actual,
    rate_closed_general,
    rate_peak_partial_load,
    rate_quadrature,
    table1_audit,
)
from ppcell.mgf import NetworkParams

PA_RATIO_1 = 0.585051349019134  # active probability at lambda_ue = lambda_bs


class TestCoverageClosedForms:
    def test_exact_reference_values(self):
        assert math.isclose(pcov_exact_full(1.0, 4.0), 0.537193186192758, rel_tol=1e-12)
        assert math.isclose(pcov_exact_full(10.0, 4.0), 0.178412348154982, rel_tol=1e-12)
        assert math.isclose(pcov_exact_full(1.0, 3.0), 0.358369891642279, rel_tol=1e-12)
        assert math.isclose(pcov_exact_full(100.0, 5.0), 0.106426365952723, rel_tol=1e-12)

    def test_approx_reference_values(self):
        # at gamma=1 < c the approximation is the rational two-term form 6/11
        assert math.isclose(pcov_approx_full(1.0, 4.0), 6.0 / 11.0, rel_tol=1e-14)
        assert math.isclose(pcov_approx_full(10.0, 4.0), 0.178412411615277, rel_tol=1e-12)

    def test_zero_threshold(self):
        assert pcov_exact_full(0.0, 4.0) == 1.0
        assert pcov_approx_full(0.0, 4.0) == 1.0

    def test_partial_load_reference_values(self):
        exact, approx = pcov_partial_load(1.0, 4.0, PA_RATIO_1)
        assert math.isclose(exact, 0.664876841666406, rel_tol=1e-12)
        assert math.isclose(approx, 0.672249568988246, rel_tol=1e-12)

    def test_partial_load_brackets_full_load(self):
        # thinning interferers can only improve coverage
        full, _ = pcov_partial_load(1.0, 4.0, 1.0)
        thin, _ = pcov_partial_load(1.0, 4.0, 0.3)
        assert thin > full
        assert full == pcov_exact_full(1.0, 4.0)

    def test_domains(self):
        with pytest.raises(ValueError):
            pcov_exact_full(-0.1, 4.0)
        with pytest.raises(ValueError):
            pcov_exact_full(1.0, 2.0)
        with pytest.raises(ValueError):
            pcov_partial_load(1.0, 4.0, 0.0)


class TestCoverageIntegralRoute:
    def test_matches_closed_form(self):
        p = NetworkParams(lambda_bs=1.0, beta=4.0)
        got = pcov_general(1.0, p)
        assert math.isclose(got, pcov_exact_full(1.0, 4.0), rel_tol=1e-10)

    def test_density_invariance(self):
        # the integral route carries lambda_bs explicitly; it must cancel
        pa = NetworkParams(lambda_bs=1.0, beta=3.5)
        pb = NetworkParams(lambda_bs=42.0, beta=3.5)
        assert math.isclose(pcov_general(2.0, pa), pcov_general(2.0, pb), rel_tol=1e-10)

    def test_partial_load_route(self):
        p = NetworkParams(lambda_bs=1.0, beta=4.0)
        want, _ = pcov_partial_load(1.0, 4.0, PA_RATIO_1)
        assert math.isclose(pcov_general(1.0, p, p_active=PA_RATIO_1), want, rel_tol=1e-10)

    def test_noise_lowers_coverage(self):
        quiet = NetworkParams(lambda_bs=1.0, beta=4.0)
        noisy = NetworkParams(lambda_bs=1.0, beta=4.0, sigma_n2=0.2)
        assert pcov_general(1.0, noisy) < pcov_general(1.0, quiet)

    def test_zero_threshold(self):
        p = NetworkParams(lambda_bs=1.0, beta=4.0)
        assert pcov_general(0.0, p) == 1.0


class TestCoverageCurve:
    def test_builder_matches_pointwise(self):
        grid = [0.1, 1.0, 10.0]
        curve = coverage_curve(4.0, grid, p_active=0.7)
        for g, e, a in zip(grid, curve.pcov_exact, curve.pcov_approx):
            we, wa = pcov_partial_load(g, 4.0, 0.7)
            assert e == we and a == wa
        assert curve.p_active == 0.7
        assert curve.gamma_grid == (0.1, 1.0, 10.0)

    def test_rejects_rising_series(self):
        with pytest.raises(ValueError):
            CoverageCurve(
                gamma_grid=(1.0, 2.0), pcov_exact=(0.4, 0.5), pcov_approx=(0.5, 0.4), p_active=1.0
            )

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            CoverageCurve(
                gamma_grid=(1.0,), pcov_exact=(1.2,), pcov_approx=(0.5,), p_active=1.0
            )

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            CoverageCurve(
                gamma_grid=(1.0, 2.0), pcov_exact=(0.5,), pcov_approx=(0.5, 0.4), p_active=1.0
            )


class TestRateQuadrature:
    def test_fully_loaded_exact_references(self):
        for beta, want in ((3.0, 0.829489013005295), (4.0, 1.39142060867317), (5.0, 1.91684777490024)):
            r = rate_quadrature(beta)
            assert r.method is RateMethod.QUADRATURE
            assert r.stderr == 0.0
            assert math.isclose(r.value, want, abs_tol=5e-9), beta

    def test_fully_loaded_approx_references(self):
        for beta, want in ((3.0, 0.832652864762999), (4.0, 1.39696054040662), (5.0, 1.9233692112552)):
            r = rate_quadrature(beta, pcov_kind=PcovKind.APPROX)
            assert math.isclose(r.value, want, abs_tol=5e-9), beta

    def test_rate_grows_with_beta(self):
        # steeper path loss isolates cells and raises the ergodic rate
        vals = [rate_quadrature(b).value for b in (2.5, 3.0, 3.5, 4.0, 4.5, 5.0)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_thinning_raises_peak_rate(self):
        full = rate_quadrature(4.0, 1.0).value
        thin = rate_quadrature(4.0, 0.3).value
        assert thin > full

    def test_p_active_domain(self):
        with pytest.raises(ValueError):
            rate_quadrature(4.0, 5e-7)
        with pytest.raises(ValueError):
            rate_quadrature(4.0, 1.1)


class TestRateClosedGeneral:
    def test_matches_quadrature(self):
        for k in range(20):
            beta = 2.625 + 0.125 * k
            if abs(beta - 4.3508) < 0.02:
                continue
            closed = rate_closed_general(beta)
            ref = rate_quadrature(beta, 1.0, PcovKind.APPROX)
            assert closed.method is RateMethod.CLOSED_FORM_GENERAL
            assert math.isclose(closed.value, ref.value, abs_tol=1e-8), beta

    def test_singular_window_served_by_quadrature(self):
        singular = (11.0 + math.sqrt(41.0)) / 4.0
        inside = rate_closed_general(singular + 0.019)
        assert inside.method is RateMethod.QUADRATURE
        outside = rate_closed_general(singular + 0.021)
        assert outside.method is RateMethod.CLOSED_FORM_GENERAL
        # the served values agree across the guard boundary
        assert abs(inside.value - outside.value) < 5e-3

    def test_beta_domain(self):
        with pytest.raises(ValueError):
            rate_closed_general(2.0)


class TestTabulatedForms:
    def test_both_betas_quarantined(self):
        # the transcribed closed forms disagree with quadrature of their own
        # integrand by order 1 nats/s/Hz, far beyond transcription noise, so
        # the audit must bench them
        for beta, worst_mm, worst_pa in ((3.0, 1.300, 0.2), (4.0, 1.870, 0.3)):
            audit = table1_audit(beta)
            assert audit.quarantined
            assert math.isclose(audit.max_abs_mismatch, worst_mm, abs_tol=5e-3), beta
            assert audit.worst_p_active == worst_pa
            assert "QUARANTINED" in audit.message

    def test_beta3_log_domain_documented(self):
        # the beta=3 form contains log(1 - p_active*(c^(2/3)*Gamma(1/3) - 1)),
        # which leaves the real domain just below p_active = 0.5
        audit = table1_audit(3.0)
        assert audit.skipped == (0.5, 0.6, 0.7, 0.8, 0.9)
        assert audit.checked == (0.1, 0.2, 0.3, 0.4)

    def test_beta4_checked_everywhere(self):
        audit = table1_audit(4.0)
        assert audit.skipped == ()
        assert len(audit.checked) == 9

    def test_audit_is_cached(self):
        assert table1_audit(4.0) is table1_audit(4.0)

    def test_unknown_beta_rejected(self):
        with pytest.raises(ValueError):
            table1_audit(3.5)


class TestRatePeakPartialLoad:
    def test_quarantine_routes_to_quadrature(self):
        r = rate_peak_partial_load(4.0, PA_RATIO_1)
        assert r.method is RateMethod.QUADRATURE
        want = rate_quadrature(4.0, PA_RATIO_1, PcovKind.APPROX)
        assert r.value == want.value

    def test_full_activity_delegates_to_general_form(self):
        r = rate_peak_partial_load(4.0, 1.0)
        assert r.method is RateMethod.CLOSED_FORM_GENERAL
        assert math.isclose(r.value, rate_closed_general(4.0).value, rel_tol=1e-15)

    def test_monotone_in_activity(self):
        vals = [rate_peak_partial_load(3.0, pa).value for pa in (0.9, 0.5, 0.2)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_domains(self):
        with pytest.raises(ValueError):
            rate_peak_partial_load(3.5, 0.5)
        with pytest.raises(ValueError):
            rate_peak_partial_load(4.0, 0.0)


class TestRateActual:
    def test_value_is_peak_times_selection(self):
        lam = 2.3e-6
        r = rate_actual(4.0, lam, lam)
        lm = load_model(lam, lam)
        peak = rate_peak_partial_load(4.0, lm.p_active)
        assert math.isclose(r.value, peak.value * lm.p_selection, rel_tol=1e-15)
        assert r.method is peak.method

    def test_general_beta_uses_quadrature(self):
        r = rate_actual(4.5, 1.0, 1.0)
        assert r.method is RateMethod.QUADRATURE

    def test_vanishing_load_sentinel(self):
        r = rate_actual(4.0, 1e-12, 1.0)
        assert r.no_interference
        assert math.isinf(r.value)

    def test_actual_rate_decreases_with_crowding(self):
        vals = [rate_actual(4.0, ratio, 1.0).value for ratio in (1.0, 4.0, 8.0, 12.0)]
        assert all(b < a for a, b in zip(vals, vals[1:]))


class TestRateResult:
    def test_field_domains(self):
        with pytest.raises(ValueError):
            RateResult(value=1.0, method=RateMethod.QUADRATURE, stderr=-0.1)
        with pytest.raises(ValueError):
            RateResult(value=-1.0, method=RateMethod.QUADRATURE)

    def test_method_labels(self):
        assert RateMethod.CLOSED_FORM_GENERAL.value == "ClosedFormGeneral"
        assert RateMethod.CLOSED_FORM_TABLE1.value == "ClosedFormTable1"
        assert RateMethod.QUADRATURE.value == "Quadrature"
        assert RateMethod.MONTE_CARLO.value == "MonteCarlo"


class TestLoadModel:
    # (ratio, p_inactive, p_active, p_selection), computed at 50 digits from
    # the gamma-cell occupancy model with shape 3.5
    TABLE = (
        (0.17, 0.847045872078, 0.152954127922, 0.899730164246),
        (1.0, 0.414948650981, 0.585051349019, 0.585051349019),
        (4.0, 0.0694262540785, 0.930573745921, 0.23264343648),
        (4.34, 0.0594472728123, 0.940552727188, 0.216717218246),
        (8.51, 0.0133609589389, 0.986639041061, 0.115938782733),
        (11.11, 0.00672918393529, 0.993270816065, 0.0894033137772),
    )

    def test_reference_values(self):
        for ratio, p_in, p_act, p_sel in self.TABLE:
            lm = load_model(ratio, 1.0)
            assert math.isclose(lm.p_inactive, p_in, rel_tol=1e-11), ratio
            assert math.isclose(lm.p_active, p_act, rel_tol=1e-11), ratio
            assert math.isclose(lm.p_selection, p_sel, rel_tol=1e-11), ratio

    def test_probabilities_sum(self):
        for ratio in (0.01, 0.5, 2.0, 20.0):
            lm = load_model(ratio, 1.0)
            assert math.isclose(lm.p_inactive + lm.p_active, 1.0, rel_tol=1e-15)
            assert math.isclose(lm.p_selection, lm.p_active / lm.ratio, rel_tol=1e-15)

    def test_no_users_limit(self):
        lm = load_model(0.0, 1.0)
        assert lm.p_inactive == 1.0
        assert lm.p_active == 0.0
        assert lm.p_selection == 1.0

    def test_scale_invariance(self):
        a = load_model(3.0, 1.0)
        b = load_model(3.0e-6, 1.0e-6)
        assert math.isclose(a.p_active, b.p_active, rel_tol=1e-15)

    def test_domains(self):
        with pytest.raises(ValueError):
            load_model(1.0, 0.0)
        with pytest.raises(ValueError):
            load_model(-1.0, 1.0)


class TestPathLoss:
    P = NetworkParams(lambda_bs=1.27e-6, beta=4.0)

    def test_cdf_reference_values(self):
        assert math.isclose(pathloss_cdf(1e10, self.P), 0.328997399867, rel_tol=1e-11)
        assert math.isclose(pathloss_cdf(1e11, self.P), 0.716825711295, rel_tol=1e-11)

    def test_pdf_integrates_to_cdf(self):
        val, _ = quad(lambda y: pathloss_pdf(y, self.P), 0.0, 1e10, limit=200)
        assert math.isclose(val, pathloss_cdf(1e10, self.P), rel_tol=1e-9)

    def test_cdf_bounds(self):
        assert pathloss_cdf(0.0, self.P) == 0.0
        assert pathloss_cdf(-5.0, self.P) == 0.0
        assert pathloss_cdf(1e30, self.P) == pytest.approx(1.0, abs=1e-12)

    def test_pdf_domain(self):
        with pytest.raises(ValueError):
            pathloss_pdf(0.0, self.P)

    def test_record_validation(self):
        with pytest.raises(ValueError):
            PathLossPdf(lambda_bs=0.0, beta=4.0)
        with pytest.raises(ValueError):
            PathLossPdf(lambda_bs=1.0, beta=2.0)
        with pytest.raises(ValueError):
            PathLossPdf(lambda_bs=1.0, beta=4.0, kappa=0.0)
