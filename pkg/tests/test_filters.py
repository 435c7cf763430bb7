import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral_flr.filters import (
    CUTOFF,
    LANDWEBER,
    SHOWALTER,
    TIKHONOV,
    FilterDomainError,
    certify_constants,
    eval_filter,
    eval_residual,
    get_filter,
    landweber_partial_sum,
    landweber_steps,
)

FAMILIES = [TIKHONOV, CUTOFF, SHOWALTER, LANDWEBER]


class TestEvalFilter:
    def test_tikhonov_value(self):
        assert eval_filter(TIKHONOV, 0.5, 0.5) == pytest.approx(1.0)

    def test_cutoff_drops_small_sigma(self):
        assert eval_filter(CUTOFF, 0.5, 0.25) == 0.0

    def test_landweber_two_steps(self):
        assert landweber_steps(0.5) == 2
        assert eval_filter(LANDWEBER, 0.5, 0.5) == pytest.approx(1.5)

    def test_showalter_at_zero(self):
        assert eval_filter(SHOWALTER, 0.5, 0.0) == pytest.approx(2.0)

    def test_names_resolve(self):
        for fam in FAMILIES:
            assert get_filter(fam.name) is fam
        with pytest.raises(ValueError):
            get_filter("ridge-ish")

    @pytest.mark.parametrize("lam, sigma", [(0.0, 0.5), (-1.0, 0.5), (0.5, -0.1), (0.5, 1.5)])
    def test_domain_errors(self, lam, sigma):
        with pytest.raises(FilterDomainError):
            eval_filter(TIKHONOV, lam, sigma, eta=1.0)

    def test_array_input(self):
        sig = np.array([0.1, 0.5, 1.0])
        np.testing.assert_allclose(eval_filter(TIKHONOV, 0.5, sig), 1.0 / (sig + 0.5))


class TestResidual:
    def test_tikhonov(self):
        assert eval_residual(TIKHONOV, 0.5, 0.5) == pytest.approx(0.5)

    def test_cutoff_kept(self):
        assert eval_residual(CUTOFF, 0.5, 1.0) == pytest.approx(0.0)

    def test_landweber(self):
        assert eval_residual(LANDWEBER, 0.5, 0.5) == pytest.approx(0.25)

    @pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.name)
    def test_definition(self, fam):
        sig = np.logspace(-6, 0, 50)
        for lam in (1e-3, 0.1, 0.7):
            np.testing.assert_allclose(
                eval_residual(fam, lam, sig), 1.0 - sig * eval_filter(fam, lam, sig),
                atol=1e-12,
            )


class TestCertification:
    def test_tikhonov_p1(self):
        cert = certify_constants(TIKHONOV, p_list=[1])
        assert cert.certified
        for value in (cert.A, cert.B, cert.D, cert.omega[1.0]):
            assert value == pytest.approx(1.0, abs=1e-3)
            assert value <= 1 + 1e-6

    def test_tikhonov_p2_fails(self):
        cert = certify_constants(TIKHONOV, p_list=[2])
        assert not cert.certified
        assert cert.divergent[2.0]
        assert any("omega_2" in f for f in cert.failures())

    @pytest.mark.parametrize("fam", [CUTOFF, SHOWALTER, LANDWEBER], ids=lambda f: f.name)
    def test_infinite_qualification(self, fam):
        cert = certify_constants(fam, p_list=[1, 2, 4])
        assert cert.certified, cert.failures()
        assert max(cert.A, cert.B, cert.D, cert.omega[1.0]) <= 1 + 1e-6

    def test_cutoff_omegas_are_one(self):
        cert = certify_constants(CUTOFF, p_list=[1, 2, 4])
        for p in (1.0, 2.0, 4.0):
            assert cert.omega[p] <= 1.0 + 1e-6
            assert cert.omega[p] == pytest.approx(1.0, abs=0.05)

    @pytest.mark.parametrize("eta", [0.25, 1.0, 7.0])
    def test_landweber_eta_rescaling(self, eta):
        cert = certify_constants(LANDWEBER, eta=eta, p_list=[1])
        assert cert.certified
        assert cert.B <= 1 + 1e-6

    def test_to_dict_is_json_ready(self):
        import json

        d = certify_constants(TIKHONOV, p_list=[1, 2]).to_dict()
        assert json.loads(json.dumps(d))["certified"] is False


class TestProperties:
    @pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.name)
    def test_bounds_on_grid(self, fam):
        cert = certify_constants(fam, p_list=[1])
        sig = np.logspace(-10, 0, 400)
        for lam in np.logspace(-6, 0, 9):
            s_g = sig * eval_filter(fam, lam, sig)
            r = eval_residual(fam, lam, sig)
            assert np.all(s_g >= -1e-15) and np.all(s_g <= cert.A + 1e-12)
            assert np.all(np.abs(r) <= cert.D + 1e-12)

    @given(st.floats(1e-8, 1.0), st.floats(0.0, 1.0))
    def test_tikhonov_identity(self, lam, sigma):
        g = eval_filter(TIKHONOV, lam, sigma)
        assert g * (sigma + lam) == pytest.approx(1.0, rel=1e-12)

    @given(st.integers(1, 400), st.floats(1e-6, 1.999))
    def test_landweber_closed_form(self, t, sigma):
        direct = sum((1.0 - sigma) ** i for i in range(t))
        assert landweber_partial_sum(t, sigma) == pytest.approx(direct, rel=1e-10, abs=1e-12)
        assert direct == pytest.approx((1.0 - (1.0 - sigma) ** t) / sigma, rel=1e-10, abs=1e-12)

    @pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.name)
    def test_consistency_small_lambda(self, fam):
        sig = np.linspace(0.1, 1.0, 19)
        np.testing.assert_allclose(eval_filter(fam, 1e-6, sig) * sig, 1.0, rtol=1e-3)

    @settings(max_examples=50)
    @given(st.sampled_from(FAMILIES), st.floats(1e-4, 1.0), st.floats(0.0, 1.0))
    def test_filter_nonnegative(self, fam, lam, sigma):
        g = eval_filter(fam, lam, sigma)
        assert g >= 0.0 and math.isfinite(g)
