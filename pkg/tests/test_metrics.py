import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_psd
from spectral_flr.kernels import BROWNIAN_COV, uniform_grid
from spectral_flr.metrics import (
    METRICS,
    ErrorTriple,
    error_triple,
    l2_error,
    metric_function,
    prediction_error,
    rkhs_error,
)
from spectral_flr.operators import SpectralOperator


class TestL2:
    def test_examples(self):
        assert l2_error(np.zeros(3)) == 0.0
        assert l2_error([3.0, 4.0]) == pytest.approx(5.0)

    def test_matches_quadrature(self, rng):
        grid = uniform_grid(256)
        delta = rng.standard_normal(20)
        curve = BROWNIAN_COV.design(grid.points, 20) @ delta
        assert math.sqrt(grid.integrate(curve**2)) == pytest.approx(l2_error(delta), abs=1e-4)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            l2_error([1.0, np.inf])


class TestRKHS:
    def test_examples(self):
        t = SpectralOperator.diagonal([4.0])
        assert rkhs_error([0.0], t) == 0.0
        assert rkhs_error([2.0], t) == pytest.approx(1.0)

    def test_null_direction_undefined(self):
        assert rkhs_error([0.0, 1.0], SpectralOperator.diagonal([1.0, 0.0])) is None

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            rkhs_error([1.0, 2.0], SpectralOperator.diagonal([1.0]))


class TestPrediction:
    def test_examples(self):
        c = SpectralOperator.diagonal([0.25])
        assert prediction_error([0.0], c) == 0.0
        assert prediction_error([2.0], c) == pytest.approx(1.0)

    def test_monte_carlo(self, rng):
        c = SpectralOperator(random_psd(rng, 4))
        delta = rng.standard_normal(4)
        x = rng.multivariate_normal(np.zeros(4), c.matrix, size=200_000)
        assert np.mean((x @ delta) ** 2) == pytest.approx(prediction_error(delta, c), rel=0.02)


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_norm_comparisons(self, seed):
        r = np.random.default_rng(seed)
        t = SpectralOperator(random_psd(r, 6))
        c = SpectralOperator(random_psd(r, 6))
        delta = r.standard_normal(6)
        l2, rk, pred = l2_error(delta), rkhs_error(delta, t), prediction_error(delta, c)
        assert rk >= l2 / math.sqrt(t.max_eigenvalue) * (1 - 1e-12)
        assert pred <= c.max_eigenvalue * l2**2 * (1 + 1e-12)
        assert pred >= 0.0

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_rotation_invariance(self, seed):
        r = np.random.default_rng(seed)
        t, c = random_psd(r, 5), random_psd(r, 5)
        delta = r.standard_normal(5)
        q, _ = np.linalg.qr(r.standard_normal((5, 5)))
        a = error_triple(delta, np.zeros(5), SpectralOperator(t), SpectralOperator(c))
        b = error_triple(q @ delta, np.zeros(5), SpectralOperator(q @ t @ q.T),
                         SpectralOperator(q @ c @ q.T))
        assert b.l2 == pytest.approx(a.l2, rel=1e-10)
        assert b.rkhs == pytest.approx(a.rkhs, rel=1e-8)
        assert b.pred == pytest.approx(a.pred, rel=1e-10)


class TestTriple:
    def test_get(self):
        trip = ErrorTriple(1.0, None, 2.0)
        assert trip.get("l2") == 1.0 and trip.get("rkhs") is None
        with pytest.raises(ValueError):
            trip.get("linf")

    def test_metric_functions(self):
        class Truth:
            T = SpectralOperator.diagonal([1.0, 0.0])
            C = SpectralOperator.diagonal([1.0, 1.0])

        for name in METRICS:
            assert metric_function(name)(np.zeros(2), Truth) == 0.0
        assert metric_function("rkhs")(np.array([0.0, 1.0]), Truth) == math.inf
