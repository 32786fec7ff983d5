import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from oracles import replace_one_pairs, sensitivity_sweep
from primo.privacy import (
    PrivacyBudget,
    association_sensitivity,
    calibration_constant,
    covariance_sensitivity,
    gaussian_vector_mech,
    stream,
    subsample_amplified_budget,
    symmetric_gaussian_noise,
)

# sqrt(2 (1/5 + ln(5008^2)/25)) evaluated at 30 digits with mpmath
C_FIGURE_SETTING = 1.32778262755798605632165820173


def test_budget_validation():
    for eps, delta in [(0, 0.1), (-1, 0.1), (math.inf, 0.1), (1, 0), (1, 1), (1, 1.5)]:
        with pytest.raises(ValueError):
            PrivacyBudget(eps, delta)


def test_calibration_closed_forms():
    assert calibration_constant(PrivacyBudget(1.0, math.exp(-1))) == pytest.approx(2.0, rel=1e-15)
    assert calibration_constant(PrivacyBudget(2.0, math.exp(-4))) == pytest.approx(math.sqrt(3), rel=1e-15)


def test_calibration_figure_setting():
    assert calibration_constant(PrivacyBudget(5.0, 1 / 5008**2)) == pytest.approx(C_FIGURE_SETTING, rel=1e-14)


@settings(max_examples=100)
@given(
    eps=st.floats(1e-3, 1e3),
    delta=st.floats(1e-12, 0.5),
    factor=st.floats(1.01, 10.0),
)
def test_calibration_strictly_decreasing(eps, delta, factor):
    c = calibration_constant(PrivacyBudget(eps, delta))
    assert calibration_constant(PrivacyBudget(eps * factor, delta)) < c
    assert calibration_constant(PrivacyBudget(eps, min(delta * factor, 0.99))) < c


def test_gauss_zero_sensitivity_is_exact():
    v = np.array([1.0, -2.0, 3.0])
    out, sigma = gaussian_vector_mech(v, 0.0, PrivacyBudget(1.0, 0.1), stream(0))
    assert sigma == 0.0 and np.array_equal(out, v) and out is not v


def test_gauss_huge_epsilon_barely_perturbs():
    out, sigma = gaussian_vector_mech(np.zeros(1000), 1.0, PrivacyBudget(1e9, 0.1), stream(1))
    assert sigma < 1e-4
    assert np.max(np.abs(out)) < 1e-3


def test_gauss_empirical_std():
    out, sigma = gaussian_vector_mech(np.zeros(100_000), 1.0, PrivacyBudget(1.0, math.exp(-1)), stream(2))
    assert sigma == pytest.approx(2.0)
    assert 1.98 <= out.std() <= 2.02


def test_gauss_bit_reproducible():
    b = PrivacyBudget(0.7, 1e-5)
    a1, _ = gaussian_vector_mech(np.arange(5.0), 0.3, b, stream(9, 1, 2))
    a2, _ = gaussian_vector_mech(np.arange(5.0), 0.3, b, stream(9, 1, 2))
    a3, _ = gaussian_vector_mech(np.arange(5.0), 0.3, b, stream(9, 1, 3))
    assert np.array_equal(a1, a2)
    assert not np.array_equal(a1, a3)


def test_gauss_rejects_bad_sensitivity():
    with pytest.raises(ValueError):
        gaussian_vector_mech(np.zeros(2), -1.0, PrivacyBudget(1, 0.1), stream(0))


def test_symmetric_noise_basic():
    assert np.array_equal(symmetric_gaussian_noise(4, 0.0, stream(0)), np.zeros((4, 4)))
    e = symmetric_gaussian_noise(6, 1.3, stream(1))
    assert np.array_equal(e, e.T)


def test_symmetric_noise_offdiagonal_variance():
    rng = stream(3)
    vals = np.array([symmetric_gaussian_noise(50, 1.0, rng)[0, 1] for _ in range(10_000)])
    assert 0.97 <= vals.var() <= 1.03


def test_symmetric_noise_diagonal_ks():
    rng = stream(4)
    diag = np.concatenate([np.diag(symmetric_gaussian_noise(10, 2.0, rng)) for _ in range(1000)])
    assert stats.kstest(diag, stats.norm(scale=2.0).cdf).pvalue > 0.001


def test_symmetric_noise_upper_triangle_independent():
    rng = stream(5)
    draws = np.array([symmetric_gaussian_noise(3, 1.0, rng)[np.triu_indices(3)] for _ in range(20_000)])
    corr = np.corrcoef(draws.T)
    assert np.max(np.abs(corr - np.eye(6))) < 0.04


def test_covariance_sensitivity_formula():
    # sqrt(2) * bound^2 / n, see the ledger for why sqrt(2)
    assert covariance_sensitivity(1.0, 1) == pytest.approx(math.sqrt(2))
    assert covariance_sensitivity(2.0, 100) == pytest.approx(math.sqrt(2) * 0.04)


def test_association_sensitivity_formula():
    assert association_sensitivity(1.0, 1.0, 1, 2) == pytest.approx(1.0)
    assert association_sensitivity(3.0, 0.5, 4, 10) == pytest.approx(0.6)


def test_covariance_sensitivity_sweep():
    rng = np.random.default_rng(6)
    n, d, bound = 5, 3, 1.7
    worst = sensitivity_sweep(lambda x, y: x.T @ x / n, replace_one_pairs(rng, n, d, 1, bound, 1.0), 1000)
    limit = covariance_sensitivity(bound, n)
    assert worst <= limit * (1 + 1e-12)
    # orthogonal boundary rows attain the bound
    assert worst >= 0.999 * limit


def test_association_sensitivity_sweep():
    rng = np.random.default_rng(7)
    n, d, l, xb, yb = 6, 2, 3, 1.2, 0.8
    worst = sensitivity_sweep(lambda x, y: x.T @ y / n, replace_one_pairs(rng, n, d, l, xb, yb), 1000)
    limit = association_sensitivity(xb, yb, l, n)
    assert worst <= limit * (1 + 1e-12)
    assert worst >= 0.99 * limit


def test_subsample_budget():
    b = PrivacyBudget(1.0, 1e-6)
    assert subsample_amplified_budget(b, 100, 100) == PrivacyBudget(0.5, 5e-7)
    assert subsample_amplified_budget(b, 100, 50) == PrivacyBudget(1.0, 5e-7)
    assert subsample_amplified_budget(PrivacyBudget(2.0, 1e-6), 100, 25) == PrivacyBudget(4.0, 5e-7)
    with pytest.raises(ValueError):
        subsample_amplified_budget(b, 100, 101)
    with pytest.raises(ValueError):
        subsample_amplified_budget(b, 100, 0)


def test_halve():
    assert PrivacyBudget(3.0, 0.2).halve() == PrivacyBudget(1.5, 0.1)
