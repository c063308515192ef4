import numpy as np
import pytest

from collapselab import (
    ConfigError,
    HermiteExpansion,
    ParameterError,
    hermite_eval,
    optimal_theta,
    seesaw_losses,
    seesaw_table,
    target_coeffs,
)
from collapselab.seesaw import gauss_hermite_rule, score_target

# Frozen reference values from 40-digit adaptive quadrature of
# integral (tanh(x) - x) He_i(x) phi(x) dx (independent of the
# Gauss-Hermite path under test). Note the alternating signs from i = 5 on.
A1 = -0.39429449039784126
A3 = -0.14843719078727277
A5 = 0.06254752375270373
A7 = -0.03144541928767873
PARSEVAL_TOTAL = 0.182883471193524  # integral (tanh x - x)^2 phi dx


def test_hermite_base_cases():
    assert hermite_eval(0, 1.7) == 1.0
    assert hermite_eval(1, -0.3) == -0.3
    assert hermite_eval(2, 0.0) == pytest.approx(-1.0 / np.sqrt(2), abs=1e-15)
    assert hermite_eval(3, 1.0) == pytest.approx(-2.0 / np.sqrt(6), abs=1e-15)


def test_hermite_rejects_negative_degree():
    with pytest.raises(ParameterError):
        hermite_eval(-1, 0.0)


def test_hermite_orthonormality():
    x, w = gauss_hermite_rule(200)
    H = np.stack([hermite_eval(i, x) for i in range(11)])
    gram = (H * w) @ H.T
    assert np.max(np.abs(gram - np.eye(11))) < 1e-8


def test_hermite_vectorized_matches_scalar():
    xs = np.linspace(-3, 3, 7)
    for i in (0, 1, 4, 9):
        vec = hermite_eval(i, xs)
        assert np.allclose(vec, [hermite_eval(i, float(x)) for x in xs], atol=0)


def test_target_coeffs_high_noise_limit():
    # mu_t -> 0 turns the target into -x = -He_1
    a = target_coeffs(50.0, 6)
    assert abs(a[0] + 1.0) < 1e-12
    assert np.all(np.abs(a[1:]) < 1e-12)


def test_target_coeffs_even_vanish():
    a = target_coeffs(0.0, 10)
    assert np.all(np.abs(a[1::2]) < 1e-12)


def test_target_coeffs_frozen_values():
    a = target_coeffs(0.0, 8)
    assert a[0] == pytest.approx(A1, abs=1e-12)
    assert a[2] == pytest.approx(A3, abs=1e-12)
    assert a[4] == pytest.approx(A5, abs=1e-12)
    assert a[6] == pytest.approx(A7, abs=1e-12)
    # the first two odd coefficients are negative (the sign pattern then alternates)
    assert a[0] < 0 and a[2] < 0 and a[4] > 0


def test_target_coeffs_quadrature_guard():
    with pytest.raises(ConfigError):
        target_coeffs(0.0, 41, nodes=200)
    with pytest.raises(ParameterError):
        target_coeffs(0.0, 0)
    with pytest.raises(ParameterError):
        target_coeffs(-1.0, 3)


def test_score_target_shape():
    x = np.linspace(-2, 2, 5)
    assert np.allclose(score_target(0.0, x), np.tanh(x) - x, atol=0)


def test_optimal_theta():
    theta = optimal_theta(5)
    assert theta.coeffs.shape == (5,)
    assert theta.t_coeff == 0.0
    assert theta.coeffs[0] == pytest.approx((A1 - 1.0) / 2, abs=1e-12)
    assert np.all(np.abs(theta.coeffs[1::2]) < 1e-12)
    assert optimal_theta(1).coeffs.shape == (1,)


def test_expansion_evaluates():
    exp = HermiteExpansion(coeffs=np.array([-1.0]))
    xs = np.linspace(-2, 2, 9)
    assert np.allclose(exp(xs), -xs, atol=0)


def test_losses_monotone_over_p():
    l1s, l2s = zip(*[seesaw_losses(p) for p in range(1, 21)])
    for i in range(19):
        assert l1s[i + 1] <= l1s[i]
        assert l2s[i + 1] >= l2s[i]
        if (i + 2) % 2 == 1:
            assert l1s[i + 1] < l1s[i]
            assert l2s[i + 1] > l2s[i]


def test_losses_l2_at_one():
    _, l2 = seesaw_losses(1)
    assert l2 == pytest.approx(0.25 * (1.0 + A1) ** 2, abs=1e-12)


def test_losses_p_out_of_range():
    with pytest.raises(ParameterError):
        seesaw_losses(41)
    with pytest.raises(ParameterError):
        seesaw_losses(0)


def test_parseval_residual():
    a = target_coeffs(0.0, 40)
    total = float(np.sum(a * a))
    assert total <= PARSEVAL_TOTAL
    assert PARSEVAL_TOTAL - total < 1e-6


def test_seesaw_table():
    rows = seesaw_table([1, 3, 5])
    assert [r[0] for r in rows] == [1, 3, 5]
    l1, l2 = seesaw_losses(3)
    assert rows[1] == (3, l1, l2)
