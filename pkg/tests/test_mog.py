import numpy as np
import pytest

from collapselab import (
    DatasetSpec,
    MogSpec,
    NoiseSchedule,
    ParameterError,
    mog_logpdf,
    mog_marginal_cdf,
    mog_marginal_pdf,
    mog_score,
    mog_spec_for,
    mog_velocity,
    ring,
    rng_stream,
    sample_mog,
    symmetric_pair,
)
from collapselab.schedules import drift_diffusion, schedule_coeffs

VP = NoiseSchedule("vp", 0.1, 20.0)


def fd_score(spec, sched, x, t, h=1e-5):
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (mog_logpdf(spec, sched, x + e, t) - mog_logpdf(spec, sched, x - e, t)) / (2 * h)
    return grad


def test_spec_validation():
    with pytest.raises(ParameterError):
        MogSpec(weights=[0.5, 0.4], means=[[0.0], [1.0]], variances=[0.1, 0.1])
    with pytest.raises(ParameterError):
        MogSpec(weights=[0.5, 0.5], means=[[0.0], [1.0]], variances=[0.1, 0.0])
    with pytest.raises(ParameterError):
        MogSpec(weights=[1.0], means=[0.0], variances=[0.1])


def test_symmetric_score_zero_at_origin():
    spec = symmetric_pair(1, 0.2)
    for t in (0.0, 0.2, 0.5, 1.0):
        assert mog_score(spec, VP, np.zeros(1), t) == pytest.approx(0.0, abs=1e-15)


def test_single_component_exact():
    spec = MogSpec(weights=[1.0], means=[[0.4, -0.6]], variances=[0.09])
    x = np.array([1.0, 2.0])
    for t in (0.1, 0.5, 0.9):
        alpha, sigma = schedule_coeffs(VP, t)
        expected = -(x - alpha * np.array([0.4, -0.6])) / (0.09 * alpha**2 + sigma**2)
        assert np.allclose(mog_score(spec, VP, x, t), expected, rtol=1e-14)


@pytest.mark.parametrize("dim", [1, 10])
def test_score_matches_finite_differences(dim):
    spec = symmetric_pair(dim, 0.2)
    g = rng_stream(13, 0)
    for _ in range(100):
        x = 2.5 * g.standard_normal(dim)
        t = float(g.uniform(0.05, 1.0))
        sc = mog_score(spec, VP, x, t)
        fd = fd_score(spec, VP, x, t)
        assert np.max(np.abs(sc - fd)) / max(np.max(np.abs(fd)), 1e-12) < 1e-6


def test_score_fd_at_half_10d():
    spec = symmetric_pair(10, 0.2)
    x = rng_stream(4, 0).standard_normal(10)
    sc = mog_score(spec, VP, x, 0.5)
    fd = fd_score(spec, VP, x, 0.5)
    assert np.max(np.abs(sc - fd)) / np.max(np.abs(fd)) < 1e-6


def test_score_odd_symmetry_exact():
    spec = symmetric_pair(3, 0.2)
    g = rng_stream(21, 0)
    for _ in range(20):
        x = g.standard_normal(3)
        t = float(g.uniform(0.0, 1.0))
        assert np.array_equal(mog_score(spec, VP, x, t), -mog_score(spec, VP, -x, t))


def test_score_t1_close_to_minus_x():
    spec = symmetric_pair(2, 0.2)
    g = rng_stream(31, 0)
    for _ in range(50):
        x = g.standard_normal(2)
        norm = np.linalg.norm(x)
        if norm > 3 or norm == 0:
            x = 3.0 * x / max(norm, 1e-9)
        sc = mog_score(spec, VP, x, 1.0)
        assert np.linalg.norm(sc + x) < 5e-2


def test_score_far_modes_no_underflow():
    spec = MogSpec(weights=[0.5, 0.5], means=[[-100.0], [100.0]], variances=[0.01, 0.01])
    sc = mog_score(spec, VP, np.array([100.0]), 0.01)
    assert np.all(np.isfinite(sc))


def test_velocity_zero_at_origin_symmetric():
    spec = symmetric_pair(2, 0.2)
    v = mog_velocity(spec, VP, np.zeros(2), 0.5)
    assert np.allclose(v, 0.0, atol=1e-15)


def test_velocity_is_drift_minus_half_g2_score():
    spec = symmetric_pair(3, 0.2)
    x = rng_stream(8, 0).standard_normal(3)
    for t in (0.1, 0.6, 1.0):
        f, g = drift_diffusion(VP, x, t)
        expected = f - 0.5 * g * g * mog_score(spec, VP, x, t)
        assert np.array_equal(mog_velocity(spec, VP, x, t), expected)


def test_marginal_pdf_hand_value():
    spec = symmetric_pair(4, 0.2)
    t = 0.3
    alpha, sigma = schedule_coeffs(VP, t)
    var = 0.2 * alpha**2 + sigma**2
    hand = np.exp(-0.5 * alpha**2 / var) / np.sqrt(2 * np.pi * var)  # both modes at +-alpha
    assert mog_marginal_pdf(spec, VP, 0.0, t, 0) == pytest.approx(hand, rel=1e-14)


def test_marginal_pdf_normalizes():
    spec = ring()
    for t in (0.05, 0.5, 1.0):
        u = np.linspace(-10, 10, 20_001)
        total = np.trapezoid(mog_marginal_pdf(spec, VP, u, t, 1), u)
        assert abs(total - 1.0) < 1e-6


def test_marginal_pdf_t1_near_standard_normal():
    spec = symmetric_pair(10, 0.2)
    u = np.linspace(-4, 4, 200)
    pdf = mog_marginal_pdf(spec, VP, u, 1.0, 0)
    std = np.exp(-0.5 * u * u) / np.sqrt(2 * np.pi)
    assert np.max(np.abs(pdf - std)) < 1e-3


def test_marginal_dim_out_of_range():
    spec = symmetric_pair(2, 0.2)
    with pytest.raises(ParameterError):
        mog_marginal_pdf(spec, VP, 0.0, 0.5, 2)


def test_marginal_cdf_matches_pdf_derivative():
    spec = symmetric_pair(1, 0.2)
    h = 1e-6
    for u in (-1.0, 0.0, 0.7):
        dcdf = (mog_marginal_cdf(spec, VP, u + h, 0.4, 0)
                - mog_marginal_cdf(spec, VP, u - h, 0.4, 0)) / (2 * h)
        assert dcdf == pytest.approx(mog_marginal_pdf(spec, VP, u, 0.4, 0), rel=1e-6)


def test_mog_spec_for_dataset():
    spec = mog_spec_for(DatasetSpec("mognd", dimension=7, component_variance=0.3))
    assert spec.dim == 7 and np.all(spec.variances == 0.3)
    ring_spec = mog_spec_for(DatasetSpec("mog2d", component_std=0.2))
    assert ring_spec.dim == 2 and np.allclose(ring_spec.variances, 0.04)
    with pytest.raises(ParameterError):
        mog_spec_for(DatasetSpec("spiral"))


def test_sample_mog_moments():
    spec = symmetric_pair(3, 0.2)
    pts = sample_mog(spec, 50_000, rng_stream(17, 0))
    assert np.all(np.abs(pts.mean(axis=0)) < 0.02)
    assert np.all(np.abs(pts.var(axis=0) - 1.2) < 0.05)


def test_single_gaussian_ode_matches_closed_form_flow():
    # For one Gaussian component the flow is linear: quantiles are transported,
    # x(t) = alpha_t mu + (x(1) - alpha_1 mu) * std(t) / std(1).
    spec = MogSpec(weights=[1.0], means=[[0.7]], variances=[0.3])
    from collapselab import OracleSource, SamplerConfig, run_sampler

    src = OracleSource(spec, VP)
    ds, _ = run_sampler(src, VP, SamplerConfig("ode", steps=1000), 200, seed=11)
    x1 = rng_stream(11, 0).standard_normal((200, 1))

    def closed_form(t0, t1, x):
        a0, s0 = schedule_coeffs(VP, t0)
        a1, s1 = schedule_coeffs(VP, t1)
        std0 = np.sqrt(0.3 * a0**2 + s0**2)
        std1 = np.sqrt(0.3 * a1**2 + s1**2)
        return 0.7 * a1 + (x - 0.7 * a0) * std1 / std0

    assert np.max(np.abs(ds.points - closed_form(1.0, 1e-3, x1))) < 1e-3
