import numpy as np
import pytest

from evsched.policy import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    SQUASH_EPS,
    GaussianPolicyHead,
    SampleCache,
)


def make_head(obs_dim=3, hidden=(8,), seed=0, low=-6.0, high=6.0):
    rng = np.random.default_rng(seed)
    return GaussianPolicyHead(obs_dim, hidden, rng, low, high)


def pinned_head(mu, log_std, obs_dim=2, low=-6.0, high=6.0):
    """Zero the network so every observation maps to (mu, log_std)."""
    head = make_head(obs_dim=obs_dim, low=low, high=high)
    head.net.params[:] = 0.0
    w, b = head.net._views[-1]
    b[0] = mu
    b[1] = log_std
    return head


def test_action_bounds_and_scale():
    head = make_head(low=-6.0, high=6.0)
    assert head.scale == 6.0 and head.offset == 0.0
    rng = np.random.default_rng(1)
    obs = rng.normal(size=(50, 3))
    xi = rng.standard_normal(50)
    actions, _ = head.sample(obs, xi)
    assert np.all(actions > -6.0) and np.all(actions < 6.0)
    head2 = make_head(low=0.0, high=4.0)
    assert head2.scale == 2.0 and head2.offset == 2.0
    a2, _ = head2.sample(obs, xi)
    assert np.all(a2 > 0.0) and np.all(a2 < 4.0)


def test_deterministic_is_squashed_mean():
    head = pinned_head(mu=0.7, log_std=-1.0)
    obs = np.zeros((4, 2))
    det = head.deterministic(obs)
    np.testing.assert_allclose(det, 6.0 * np.tanh(0.7))


def test_sample_reproducible_given_noise():
    head = make_head()
    obs = np.random.default_rng(2).normal(size=(5, 3))
    xi = np.random.default_rng(3).standard_normal(5)
    a1, lp1 = head.sample(obs, xi)
    a2, lp2 = head.sample(obs, xi)
    np.testing.assert_array_equal(a1, a2)
    np.testing.assert_array_equal(lp1, lp2)


def test_log_prob_consistent_with_sample():
    # density queried at the sampled action equals the density reported
    # by the sampler (same change of variables)
    head = pinned_head(mu=0.3, log_std=-0.5)
    obs = np.zeros((6, 2))
    xi = np.linspace(-2, 2, 6)
    actions, lp_sample = head.sample(obs, xi)
    lp_query = head.log_prob(obs, actions)
    np.testing.assert_allclose(lp_query, lp_sample, rtol=1e-9, atol=1e-9)


def test_log_prob_normalizes_to_one():
    # numerical integral of the squashed density over the action interval
    head = pinned_head(mu=-0.4, log_std=0.2)
    grid = np.linspace(-6.0 + 1e-9, 6.0 - 1e-9, 20001)
    obs = np.zeros((grid.size, 2))
    dens = np.exp(head.log_prob(obs, grid))
    total = np.trapezoid(dens, grid)
    assert total == pytest.approx(1.0, abs=1e-3)


def test_log_std_clamped():
    head = pinned_head(mu=0.0, log_std=50.0)
    obs = np.zeros((3, 2))
    cache = head.sample_cached(obs, np.zeros(3))
    np.testing.assert_allclose(cache.sigma, np.exp(LOG_STD_MAX))
    assert not cache.clamp_mask.any()  # gradient blocked above the clamp
    head_lo = pinned_head(mu=0.0, log_std=-50.0)
    cache = head_lo.sample_cached(obs, np.zeros(3))
    np.testing.assert_allclose(cache.sigma, np.exp(LOG_STD_MIN))
    head_in = pinned_head(mu=0.0, log_std=0.5)
    cache = head_in.sample_cached(obs, np.zeros(3))
    assert cache.clamp_mask.all()


def test_backward_through_sample_matches_fd():
    # d/dtheta of sum(g_a * action + g_lp * log_prob) with xi fixed
    rng = np.random.default_rng(7)
    head = make_head(obs_dim=3, hidden=(6,), seed=11)
    obs = rng.normal(size=(4, 3))
    xi = rng.standard_normal(4)
    g_a = rng.normal(size=4)
    g_lp = rng.normal(size=4)

    cache = head.sample_cached(obs, xi)
    grads = head.backward_through_sample(cache, g_a, g_lp)

    def objective():
        c = head.sample_cached(obs, xi)
        return float(np.dot(g_a, c.action) + np.dot(g_lp, c.log_prob))

    params = head.net.params
    eps = 1e-6
    fd = np.zeros_like(params)
    for i in range(params.size):
        old = params[i]
        params[i] = old + eps
        hi = objective()
        params[i] = old - eps
        lo = objective()
        params[i] = old
        fd[i] = (hi - lo) / (2 * eps)
    np.testing.assert_allclose(grads, fd, rtol=2e-5, atol=1e-8)


def test_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        make_head(low=6.0, high=-6.0)
