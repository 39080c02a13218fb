import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from meanfield_offload.analysis import lipschitz_constant
from meanfield_offload.reward import (
    EXP1_Q999,
    NOISE_174_DBM_W,
    NetworkConfig,
    sample_reward,
    sample_task_size,
    sample_type,
    size_threshold,
    spectral_efficiency,
    success_probability,
    total_delay,
    truncated_normal_cdf,
)

unit = st.floats(0, 1, allow_nan=False)


# --- config ---------------------------------------------------------------


def test_gamma_max_calibration():
    cfg = NetworkConfig()
    assert cfg.gamma_max == pytest.approx(0.2 * 6.907755278982137 / (8e-3 + cfg.N0))
    assert EXP1_Q999 == pytest.approx(6.9078, abs=1e-4)


def test_default_noise_is_minus_174_dbm():
    assert NOISE_174_DBM_W == pytest.approx(3.981071705534969e-21)


@pytest.mark.parametrize(
    "bad",
    [dict(s_a=1e6, s_b=0.5e6), dict(sigma_s=0), dict(beta=1.5), dict(I_min=0.02), dict(B=-1.0), dict(m=0)],
)
def test_config_rejects_invalid(bad):
    with pytest.raises(ValueError):
        NetworkConfig(**bad)


def test_config_accepts_mbit_keys():
    cfg = NetworkConfig.from_dict({"s_a_mbit": 0.5, "s_b_mbit": 1.0, "mu_s_mbit": 0.75})
    assert (cfg.s_a, cfg.s_b, cfg.mu_s) == (5e5, 1e6, 7.5e5)
    with pytest.raises(KeyError):
        NetworkConfig.from_dict({"bogus": 1})


def test_dmax_required_for_q():
    with pytest.raises(ValueError, match="d_max"):
        success_probability(0.5, 0.5, NetworkConfig())


# --- spectral efficiency ----------------------------------------------------


def test_spectral_efficiency_values(sym_cfg):
    assert spectral_efficiency(0.0, sym_cfg) == 0.0
    assert spectral_efficiency(1.0, sym_cfg) == pytest.approx(math.log2(101), rel=1e-15)
    # log2(51) evaluated at 30 digits with mpmath
    assert spectral_efficiency(0.5, sym_cfg) == pytest.approx(5.67242534197149558970780495476, rel=1e-14)


def test_spectral_efficiency_domain(sym_cfg):
    with pytest.raises(ValueError):
        spectral_efficiency(1.2, sym_cfg)
    with pytest.raises(ValueError):
        spectral_efficiency(-0.1, sym_cfg)


def test_spectral_efficiency_increasing(sym_cfg):
    r = spectral_efficiency(np.linspace(0, 1, 1001), sym_cfg)
    assert np.all(np.diff(r) > 0)


# --- types ------------------------------------------------------------------


class _ZeroGain:
    """Generator stand-in whose uniforms are all zero (zero fading gain)."""

    def random(self, shape=None):
        return np.zeros(shape)


def test_zero_gain_gives_zero_type():
    assert np.all(sample_type(NetworkConfig(n=3), _ZeroGain()) == 0)


def test_types_in_unit_interval():
    th = sample_type(NetworkConfig(n=4), np.random.default_rng(1), size=50_000)
    assert th.shape == (50_000, 4)
    assert th.min() >= 0 and th.max() <= 1


@pytest.mark.slow
def test_type_mean_matches_independent_monte_carlo():
    cfg = NetworkConfig(n=1, p0=0.2, N0=10 ** (-17.4) * 1e-3, I_min=0.008, I_max=0.012)
    th = sample_type(cfg, np.random.default_rng(11), size=1_000_000)[:, 0]
    # independent oracle: numpy's own exponential/uniform samplers on another stream
    rng = np.random.default_rng(987654)
    h = rng.exponential(1.0, 1_000_000)
    interf = rng.uniform(cfg.I_min, cfg.I_max, 1_000_000)
    oracle = np.minimum(1.0, cfg.p0 * h / (interf + cfg.N0) / cfg.gamma_max)
    assert th.mean() == pytest.approx(oracle.mean(), rel=0.01)


# --- task size --------------------------------------------------------------


def test_task_size_cdf_endpoints(sym_cfg):
    assert truncated_normal_cdf(sym_cfg.s_a, sym_cfg) == 0.0
    assert truncated_normal_cdf(sym_cfg.s_b, sym_cfg) == 1.0
    assert truncated_normal_cdf(sym_cfg.mu_s, sym_cfg) == pytest.approx(0.5, abs=1e-15)
    assert truncated_normal_cdf(0.0, sym_cfg) == 0.0
    assert truncated_normal_cdf(5e6, sym_cfg) == 1.0


def test_task_size_cdf_matches_scipy(sym_cfg):
    s = np.linspace(sym_cfg.s_a, sym_cfg.s_b, 257)
    a = (sym_cfg.s_a - sym_cfg.mu_s) / sym_cfg.sigma_s
    b = (sym_cfg.s_b - sym_cfg.mu_s) / sym_cfg.sigma_s
    ref = stats.truncnorm.cdf(s, a, b, loc=sym_cfg.mu_s, scale=sym_cfg.sigma_s)
    np.testing.assert_allclose(truncated_normal_cdf(s, sym_cfg), ref, atol=1e-12)


@pytest.mark.slow
def test_task_size_law(sym_cfg):
    s = sample_task_size(sym_cfg, np.random.default_rng(5), size=1_000_000)
    assert s.min() >= sym_cfg.s_a and s.max() <= sym_cfg.s_b
    assert np.median(s) == pytest.approx(sym_cfg.mu_s, rel=0.01)
    ks = stats.kstest(s, lambda x: truncated_normal_cdf(x, sym_cfg))
    assert ks.statistic < 0.005


# --- delay and Q ------------------------------------------------------------


def test_total_delay_limits(desk_cfg):
    theta, s = 0.3, 7e5
    r = spectral_efficiency(theta, desk_cfg)
    downlink = desk_cfg.rho * s * desk_cfg.nu / (desk_cfg.B * r)
    assert total_delay(theta, 0.0, s, desk_cfg) == pytest.approx(downlink, rel=1e-15)
    assert total_delay(0.0, 0.5, s, desk_cfg) == math.inf
    assert total_delay(theta, 0.4, 2 * s, desk_cfg) == pytest.approx(2 * total_delay(theta, 0.4, s, desk_cfg), rel=1e-14)


def test_total_delay_increasing(desk_cfg):
    f = np.linspace(0, 1, 101)
    assert np.all(np.diff(total_delay(0.4, f, 6e5, desk_cfg)) > 0)
    s = np.linspace(desk_cfg.s_a, desk_cfg.s_b, 101)
    assert np.all(np.diff(total_delay(0.4, 0.3, s, desk_cfg)) > 0)


def test_q_boundaries(desk_cfg):
    assert np.all(success_probability(0.0, np.linspace(0, 1, 50), desk_cfg) == 0)
    assert success_probability(0.5, 0.5, desk_cfg.replace(d_max=1e9)) == 1.0


def test_q_monotone_grid(desk_cfg):
    theta = np.linspace(0.01, 1, 100)[:, None]
    f = np.linspace(0, 1, 100)[None, :]
    q = success_probability(theta, f, desk_cfg)
    df = np.diff(q, axis=1)
    assert np.all(df <= 0)
    inner = (q[:, :-1] > 0) & (q[:, :-1] < 1) & (q[:, 1:] > 0) & (q[:, 1:] < 1)
    assert inner.sum() > 100
    assert np.all(df[inner] < 0)
    assert np.all(np.diff(q, axis=0) >= 0)


def test_threshold_consistency(desk_cfg):
    # total_delay at the size threshold equals the deadline
    rng = np.random.default_rng(3)
    checked = 0
    for theta, f in rng.uniform(0.001, 1, size=(500, 2)):
        tau = size_threshold(theta, f, desk_cfg)
        if desk_cfg.s_a < tau < desk_cfg.s_b:
            assert total_delay(theta, f, tau, desk_cfg) == pytest.approx(desk_cfg.d_max, rel=1e-9)
            checked += 1
    assert checked > 50


def test_q_lipschitz_by_finite_differences(desk_cfg):
    f = np.linspace(0, 1, 10_001)
    h = 1e-4
    for theta in (0.05, 0.2, 0.5, 1.0):
        q = success_probability(theta, f, desk_cfg)
        slope = np.abs(np.diff(q)) / h
        assert slope.max() <= lipschitz_constant(theta, desk_cfg)


def test_q_continuity_on_grid(desk_cfg):
    h = 1e-3
    f = np.arange(0, 1 + h / 2, h)
    for theta in np.linspace(0.02, 1, 25):
        q = success_probability(theta, f, desk_cfg)
        assert np.abs(np.diff(q)).max() <= lipschitz_constant(theta, desk_cfg) * h


@pytest.mark.slow
def test_q_matches_brute_force_monte_carlo(desk_cfg):
    rng = np.random.default_rng(21)
    theta, f = 0.05, 0.7
    s = sample_task_size(desk_cfg, rng, size=1_000_000)
    freq = np.mean(total_delay(theta, f, s, desk_cfg) <= desk_cfg.d_max)
    q = success_probability(theta, f, desk_cfg)
    assert 0.05 < q < 0.95
    assert abs(freq - q) <= 3 * math.sqrt(q * (1 - q) / len(s))


@settings(max_examples=200, deadline=None)
@given(theta=unit, f=unit)
def test_q_is_probability(theta, f):
    cfg = NetworkConfig(m=100, n=2, d_max=3.0)
    q = success_probability(theta, f, cfg)
    assert 0 <= q <= 1


# --- rewards ----------------------------------------------------------------


def test_reward_suppressed(desk_cfg):
    rng = np.random.default_rng(0)
    assert sample_reward(0.7, 0.3, 0.0, desk_cfg, rng) == 0
    assert sample_reward(0.0, 0.3, 1.0, desk_cfg, rng) == 0
    draws = sample_reward(np.full(1000, 0.7), 0.3, 0.0, desk_cfg, rng)
    assert draws.sum() == 0


@pytest.mark.slow
def test_reward_frequency(desk_cfg):
    theta, f, alpha = 0.05, 0.7, 0.6
    p = alpha * success_probability(theta, f, desk_cfg)
    draws = sample_reward(np.full(1_000_000, theta), f, alpha, desk_cfg, np.random.default_rng(8))
    assert set(np.unique(draws)) <= {0, 1}
    assert abs(draws.mean() - p) <= 3 * math.sqrt(p * (1 - p) / len(draws))
