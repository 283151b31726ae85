"""Environment feedback construction: modes, noise, moments, conservation."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affinity_bandits.bias import BiasModel, PullState, constant, power
from affinity_bandits.envs import (Environment, debiased_sample, make_env,
                                   pseudo_regret, sample_feedback)
from affinity_bandits.rng import DrawSource, ENV_STREAM, make_generator


def simple_env(mode="multiplicative", noise="bernoulli", means=(0.4, 0.6),
               pulls=(10, 10), f=None):
    return Environment(means=means,
                       bias=BiasModel(f or power(1.0), pulls),
                       noise=noise, mode=mode)


class TestConstruction:
    def test_basic_fields(self):
        env = simple_env()
        assert env.num_arms == 2
        assert env.optimal_arm() == 1
        assert env.gaps() == pytest.approx((0.2, 0.0))

    def test_optimal_arm_lowest_index_tie(self):
        env = simple_env(means=(0.6, 0.4, 0.6), pulls=(1, 1, 1))
        assert env.optimal_arm() == 0

    def test_gaussian_sigma_defaults_to_one(self):
        env = simple_env(noise="gaussian")
        assert env.sigma == 1.0

    def test_sigma_rejected_for_bernoulli(self):
        with pytest.raises(ValueError):
            Environment(means=(0.5,), bias=BiasModel(power(1.0), (1,)),
                        noise="bernoulli", sigma=2.0)

    def test_means_outside_unit_interval_rejected(self):
        with pytest.raises(ValueError):
            simple_env(means=(0.4, 1.2))
        with pytest.raises(ValueError):
            simple_env(means=(-0.1, 0.5))

    def test_bias_arm_count_must_match(self):
        with pytest.raises(ValueError):
            Environment(means=(0.4, 0.6, 0.5),
                        bias=BiasModel(power(1.0), (1, 1)))

    def test_unknown_mode_noise(self):
        with pytest.raises(ValueError):
            simple_env(mode="divide")
        with pytest.raises(ValueError):
            simple_env(noise="poisson")

    def test_config_roundtrip(self):
        env = simple_env(mode="mask", noise="gaussian")
        env2 = Environment.from_config(env.to_config())
        assert env2.to_config() == env.to_config()
        env3 = make_env(env.to_config())
        assert env3.means == env.means


class TestReweighting:
    def test_reweight_factor_initial(self):
        env = simple_env(pulls=(200, 10))
        s = PullState.initial(2)
        assert env.reweight_factor(s, 0) == pytest.approx(200 / 210)
        assert env.biased_mean(s, 0) == pytest.approx(0.4 * 200 / 210)

    def test_mask_consumes_two_draws_every_step(self):
        """The mask path draws (mask, payoff) even when the mask is zero,
        so the stream position is policy-independent."""
        env = simple_env(mode="mask", pulls=(1, 1000))
        s = PullState.initial(2)
        src_a = DrawSource(99, ENV_STREAM)
        for _ in range(50):
            sample_feedback(env, s, 0, src_a)  # W tiny: mask almost always 0
        src_b = DrawSource(99, ENV_STREAM)
        for _ in range(100):
            src_b.uniform()
        # both sources are now at the same stream offset
        assert src_a.uniform() == src_b.uniform()


class TestMoments:
    """Monte-Carlo moment checks against closed forms."""

    def test_mask_bernoulli_is_bernoulli_of_product(self):
        # W=0.5 exactly: pulls (10,10) at t=1
        env = simple_env(mode="mask", pulls=(10, 10))
        s = PullState.initial(2)
        gen = make_generator(5, ENV_STREAM)
        ys = env.sample_many(s, 1, 200000, gen)
        p = 0.6 * 0.5
        assert set(np.unique(ys)) <= {0.0, 1.0}
        se = math.sqrt(p * (1 - p) / len(ys))
        assert abs(ys.mean() - p) < 4 * se

    def test_additive_gaussian_moments(self):
        # mu=0.9, W=0.5: E[Y] = 0.45, Var[Y] = 1
        env = Environment(means=(0.9, 0.9), bias=BiasModel(power(1.0), (7, 7)),
                          noise="gaussian", mode="additive")
        s = PullState.initial(2)
        gen = make_generator(6, ENV_STREAM)
        ys = env.sample_many(s, 0, 200000, gen)
        assert abs(ys.mean() - 0.45) < 4 / math.sqrt(len(ys))
        assert ys.var() == pytest.approx(1.0, abs=0.02)

    def test_multiplicative_gaussian_moments(self):
        # Y = W X, X ~ N(mu, 1): E = mu W, Var = W^2
        env = Environment(means=(0.8, 0.8), bias=BiasModel(power(1.0), (3, 1)),
                          noise="gaussian", mode="multiplicative")
        s = PullState.initial(2)
        w = 3 / 4
        gen = make_generator(7, ENV_STREAM)
        ys = env.sample_many(s, 0, 200000, gen)
        assert abs(ys.mean() - 0.8 * w) < 4 * w / math.sqrt(len(ys))
        assert ys.var() == pytest.approx(w * w, rel=0.03)

    def test_debiased_sample_variance(self):
        # mask Bernoulli, mu=0.6, w=0.1: Y ~ Bern(mu w), Z = Y/w takes values
        # {0, 1/w}, so E[Z] = mu and Var[Z] = mu/w - mu^2 = 6 - 0.36 = 5.64
        env = Environment(means=(0.6, 0.6), bias=BiasModel(power(1.0), (1, 9)),
                          noise="bernoulli", mode="mask")
        s = PullState.initial(2)
        gen = make_generator(8, ENV_STREAM)
        ys = env.sample_many(s, 0, 400000, gen)
        w = 0.1
        zs = np.array([debiased_sample(float(y), w) for y in ys])
        var_exact = 0.6 / w - 0.36
        assert abs(zs.mean() - 0.6) < 4 * math.sqrt(var_exact / len(zs))
        assert zs.var() == pytest.approx(var_exact, rel=0.05)

    def test_scalar_path_matches_modes(self):
        """Every mode's scalar sampler realizes E[Y] = biased mean."""
        s = PullState.initial(2)
        for mode in ("multiplicative", "additive", "mask"):
            env = simple_env(mode=mode, pulls=(3, 1))
            src = DrawSource(17, ENV_STREAM)
            ys = [sample_feedback(env, s, 0, src) for _ in range(100000)]
            target = env.biased_mean(s, 0)
            assert abs(np.mean(ys) - target) < 0.01, mode


def test_debiased_sample_rejects_zero_weight():
    with pytest.raises(ValueError):
        debiased_sample(1.0, 0.0)
    assert debiased_sample(0.5, 0.25) == 2.0


class TestPseudoRegret:
    def test_linear_in_counts(self):
        env = simple_env(means=(0.4, 0.6))
        assert pseudo_regret(env, (100, 900)) == pytest.approx(20.0)
        assert pseudo_regret(env, (0, 1000)) == 0.0

    def test_length_check(self):
        with pytest.raises(ValueError):
            pseudo_regret(simple_env(), (1, 2, 3))


@settings(max_examples=60, deadline=None)
@given(means=st.lists(st.floats(0.0, 1.0), min_size=2, max_size=5),
       counts=st.lists(st.integers(0, 100), min_size=2, max_size=5))
def test_pseudo_regret_nonnegative(means, counts):
    counts = counts[:len(means)] + [0] * max(0, len(means) - len(counts))
    env = Environment(means=means,
                      bias=BiasModel(power(1.0), [1] * len(means)))
    assert pseudo_regret(env, counts) >= 0.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 20), arm=st.integers(0, 1),
       mode=st.sampled_from(["multiplicative", "additive", "mask"]),
       noise=st.sampled_from(["bernoulli", "gaussian"]))
def test_sample_feedback_deterministic_in_seed(seed, arm, mode, noise):
    env = simple_env(mode=mode, noise=noise)
    s = PullState.initial(2)
    a = sample_feedback(env, s, arm, DrawSource(seed, ENV_STREAM))
    b = sample_feedback(env, s, arm, DrawSource(seed, ENV_STREAM))
    assert a == b
